"""Command-line entry point: train, eval, predict, gradcheck, synth,
weights-convert, and serve."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, data
from . import gradcheck as gradcheck_mod
from . import weights as weights_mod
from .metrics import binarize
from .model import build_model
from .portal.server import create_server
from .training import TrainingConfig, evaluate_checkpoint, read_checkpoint_meta, train


def _banner(seed, settings: dict) -> None:
    digest = hashlib.sha256(
        json.dumps(settings, sort_keys=True, default=str).encode()).hexdigest()[:12]
    click.echo(f"discseg {__version__} seed={seed} config={digest}")


def _fail(message: str):
    raise click.ClickException(message)


@click.group()
def main():
    """From-scratch optic disc segmentation toolkit."""


@main.command(name="train")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--loss", default="combined", type=click.Choice(["bce", "jaccard", "combined"]))
@click.option("--tl-weights", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Pretrained encoder weight file; enables transfer learning.")
@click.option("--augment/--no-augment", default=False)
@click.option("--seed", default=0, type=int)
@click.option("--width", default=1.0, type=float)
@click.option("--size", default=224, type=int, help="Square input resolution.")
@click.option("--batch-size", default=4, type=int)
@click.option("--learning-rate", default=1e-4, type=float)
@click.option("--max-epochs", default=1000, type=int)
@click.option("--plateau-patience", default=25, type=int)
@click.option("--early-stop-patience", default=100, type=int)
@click.option("--val-fraction", default=0.10, type=float)
@click.option("--config", "config_file", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSON file with defaults for any option; explicit flags win.")
@click.pass_context
def train_cmd(ctx, manifest, out_dir, loss, tl_weights, augment, seed, width, size,
              batch_size, learning_rate, max_epochs, plateau_patience,
              early_stop_patience, val_fraction, config_file):
    """Train on a manifest and evaluate the best checkpoint on its test split."""
    values = dict(manifest=manifest, out_dir=out_dir, loss=loss, tl_weights=tl_weights,
                  augment=augment, seed=seed, width=width, size=size,
                  batch_size=batch_size, learning_rate=learning_rate,
                  max_epochs=max_epochs, plateau_patience=plateau_patience,
                  early_stop_patience=early_stop_patience, val_fraction=val_fraction)
    if config_file:
        overrides = json.loads(Path(config_file).read_text())
        for key, value in overrides.items():
            if key not in values:
                _fail(f"unknown config key '{key}'")
            if ctx.get_parameter_source(key) == click.core.ParameterSource.DEFAULT:
                values[key] = value
    _banner(values["seed"], values)
    if values["size"] % 32:
        _fail(f"--size must be divisible by 32, got {values['size']}")

    try:
        records = data.read_manifest(values["manifest"])
    except (ValueError, FileNotFoundError) as err:
        _fail(str(err))
    train_records = [r for r in records if r.split == "train"]
    test_records = [r for r in records if r.split == "test"]
    if not train_records or not test_records:
        _fail("manifest must contain both train and test records")
    train_records, val_records = data.carve_validation(
        train_records, values["val_fraction"], values["seed"])

    target = (values["size"], values["size"])
    train_samples = data.load_and_preprocess(train_records, target)
    val_samples = data.load_and_preprocess(val_records, target)
    test_samples = data.load_and_preprocess(test_records, target)

    model = build_model(input_size=target, width_multiplier=values["width"],
                        seed=values["seed"])
    if values["tl_weights"]:
        model.load_weights(values["tl_weights"], strict=True)
    config = TrainingConfig(
        batch_size=values["batch_size"],
        learning_rate=values["learning_rate"],
        plateau_patience=values["plateau_patience"],
        early_stop_patience=values["early_stop_patience"],
        max_epochs=values["max_epochs"],
        seed=values["seed"],
        loss=values["loss"],
        use_transfer_learning=bool(values["tl_weights"]),
        use_augmentation=values["augment"],
        augmentation=data.AugmentationConfig(seed=values["seed"]),
    )

    out = Path(values["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    click.echo(model.parameter_report().splitlines()[-1])
    model, history = train(model, train_samples, val_samples, config,
                           checkpoint_path=out / "best.odsw")
    (out / "history.csv").write_text(history.to_csv())
    report = evaluate_checkpoint(out / "best.odsw", test_samples)
    (out / "report.txt").write_text(report.to_text())
    (out / "report.csv").write_text(report.to_csv())
    click.echo(f"best epoch {history.best_epoch} (val loss {history.best_val_loss:.6f})")
    click.echo(report.to_text(), nl=False)


@main.command(name="eval")
@click.option("--weights", "weights_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--split", default="test", type=click.Choice(["train", "test", "all"]))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
@click.option("--seed", default=0, type=int)
def eval_cmd(weights_path, manifest, split, out_dir, seed):
    """Evaluate a checkpoint on a manifest split."""
    _banner(seed, dict(weights=weights_path, manifest=manifest, split=split))
    records = data.read_manifest(manifest)
    if split != "all":
        records = [r for r in records if r.split == split]
    if not records:
        _fail(f"no '{split}' records in {manifest}")
    try:
        meta = read_checkpoint_meta(weights_path)
    except FileNotFoundError:
        _fail(f"missing checkpoint metadata sidecar {weights_path}.meta")
    target = (int(meta["input_height"]), int(meta["input_width"]))
    samples = data.load_and_preprocess(records, target)
    report = evaluate_checkpoint(weights_path, samples)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text())
        (out / "report.csv").write_text(report.to_csv())
    click.echo(report.to_text(), nl=False)


def _mask_boundary(mask: np.ndarray) -> np.ndarray:
    """Pixels of the mask with at least one 4-neighbor outside it."""
    m = mask.astype(bool)
    interior = m.copy()
    interior[1:, :] &= m[:-1, :]
    interior[:-1, :] &= m[1:, :]
    interior[:, 1:] &= m[:, :-1]
    interior[:, :-1] &= m[:, 1:]
    return m & ~interior


@main.command(name="predict")
@click.option("--weights", "weights_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--image", "image_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out-mask", required=True, type=click.Path(dir_okay=False))
@click.option("--out-overlay", default=None, type=click.Path(dir_okay=False))
@click.option("--threshold", default=0.5, type=float)
def predict_cmd(weights_path, image_path, out_mask, out_overlay, threshold):
    """Segment one image; writes a binary mask and an optional overlay."""
    _banner("-", dict(weights=weights_path, image=image_path, threshold=threshold))
    try:
        meta = read_checkpoint_meta(weights_path)
    except FileNotFoundError:
        _fail(f"missing checkpoint metadata sidecar {weights_path}.meta")
    target = (int(meta["input_height"]), int(meta["input_width"]))
    model = build_model(input_size=target, width_multiplier=float(meta["width"]))
    model.load_weights(weights_path, strict=True)

    original = data.load_image(image_path)
    resized = data.resample.resize(original, target, order="bilinear")
    np.clip(resized, 0.0, 1.0, out=resized)
    start = time.perf_counter()
    preds, _ = model.forward(resized[None, ...], train=False)
    small_mask = binarize(preds[0, :, :, 0], threshold)
    seconds = time.perf_counter() - start

    full_mask = data.resample.resize(small_mask, original.shape[:2], order="nearest")
    from PIL import Image
    Image.fromarray((full_mask > 0.5).astype(np.uint8) * 255, mode="L").save(out_mask)
    if out_overlay:
        overlay = (original * 255).astype(np.uint8).copy()
        boundary = _mask_boundary(full_mask > 0.5)
        overlay[boundary] = (0, 255, 0)
        Image.fromarray(overlay, mode="RGB").save(out_overlay)
    click.echo(f"segmentation took {seconds:.4f} seconds")


@main.command(name="gradcheck")
@click.option("--seed", default=0, type=int)
@click.option("--size", default=4, type=int, help="Spatial size of random layer instances.")
@click.option("--instances", default=100, type=int)
@click.option("--tolerance", default=gradcheck_mod.DEFAULT_TOLERANCE, type=float)
@click.option("--corrupt", default=None, hidden=True,
              help="Deliberately corrupt one component's gradient (detector self-test).")
def gradcheck_cmd(seed, size, instances, tolerance, corrupt):
    """Finite-difference check of every loss and layer gradient."""
    _banner(seed, dict(size=size, instances=instances, tolerance=tolerance))
    results, ok = gradcheck_mod.run_suite(seed=seed, instances=instances,
                                          tolerance=tolerance, size=size, corrupt=corrupt)
    for name, err in results.items():
        status = "pass" if err <= tolerance else "FAIL"
        click.echo(f"{name:10s} worst relative error {err:.3e}  {status}")
    if not ok:
        _fail("gradient check failed")
    click.echo("all gradients verified")


@main.command(name="synth")
@click.option("--n", default=16, type=int)
@click.option("--size", default=64, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, type=int)
@click.option("--test-fraction", default=0.25, type=float)
def synth_cmd(n, size, out_dir, seed, test_fraction):
    """Generate a synthetic fundus-like dataset with ground-truth masks."""
    _banner(seed, dict(n=n, size=size, test_fraction=test_fraction))
    samples = data.generate_synthetic(n, size, seed)
    manifest = data.save_dataset(samples, out_dir, test_fraction=test_fraction)
    click.echo(f"wrote {n} image/mask pairs and {manifest}")


@main.command(name="weights-convert")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="External tensor dump (.npz archive).")
@click.option("--mapping", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Tab-separated lines: source-name<TAB>target-name.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def weights_convert_cmd(in_path, mapping, out_path):
    """Rename tensors from an external dump into the weight-file format."""
    _banner("-", dict(in_path=in_path, mapping=mapping))
    archive = np.load(in_path)
    renames = {}
    for lineno, raw in enumerate(Path(mapping).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            _fail(f"{mapping}:{lineno}: expected 'source<TAB>target'")
        renames[parts[0]] = parts[1]
    tensors = {}
    for src, dst in renames.items():
        if src not in archive:
            _fail(f"tensor '{src}' not present in {in_path}")
        tensors[dst] = np.asarray(archive[src], dtype=np.float32)
    weights_mod.save_weights(tensors, out_path)
    click.echo(f"wrote {len(tensors)} tensors to {out_path}")


@main.command(name="serve")
@click.option("--port", default=8477, type=int)
@click.option("--data-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--users-file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ui-dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--token-ttl", default=86_400.0, type=float)
@click.option("--host", default="127.0.0.1")
def serve_cmd(port, data_dir, users_file, ui_dir, token_ttl, host):
    """Run the annotation portal."""
    _banner("-", dict(port=port, data_dir=data_dir, users_file=users_file))
    try:
        server = create_server(port, data_dir, users_file, ui_dir=ui_dir,
                               token_ttl=token_ttl, host=host)
    except OSError as err:
        _fail(f"cannot bind {host}:{port}: {err}")
    click.echo(f"portal listening on http://{host}:{port}/")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


if __name__ == "__main__":
    main()
