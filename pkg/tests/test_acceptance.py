"""Acceptance suite: one test per criterion, each printing a PASS line.

The end-to-end learning check trains two real models and dominates the
runtime (about 15 minutes on a desktop CPU); everything else is fast.
Run with `pytest tests/test_acceptance.py -v -s` to watch the lines land.
"""

import itertools
import json
import math
import threading
import time
import urllib.error
import urllib.request

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

import oracles
from discseg import data, gradcheck, losses, metrics, training
from discseg.cli import main as cli_main
from discseg.model import build_model
from discseg.portal import auth
from discseg.portal.server import create_server
from discseg.weights import load_weights, save_weights


def ok(name):
    print(f"\nACCEPTANCE PASS: {name}")


# -- gradient suite -----------------------------------------------------------

def test_criterion_gradient_suite():
    start = time.perf_counter()
    results, passed = gradcheck.run_suite(seed=0, instances=100, tolerance=1e-3)
    elapsed = time.perf_counter() - start
    for name in ("bce", "jaccard", "combined", "conv", "pool", "upsample", "sigmoid"):
        assert name in results
        assert results[name] <= 1e-3, (name, results[name])
    assert passed
    assert elapsed < 120, f"gradient suite took {elapsed:.1f}s"

    runner = CliRunner()
    outcome = runner.invoke(cli_main, ["gradcheck", "--instances", "100"])
    assert outcome.exit_code == 0, outcome.output
    ok(f"gradient suite (worst {max(results.values()):.2e}, {elapsed:.1f}s, gradcheck exit 0)")


# -- jaccard equivalence -------------------------------------------------------

def test_criterion_jaccard_oracle_equivalence():
    checked = 0
    for h, w in itertools.product((1, 2, 3), repeat=2):
        n = h * w
        for label_bits in range(1, 2 ** n):  # at least one disc pixel
            labels = np.array([(label_bits >> i) & 1 for i in range(n)],
                              dtype=np.float64).reshape(h, w)
            for pred_bits in range(2 ** n):
                preds = np.array([(pred_bits >> i) & 1 for i in range(n)],
                                 dtype=np.float64).reshape(h, w)
                ours = losses.jaccard_loss(losses.PixelPartition(labels, preds))
                reference = oracles.set_jaccard_distance(labels, preds)
                assert abs(ours - reference) <= 1e-6
                checked += 1

    rng = np.random.default_rng(0)
    for _ in range(10_000):
        labels = (rng.random((8, 8)) < rng.uniform(0.05, 0.6)).astype(np.float64)
        if not labels.any():
            labels[0, 0] = 1.0
        preds = (rng.random((8, 8)) < rng.uniform(0.05, 0.6)).astype(np.float64)
        ours = losses.jaccard_loss(losses.PixelPartition(labels, preds))
        assert abs(ours - oracles.set_jaccard_distance(labels, preds)) <= 1e-6
    ok(f"jaccard-oracle equivalence ({checked} exhaustive + 10000 random cases)")


# -- metric identities ----------------------------------------------------------

def test_criterion_metric_identities():
    rng = np.random.default_rng(1)
    pooled = metrics.ConfusionCounts()
    for _ in range(10_000):
        pred = (rng.random(10) < 0.5).astype(np.float32)
        true = (rng.random(10) < 0.5).astype(np.float32)
        counts = metrics.confusion(pred, true)
        assert (counts.tp, counts.fp, counts.tn, counts.fn) == \
            oracles.count_confusion(pred, true)
        pooled = pooled + counts
    _, dc, _, iou = metrics.compute_metrics(pooled)
    assert abs(dc - 2 * iou / (1 + iou)) <= 1e-9

    worked = metrics.ConfusionCounts(tp=3, fp=1, fn=3, tn=9)
    _, dc, _, _ = metrics.compute_metrics(worked)
    assert dc == pytest.approx(0.6)
    ok("metric identities (10000-pair oracle, DC=2IoU/(1+IoU) at 1e-9, worked DC=0.6)")


# -- architecture contract -------------------------------------------------------

def test_criterion_architecture_contract():
    for hw in (32, 64, 96, 224):
        model = build_model((hw, hw), 0.125, seed=2)
        x = np.random.default_rng(hw).random((1, hw, hw, 3)).astype(np.float32)
        preds, caches = model.forward(x)
        assert preds.shape == (1, hw, hw, 1)
        assert 0.0 < preds.min() and preds.max() < 1.0
        kinds = [c[0] for c in caches]
        assert kinds.count("pool") == 5 and kinds.count("upsample") == 5

    reference = build_model((224, 224), 1.0, seed=0)
    report = reference.parameter_report()
    assert "16,882,452" in report or "16882452" in report

    blocks = [(64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512)]
    expected, c_in = 0, 3
    for block in blocks:
        for c_out in block:
            expected += (3 * 3 * c_in + 1) * c_out
            c_in = c_out
    assert reference.encoder_parameter_count() == expected
    print("\n" + report.splitlines()[-1])
    ok(f"architecture contract (encoder subtotal {expected} == formula oracle)")


# -- end-to-end learning ----------------------------------------------------------

@pytest.fixture(scope="module")
def synthetic_split():
    samples = data.generate_synthetic(80, 64, seed=7)
    return samples[:64], samples[64:]


def train_once(train_samples, test_samples, loss):
    tr, val = data.carve_validation(train_samples, 0.10, seed=7)
    model = build_model((64, 64), 0.25, seed=7)
    config = training.TrainingConfig(max_epochs=200, seed=7, loss=loss,
                                     learning_rate=1e-3)
    model, history = training.train(model, tr, val, config)
    train_dc = metrics.timed_evaluate(model, train_samples).pooled[1]
    test_dc = metrics.timed_evaluate(model, test_samples).pooled[1]
    return train_dc, test_dc, history


def test_criterion_end_to_end_learning(synthetic_split):
    train_samples, test_samples = synthetic_split
    start = time.perf_counter()
    combined_train_dc, combined_test_dc, history = train_once(
        train_samples, test_samples, "combined")
    bce_train_dc, bce_test_dc, _ = train_once(train_samples, test_samples, "bce")
    elapsed = time.perf_counter() - start

    assert len(history.rows) <= 200
    assert combined_train_dc >= 0.95, combined_train_dc
    assert combined_test_dc >= 0.85, combined_test_dc
    assert combined_test_dc >= bce_test_dc - 0.02, (combined_test_dc, bce_test_dc)
    assert elapsed < 30 * 60, f"took {elapsed/60:.1f} minutes"
    ok(f"end-to-end learning (train DC {combined_train_dc:.4f}, test DC "
       f"{combined_test_dc:.4f}, bce test DC {bce_test_dc:.4f}, {elapsed/60:.1f} min)")


# -- callback semantics ------------------------------------------------------------

def test_criterion_callback_semantics(tmp_path):
    samples = data.generate_synthetic(6, 32, seed=3)
    script = {1: 5.0, 2: 4.0, 3: 1.0}  # best at epoch 3, stagnation after

    model = build_model((32, 32), 0.125, seed=3)
    config = training.TrainingConfig(max_epochs=400, seed=3)
    ckpt = tmp_path / "best.odsw"
    best_model, history = training.train(
        model, samples[:5], samples[5:], config, checkpoint_path=ckpt,
        val_loss_hook=lambda e: script.get(e, 9.0))

    lrs = [r.lr for r in history.rows]
    assert lrs[3 + 24 - 1] == pytest.approx(1e-4)   # epoch best+24: unchanged
    assert lrs[3 + 25 - 1] == pytest.approx(5e-5)   # epoch best+25: halved
    assert len(history.rows) == 3 + 100             # stop at exactly best+100
    assert history.best_epoch == 3

    reloaded = build_model((32, 32), 0.125, seed=99)
    reloaded.load_weights(ckpt)
    for name, arr in best_model.parameters().items():
        assert np.array_equal(arr, reloaded.parameters()[name])
    ok("callback semantics (halving at best+25, stop at best+100, val-best returned)")


# -- determinism ---------------------------------------------------------------------

def test_criterion_training_determinism(tmp_path):
    outputs = []
    for run in range(2):
        samples = data.generate_synthetic(12, 64, seed=11)
        model = build_model((64, 64), 0.25, seed=11)
        config = training.TrainingConfig(
            max_epochs=6, seed=11, use_augmentation=True,
            augmentation=data.AugmentationConfig(seed=11))
        ckpt = tmp_path / f"run{run}.odsw"
        _, history = training.train(model, samples[:10], samples[10:],
                                    config, checkpoint_path=ckpt)
        csv_no_wallclock = "\n".join(
            ",".join(line.split(",")[:4]) for line in history.to_csv().splitlines())
        outputs.append((csv_no_wallclock, ckpt.read_bytes()))
    assert outputs[0][0] == outputs[1][0], "history CSVs differ"
    assert outputs[0][1] == outputs[1][1], "checkpoint bytes differ"
    ok("determinism (identical histories and checkpoint bytes across runs)")


# -- weight file ------------------------------------------------------------------------

def test_criterion_weightfile_round_trip(tmp_path):
    model = build_model((64, 64), 0.25, seed=4)
    path = tmp_path / "w.odsw"
    model.save_weights(path)
    loaded = load_weights(path)
    for name, arr in model.parameters().items():
        assert loaded[name].tobytes() == arr.tobytes()

    donor = build_model((64, 64), 0.25, seed=5)
    donor_params = donor.parameters()
    encoder_file = tmp_path / "enc.odsw"
    save_weights({n: a for n, a in donor_params.items() if n.startswith("enc")},
                 encoder_file)
    target = build_model((64, 64), 0.25, seed=6)
    decoder_before = {n: a.copy() for n, a in target.parameters().items()
                      if not n.startswith("enc")}
    target.load_weights(encoder_file, strict=True)
    after = target.parameters()
    for name in donor_params:
        if name.startswith("enc"):
            assert after[name].tobytes() == donor_params[name].tobytes()
    for name, arr in decoder_before.items():
        assert after[name].tobytes() == arr.tobytes()
    ok("weight file round trip bitwise; encoder-only load leaves decoder untouched")


# -- portal workflow (secondary surface, exercised API-level) ------------------------------

class _Client:
    def __init__(self, base):
        self.base = base
        self.token = None

    def call(self, method, path, payload=None, raw=False):
        req = urllib.request.Request(self.base + path, method=method)
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        body = json.dumps(payload).encode() if payload is not None else None
        try:
            with urllib.request.urlopen(req, body) as resp:
                status, payload = resp.status, resp.read()
        except urllib.error.HTTPError as err:
            status, payload = err.code, err.read()
        if raw:
            return status, payload
        return status, json.loads(payload) if payload else None


def test_criterion_portal_workflow(tmp_path):
    images = tmp_path / "images"
    images.mkdir()
    rng = np.random.default_rng(0)
    Image.fromarray((rng.random((96, 96, 3)) * 255).astype(np.uint8), "RGB").save(
        images / "fundus-1.png")
    users = tmp_path / "users.txt"
    auth.add_user(users, "alice", "pw-alice")
    auth.add_user(users, "bob", "pw-bob")
    server = create_server(0, tmp_path, users)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    try:
        base = f"http://127.0.0.1:{server.server_address[1]}"
        alice = _Client(base)
        status, payload = alice.call("POST", "/api/login",
                                     {"username": "alice", "password": "pw-alice"})
        assert status == 200
        alice.token = payload["token"]

        # closed circle traced in two stroke batches
        first = oracles.circle_points(48, 48, 30, stop=math.pi)
        second = oracles.circle_points(48, 48, 30, start=math.pi)
        width = 3.0
        for batch in (first, second):
            status, _ = alice.call("POST", "/api/images/fundus-1/strokes",
                                   {"strokes": [{"mode": "draw", "width": width,
                                                 "points": batch}]})
            assert status == 204
        status, _ = alice.call("POST", "/api/images/fundus-1/submit")
        assert status == 204

        status, listing = alice.call("GET", "/api/images")
        assert status == 200 and listing == []  # image left the list

        status, _ = alice.call("POST", "/api/images/fundus-1/submit")
        assert status == 409  # double submit

        status, png = alice.call("GET", "/api/export/fundus-1?annotator=alice", raw=True)
        assert status == 200
        import io
        with Image.open(io.BytesIO(png)) as im:
            alice_mask = (np.asarray(im) > 127)
        area = int(alice_mask.sum())
        expected = oracles.polygon_fill_area(
            [("draw", width, first), ("draw", width, second)], (96, 96))
        assert abs(area - expected) / expected <= 0.02, (area, expected)

        # second annotator, then the merged export must equal merge_annotations
        bob = _Client(base)
        status, payload = bob.call("POST", "/api/login",
                                   {"username": "bob", "password": "pw-bob"})
        bob.token = payload["token"]
        bob.call("POST", "/api/images/fundus-1/strokes",
                 {"strokes": [{"mode": "draw", "width": width,
                               "points": oracles.circle_points(40, 48, 26)}]})
        status, _ = bob.call("POST", "/api/images/fundus-1/submit")
        assert status == 204

        status, bob_png = bob.call("GET", "/api/export/fundus-1?annotator=bob", raw=True)
        with Image.open(io.BytesIO(bob_png)) as im:
            bob_mask = (np.asarray(im) > 127)
        status, merged_png = bob.call("GET", "/api/export/fundus-1/merged", raw=True)
        assert status == 200
        with Image.open(io.BytesIO(merged_png)) as im:
            merged = (np.asarray(im) > 127).astype(np.float32)[:, :, None]
        expected_merge = data.merge_annotations(
            [alice_mask.astype(np.float32)[:, :, None],
             bob_mask.astype(np.float32)[:, :, None]])
        assert np.array_equal(merged, expected_merge)
    finally:
        server.shutdown()
        server.server_close()
    ok("portal workflow (trace in two batches, list shrink, area oracle, merge, 409)")
