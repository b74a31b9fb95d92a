// View wiring: login form, assigned-image grid, and the pop-up tracing
// dialog with draw/erase, incremental save, preview fill, and submit.

import { ApiError, PortalApi } from "./api.js";
import { chainState, hasDrawStroke, StrokeQueue } from "./strokes.js";
import { clampToImage, fitViewport, screenToImage, Viewport } from "./transform.js";
import type { ImageEntry, Stroke, StrokeMode } from "./types.js";

const TOKEN_KEY = "discseg-portal-token";

export class App {
  private api: PortalApi;
  private root: HTMLElement;
  private images: ImageEntry[] = [];

  constructor(root: HTMLElement, api?: PortalApi) {
    this.root = root;
    this.api = api ?? new PortalApi();
  }

  async start(): Promise<void> {
    const saved = sessionStorage.getItem(TOKEN_KEY);
    if (saved) {
      this.api.token = saved;
      try {
        await this.showGrid();
        return;
      } catch (err) {
        if (!(err instanceof ApiError && err.status === 401)) throw err;
        sessionStorage.removeItem(TOKEN_KEY); // expired session
      }
    }
    this.showLogin();
  }

  // -- login ------------------------------------------------------------

  private showLogin(message = ""): void {
    this.root.innerHTML = `
      <div class="login-box">
        <h1>Disc Tracing Portal</h1>
        <form id="login-form">
          <label>Username <input name="username" autocomplete="username" required></label>
          <label>Password <input name="password" type="password" required></label>
          <button type="submit">Log in</button>
          <div id="login-error" class="error">${message}</div>
        </form>
      </div>`;
    const form = this.root.querySelector<HTMLFormElement>("#login-form")!;
    form.onsubmit = async (ev) => {
      ev.preventDefault();
      const fields = new FormData(form);
      const errorBox = this.root.querySelector<HTMLElement>("#login-error")!;
      try {
        await this.api.login(String(fields.get("username")), String(fields.get("password")));
        sessionStorage.setItem(TOKEN_KEY, this.api.token!);
        await this.showGrid();
      } catch (err) {
        errorBox.textContent =
          err instanceof ApiError ? `Login failed: ${err.message}` : String(err);
      }
    };
  }

  // -- image grid ---------------------------------------------------------

  private async showGrid(): Promise<void> {
    this.images = await this.api.listImages();
    this.root.innerHTML = `
      <header><h1>Assigned images</h1></header>
      <div id="grid" class="grid"></div>
      <p class="note">Click an image to trace the optic disc. Submitted images leave this list.</p>`;
    const grid = this.root.querySelector<HTMLElement>("#grid")!;
    if (this.images.length === 0) {
      grid.innerHTML = `<p class="note">Nothing left to trace.</p>`;
      return;
    }
    for (const entry of this.images) {
      const card = document.createElement("figure");
      card.className = "card";
      card.innerHTML = `<canvas width="160" height="160"></canvas>
        <figcaption>${entry.id} <span class="status">${entry.status}</span></figcaption>`;
      void this.paintThumbnail(entry, card.querySelector("canvas")!);
      card.onclick = () => void this.openDialog(entry);
      grid.appendChild(card);
    }
  }

  private async fetchImage(entry: ImageEntry): Promise<ImageBitmap> {
    const resp = await fetch(entry.thumbnail_url, {
      headers: { Authorization: `Bearer ${this.api.token}` },
    });
    if (!resp.ok) throw new ApiError(resp.status, `image fetch failed`);
    return createImageBitmap(await resp.blob());
  }

  private async paintThumbnail(entry: ImageEntry, canvas: HTMLCanvasElement): Promise<void> {
    const bitmap = await this.fetchImage(entry);
    const v = fitViewport(bitmap.width, bitmap.height, canvas.width, canvas.height);
    canvas
      .getContext("2d")!
      .drawImage(bitmap, v.offsetX, v.offsetY, bitmap.width * v.scale, bitmap.height * v.scale);
  }

  private removeFromGrid(id: string): void {
    this.images = this.images.filter((e) => e.id !== id);
    void this.showGrid();
  }

  // -- tracing dialog ---------------------------------------------------------

  private async openDialog(entry: ImageEntry): Promise<void> {
    const bitmap = await this.fetchImage(entry);
    const record = await this.api.getRecord(entry.id); // resume prior strokes
    const dialog = document.createElement("dialog");
    dialog.className = "tracing-dialog";
    dialog.innerHTML = `
      <div class="toolbar">
        <strong>${entry.id}</strong>
        <label><input type="radio" name="mode" value="draw" checked> draw</label>
        <label><input type="radio" name="mode" value="erase"> erase</label>
        <label>brush <input id="brush" type="number" min="1" max="40" value="3" step="1"> px</label>
        <button id="save">Save step</button>
        <button id="submit">Submit</button>
        <button id="close">Close</button>
      </div>
      <canvas id="trace" width="720" height="540"></canvas>
      <div class="statusline">
        <span id="hint"></span>
        <span class="note">preview &mdash; server rendering is authoritative</span>
        <span id="dialog-error" class="error"></span>
      </div>`;
    document.body.appendChild(dialog);
    dialog.showModal();

    const canvas = dialog.querySelector<HTMLCanvasElement>("#trace")!;
    const errorBox = dialog.querySelector<HTMLElement>("#dialog-error")!;
    const hint = dialog.querySelector<HTMLElement>("#hint")!;
    const viewport = fitViewport(bitmap.width, bitmap.height, canvas.width, canvas.height);

    const saved: Stroke[] = [...record.strokes];
    const queue = new StrokeQueue();
    let active: Stroke | null = null;

    const overlay = document.createElement("canvas");
    overlay.width = bitmap.width;
    overlay.height = bitmap.height;

    const redraw = () => {
      const strokes = [...saved, ...queue.peekAll(), ...(active ? [active] : [])];
      this.paintOverlay(overlay, strokes);
      const ctx = canvas.getContext("2d")!;
      ctx.clearRect(0, 0, canvas.width, canvas.height);
      ctx.drawImage(
        bitmap, viewport.offsetX, viewport.offsetY,
        bitmap.width * viewport.scale, bitmap.height * viewport.scale);
      ctx.globalAlpha = 0.45;
      ctx.drawImage(
        overlay, viewport.offsetX, viewport.offsetY,
        overlay.width * viewport.scale, overlay.height * viewport.scale);
      ctx.globalAlpha = 1.0;
      const { chain, closed } = chainState(strokes);
      hint.textContent =
        !closed && chain.length >= 2 ? "close the contour to fill the disc" : "";
    };

    const pointerPos = (ev: PointerEvent): [number, number] => {
      const rect = canvas.getBoundingClientRect();
      const point = screenToImage(viewport, ev.clientX - rect.left, ev.clientY - rect.top);
      return clampToImage(point, bitmap.width, bitmap.height);
    };

    canvas.onpointerdown = (ev) => {
      canvas.setPointerCapture(ev.pointerId);
      const mode = dialog.querySelector<HTMLInputElement>("input[name=mode]:checked")!
        .value as StrokeMode;
      const width = Number(dialog.querySelector<HTMLInputElement>("#brush")!.value) || 3;
      active = { mode, width, points: [pointerPos(ev)] };
      redraw();
    };
    canvas.onpointermove = (ev) => {
      if (!active) return;
      active.points.push(pointerPos(ev));
      redraw();
    };
    canvas.onpointerup = () => {
      if (active) queue.push(active);
      active = null;
      redraw();
    };

    const saveStep = async (): Promise<boolean> => {
      if (queue.length === 0) return true;
      const batch = queue.drain();
      try {
        await this.api.postStrokes(entry.id, batch);
        saved.push(...batch);
        errorBox.textContent = "";
        return true;
      } catch (err) {
        queue.restore(batch); // keep strokes; user can retry
        errorBox.textContent = err instanceof ApiError ? `save failed: ${err.message}` : String(err);
        return false;
      }
    };

    dialog.querySelector<HTMLButtonElement>("#save")!.onclick = () => void saveStep();
    dialog.querySelector<HTMLButtonElement>("#submit")!.onclick = async () => {
      if (!(await saveStep())) return;
      if (!hasDrawStroke(saved)) {
        errorBox.textContent = "draw the disc boundary before submitting";
        return;
      }
      try {
        await this.api.submit(entry.id);
        dialog.close();
        dialog.remove();
        this.removeFromGrid(entry.id);
      } catch (err) {
        errorBox.textContent =
          err instanceof ApiError ? `submit failed: ${err.message}` : String(err);
      }
    };
    dialog.querySelector<HTMLButtonElement>("#close")!.onclick = () => {
      if (queue.length > 0 &&
          !confirm("Unsaved strokes will be lost. Close anyway?")) {
        return;
      }
      dialog.close();
      dialog.remove();
    };

    redraw();
  }

  /** Replay strokes onto the image-resolution overlay, filling closed
   * chains with the same even-odd rule the server uses. */
  private paintOverlay(overlay: HTMLCanvasElement, strokes: Stroke[]): void {
    const ctx = overlay.getContext("2d")!;
    ctx.clearRect(0, 0, overlay.width, overlay.height);
    ctx.lineCap = "round";
    ctx.lineJoin = "round";
    let chain: [number, number][] = [];
    for (const stroke of strokes) {
      if (stroke.points.length === 0) continue;
      ctx.globalCompositeOperation = stroke.mode === "erase" ? "destination-out" : "source-over";
      ctx.strokeStyle = "#19c37d";
      ctx.fillStyle = "#19c37d";
      ctx.lineWidth = stroke.width;
      const path = new Path2D();
      path.moveTo(stroke.points[0][0], stroke.points[0][1]);
      for (const [x, y] of stroke.points.slice(1)) path.lineTo(x, y);
      ctx.stroke(path);
      if (stroke.mode === "erase") {
        chain = [];
        continue;
      }
      chain = chain.concat(stroke.points);
      const first = chain[0];
      const last = chain[chain.length - 1];
      if (chain.length >= 3 && Math.hypot(first[0] - last[0], first[1] - last[1]) <= stroke.width) {
        const poly = new Path2D();
        poly.moveTo(chain[0][0], chain[0][1]);
        for (const [x, y] of chain.slice(1)) poly.lineTo(x, y);
        poly.closePath();
        ctx.fill(poly, "evenodd");
        chain = [];
      }
    }
    ctx.globalCompositeOperation = "source-over";
  }
}
