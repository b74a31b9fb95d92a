// Viewport <-> image coordinate mapping for the tracing canvas. The image
// is drawn scaled to fit the canvas; strokes are stored in image pixel
// space so zoom never changes what gets sent to the server.

export interface Viewport {
  scale: number; // screen pixels per image pixel
  offsetX: number; // screen x of image pixel (0, 0)
  offsetY: number;
}

export function fitViewport(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): Viewport {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function screenToImage(v: Viewport, sx: number, sy: number): [number, number] {
  return [(sx - v.offsetX) / v.scale, (sy - v.offsetY) / v.scale];
}

export function imageToScreen(v: Viewport, ix: number, iy: number): [number, number] {
  return [ix * v.scale + v.offsetX, iy * v.scale + v.offsetY];
}

export function clampToImage(
  point: [number, number],
  imageW: number,
  imageH: number,
): [number, number] {
  const eps = 1e-3; // server bounds are half-open: 0 <= x < W
  return [
    Math.min(Math.max(point[0], 0), imageW - eps),
    Math.min(Math.max(point[1], 0), imageH - eps),
  ];
}
