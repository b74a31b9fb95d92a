// Viewport <-> image coordinate mapping for the tracing canvas. The image
// is drawn scaled to fit the canvas; strokes are stored in image pixel
// space so zoom never changes what gets sent to the server.
export function fitViewport(imageW, imageH, canvasW, canvasH) {
    const scale = Math.min(canvasW / imageW, canvasH / imageH);
    return {
        scale,
        offsetX: (canvasW - imageW * scale) / 2,
        offsetY: (canvasH - imageH * scale) / 2,
    };
}
export function screenToImage(v, sx, sy) {
    return [(sx - v.offsetX) / v.scale, (sy - v.offsetY) / v.scale];
}
export function imageToScreen(v, ix, iy) {
    return [ix * v.scale + v.offsetX, iy * v.scale + v.offsetY];
}
export function clampToImage(point, imageW, imageH) {
    const eps = 1e-3; // server bounds are half-open: 0 <= x < W
    return [
        Math.min(Math.max(point[0], 0), imageW - eps),
        Math.min(Math.max(point[1], 0), imageH - eps),
    ];
}
