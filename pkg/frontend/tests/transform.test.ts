import assert from "node:assert/strict";
import { test } from "node:test";

import { clampToImage, fitViewport, imageToScreen, screenToImage } from "../src/transform.js";

test("fit viewport letterboxes and centers", () => {
  const v = fitViewport(100, 50, 200, 200);
  assert.equal(v.scale, 2); // width-bound
  assert.equal(v.offsetX, 0);
  assert.equal(v.offsetY, 50);
});

test("round trip stays within half a pixel at all zoom levels", () => {
  for (const [cw, ch] of [[720, 540], [97, 211], [3000, 150]]) {
    const v = fitViewport(1444, 1444, cw, ch);
    for (const [ix, iy] of [[0, 0], [1443, 1443], [722.25, 13.5], [0.2, 1000.7]]) {
      const [sx, sy] = imageToScreen(v, ix, iy);
      const [bx, by] = screenToImage(v, sx, sy);
      assert.ok(Math.abs(bx - ix) < 0.5, `x ${ix} -> ${bx} at ${cw}x${ch}`);
      assert.ok(Math.abs(by - iy) < 0.5, `y ${iy} -> ${by} at ${cw}x${ch}`);
    }
  }
});

test("screen-to-image honors offsets", () => {
  const v = { scale: 2, offsetX: 10, offsetY: 20 };
  assert.deepEqual(screenToImage(v, 10, 20), [0, 0]);
  assert.deepEqual(screenToImage(v, 30, 40), [10, 10]);
});

test("clamp keeps points inside the half-open image bounds", () => {
  assert.deepEqual(clampToImage([-5, 3], 64, 64), [0, 3]);
  const [x, y] = clampToImage([64, 70], 64, 64);
  assert.ok(x < 64 && x > 63.9);
  assert.ok(y < 64 && y > 63.9);
});
