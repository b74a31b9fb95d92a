// Stroke bookkeeping shared by the dialog: the pending upload queue and
// the closed-contour detection that drives the fill preview. Mirrors the
// server's replay rule; the server rendering stays authoritative.
export function distance(a, b) {
    return Math.hypot(a[0] - b[0], a[1] - b[1]);
}
/** Chain of consecutive draw strokes, reset by erase; closed when the end
 * returns within one brush width of the start. */
export function chainState(strokes) {
    let chain = [];
    let closed = false;
    for (const stroke of strokes) {
        if (stroke.points.length === 0)
            continue;
        if (stroke.mode === "erase") {
            chain = [];
            closed = false;
            continue;
        }
        chain = chain.concat(stroke.points);
        if (chain.length >= 3 && distance(chain[0], chain[chain.length - 1]) <= stroke.width) {
            closed = true;
            chain = [];
        }
    }
    return { chain, closed };
}
export function hasDrawStroke(strokes) {
    return strokes.some((s) => s.mode === "draw" && s.points.length > 0);
}
/** Pending strokes queue: captured in input order, drained on save. */
export class StrokeQueue {
    constructor() {
        this.pending = [];
    }
    push(stroke) {
        if (stroke.points.length > 0)
            this.pending.push(stroke);
    }
    get length() {
        return this.pending.length;
    }
    peekAll() {
        return [...this.pending];
    }
    /** Remove and return everything queued, preserving order. */
    drain() {
        const batch = this.pending;
        this.pending = [];
        return batch;
    }
    restore(batch) {
        this.pending = batch.concat(this.pending);
    }
}
