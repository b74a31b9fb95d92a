import assert from "node:assert/strict";
import { test } from "node:test";
import { ApiError, PortalApi } from "../src/api.js";
function mockFetch(responses, calls) {
    return async (path, init) => {
        calls.push({
            path,
            method: init?.method,
            headers: (init?.headers ?? {}),
            body: init?.body,
        });
        const spec = responses[path] ?? { status: 404, body: { error: "no route" } };
        const payload = spec.body === undefined ? null : JSON.stringify(spec.body);
        return new Response(payload, { status: spec.status });
    };
}
test("login stores the token and later calls carry it", async () => {
    const calls = [];
    const api = new PortalApi(mockFetch({
        "/api/login": { status: 200, body: { token: "tok-1" } },
        "/api/images": { status: 200, body: [] },
    }, calls));
    await api.login("alice", "pw");
    assert.equal(api.token, "tok-1");
    await api.listImages();
    assert.equal(calls[1].headers["Authorization"], "Bearer tok-1");
});
test("error responses surface status and server message", async () => {
    const api = new PortalApi(mockFetch({ "/api/login": { status: 401, body: { error: "invalid credentials" } } }, []));
    await assert.rejects(() => api.login("alice", "bad"), (err) => err instanceof ApiError && err.status === 401 && err.message === "invalid credentials");
});
test("stroke batches post as a JSON strokes array", async () => {
    const calls = [];
    const api = new PortalApi(mockFetch({ "/api/images/img-1/strokes": { status: 204 } }, calls));
    api.token = "tok";
    await api.postStrokes("img-1", [{ mode: "draw", width: 3, points: [[1, 2]] }]);
    assert.equal(calls[0].method, "POST");
    assert.deepEqual(JSON.parse(calls[0].body), {
        strokes: [{ mode: "draw", width: 3, points: [[1, 2]] }],
    });
});
test("image ids are URI-encoded in paths", async () => {
    const calls = [];
    const api = new PortalApi(mockFetch({ "/api/images/a%20b/submit": { status: 204 } }, calls));
    api.token = "tok";
    await api.submit("a b");
    assert.equal(calls[0].path, "/api/images/a%20b/submit");
});
test("throttling surfaces as a 429 ApiError", async () => {
    const api = new PortalApi(mockFetch({ "/api/login": { status: 429, body: { error: "too many failed logins" } } }, []));
    await assert.rejects(() => api.login("eve", "x"), (err) => err instanceof ApiError && err.status === 429);
});
