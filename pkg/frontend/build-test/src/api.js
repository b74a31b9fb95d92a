// Typed client for the portal JSON API. All calls except login carry the
// bearer token; fetch is injectable so tests can run without a server.
export class ApiError extends Error {
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
export class PortalApi {
    constructor(fetchImpl = (i, init) => fetch(i, init)) {
        this.fetchImpl = fetchImpl;
        this.token = null;
    }
    async request(method, path, body) {
        const headers = {};
        if (this.token)
            headers["Authorization"] = `Bearer ${this.token}`;
        let payload;
        if (body !== undefined) {
            headers["Content-Type"] = "application/json";
            payload = JSON.stringify(body);
        }
        const resp = await this.fetchImpl(path, { method, headers, body: payload });
        if (!resp.ok) {
            let message = `${resp.status}`;
            try {
                const err = (await resp.json());
                if (err.error)
                    message = err.error;
            }
            catch {
                /* non-JSON error body */
            }
            throw new ApiError(resp.status, message);
        }
        if (resp.status === 204)
            return null;
        return resp.json();
    }
    async login(username, password) {
        const out = (await this.request("POST", "/api/login", { username, password }));
        this.token = out.token;
    }
    async listImages() {
        return (await this.request("GET", "/api/images"));
    }
    async getRecord(imageId) {
        return (await this.request("GET", `/api/images/${encodeURIComponent(imageId)}/strokes`));
    }
    async postStrokes(imageId, strokes) {
        await this.request("POST", `/api/images/${encodeURIComponent(imageId)}/strokes`, {
            strokes,
        });
    }
    async submit(imageId) {
        await this.request("POST", `/api/images/${encodeURIComponent(imageId)}/submit`);
    }
}
