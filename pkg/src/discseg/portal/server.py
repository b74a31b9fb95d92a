"""HTTP/JSON API of the tracing portal.

Endpoints (bearer-token authenticated unless noted):

    POST /api/login {username, password} -> {token}     (no auth)
    GET  /api/images                     -> [{id, thumbnail_url, status}]
    GET  /api/images/<id>/file           -> image PNG
    GET  /api/images/<id>/strokes        -> tracing record
    POST /api/images/<id>/strokes {strokes: [...]} -> 204
    POST /api/images/<id>/submit         -> 204
    GET  /api/export/<id>?annotator=<a>  -> mask PNG
    GET  /api/export/<id>/merged         -> mask PNG
    GET  /<anything else>                -> static UI bundle   (no auth)
"""

from __future__ import annotations

import json
import logging
import re
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .auth import LoginLimiter, TokenStore, load_users, verify_password
from .store import AnnotationStore, PortalError

log = logging.getLogger(__name__)

_IMAGE_ROUTE = re.compile(r"^/api/images/([^/]+)/(file|strokes|submit)$")
_EXPORT_ROUTE = re.compile(r"^/api/export/([^/]+)(/merged)?$")


class PortalApp:
    """Route handling, independent of the HTTP plumbing."""

    def __init__(self, data_dir, users_file, ui_dir=None, token_ttl: float = 86_400.0):
        self.store = AnnotationStore(data_dir)
        self.users = load_users(users_file)
        self.tokens = TokenStore(ttl_seconds=token_ttl)
        self.limiter = LoginLimiter()
        self.ui_dir = Path(ui_dir) if ui_dir else None

    # Each handler returns (status, content_type, body_bytes).

    def handle(self, method: str, path: str, query: dict, headers, body: bytes):
        if path == "/api/login" and method == "POST":
            return self._login(body)
        if path.startswith("/api/"):
            username = self._authenticate(headers)
            if username is None:
                return _json(401, {"error": "invalid or expired token"})
            return self._authenticated(method, path, query, body, username)
        if method == "GET":
            return self._static(path)
        return _json(405, {"error": "method not allowed"})

    def _authenticate(self, headers) -> str | None:
        auth = headers.get("Authorization", "")
        if not auth.startswith("Bearer "):
            return None
        return self.tokens.resolve(auth[len("Bearer "):].strip())

    def _login(self, body: bytes):
        try:
            payload = json.loads(body or b"{}")
        except json.JSONDecodeError:
            return _json(400, {"error": "malformed JSON body"})
        username = str(payload.get("username", ""))
        password = str(payload.get("password", ""))
        if self.limiter.blocked(username):
            return _json(429, {"error": "too many failed logins; try again later"})
        stored = self.users.get(username)
        if stored is None or not verify_password(stored, password):
            self.limiter.record_failure(username)
            return _json(401, {"error": "invalid credentials"})
        self.limiter.record_success(username)
        return _json(200, {"token": self.tokens.issue(username)})

    def _authenticated(self, method, path, query, body, username):
        try:
            if path == "/api/images" and method == "GET":
                return self._image_list(username)
            m = _IMAGE_ROUTE.match(path)
            if m:
                return self._image_route(m.group(1), m.group(2), method, body, username)
            m = _EXPORT_ROUTE.match(path)
            if m:
                return self._export(m.group(1), bool(m.group(2)), query)
        except PortalError as err:
            return _json(err.status, {"error": str(err)})
        return _json(404, {"error": f"no such endpoint {path}"})

    def _image_list(self, username):
        entries = []
        for image_id in self.store.assigned_ids(username):
            if self.store.is_submitted(image_id, username):
                continue  # submitted tracings leave the list
            has_strokes = bool(self.store.record(image_id, username)["strokes"])
            entries.append({
                "id": image_id,
                "thumbnail_url": f"/api/images/{image_id}/file",
                "status": "in-progress" if has_strokes else "new",
            })
        return _json(200, entries)

    def _image_route(self, image_id, action, method, body, username):
        if action == "file" and method == "GET":
            self.store.check_assigned(image_id, username)
            return 200, "image/png", self.store.image_path(image_id).read_bytes()
        if action == "strokes" and method == "GET":
            self.store.check_assigned(image_id, username)
            return _json(200, self.store.record(image_id, username))
        if action == "strokes" and method == "POST":
            try:
                payload = json.loads(body or b"{}")
            except json.JSONDecodeError:
                return _json(400, {"error": "malformed JSON body"})
            self.store.append_strokes(image_id, username, payload.get("strokes"))
            return 204, None, b""
        if action == "submit" and method == "POST":
            self.store.submit(image_id, username)
            return 204, None, b""
        return _json(405, {"error": "method not allowed"})

    def _export(self, image_id, merged, query):
        if merged:
            return 200, "image/png", self.store.export_merged_png(image_id)
        annotator = (query.get("annotator") or [""])[0]
        if not annotator:
            return _json(400, {"error": "annotator query parameter required"})
        return 200, "image/png", self.store.export_mask_png(image_id, annotator)

    def _static(self, path: str):
        if self.ui_dir is None:
            if path == "/":
                return 200, "text/html", b"<html><body>discseg portal API; UI bundle not installed.</body></html>"
            return _json(404, {"error": "no UI bundle configured"})
        rel = path.lstrip("/") or "index.html"
        target = (self.ui_dir / rel).resolve()
        if not str(target).startswith(str(self.ui_dir.resolve())) or not target.is_file():
            return _json(404, {"error": f"no such file {path}"})
        types = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
                 ".png": "image/png", ".map": "application/json", ".svg": "image/svg+xml"}
        return 200, types.get(target.suffix, "application/octet-stream"), target.read_bytes()


def _json(status: int, payload) -> tuple[int, str, bytes]:
    return status, "application/json", json.dumps(payload).encode()


class _Handler(BaseHTTPRequestHandler):
    app: PortalApp = None  # set by create_server

    protocol_version = "HTTP/1.1"

    def _dispatch(self, method: str):
        parsed = urllib.parse.urlparse(self.path)
        query = urllib.parse.parse_qs(parsed.query)
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        try:
            status, content_type, payload = self.app.handle(
                method, parsed.path, query, self.headers, body)
        except Exception:  # noqa: BLE001 - surface as 500, keep serving
            log.exception("unhandled error for %s %s", method, self.path)
            status, content_type, payload = _json(500, {"error": "internal error"})
        self.send_response(status)
        if content_type:
            self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        if payload:
            self.wfile.write(payload)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)


def create_server(port: int, data_dir, users_file, ui_dir=None,
                  token_ttl: float = 86_400.0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bind the portal; raises OSError when the port is occupied."""
    app = PortalApp(data_dir, users_file, ui_dir=ui_dir, token_ttl=token_ttl)
    handler = type("BoundHandler", (_Handler,), {"app": app})
    return ThreadingHTTPServer((host, port), handler)
