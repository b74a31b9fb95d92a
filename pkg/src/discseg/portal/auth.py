"""Accounts, session tokens, and login throttling for the tracing portal.

Users file: one `username:salted-hash` line per account, where the hash
field is `salt$pbkdf2_sha256_hex`. Passwords are never stored in clear.
"""

from __future__ import annotations

import hashlib
import secrets
import threading
import time
from pathlib import Path

PBKDF2_ITERATIONS = 50_000
FAILURE_LIMIT = 5
FAILURE_WINDOW_SECONDS = 900.0


def hash_password(password: str, salt: str | None = None) -> str:
    salt = salt or secrets.token_hex(8)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), salt.encode(),
                                 PBKDF2_ITERATIONS).hex()
    return f"{salt}${digest}"


def verify_password(stored: str, password: str) -> bool:
    salt, _, digest = stored.partition("$")
    candidate = hashlib.pbkdf2_hmac("sha256", password.encode(), salt.encode(),
                                    PBKDF2_ITERATIONS).hex()
    return secrets.compare_digest(candidate, digest)


def load_users(path) -> dict[str, str]:
    users: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        username, sep, stored = line.partition(":")
        if not sep or not username or "$" not in stored:
            raise ValueError(f"{path}:{lineno}: expected 'username:salt$hash'")
        if username in users:
            raise ValueError(f"{path}:{lineno}: duplicate username '{username}'")
        users[username] = stored
    return users


def add_user(path, username: str, password: str) -> None:
    """Append an account; used by operators and test fixtures."""
    if ":" in username:
        raise ValueError("usernames must not contain ':'")
    path = Path(path)
    existing = load_users(path) if path.exists() else {}
    if username in existing:
        raise ValueError(f"user '{username}' already exists")
    with open(path, "a") as fh:
        fh.write(f"{username}:{hash_password(password)}\n")


class TokenStore:
    """Opaque expiring session tokens, thread-safe."""

    def __init__(self, ttl_seconds: float = 86_400.0, clock=time.monotonic):
        self.ttl = ttl_seconds
        self._clock = clock
        self._tokens: dict[str, tuple[str, float]] = {}
        self._lock = threading.Lock()

    def issue(self, username: str) -> str:
        token = secrets.token_hex(16)
        with self._lock:
            self._tokens[token] = (username, self._clock() + self.ttl)
        return token

    def resolve(self, token: str) -> str | None:
        with self._lock:
            entry = self._tokens.get(token)
            if entry is None:
                return None
            username, expires = entry
            if self._clock() > expires:
                del self._tokens[token]
                return None
            return username


class LoginLimiter:
    """Rejects further attempts after repeated recent failures."""

    def __init__(self, limit: int = FAILURE_LIMIT, window: float = FAILURE_WINDOW_SECONDS,
                 clock=time.monotonic):
        self.limit = limit
        self.window = window
        self._clock = clock
        self._failures: dict[str, list[float]] = {}
        self._lock = threading.Lock()

    def blocked(self, username: str) -> bool:
        now = self._clock()
        with self._lock:
            recent = [t for t in self._failures.get(username, []) if now - t < self.window]
            self._failures[username] = recent
            return len(recent) >= self.limit

    def record_failure(self, username: str) -> None:
        with self._lock:
            self._failures.setdefault(username, []).append(self._clock())

    def record_success(self, username: str) -> None:
        with self._lock:
            self._failures.pop(username, None)
