"""Content-hash keyed cache for captions, embeddings, and verifier answers.

In-memory by default; give it a path to persist through sqlite so ingest
is resumable and parameter sweeps stay cheap. Values are strings (JSON
where structured). Thread-safe.
"""

from __future__ import annotations

import sqlite3
import threading
from pathlib import Path

CAPTIONS = "captions"
TEXT_EMBEDS = "text_embeds"
IMAGE_EMBEDS = "image_embeds"
VERIFIER = "verifier"


class Cache:
    def __init__(self, path: str | None = None):
        self._mem: dict[tuple[str, str], str] = {}
        self._lock = threading.Lock()
        self._db: sqlite3.Connection | None = None
        if path:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            self._db = sqlite3.connect(path, check_same_thread=False)
            self._db.execute(
                "CREATE TABLE IF NOT EXISTS kv ("
                " ns TEXT NOT NULL, key TEXT NOT NULL, value TEXT NOT NULL,"
                " PRIMARY KEY (ns, key))"
            )
            self._db.commit()

    def get(self, namespace: str, key: str) -> str | None:
        with self._lock:
            hit = self._mem.get((namespace, key))
            if hit is not None:
                return hit
            if self._db is not None:
                row = self._db.execute(
                    "SELECT value FROM kv WHERE ns = ? AND key = ?", (namespace, key)
                ).fetchone()
                if row is not None:
                    self._mem[(namespace, key)] = row[0]
                    return row[0]
        return None

    def put(self, namespace: str, key: str, value: str) -> None:
        with self._lock:
            self._mem[(namespace, key)] = value
            if self._db is not None:
                self._db.execute(
                    "INSERT OR REPLACE INTO kv (ns, key, value) VALUES (?, ?, ?)",
                    (namespace, key, value),
                )
                self._db.commit()

    def close(self) -> None:
        with self._lock:
            if self._db is not None:
                self._db.close()
                self._db = None
