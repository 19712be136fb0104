"""Append-only event log backing the job store.

Every state change is one JSON line in ``<data_dir>/events.jsonl``. State is
rebuilt by replaying the file from the top; a torn final line (the process
died mid-write) is dropped.
"""
from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path
from typing import Iterator

log = logging.getLogger(__name__)

EVENTS_FILE = "events.jsonl"


class EventLog:
    def __init__(self, data_dir: str | Path, fsync: bool = True) -> None:
        self.path = Path(data_dir) / EVENTS_FILE
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fsync = fsync
        self._lock = threading.Lock()
        self._truncate_torn_tail()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _truncate_torn_tail(self) -> None:
        if not self.path.exists():
            return
        data = self.path.read_bytes()
        if data and not data.endswith(b"\n"):
            cut = data.rfind(b"\n") + 1
            log.warning("dropping torn record at end of %s", self.path)
            with open(self.path, "r+b") as fh:
                fh.truncate(cut)

    def append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            if self._fsync:
                os.fsync(self._fh.fileno())

    def replay(self) -> Iterator[dict]:
        if not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield json.loads(line)
                except json.JSONDecodeError:
                    log.warning("skipping unreadable record %s:%d", self.path, lineno)

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()
