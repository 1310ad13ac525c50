"""Audit logging for runs.

Writes every training progress row, checkpoint, metric and pipeline node
transition to an NDJSON file so that nothing is lost and reports can be
regenerated without re-running anything.
"""

from __future__ import annotations

import datetime
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union
from uuid import UUID

import numpy as np
from langchain_core.callbacks import BaseCallbackHandler

from .errors import StorageError

AUDIT_FILE = "audit.ndjson"


def _utcnow() -> datetime.datetime:
    return datetime.datetime.now(datetime.timezone.utc)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    return str(value)


class AuditLog:
    """Appends structured audit events to an NDJSON file."""

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(self.path, "w", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot open audit log {self.path}: {exc}") from exc
        self._start = _utcnow()

    def write(self, event_type: str, data: dict) -> None:
        """Append one event to the log."""
        event = {
            "ts": _utcnow().isoformat().replace("+00:00", "Z"),
            "type": event_type,
            "data": data,
        }
        self._file.write(json.dumps(event, default=_json_default) + "\n")
        self._file.flush()

    @property
    def elapsed_seconds(self) -> float:
        return (_utcnow() - self._start).total_seconds()

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "AuditLog":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def emit(audit: Optional[AuditLog], event_type: str, data: dict) -> None:
    """Write to *audit* when one is attached."""
    if audit is not None:
        audit.write(event_type, data)


class AuditCallbackHandler(BaseCallbackHandler):
    """LangChain callback handler that logs pipeline node starts, ends and errors."""

    raise_error = False  # a failed audit write must not abort a benchmark

    def __init__(self, log: AuditLog) -> None:
        super().__init__()
        self._log = log
        self._nodes: dict[UUID, str] = {}

    def on_chain_start(
        self,
        serialized: Optional[Dict[str, Any]],
        inputs: Dict[str, Any],
        *,
        run_id: UUID,
        metadata: Optional[Dict[str, Any]] = None,
        **kwargs: Any,
    ) -> None:
        node = (metadata or {}).get("langgraph_node")
        if node is None or kwargs.get("name") != node:
            return
        self._nodes[run_id] = node
        self._log.write("node_start", {"node": node, "step": (metadata or {}).get("langgraph_step")})

    def on_chain_end(self, outputs: Any, *, run_id: UUID, **kwargs: Any) -> None:
        node = self._nodes.pop(run_id, None)
        if node is not None:
            keys = sorted(outputs) if isinstance(outputs, dict) else []
            self._log.write("node_end", {"node": node, "updated": keys})

    def on_chain_error(
        self, error: Union[Exception, KeyboardInterrupt], *, run_id: UUID, **kwargs: Any
    ) -> None:
        node = self._nodes.pop(run_id, None)
        if node is not None:
            self._log.write("node_error", {"node": node, "error": str(error)})
