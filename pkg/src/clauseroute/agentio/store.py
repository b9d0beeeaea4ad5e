"""Line-delimited JSON run store.

One UTF-8 JSON object per line with fields:

    run_id, prompt, direction_key, current_endpoint_id (int or null),
    raw_reply, M, mask ("0 1 ..."), fail_flag, postcondition, timestamp,
    agent_tag

The mask and postcondition are derived from ``raw_reply``; on load they are
recomputed and any disagreement marks the record ``integrity_ok = False``.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from ..postcond import Label, OutputMask, Postcondition, classify, process_mask

log = logging.getLogger(__name__)

FIELDS = (
    "run_id",
    "prompt",
    "direction_key",
    "current_endpoint_id",
    "raw_reply",
    "M",
    "mask",
    "fail_flag",
    "postcondition",
    "timestamp",
    "agent_tag",
)


class RunStoreError(ValueError):
    pass


class RunStoreParseError(RunStoreError):
    def __init__(self, path: str, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class BatchIntegrityError(RunStoreError):
    pass


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    prompt: str
    direction_key: str
    current_endpoint_id: int | None
    raw_reply: str
    mask: OutputMask
    postcondition: Postcondition
    timestamp: str
    agent_tag: str = ""
    integrity_ok: bool = field(default=True, compare=False)

    @property
    def M(self) -> int:
        return self.mask.M

    @property
    def label(self) -> Label:
        return self.postcondition.label

    @classmethod
    def create(
        cls,
        run_id: str,
        prompt: str,
        direction_key: str,
        current_endpoint_id: int | None,
        raw_reply: str,
        M: int,
        agent_tag: str = "",
        timestamp: str | None = None,
    ) -> "RunRecord":
        mask = process_mask(raw_reply, M)
        stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
        return cls(run_id, prompt, direction_key, current_endpoint_id, raw_reply, mask, classify(mask), stamp,
                   agent_tag)

    def to_json(self) -> str:
        data = {
            "run_id": self.run_id,
            "prompt": self.prompt,
            "direction_key": self.direction_key,
            "current_endpoint_id": self.current_endpoint_id,
            "raw_reply": self.raw_reply,
            "M": self.M,
            "mask": self.mask.text(),
            "fail_flag": self.mask.fail_flag,
            "postcondition": self.postcondition.label.value,
            "timestamp": self.timestamp,
            "agent_tag": self.agent_tag,
        }
        return json.dumps(data, ensure_ascii=False)


def _parse_record(data: dict, M: int | None) -> RunRecord:
    missing = [f for f in FIELDS if f not in data]
    if missing:
        raise ValueError(f"missing fields {missing}")
    stored_M = int(data["M"])
    if M is not None and stored_M != M:
        raise BatchIntegrityError(f"record {data['run_id']!r} has M={stored_M}, zoo has M={M}")
    recomputed = process_mask(str(data["raw_reply"]), stored_M)
    stored_bits = np.array([int(b) for b in str(data["mask"]).split()], dtype=np.uint8)
    post = classify(recomputed)
    ok = (
        np.array_equal(stored_bits, recomputed.bits)
        and bool(data["fail_flag"]) == recomputed.fail_flag
        and data["postcondition"] == post.label.value
    )
    if not ok:
        log.warning("run %s: stored mask disagrees with reply normalization", data["run_id"])
    current = data["current_endpoint_id"]
    return RunRecord(
        run_id=str(data["run_id"]),
        prompt=str(data["prompt"]),
        direction_key=str(data["direction_key"]),
        current_endpoint_id=None if current is None else int(current),
        raw_reply=str(data["raw_reply"]),
        mask=recomputed,
        postcondition=post,
        timestamp=str(data["timestamp"]),
        agent_tag=str(data["agent_tag"]),
        integrity_ok=ok,
    )


def load_runs(path: str | Path, M: int | None = None) -> list[RunRecord]:
    """Read a store; missing file or empty file gives an empty list."""
    path = Path(path)
    if not path.exists():
        return []
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                if not isinstance(data, dict):
                    raise ValueError("record is not a JSON object")
                records.append(_parse_record(data, M))
            except BatchIntegrityError:
                raise
            except (ValueError, TypeError) as exc:
                raise RunStoreParseError(str(path), line_no, str(exc)) from exc
    return records


def store_runs(path: str | Path, records: Iterable[RunRecord], append: bool = False) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


class RunStore:
    """Append-only store; appends are serialized through a lock."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: RunRecord) -> None:
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
            fh.flush()

    def load(self, M: int | None = None) -> list[RunRecord]:
        return load_runs(self.path, M)

    def run_ids(self) -> set[str]:
        return {r.run_id for r in self.load()}
