"""Structured run traces for auditing data access.

Every consequential action appends a :class:`TraceEvent`; the events that
matter for accounting are:

* ``validation-query`` — one scalar validation *performance* evaluation of one
  candidate (uses validation labels).  This is the unit the benchmark report
  counts: per-checkpoint scores for the single-model baseline, per-(step,
  candidate) losses for incremental ensembling, per-member election scores
  and per-prototype weight fits for the pipeline.
* ``validation-read`` — validation features touched without labels (signature
  extraction, perturbation-stability scoring).  Audited but not counted as
  queries.
* ``test-query`` / ``test-read`` — test-set accesses; anything outside the
  final evaluation stage is a protocol violation that the tests assert against.
* ``train`` / ``fine-tune`` / ``selection`` — model lifecycle markers.

Events are timestamp-free on purpose: traces are part of the deterministic
run output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

__all__ = ["TraceEvent", "RunTrace", "count_validation_queries"]


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    stage: str
    detail: dict

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "stage": self.stage, "detail": self.detail},
            sort_keys=True,
        )


@dataclass
class RunTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def record(self, kind: str, stage: str, **detail) -> None:
        self.events.append(TraceEvent(kind=kind, stage=stage, detail=detail))

    def count(self, kind: str, stage: str | None = None) -> int:
        return sum(
            1
            for e in self.events
            if e.kind == kind and (stage is None or e.stage == stage)
        )

    @property
    def validation_query_count(self) -> int:
        return self.count("validation-query")

    @property
    def test_query_count(self) -> int:
        return self.count("test-query")

    def stages(self, kind: str) -> set[str]:
        return {e.stage for e in self.events if e.kind == kind}

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(
            "".join(e.to_json() + "\n" for e in self.events), encoding="utf-8"
        )

    @classmethod
    def read_jsonl(cls, path: str | Path) -> "RunTrace":
        events = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            events.append(TraceEvent(kind=obj["kind"], stage=obj["stage"], detail=obj["detail"]))
        return cls(events=events)


def count_validation_queries(trace: RunTrace | Iterable[TraceEvent]) -> int:
    """Number of scalar validation-performance queries recorded in a trace."""
    if isinstance(trace, RunTrace):
        return trace.validation_query_count
    return sum(1 for e in trace if e.kind == "validation-query")
