"""Simulation trace: the single source for latency, energy, and overhead."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InvalidConfig
from .radio import RadioStateInterval


@dataclass(frozen=True)
class TraceEvent:
    time_us: int
    node_id: int | str            # "meta" for meta-step walks
    kind: str                     # TX | RX | STATE | DROP | APP
    detail: dict

    def to_json(self) -> str:
        return json.dumps(
            {"t": self.time_us, "node": self.node_id, "kind": self.kind, **self.detail},
            sort_keys=True,
        )


@dataclass
class SimTrace:
    """Ordered event log plus final statistics of one simulation run."""

    events: list[TraceEvent] = field(default_factory=list)
    intervals: list[RadioStateInterval] = field(default_factory=list)

    delivery_time_us: int | None = None      # sink holds every payload
    finished_time_us: int = 0                # last event in the run
    delivered_payloads: int = 0
    submitted_payloads: int = 0
    duplicates_suppressed: int = 0
    permanent_failure: bool = False
    control_bytes_sent: int = 0
    data_bytes_delivered: int = 0

    def record(self, time_us: int, node_id, kind: str, **detail):
        if self.events and time_us < self.events[-1].time_us:
            raise InvalidConfig(
                f"trace time went backwards: {time_us} after {self.events[-1].time_us}"
            )
        self.events.append(TraceEvent(time_us, node_id, kind, detail))
        self.finished_time_us = max(self.finished_time_us, time_us)

    @property
    def completed(self) -> bool:
        return (self.delivered_payloads == self.submitted_payloads
                and self.submitted_payloads > 0)

    def to_jsonl(self) -> str:
        return "\n".join(ev.to_json() for ev in self.events) + "\n"

    def summary(self) -> dict:
        return {
            "delivery_time_us": self.delivery_time_us,
            "finished_time_us": self.finished_time_us,
            "delivered_payloads": self.delivered_payloads,
            "submitted_payloads": self.submitted_payloads,
            "permanent_failure": self.permanent_failure,
            "control_bytes_sent": self.control_bytes_sent,
            "data_bytes_delivered": self.data_bytes_delivered,
        }
