"""Audit entries: a checked inequality lhs <= rhs with a recorded relative slack."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = ["AuditEntry", "AuditReport", "SIM_SLACK", "QUAD_SLACK"]

SIM_SLACK = 0.05
QUAD_SLACK = 1e-6


@dataclass(frozen=True)
class AuditEntry:
    """``passed`` is exactly ``lhs <= rhs + slack * |rhs|``; nothing else feeds it.

    ``margin`` is rhs / lhs (signed infinity when lhs <= 0).  Identity checks store the
    absolute normalized residual as ``lhs`` and the tolerance as ``rhs``.
    """

    name: str
    anchor: str
    lhs: float
    rhs: float
    slack: float = 0.0
    detail: str = ""

    @classmethod
    def check(cls, name: str, anchor: str, lhs: float, rhs: float, slack: float = 0.0, detail: str = "") -> "AuditEntry":
        return cls(name, anchor, float(lhs), float(rhs), float(slack), detail)

    @property
    def passed(self) -> bool:
        if math.isnan(self.lhs) or math.isnan(self.rhs):
            return False
        return self.lhs <= self.rhs + self.slack * abs(self.rhs)

    @property
    def margin(self) -> float:
        if self.lhs <= 0:
            return math.inf if self.passed else -math.inf
        return self.rhs / self.lhs

    def with_slack(self, slack: float) -> "AuditEntry":
        return AuditEntry(self.name, self.anchor, self.lhs, self.rhs, slack, self.detail)


@dataclass
class AuditReport:
    entries: list[AuditEntry] = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    def add(self, entry: AuditEntry) -> AuditEntry:
        self.entries.append(entry)
        return entry

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[AuditEntry]:
        return [e for e in self.entries if not e.passed]

    def __getitem__(self, name: str) -> AuditEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)
