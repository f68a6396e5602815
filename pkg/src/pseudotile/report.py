"""Structured verification results shared by all checking stages."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


@dataclass
class VerificationReport:
    stage: str
    status: str
    metrics: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    anchor: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def __post_init__(self):
        if self.status == FAIL and not self.witnesses:
            raise ValueError(f"{self.stage}: a failing report needs a witness")

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def combine(stage: str, reports: list[VerificationReport], anchor: str = "") -> VerificationReport:
    """Fail if any part fails, else inconclusive if any part is, else pass."""
    statuses = [r.status for r in reports]
    status = FAIL if FAIL in statuses else INCONCLUSIVE if INCONCLUSIVE in statuses else PASS
    wit = [w for r in reports for w in r.witnesses]
    metrics = {f"{r.stage}.{k}": v for r in reports for k, v in r.metrics.items()}
    return VerificationReport(stage, status, metrics, wit, anchor=anchor)
