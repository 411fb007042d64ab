"""Monte Carlo comparison record shared by the simulator, laws and CLI."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

Z_THRESHOLD = 3.0


@dataclass
class McReport:
    estimate: float
    std_error: float
    closed_form: float
    z_score: float
    verdict: str
    n_paths: int
    wall_time: float | None = None
    label: str = ""

    @classmethod
    def compare(cls, estimate, std_error, closed_form, n_paths, wall_time=None, label="",
                threshold=Z_THRESHOLD):
        estimate, std_error, closed_form = float(estimate), float(std_error), float(closed_form)
        diff = estimate - closed_form
        if std_error > 0:
            z = diff / std_error
        else:
            z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        verdict = "pass" if abs(z) <= threshold else "fail"
        return cls(estimate, std_error, closed_form, z, verdict, int(n_paths), wall_time, label)

    @classmethod
    def from_samples(cls, samples, closed_form, wall_time=None, label="", threshold=Z_THRESHOLD):
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls.compare(samples.mean(), se, closed_form, n, wall_time, label, threshold)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        return asdict(self)
