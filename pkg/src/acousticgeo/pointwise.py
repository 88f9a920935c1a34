"""Pointwise identity checkers, each reporting residual statistics."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IdentityReport:
    name: str
    samples: int
    max_abs: float
    mean_abs: float
    max_rel: float
    worst_point: tuple | None
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name, "samples": self.samples,
            "max_abs": self.max_abs, "mean_abs": self.mean_abs,
            "max_rel": self.max_rel,
            "worst_point": list(self.worst_point) if self.worst_point else None,
            "tolerance": self.tolerance, "passed": self.passed,
        }


def build_report(name, residual, scale, tolerance, t=None, x=None) -> IdentityReport:
    """Assemble a report; scale is the largest participating term magnitude."""
    res = np.abs(np.asarray(residual, dtype=float))
    rel = res / (1.0 + np.asarray(scale, dtype=float))
    worst = None
    if t is not None and res.size > 1:
        k = np.unravel_index(int(np.argmax(res)), res.shape)
        tt = np.broadcast_to(np.asarray(t, float), res.shape)
        xx = np.broadcast_to(np.asarray(x, float), res.shape + (3,))
        worst = (float(tt[k]),) + tuple(float(c) for c in xx[k])
    return IdentityReport(
        name=name, samples=int(res.size),
        max_abs=float(np.max(res)), mean_abs=float(np.mean(res)),
        max_rel=float(np.max(rel)), worst_point=worst,
        tolerance=float(tolerance), passed=bool(np.max(rel) <= tolerance),
    )
