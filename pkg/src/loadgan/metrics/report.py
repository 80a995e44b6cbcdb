"""Validation report combining distribution match and constraint adherence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..qp.polytope import RampBoxPolytope
from .ecdf import ecdf, ks_distance
from .realism import RealismStats, realism_stats


@dataclass
class Thresholds:
    ks_max: float = 0.15
    max_violations: int = 0


@dataclass
class ValidationReport:
    ks_distance: float
    generated: RealismStats
    ground_truth: RealismStats | None
    violations: dict
    thresholds: Thresholds
    config: dict = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    @property
    def checks(self) -> dict:
        return {"ks": self.ks_distance < self.thresholds.ks_max,
                "violations": self.total_violations <= self.thresholds.max_violations}

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "ks_distance": self.ks_distance,
            "generated": self.generated.to_dict(),
            "ground_truth": self.ground_truth.to_dict() if self.ground_truth else None,
            "violations": dict(self.violations),
            "total_violations": self.total_violations,
            "thresholds": {"ks_max": self.thresholds.ks_max,
                           "max_violations": self.thresholds.max_violations},
            "checks": self.checks,
            "passed": self.passed,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def build_report(fast_profiles, slow_generated, slow_real, polytope: RampBoxPolytope,
                 fast_truth=None, thresholds: Thresholds | None = None, feas_tol: float = 1e-8,
                 config: dict | None = None) -> ValidationReport:
    """Compare generated aggregates to real ones and count raw constraint violations
    of every length-m window of the generated fast profiles."""
    fast = np.atleast_2d(np.asarray(fast_profiles, dtype=np.float64))
    windows = fast.reshape(-1, polytope.m)
    ks = ks_distance(ecdf(slow_generated), ecdf(slow_real))
    truth = None
    if fast_truth is not None:
        truth = realism_stats(fast_truth, window=polytope.m)
    return ValidationReport(
        ks_distance=ks,
        generated=realism_stats(fast, window=polytope.m),
        ground_truth=truth,
        violations=polytope.violations(windows, feas_tol),
        thresholds=thresholds or Thresholds(),
        config=config or {},
    )
