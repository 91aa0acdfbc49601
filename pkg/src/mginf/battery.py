"""Desk-scale identity checks run by ``mginf validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from mginf import busy_analytics as ba
from mginf import moments as mo
from mginf import service_law as sl
from mginf.service_law import ServiceLawParams

DEFAULT_RHOS = tuple(round(0.3 * k, 10) for k in range(1, 11))
DEFAULT_PS = tuple(round(0.1 * j, 10) for j in range(10))
DEFAULT_FRACTIONS = (0.05, 0.25, 0.5, 0.75, 1.0)


def default_grid(lam: float = 1.0) -> list[ServiceLawParams]:
    """500 admissible points: rho in (0, 3], p in [0, 0.9], beta fraction in (0, 1]."""
    return [
        ServiceLawParams.from_fraction(lam, r, p, f)
        for r in DEFAULT_RHOS
        for p in DEFAULT_PS
        for f in DEFAULT_FRACTIONS
    ]


@dataclass
class Check:
    name: str
    tolerance: float
    max_error: float = 0.0
    evaluated: int = 0
    failures: int = 0

    def record(self, error: float, limit: float | None = None) -> None:
        error = float(error)
        limit = self.tolerance if limit is None else limit
        self.evaluated += 1
        if not math.isfinite(error) or error > limit:
            self.failures += 1
        if not math.isfinite(error) or error > self.max_error:
            self.max_error = error

    @property
    def status(self) -> str:
        if self.evaluated == 0:
            return "skipped"
        return "pass" if self.failures == 0 else "fail"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "evaluated": self.evaluated,
            "failures": self.failures,
        }


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def run_battery(points: Iterable[ServiceLawParams]) -> list[Check]:
    """Evaluate every identity at every parameter point; errors are relative unless noted."""
    checks = {
        "ode_residual": Check("ode_residual", 1e-8),  # scaled by (lam + |beta|)
        "cross_ratio": Check("cross_ratio", 1e-9),
        "quantile_roundtrip": Check("quantile_roundtrip", 1e-10),  # absolute
        "density_vs_finite_difference": Check("density_vs_finite_difference", 1e-6),
        "mean_identity_quadrature": Check("mean_identity_quadrature", 1e-9),
        "mean_identity_series": Check("mean_identity_series", 0.0),  # within reported bound
        "bound_containment": Check("bound_containment", 0.0),  # violation size
        "keystone_peakedness": Check("keystone_peakedness", 1e-12),
        "cycle_ratio_identity": Check("cycle_ratio_identity", 1e-14),
        "busy_law_mean": Check("busy_law_mean", 1e-14),
    }
    for prm in points:
        checks["keystone_peakedness"].record(
            _rel(ba.peakedness_busy(prm), ba.laplace_conjectured(prm, 1.0 / prm.alpha))
        )
        checks["cycle_ratio_identity"].record(
            _rel(ba.peakedness_cycle(prm), prm.rho / (prm.rho + 1.0) * ba.peakedness_busy(prm))
        )
        if prm.degenerate:
            continue
        checks["busy_law_mean"].record(_rel(ba.conjectured_busy_law(prm).mean, ba.busy_period_mean(prm)))

        a = prm.a_rate
        t = np.linspace(0.0, 20.0 / a, 200)
        res = np.max(np.abs(sl.ode_residual(prm, t)))
        checks["ode_residual"].record(res / (prm.lam + abs(prm.beta)))

        rhos = tuple(prm.rho * f for f in (0.55, 0.7, 0.85, 1.0))
        for tt in (0.1 / a, 1.0 / a, 5.0 / a):
            lhs, rhs = sl.cross_ratio(prm.lam, prm.beta, prm.p, rhos, tt)
            checks["cross_ratio"].record(_rel(lhs, rhs))

        u = np.linspace(prm.atom, 1.0 - 1e-9, 1000)[1:]
        checks["quantile_roundtrip"].record(float(np.max(np.abs(sl.cdf(prm, sl.quantile(prm, u)) - u))))

        tm = np.linspace(0.1, 10.0, 50) / a
        h = 1e-5 / a
        # G(t+h) - G(t-h) taken as S(t-h) - S(t+h) to avoid cancellation near 1
        fd = (np.asarray(sl.survival(prm, tm - h)) - np.asarray(sl.survival(prm, tm + h))) / (2.0 * h)
        g = np.asarray(sl.pdf(prm, tm))
        checks["density_vs_finite_difference"].record(float(np.max(np.abs(fd - g) / g)))

        q1 = mo.moment_quadrature(prm, 1)
        checks["mean_identity_quadrature"].record(_rel(q1.value, prm.alpha))
        if prm.rho < mo.LOG2:
            s1 = mo.moment_series(prm, 1, 1e-12)
            excess = abs(s1.value - prm.alpha) - (s1.error_bound + 1e-13 * prm.alpha)
            checks["mean_identity_series"].record(max(0.0, excess))

        for n in range(1, 7):
            b = mo.moment_bounds(prm, n)
            v = q1.value if n == 1 else mo.moment_quadrature(prm, n).value
            violation = max(0.0, b.lower - v, v - b.upper) / max(v, 1e-300)
            checks["bound_containment"].record(violation)
    return list(checks.values())
