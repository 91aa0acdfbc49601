"""Closed-form busy-period and busy-cycle quantities for the Riccati family.

For this service family the busy period B has an atom ``q = G(0)`` at the
origin and is otherwise exponential with rate ``mu = A e^-rho``.  That law
reproduces the published busy-period mean and peakedness exactly and is
used here as the reference model for the renewal function; the simulator
checks it independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mginf.errors import DegenerateParameter
from mginf.service_law import ServiceLawParams

ORDINARY = "ordinary_cycle_start"
DELAYED = "delayed_idle_start"
CONVENTIONS = (ORDINARY, DELAYED)


@dataclass(frozen=True)
class BusyPeriodLaw:
    atom_mass: float
    rate: float
    # 1 - atom_mass, kept separately since it is tiny when beta is near -lam
    positive_mass: float

    @property
    def mean(self) -> float:
        if self.rate == 0.0:
            return 0.0
        return self.positive_mass / self.rate


@dataclass(frozen=True)
class PeakednessReport:
    pi: float
    qi: float
    pi_cycle: float
    qi_cycle: float


@dataclass(frozen=True)
class RenewalCurve:
    t_grid: np.ndarray
    r_paper: np.ndarray
    r_oracle_ordinary: np.ndarray
    r_oracle_delayed: np.ndarray


def busy_period_mean(params: ServiceLawParams) -> float:
    """``(e^rho - 1) / lam``; 0 at ``beta = -lam`` where every service is 0."""
    if params.degenerate:
        return 0.0
    return math.expm1(params.rho) / params.lam


def busy_cycle_mean(params: ServiceLawParams) -> float:
    """Idle mean ``1/lam`` plus busy mean, i.e. ``e^rho / lam``."""
    if params.degenerate:
        return 1.0 / params.lam
    return math.exp(params.rho) / params.lam


def _peak_parts(params: ServiceLawParams) -> tuple[float, float]:
    lam, rho, beta, p = params.lam, params.rho, params.beta, params.p
    d = math.exp(-rho)
    num = d * (lam + beta) * (rho + 1.0) - lam * p - beta
    den = d * (rho + params.alpha * beta) + 1.0 - p
    return num, den


def peakedness_busy(params: ServiceLawParams) -> float:
    """Laplace transform of the busy-period length at ``1/alpha``.

    ``pi = [e^-rho (lam+beta)(rho+1) - lam p - beta] / [lam (e^-rho (rho + alpha beta) + 1 - p)]``
    """
    if params.degenerate:
        return 1.0
    num, den = _peak_parts(params)
    return num / (params.lam * den)


def modified_peakedness_busy(params: ServiceLawParams) -> float:
    rho = params.rho
    return peakedness_busy(params) * rho / (math.expm1(rho) - rho) + 1.0


def peakedness_cycle(params: ServiceLawParams) -> float:
    """Busy-cycle transform at ``1/alpha``; equals ``rho/(rho+1) * pi``."""
    if params.degenerate:
        return params.rho / (params.rho + 1.0)
    num, den = _peak_parts(params)
    return params.alpha * num / ((params.rho + 1.0) * den)


def modified_peakedness_cycle(params: ServiceLawParams) -> float:
    rho = params.rho
    return peakedness_cycle(params) * rho / (math.exp(rho) - rho) + 1.0


def peakedness_report(params: ServiceLawParams) -> PeakednessReport:
    return PeakednessReport(
        pi=peakedness_busy(params),
        qi=modified_peakedness_busy(params),
        pi_cycle=peakedness_cycle(params),
        qi_cycle=modified_peakedness_cycle(params),
    )


def conjectured_busy_law(params: ServiceLawParams) -> BusyPeriodLaw:
    """Atom ``G(0)`` plus an exponential of rate ``A e^-rho``."""
    if params.degenerate:
        return BusyPeriodLaw(atom_mass=1.0, rate=0.0, positive_mass=0.0)
    return BusyPeriodLaw(
        atom_mass=params.atom,
        rate=params.a_rate * math.exp(-params.rho),
        positive_mass=-math.expm1(-params.rho) * params.a_rate / params.lam,
    )


def laplace_conjectured(params: ServiceLawParams, s: float) -> float:
    """Transform ``q + (1 - q) mu / (mu + s)`` of :func:`conjectured_busy_law`."""
    if s < 0:
        raise ValueError("transform argument must be >= 0")
    law = conjectured_busy_law(params)
    if s == 0.0:
        return 1.0
    return law.atom_mass + law.positive_mass * law.rate / (law.rate + s)


def _mixture_coefficient(params: ServiceLawParams) -> float:
    # X = (1 - e^-rho) (lam p + beta) / (lam + beta)
    if params.degenerate:
        raise DegenerateParameter("renewal function is singular at beta = -lambda")
    lam, beta, p = params.lam, params.beta, params.p
    return -math.expm1(-params.rho) * (lam * p + beta) / (lam + beta)


def renewal_function_paper(params: ServiceLawParams, t):
    """Busy-cycle renewal function in the published closed form.

    ``R(t) = e^-rho (1 + lam t) + X e^{-A t} + X`` with
    ``X = (1 - e^-rho)(lam p + beta)/(lam + beta)``, evaluated exactly as
    written.  Its slope and transient agree with :func:`renewal_oracle`;
    its constant term does not (see :func:`renewal_comparison`).
    """
    x = _mixture_coefficient(params)
    arr = np.asarray(t, dtype=float)
    out = math.exp(-params.rho) * (1.0 + params.lam * arr) + x * np.exp(-params.a_rate * arr) + x
    return float(out) if arr.ndim == 0 else out


def renewal_oracle(params: ServiceLawParams, t, convention: str = ORDINARY):
    """Renewal function of busy-period beginnings under the conjectured law.

    With cycle transform ``phi(s) = lam/(lam+s) * (mu + q s)/(mu + s)`` one
    gets ``1 - phi(s) = s (s + A) / ((lam+s)(mu+s))`` and partial fractions
    give

    * ``ordinary_cycle_start``: origin at a busy-period start, not counted;
      ``m(t) = lam e^-rho t - X (1 - e^{-A t})``.
    * ``delayed_idle_start``: origin at an idle-period start, first busy start
      after an Exp(lam) delay;
      ``m(t) = lam e^-rho t + lam (1 - e^-rho)/A (1 - e^{-A t})``.
    """
    arr = np.asarray(t, dtype=float)
    lam, a = params.lam, params.a_rate
    x = _mixture_coefficient(params)
    slope = lam * math.exp(-params.rho)
    decay = -np.expm1(-a * arr)
    if convention == ORDINARY:
        out = slope * arr - x * decay
    elif convention == DELAYED:
        out = slope * arr + lam * -math.expm1(-params.rho) / a * decay
    else:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    return float(out) if arr.ndim == 0 else out


def renewal_curve(params: ServiceLawParams, t_max: float, points: int) -> RenewalCurve:
    """Published form and both oracle conventions on ``points`` equally spaced times in ``[0, t_max]``."""
    if not t_max > 0 or points < 2:
        raise ValueError("renewal curve needs t_max > 0 and at least 2 points")
    t = np.linspace(0.0, t_max, points)
    return RenewalCurve(
        t_grid=t,
        r_paper=renewal_function_paper(params, t),
        r_oracle_ordinary=renewal_oracle(params, t, ORDINARY),
        r_oracle_delayed=renewal_oracle(params, t, DELAYED),
    )


def asymptotic_slope(params: ServiceLawParams) -> float:
    """Long-run rate of busy-period beginnings, ``1 / busy_cycle_mean``."""
    return params.lam * math.exp(-params.rho)


def fd_slope(func, params: ServiceLawParams) -> float:
    """Finite-difference slope of ``func(params, t)`` over ``t`` in ``[50/A, 100/A]``."""
    t0, t1 = 50.0 / params.a_rate, 100.0 / params.a_rate
    return (func(params, t1) - func(params, t0)) / (t1 - t0)


def renewal_comparison(params: ServiceLawParams) -> dict:
    """Term-by-term comparison of the published renewal function with the oracles.

    Every curve has the form ``slope * t + const + coef * e^{-A t}``.  The
    published form's constant exceeds the ordinary oracle's by
    ``e^-rho + 2 X``.
    """
    x = _mixture_coefficient(params)
    lam, a, d = params.lam, params.a_rate, math.exp(-params.rho)
    delayed_c = lam * (1.0 - d) / a
    terms = {
        "paper": {"slope": lam * d, "constant": d + x, "transient": x},
        ORDINARY: {"slope": lam * d, "constant": -x, "transient": x},
        DELAYED: {"slope": lam * d, "constant": delayed_c, "transient": -delayed_c},
    }
    target = asymptotic_slope(params)
    slopes = {
        "paper": fd_slope(renewal_function_paper, params),
        ORDINARY: fd_slope(lambda pr, t: renewal_oracle(pr, t, ORDINARY), params),
        DELAYED: fd_slope(lambda pr, t: renewal_oracle(pr, t, DELAYED), params),
    }
    return {
        "terms": terms,
        "target_slope": target,
        "fd_slopes": slopes,
        "slope_ok": all(abs(v - target) <= 1e-6 * target for v in slopes.values()),
        "mixture_coefficient_X": x,
        "paper_minus_ordinary_constant": terms["paper"]["constant"] - terms[ORDINARY]["constant"],
        "expected_discrepancy": d + 2.0 * x,
        "paper_at_zero": renewal_function_paper(params, 0.0),
    }
