"""Riccati service-time family for the M|G|oo queue.

The family is indexed by the arrival rate ``lam``, the traffic intensity
``rho = lam * alpha``, a constant ``beta`` and a mixing weight ``p``.  Its
survival function is

    S(t) = (1 - e^-rho) (A / lam) e^{-A t} / (e^-rho + (1 - e^-rho) e^{-A t})

with ``A = (lam + beta) / (1 - p)``.  Every routine below works with the
decaying exponential ``e^{-A t}`` only, so large ``t`` underflows to the
correct limit instead of overflowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from mginf.errors import (
    BetaAboveMax,
    BetaBelowMinusLambda,
    BetaInadmissible,
    DegenerateParameter,
    IndistinctSolutions,
    NonPositiveLambda,
    NonPositiveRho,
    ParameterError,
    POutOfRange,
    SeriesDiverges,
    UOutOfRange,
)

ArrayLike = Union[float, np.ndarray]

# relative slack when comparing beta against beta_max; inputs within it snap
# to beta_max so fraction-built grids stay admissible under rounding
_BETA_SNAP = 1e-12


def beta_max_for(lam: float, rho: float, p: float) -> float:
    """Upper end of the admissible beta interval, lam (1 - p e^rho) / (e^rho - 1)."""
    return lam * (1.0 - p * math.exp(rho)) / math.expm1(rho)


@dataclass(frozen=True)
class ServiceLawParams:
    """Validated parameter point ``(lam, rho, beta, p)`` with derived quantities.

    Attributes
    ----------
    lam, rho, beta, p : float
        Arrival rate, traffic intensity, Riccati constant and mixing weight.
    alpha : float
        Mean service time ``rho / lam``.
    a_rate : float
        Exponential rate ``A = (lam + beta) / (1 - p)``; zero iff ``beta == -lam``.
    beta_max : float
        Largest admissible ``beta`` for this ``(lam, rho, p)``.
    atom : float
        Probability mass at zero, ``G(0)``.
    """

    lam: float
    rho: float
    beta: float
    p: float
    alpha: float = field(init=False)
    a_rate: float = field(init=False)
    beta_max: float = field(init=False)
    atom: float = field(init=False)

    def __post_init__(self) -> None:
        lam, rho, beta, p = (float(v) for v in (self.lam, self.rho, self.beta, self.p))
        if not lam > 0.0 or not math.isfinite(lam):
            raise NonPositiveLambda(f"lambda must be a positive finite number, got {lam!r}")
        if not rho > 0.0 or not math.isfinite(rho):
            raise NonPositiveRho(f"rho must be a positive finite number, got {rho!r}")
        if not (0.0 <= p < 1.0):
            raise POutOfRange(f"p must lie in [0, 1), got {p!r}")
        if not math.isfinite(beta):
            raise ParameterError(f"beta must be finite, got {beta!r}")
        bmax = beta_max_for(lam, rho, p)
        if beta < -lam:
            raise BetaBelowMinusLambda(f"beta={beta!r} is below -lambda={-lam!r}")
        if beta > bmax:
            if beta - bmax > _BETA_SNAP * max(1.0, abs(bmax)):
                raise BetaAboveMax(beta, bmax)
            beta = bmax

        if beta == -lam:
            a_rate = 0.0
            atom = 1.0
        else:
            a_rate = (lam + beta) / (1.0 - p)
            # difference form is exact at beta_max and loses nothing near it
            atom = -math.expm1(-rho) * (bmax - beta) / (lam * (1.0 - p))
            atom = min(max(atom, 0.0), 1.0)

        for name, value in (("lam", lam), ("rho", rho), ("beta", beta), ("p", p)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, "alpha", rho / lam)
        object.__setattr__(self, "a_rate", a_rate)
        object.__setattr__(self, "beta_max", bmax)
        object.__setattr__(self, "atom", atom)

    @property
    def degenerate(self) -> bool:
        """True when ``beta == -lam`` and the service time is identically zero."""
        return self.a_rate == 0.0

    @classmethod
    def from_fraction(cls, lam: float, rho: float, p: float, fraction: float) -> "ServiceLawParams":
        """Build params with ``beta`` placed at ``fraction`` of ``[-lam, beta_max]``."""
        if not (0.0 <= fraction <= 1.0):
            raise ParameterError(f"beta fraction must lie in [0, 1], got {fraction!r}")
        bmax = beta_max_for(lam, rho, p)
        if fraction == 1.0:
            beta = bmax
        elif fraction == 0.0:
            beta = -float(lam)
        else:
            beta = -lam + fraction * (bmax + lam)
        return cls(lam, rho, beta, p)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "rho": self.rho,
            "beta": self.beta,
            "p": self.p,
            "alpha": self.alpha,
            "a_rate": self.a_rate,
            "beta_max": self.beta_max,
            "atom": self.atom,
        }


def validate(lam: float, rho: float, beta: float, p: float) -> ServiceLawParams:
    """Check the admissibility constraints and return the derived parameter record."""
    return ServiceLawParams(lam, rho, beta, p)


def _wrap(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def survival(params: ServiceLawParams, t: ArrayLike) -> ArrayLike:
    """``1 - G(t)``; equals 1 for ``t < 0``."""
    arr = np.asarray(t, dtype=float)
    if params.degenerate:
        out = np.where(arr < 0.0, 1.0, 0.0)
        return _wrap(out, arr.ndim == 0)
    q = -math.expm1(-params.rho)
    d = math.exp(-params.rho)
    u = np.exp(-params.a_rate * np.maximum(arr, 0.0))
    s = q * (params.a_rate / params.lam) * u / (d + q * u)
    # at t = 0 use the atom directly so cdf(0) == atom bit for bit
    s = np.where(arr == 0.0, 1.0 - params.atom, s)
    out = np.where(arr < 0.0, 1.0, s)
    return _wrap(out, arr.ndim == 0)


def cdf(params: ServiceLawParams, t: ArrayLike) -> ArrayLike:
    """Distribution function ``G(t)``, including the atom at the origin."""
    arr = np.asarray(t, dtype=float)
    out = np.where(arr < 0.0, 0.0, 1.0 - np.asarray(survival(params, arr)))
    return _wrap(out, arr.ndim == 0)


def pdf(params: ServiceLawParams, t: ArrayLike) -> ArrayLike:
    """Density of the continuous part; ``t = 0`` gives the right limit ``g(0+)``.

    The density integrates to ``1 - atom``, not to one.
    """
    if params.degenerate:
        raise DegenerateParameter("density undefined at beta = -lambda (point mass at 0)")
    arr = np.asarray(t, dtype=float)
    q = -math.expm1(-params.rho)
    d = math.exp(-params.rho)
    a = params.a_rate
    u = np.exp(-a * np.maximum(arr, 0.0))
    g = q * d * a * a * u / (params.lam * (d + q * u) ** 2)
    out = np.where(arr < 0.0, 0.0, g)
    return _wrap(out, arr.ndim == 0)


def hazard(params: ServiceLawParams, t: ArrayLike) -> ArrayLike:
    """``g(t) / (1 - G(t))`` in the cancelled form ``A e^-rho / (e^-rho + (1 - e^-rho) e^{-At})``."""
    if params.degenerate:
        raise DegenerateParameter("hazard undefined at beta = -lambda")
    arr = np.asarray(t, dtype=float)
    q = -math.expm1(-params.rho)
    d = math.exp(-params.rho)
    u = np.exp(-params.a_rate * np.maximum(arr, 0.0))
    return _wrap(params.a_rate * d / (d + q * u), arr.ndim == 0)


def quantile(params: ServiceLawParams, u: ArrayLike) -> ArrayLike:
    """Inverse of :func:`cdf`; levels at or below the atom map to 0."""
    arr = np.asarray(u, dtype=float)
    if np.any((arr < 0.0) | (arr >= 1.0)) or np.any(np.isnan(arr)):
        raise UOutOfRange("quantile levels must lie in [0, 1)")
    if params.degenerate:
        return _wrap(np.zeros_like(arr), arr.ndim == 0)
    c = 1.0 - params.atom
    # inner = e^rho (c / (1 - u) - 1) is <= 0 exactly on the atom
    inner = math.exp(params.rho) * (c - (1.0 - arr)) / (1.0 - arr)
    with np.errstate(invalid="ignore"):
        t = np.log1p(np.maximum(inner, 0.0)) / params.a_rate
    return _wrap(t, arr.ndim == 0)


def sample(params: ServiceLawParams, rng: np.random.Generator, size: int | None = None) -> ArrayLike:
    """Inverse-transform draw(s) from the family using ``rng.random()``."""
    return quantile(params, rng.random(size))


def ode_residual(params: ServiceLawParams, t: ArrayLike) -> ArrayLike:
    """Residual of ``(1-p) g/(1-G) - lam p - lam (1-p) G - beta`` at ``t``.

    Zero for every member of the family.
    """
    if params.degenerate:
        raise DegenerateParameter("ODE residual undefined at beta = -lambda")
    arr = np.asarray(t, dtype=float)
    lam, p = params.lam, params.p
    g = np.asarray(pdf(params, arr))
    s = np.asarray(survival(params, arr))
    res = (1.0 - p) * g / s - lam * p - lam * (1.0 - p) * (1.0 - s) - params.beta
    return _wrap(res, arr.ndim == 0)


def cross_ratio(
    lam: float,
    beta: float,
    p: float,
    rhos: tuple[float, float, float, float],
    t: float,
) -> tuple[float, float]:
    """Cross-ratio of four family members sharing ``(lam, beta, p)`` at time ``t``.

    Returns ``(lhs, rhs)`` where ``lhs`` is built from the distribution
    functions at ``t`` and ``rhs`` from ``e^-rho_i``.  Both agree for every
    ``t`` because the members solve a common Riccati equation.
    """
    if len(rhos) != 4:
        raise ValueError("exactly four rho values are required")
    members = []
    for r in rhos:
        try:
            members.append(ServiceLawParams(lam, r, beta, p))
        except ParameterError as exc:
            raise BetaInadmissible(r, str(exc)) from exc

    # G_i - G_j = S_j - S_i, which keeps precision when all G are near 1
    s = [float(survival(m, t)) for m in members]
    e = [math.exp(-r) for r in rhos]
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(s[i] - s[j]) < 1e-300 or abs(e[i] - e[j]) < 1e-300:
                raise IndistinctSolutions(f"solutions {i + 1} and {j + 1} coincide at t={t!r}")

    s1, s2, s3, s4 = s
    lhs = ((s2 - s4) * (s1 - s3)) / ((s1 - s4) * (s2 - s3))
    e1, e2, e3, e4 = e
    rhs = ((e4 - e2) * (e3 - e1)) / ((e4 - e1) * (e3 - e2))
    return lhs, rhs


def series_cdf_partial(params: ServiceLawParams, t: float, k_terms: int) -> tuple[float, float]:
    """Geometric-series expansion of :func:`cdf` truncated after ``k_terms + 1`` terms.

    Uses ``G(t) = (1 + c x u) / (1 - x u)`` with ``x = 1 - e^rho``,
    ``u = e^{-A t}`` and ``c = (lam p + beta) / (lam (1 - p))``, so the
    expansion is ``(1 + c x u) * sum_{k=0}^{K} (x u)^k``.

    Returns ``(partial_sum, tail_bound)`` where ``tail_bound`` bounds the
    absolute truncation error.
    """
    if k_terms < 0:
        raise ValueError("k_terms must be >= 0")
    x = -math.expm1(params.rho)
    u = math.exp(-params.a_rate * t)
    z = x * u
    if abs(z) >= 1.0:
        raise SeriesDiverges(
            f"|(e^rho - 1) e^(-A t)| = {abs(z):.6g} >= 1; the expansion needs rho < log 2 at t = 0"
        )
    c = (params.lam * params.p + params.beta) / (params.lam * (1.0 - params.p))
    lead = 1.0 + c * x * u
    k = np.arange(k_terms + 1)
    partial = lead * float(np.sum(z**k))
    tail = abs(lead) * abs(z) ** (k_terms + 1) / (1.0 - abs(z))
    return partial, tail
