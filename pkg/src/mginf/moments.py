"""Raw moments E[T^n] of the Riccati service family.

Four routes are provided:

* :func:`moment_bounds` -- closed-form two-sided bounds, valid for every n;
* :func:`moment_series` -- the Laplace-transform series, convergent for
  ``rho < log 2``, truncated with a rigorous geometric tail bound;
* :func:`moment_grid` -- the upper Riemann-Stieltjes sum on the grid k/m;
* :func:`moment_quadrature` -- adaptive quadrature of ``n t^{n-1} S(t)``,
  used as the reference value by the other three.

Double precision is adequate up to roughly n = 150 for A near 1; beyond
that the prefactor ``n! / A^n`` leaves the representable range and
:class:`OverflowError` is raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from mginf.errors import DegenerateParameter, RhoTooLarge
from mginf.service_law import ServiceLawParams, quantile, survival

LOG2 = math.log(2.0)
# factorials switch to log space past this order
_DIRECT_FACTORIAL_MAX = 18
# relative size allowed for the neglected quadrature tail
_QUAD_TAIL_REL = 1e-12


@dataclass(frozen=True)
class MomentEstimate:
    n: int
    value: float
    method: str
    error_bound: float
    truncation: int
    # reference-only values (e.g. the printed truncation rules) for reporting
    extras: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class MomentBounds:
    n: int
    lower: float
    upper: float


def _check_order(n: int) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"moment order must be a positive integer, got {n!r}")


def _require_nondegenerate(params: ServiceLawParams) -> None:
    if params.degenerate:
        raise DegenerateParameter("beta = -lambda: T is identically 0 and every moment vanishes")


def _scaled_factorial(n: int, a_rate: float, power: int, log_scale: float = 0.0) -> float:
    """``exp(log_scale) * n! / a_rate**power`` without intermediate overflow."""
    if n <= _DIRECT_FACTORIAL_MAX:
        return math.exp(log_scale) * math.factorial(n) / a_rate**power
    return math.exp(log_scale + math.lgamma(n + 1) - power * math.log(a_rate))


def moment_bounds(params: ServiceLawParams, n: int) -> MomentBounds:
    """Two-sided bounds on E[T^n] from bounding the density's denominator.

    ``lower = (1-e^-rho) e^-rho / lam * n!/A^(n-1)``,
    ``upper = (e^rho - 1) / lam * n!/A^(n-1)``.  For n = 1 the upper bound
    is the busy-period mean ``(e^rho - 1)/lam``.
    """
    _check_order(n)
    _require_nondegenerate(params)
    rho, lam, a = params.rho, params.lam, params.a_rate
    lower_c = -math.expm1(-rho) * math.exp(-rho) / lam
    upper_c = math.expm1(rho) / lam
    lower = _scaled_factorial(n, a, n - 1, math.log(lower_c))
    upper = _scaled_factorial(n, a, n - 1, math.log(upper_c))
    return MomentBounds(n, lower, upper)


def variance_bounds(params: ServiceLawParams) -> tuple[float, float]:
    """Bounds on Var[T] from the n = 2 moment bounds minus alpha^2 (lower clamped at 0)."""
    b = moment_bounds(params, 2)
    a2 = params.alpha**2
    return max(0.0, b.lower - a2), b.upper - a2


def _series_prefactor(params: ServiceLawParams, n: int) -> float:
    # (A/lam) * n! / A^n
    return _scaled_factorial(n, params.a_rate, n, math.log(params.a_rate / params.lam))


def _series_ratio(params: ServiceLawParams) -> float:
    if params.rho >= LOG2:
        raise RhoTooLarge(f"series needs rho < log 2 = {LOG2:.6f}, got rho={params.rho!r}")
    return -math.expm1(params.rho)  # x = 1 - e^rho, |x| < 1


def _tail_bound(pref: float, absx: float, n: int, m_terms: int) -> float:
    log_b = (
        math.log(pref)
        + (m_terms + 1) * math.log(absx)
        - n * math.log(m_terms + 1)
        - math.log1p(-absx)
    )
    return math.exp(log_b)


def truncation_length(params: ServiceLawParams, n: int, eps: float) -> tuple[int, int, int]:
    """Series lengths ``(M_rigorous, M_a, M_b)`` for absolute tolerance ``eps``.

    ``M_rigorous`` is the smallest M whose geometric tail bound
    ``(A/lam) n!/(A^n (M+1)^n) |x|^(M+1) / (1-|x|)`` is at most ``eps``.
    ``M_a`` and ``M_b`` evaluate the two printed sufficient conditions
    (``M > 1/A - 1`` and ``M > log_{e^rho-1}(eps e^rho lam / (n! A)) - 1``);
    they are reported only, the second with an unverified exponent of 1.
    """
    _check_order(n)
    _require_nondegenerate(params)
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    x = _series_ratio(params)
    absx = abs(x)
    pref = _series_prefactor(params, n)

    if absx == 0.0 or _tail_bound(pref, absx, n, 0) <= eps:
        m_rig = 0
    else:
        hi = 1
        while _tail_bound(pref, absx, n, hi) > eps:
            hi *= 2
        lo = hi // 2  # bound(lo) > eps
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _tail_bound(pref, absx, n, mid) > eps:
                lo = mid
            else:
                hi = mid
        m_rig = hi

    a = params.a_rate
    m_a = max(0, math.ceil(1.0 / a - 1.0))
    arg = eps * math.exp(params.rho) * params.lam / _scaled_factorial(n, a, -1)
    # log base (e^rho - 1) < 1
    m_b_real = math.log(arg) / math.log(math.expm1(params.rho)) - 1.0
    m_b = max(0, math.ceil(m_b_real)) if math.isfinite(m_b_real) else 0
    return m_rig, m_a, m_b


def moment_series(params: ServiceLawParams, n: int, eps: float = 1e-10) -> MomentEstimate:
    """E[T^n] from the series ``-(A/lam) n! sum_k (1-e^rho)^k / (k^n A^n)``.

    Requires ``rho < log 2``.  The number of terms is the largest of the
    three lengths from :func:`truncation_length`, so the reported error
    bound never exceeds ``eps``.
    """
    m_rig, m_a, m_b = truncation_length(params, n, eps)
    m_terms = max(m_rig, m_a, m_b, 1)
    x = _series_ratio(params)
    absx = abs(x)
    pref = _series_prefactor(params, n)

    k = np.arange(1, m_terms + 1, dtype=float)
    # -(x^k) / k^n with x < 0: sign is (-1)^(k+1)
    mags = np.exp(k * math.log(absx) - n * np.log(k))
    signs = np.where(k % 2 == 1, 1.0, -1.0)
    total = math.fsum((signs * mags)[::-1])
    value = pref * total
    bound = _tail_bound(pref, absx, n, m_terms)
    return MomentEstimate(
        n,
        value,
        "series",
        bound,
        m_terms,
        extras={"M_rigorous": m_rig, "M_a": m_a, "M_b": m_b, "M_b_status": "paper-form, unverified"},
    )


def _grid_last_index(params: ServiceLawParams, m: int, tail_tol: float) -> int:
    k = max(1, math.ceil(20.0 * m / params.a_rate))
    if float(survival(params, k / m)) < tail_tol:
        return k
    # S(t) < tol beyond the (1 - tol)-quantile; jump there, then step
    k = max(k, math.floor(m * float(quantile(params, 1.0 - tail_tol))) - 1)
    while float(survival(params, k / m)) >= tail_tol:
        k += 1
    return k


def moment_grid(
    params: ServiceLawParams,
    n: int,
    m: int,
    tail_tol: float = 1e-12,
    chunk: int = 1 << 20,
) -> MomentEstimate:
    """Grid estimate ``sum_k (k/m)^n [G(k/m) - G((k-1)/m)]``.

    The sum stops at the first K with ``1 - G(K/m) < tail_tol`` and
    ``K/m >= 20/A``.  Because ``t^n`` is increasing this is an upper sum and
    overestimates E[T^n] apart from the neglected tail; it tends to E[T^n]
    as ``m`` grows.  No rigorous error bound is available, so
    ``error_bound`` is NaN.  For ``beta = -lam`` the value is 0.
    """
    _check_order(n)
    if int(m) != m or m < 1:
        raise ValueError("grid density m must be a positive integer")
    if not (0.0 < tail_tol < 1.0):
        raise ValueError("tail_tol must lie in (0, 1)")
    if params.degenerate:
        return MomentEstimate(n, 0.0, "grid", 0.0, 0)

    last = _grid_last_index(params, m, tail_tol)
    parts = []
    for start in range(1, last + 1, chunk):
        k = np.arange(start, min(start + chunk, last + 1), dtype=float)
        s_prev = np.asarray(survival(params, (k - 1.0) / m))
        s_here = np.asarray(survival(params, k / m))
        parts.append(float(np.sum((k / m) ** n * (s_prev - s_here))))
    return MomentEstimate(n, math.fsum(parts), "grid", math.nan, last)


def moment_quadrature(params: ServiceLawParams, n: int) -> MomentEstimate:
    """Reference E[T^n] = n * integral of t^(n-1) S(t) by adaptive quadrature.

    Integrates in the scaled variable ``s = A t`` on ``[0, s_cut]``, where
    ``s_cut`` makes the exponential tail bound of S below 1e-12 of the
    moment.  ``error_bound`` adds the quadrature estimate and the tail bound.
    """
    _check_order(n)
    _require_nondegenerate(params)
    q = -math.expm1(-params.rho)
    d = math.exp(-params.rho)

    def h(s: float) -> float:
        e = math.exp(-s)
        return s ** (n - 1) * q * e / (d + q * e)

    # integral >= q (n-1)!, tail <= (q/d) (n-1)! Q(n, s_cut)
    s_cut = float(special.gammainccinv(n, 0.5 * _QUAD_TAIL_REL * d))
    tail = (q / d) * math.gamma(n) * float(special.gammaincc(n, s_cut))
    pieces = np.unique(np.concatenate(([0.0], np.linspace(0.0, s_cut, 9)[1:], [float(n - 1)])))
    pieces = pieces[pieces <= s_cut]
    total = 0.0
    err = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        val, abserr = integrate.quad(h, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
        err += abserr
    # n / A^n * (A / lam)
    scale = math.exp(math.log(n) + math.log(params.a_rate / params.lam) - n * math.log(params.a_rate))
    value = scale * total
    return MomentEstimate(n, value, "quadrature", scale * (err + tail), len(pieces) - 1)


def moment_bounds_midpoint(params: ServiceLawParams, n: int) -> MomentEstimate:
    """Midpoint of :func:`moment_bounds`, with half the width as error bound."""
    b = moment_bounds(params, n)
    return MomentEstimate(n, 0.5 * (b.lower + b.upper), "bounds-midpoint", 0.5 * (b.upper - b.lower), 0)
