"""Seeded Monte Carlo simulation of the M|G|oo queue under the Riccati family.

Busy periods are extracted with the max-departure method: the first
arrival after an idle period opens a busy period ending at its departure;
every later arrival before the current end joins a free server and may
push the end further; the first arrival at or after the end opens the
next cycle.  With infinitely many servers nothing else needs tracking.

Random streams
--------------
Replication ``i`` of a campaign seeded with ``master_seed`` draws from
``PCG64(stream_seed(master_seed, 2*i))`` for inter-arrival gaps and from
``PCG64(stream_seed(master_seed, 2*i)).jumped()`` for service times.  The
renewal-curve replications use index ``2*i + 1`` the same way.
``stream_seed`` is the SplitMix64 finaliser applied to
``master_seed + (index + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``.  Results are
merged in replication order, so output does not depend on the number of
worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from mginf import busy_analytics as ba
from mginf.errors import InsufficientSamples
from mginf.service_law import ServiceLawParams, cdf, quantile

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_BLOCK = 1 << 14

BUSY_START = "busy_start"
IDLE_START = "idle_start"
ORIGINS = (BUSY_START, IDLE_START)

MIN_CYCLES = 1000
KS_CRITICAL = 1.36  # 5% level


def stream_seed(master_seed: int, index: int) -> int:
    """SplitMix64 mix of ``(master_seed, index)`` into a 64-bit seed."""
    z = (int(master_seed) + (int(index) + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _streams(master_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    bits = np.random.PCG64(stream_seed(master_seed, index))
    return np.random.Generator(bits), np.random.Generator(bits.jumped())


@dataclass(frozen=True)
class SimConfig:
    params: ServiceLawParams
    n_cycles: int = 100_000
    replications: int = 8
    master_seed: int = 42
    renewal_origin: str = IDLE_START
    renewal_t_max: Optional[float] = None
    renewal_points: int = 51
    # renewal curves need many short timelines; defaults to ``replications``
    renewal_replications: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not (0 <= int(self.master_seed) <= _MASK64):
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.renewal_origin not in ORIGINS:
            raise ValueError(f"renewal_origin must be one of {ORIGINS}")
        if self.renewal_t_max is not None and not self.renewal_t_max > 0:
            raise ValueError("renewal_t_max must be positive")
        if self.renewal_points < 2:
            raise ValueError("renewal_points must be >= 2")
        if self.renewal_replications is not None and self.renewal_replications < 1:
            raise ValueError("renewal_replications must be >= 1")


@dataclass(frozen=True)
class CycleSample:
    idle_len: float
    busy_len: float


@dataclass
class CycleBatch:
    """All cycles of one replication, as parallel arrays."""

    idle: np.ndarray
    busy: np.ndarray
    services: Optional[np.ndarray] = None

    def __iter__(self) -> Iterator[CycleSample]:
        for i, b in zip(self.idle.tolist(), self.busy.tolist()):
            yield CycleSample(i, b)

    def __len__(self) -> int:
        return len(self.busy)


def _draws(draw: Callable[[int], np.ndarray]) -> Iterator[float]:
    while True:
        yield from draw(_BLOCK).tolist()


def _gap_iter(params: ServiceLawParams, rng: np.random.Generator) -> Iterator[float]:
    scale = 1.0 / params.lam
    return _draws(lambda k: rng.exponential(scale, k))


def _service_iter(params: ServiceLawParams, rng: np.random.Generator) -> Iterator[float]:
    return _draws(lambda k: np.asarray(quantile(params, rng.random(k))))


def _run_cycles(params: ServiceLawParams, n_cycles: int, seed_index: int, master_seed: int,
                record_services: bool) -> CycleBatch:
    arr_rng, svc_rng = _streams(master_seed, seed_index)
    gaps = _gap_iter(params, arr_rng)
    svcs = _service_iter(params, svc_rng)
    next_gap, next_svc = gaps.__next__, svcs.__next__
    idle = [0.0] * n_cycles
    busy = [0.0] * n_cycles
    served: list[float] = []
    keep = served.append if record_services else None

    # times are local to the current busy-period start
    pending_idle = next_gap()
    for c in range(n_cycles):
        idle[c] = pending_idle
        s = next_svc()
        if keep:
            keep(s)
        end = s
        a = next_gap()
        # ties (a == end) start a new cycle
        while a < end:
            s = next_svc()
            if keep:
                keep(s)
            if a + s > end:
                end = a + s
            a += next_gap()
        busy[c] = end
        pending_idle = a - end
    return CycleBatch(np.array(idle), np.array(busy), np.array(served) if record_services else None)


def _run_cycles_args(args: tuple) -> CycleBatch:
    return _run_cycles(*args)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def simulate_cycles(config: SimConfig, workers: int = 1, record_services: bool = False) -> list[CycleBatch]:
    """One :class:`CycleBatch` per replication, in replication order."""
    jobs = [
        (config.params, config.n_cycles, 2 * i, config.master_seed, record_services)
        for i in range(config.replications)
    ]
    return _map(_run_cycles_args, jobs, workers)


def pool_batches(batches: list[CycleBatch]) -> CycleBatch:
    services = None
    if all(b.services is not None for b in batches):
        services = np.concatenate([b.services for b in batches])
    return CycleBatch(
        np.concatenate([b.idle for b in batches]),
        np.concatenate([b.busy for b in batches]),
        services,
    )


def ks_distance(samples: np.ndarray, cdf_right: Callable, cdf_left: Optional[Callable] = None) -> float:
    """Kolmogorov-Smirnov sup distance that tolerates ties and atoms.

    ``cdf_left(x)`` is the left limit ``F(x-)``; it defaults to
    ``cdf_right`` (continuous hypothesis).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise InsufficientSamples("no samples")
    values, counts = np.unique(x, return_counts=True)
    upper = np.cumsum(counts) / n
    lower = upper - counts / n
    f_right = np.asarray(cdf_right(values), dtype=float)
    f_left = f_right if cdf_left is None else np.asarray(cdf_left(values), dtype=float)
    return float(max(np.max(np.abs(upper - f_right)), np.max(np.abs(lower - f_left))))


@dataclass(frozen=True)
class KSResult:
    ks_distance: float
    threshold: float
    passed: bool
    n: int
    cv2: float
    cv2_se: float
    cv2_ok: bool


def _cv2_with_se(x: np.ndarray) -> tuple[float, float]:
    # delta method on (E X, E X^2) for cv2 = E X^2 / (E X)^2 - 1
    n = len(x)
    m1 = float(np.mean(x))
    x2 = x * x
    m2 = float(np.mean(x2))
    cov = np.cov(np.vstack([x, x2]), ddof=1) / n
    grad = np.array([-2.0 * m2 / m1**3, 1.0 / m1**2])
    return m2 / m1**2 - 1.0, float(math.sqrt(grad @ cov @ grad))


def ks_exponential_check(samples, params: ServiceLawParams) -> KSResult:
    """Test the positive busy lengths against Exp(A e^-rho).

    ``samples`` may be a :class:`CycleBatch` or an array of busy lengths.
    """
    busy = samples.busy if isinstance(samples, CycleBatch) else np.asarray(samples, dtype=float)
    pos = busy[busy > 0.0]
    n = len(pos)
    if n < MIN_CYCLES:
        raise InsufficientSamples(f"need >= {MIN_CYCLES} positive busy lengths, got {n}")
    mu = ba.conjectured_busy_law(params).rate
    if mu <= 0.0:
        raise InsufficientSamples("conjectured busy law has no exponential part")
    dist = ks_distance(pos, lambda v: -np.expm1(-mu * v))
    threshold = KS_CRITICAL / math.sqrt(n)
    cv2, cv2_se = _cv2_with_se(pos)
    return KSResult(dist, threshold, dist < threshold, n, cv2, cv2_se, abs(cv2 - 1.0) <= 5.0 * cv2_se)


def service_ks_check(services: np.ndarray, params: ServiceLawParams) -> tuple[float, float, bool]:
    """KS check of pooled service draws against :func:`cdf`, atom included."""
    s = np.asarray(services, dtype=float)
    dist = ks_distance(
        s,
        lambda v: cdf(params, v),
        lambda v: np.where(v <= 0.0, 0.0, cdf(params, v)),
    )
    threshold = KS_CRITICAL / math.sqrt(len(s))
    return dist, threshold, dist < threshold


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float


@dataclass(frozen=True)
class SimStats:
    n_total_cycles: int
    mean_busy: Estimate
    mean_cycle: Estimate
    mean_idle: Estimate
    atom_fraction: Estimate
    lt_busy_at_inv_alpha: Estimate
    lt_cycle_at_inv_alpha: Estimate
    cv2_positive_busy: Optional[Estimate]
    ks: Optional[KSResult]


def _mean_se(x: np.ndarray) -> Estimate:
    n = len(x)
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return Estimate(float(np.mean(x)), sd / math.sqrt(n))


def estimate_stats(samples, params: ServiceLawParams) -> SimStats:
    """Summaries with standard errors ``sd / sqrt(n)`` over pooled cycles.

    ``samples`` is a :class:`CycleBatch` or a list of them.
    """
    batch = pool_batches(samples) if isinstance(samples, list) else samples
    n = len(batch)
    if n < MIN_CYCLES:
        raise InsufficientSamples(f"need >= {MIN_CYCLES} cycles, got {n}")
    busy, idle = batch.busy, batch.idle
    cycle = idle + busy
    s = 1.0 / params.alpha
    ks = None
    cv2 = None
    if np.count_nonzero(busy > 0.0) >= MIN_CYCLES and not params.degenerate:
        ks = ks_exponential_check(busy, params)
        cv2 = Estimate(ks.cv2, ks.cv2_se)
    return SimStats(
        n_total_cycles=n,
        mean_busy=_mean_se(busy),
        mean_cycle=_mean_se(cycle),
        mean_idle=_mean_se(idle),
        atom_fraction=_mean_se((busy == 0.0).astype(float)),
        lt_busy_at_inv_alpha=_mean_se(np.exp(-s * busy)),
        lt_cycle_at_inv_alpha=_mean_se(np.exp(-s * cycle)),
        cv2_positive_busy=cv2,
        ks=ks,
    )


def _z_verdict(name: str, est: Estimate, target: float, k: float = 3.0) -> dict:
    diff = est.value - target
    if est.se > 0.0:
        z = diff / est.se
        ok = abs(z) <= k
    else:
        z = 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        ok = abs(diff) <= 1e-12 * max(1.0, abs(target))
    return {"name": name, "estimate": est.value, "se": est.se, "target": target, "z": z, "pass": bool(ok)}


def verdicts(stats: SimStats, params: ServiceLawParams) -> list[dict]:
    """Three-standard-error comparisons of every estimate with its analytic value."""
    out = [
        _z_verdict("mean_busy", stats.mean_busy, ba.busy_period_mean(params)),
        _z_verdict("mean_cycle", stats.mean_cycle, ba.busy_cycle_mean(params)),
        _z_verdict("mean_idle", stats.mean_idle, 1.0 / params.lam),
        _z_verdict("atom_fraction", stats.atom_fraction, params.atom),
        _z_verdict("lt_busy_at_inv_alpha", stats.lt_busy_at_inv_alpha, ba.peakedness_busy(params)),
        _z_verdict("lt_cycle_at_inv_alpha", stats.lt_cycle_at_inv_alpha, ba.peakedness_cycle(params)),
    ]
    if stats.ks is not None:
        out.append({
            "name": "ks_exponential_positive_busy",
            "estimate": stats.ks.ks_distance,
            "threshold": stats.ks.threshold,
            "n": stats.ks.n,
            "pass": bool(stats.ks.passed),
        })
        out.append(_z_verdict("cv2_positive_busy", stats.cv2_positive_busy, 1.0, k=5.0))
    return out


# --- renewal curve -------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalRenewal:
    origin: str
    t_grid: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    slope: Estimate


def _renewal_counts(params: ServiceLawParams, origin: str, t_grid: np.ndarray,
                    seed_index: int, master_seed: int) -> np.ndarray:
    arr_rng, svc_rng = _streams(master_seed, seed_index)
    next_gap = _gap_iter(params, arr_rng).__next__
    next_svc = _service_iter(params, svc_rng).__next__
    t_max = float(t_grid[-1])
    starts: list[float] = []
    now = 0.0 if origin == BUSY_START else next_gap()
    while now <= t_max:
        starts.append(now)
        end = next_svc()
        a = next_gap()
        while a < end:
            s = next_svc()
            if a + s > end:
                end = a + s
            a += next_gap()
        now += a
    return np.searchsorted(np.array(starts), t_grid, side="right").astype(float)


def _renewal_counts_args(args: tuple) -> np.ndarray:
    return _renewal_counts(*args)


def estimate_renewal_curve(config: SimConfig, workers: int = 1) -> EmpiricalRenewal:
    """Ensemble-average count of busy-period beginnings in ``[0, t]``.

    Each replication runs a fresh timeline from the configured origin;
    ``busy_start`` counts the beginning at ``t = 0``.  The slope estimate
    uses the second half of the grid.
    """
    if config.renewal_t_max is None:
        raise ValueError("renewal_t_max must be set for a renewal curve")
    reps = config.renewal_replications or config.replications
    t_grid = np.linspace(0.0, config.renewal_t_max, config.renewal_points)
    jobs = [(config.params, config.renewal_origin, t_grid, 2 * i + 1, config.master_seed) for i in range(reps)]
    counts = np.vstack(_map(_renewal_counts_args, jobs, workers))
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros_like(mean)
    half = t_grid[-1] / 2.0
    mid = int(np.searchsorted(t_grid, half))
    per_rep = (counts[:, -1] - counts[:, mid]) / (t_grid[-1] - t_grid[mid])
    slope_se = float(np.std(per_rep, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return EmpiricalRenewal(config.renewal_origin, t_grid, mean, se, Estimate(float(per_rep.mean()), slope_se))


def renewal_adjudication(emp: EmpiricalRenewal, params: ServiceLawParams) -> dict:
    """Compare the empirical curve with the published form and the oracles.

    For ``busy_start`` the matching oracle is ``1 + ordinary`` (the origin
    is counted); for ``idle_start`` it is the delayed convention.
    """
    t = emp.t_grid
    candidates = {"paper": ba.renewal_function_paper(params, t)}
    if params.degenerate:
        candidates = {}
    else:
        ordinary = ba.renewal_oracle(params, t, ba.ORDINARY)
        candidates[ba.ORDINARY] = ordinary
        candidates[ba.ORDINARY + "+1"] = ordinary + 1.0
        candidates[ba.DELAYED] = ba.renewal_oracle(params, t, ba.DELAYED)
    target_slope = ba.asymptotic_slope(params)
    report = {
        "origin": emp.origin,
        "target_slope": target_slope,
        "empirical_slope": emp.slope.value,
        "empirical_slope_se": emp.slope.se,
        "slope_rel_error": abs(emp.slope.value - target_slope) / target_slope,
        "slope_ok": bool(abs(emp.slope.value - target_slope) <= 0.02 * target_slope),
        "candidates": {},
    }
    for name, curve in candidates.items():
        diff = emp.mean - curve
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(emp.se > 0, diff / np.where(emp.se > 0, emp.se, 1.0),
                         np.where(np.abs(diff) <= 1e-12, 0.0, np.inf))
        report["candidates"][name] = {
            "max_abs_z": float(np.max(np.abs(z))),
            "max_abs_diff": float(np.max(np.abs(diff))),
            "within_3se": bool(np.all(np.abs(z) <= 3.0)),
        }
    matches = [k for k, v in report["candidates"].items() if v["within_3se"]]
    report["matching"] = matches
    if not params.degenerate:
        report["paper_minus_ordinary_constant"] = ba.renewal_comparison(params)["paper_minus_ordinary_constant"]
    return report
