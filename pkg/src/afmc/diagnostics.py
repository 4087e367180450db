"""Empirical laws, distances between them, and coupling diagnostics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError
from .expr import CoefficientExpr, parse_coefficient_expr
from .parallel import run_paths
from .processes import bm_knots, euler_knots
from .sources import RngStream, streams

METRICS = ("ks_one_sample", "ks_two_sample", "wasserstein1", "supnorm")


@dataclass(eq=False)
class SampleSummary:
    values: np.ndarray
    band: tuple | None = None  # (level, replicates, lo, hi) for the mean

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise DomainError("empty sample")
        self.values = v

    @property
    def M(self) -> int:
        return int(self.values.size)

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def se(self) -> float:
        if self.M < 2:
            return 0.0
        return float(self.values.std(ddof=1) / math.sqrt(self.M))

    def bootstrap(self, stream: RngStream, level: float = 0.95, replicates: int = 1000) -> SampleSummary:
        """Percentile bootstrap band for the mean."""
        idx = stream.gen.integers(0, self.M, size=(replicates, self.M))
        means = self.values[idx].mean(axis=1)
        q = (1.0 - level) / 2.0
        lo, hi = np.quantile(means, [q, 1.0 - q])
        return SampleSummary(self.values, (level, replicates, float(lo), float(hi)))


def summarize(values) -> SampleSummary:
    return SampleSummary(values)


@dataclass
class DistanceReport:
    metric: str
    value: float
    m_a: int
    m_b: int | None = None
    noise_floor: float | None = None
    tolerance: float | None = None
    passed: bool | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigurationError(f"unknown metric {self.metric!r}")
        if self.value < 0:
            raise DomainError("distances are non-negative")

    def judge(self, tolerance: float) -> DistanceReport:
        return DistanceReport(self.metric, self.value, self.m_a, self.m_b, self.noise_floor,
                              tolerance, bool(self.value < tolerance))

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _sample(x) -> np.ndarray:
    v = x.values if isinstance(x, SampleSummary) else np.sort(np.asarray(x, dtype=float).ravel())
    if v.size == 0:
        raise DomainError("empty sample")
    return v


def ks_distance(sample, reference) -> DistanceReport:
    """Kolmogorov distance to a CDF (callable) or to a second sample."""
    a = _sample(sample)
    m = a.size
    if callable(reference):
        F = np.asarray(reference(a), dtype=float)
        i = np.arange(1, m + 1)
        d = max(float(np.max(i / m - F)), float(np.max(F - (i - 1) / m)))
        return DistanceReport("ks_one_sample", max(d, 0.0), m)
    b = _sample(reference)
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / m
    Fb = np.searchsorted(b, grid, side="right") / b.size
    return DistanceReport("ks_two_sample", float(np.max(np.abs(Fa - Fb))), m, int(b.size))


def wasserstein1(sample_a, sample_b, stream: RngStream | None = None) -> DistanceReport:
    """Mean absolute difference of order statistics, subsampling the larger sample."""
    a, b = _sample(sample_a), _sample(sample_b)
    ma, mb = a.size, b.size
    if ma != mb:
        rng = stream.gen if stream is not None else np.random.default_rng(0)
        if ma > mb:
            a = np.sort(rng.choice(a, size=mb, replace=False))
        else:
            b = np.sort(rng.choice(b, size=ma, replace=False))
    return DistanceReport("wasserstein1", float(np.mean(np.abs(a - b))), ma, mb)


def supnorm_report(gap: float, noise_floor: float, m: int) -> DistanceReport:
    return DistanceReport("supnorm", float(gap), m, noise_floor=noise_floor)


# reference laws -------------------------------------------------------------

def abs_normal_cdf(scale: float = 1.0) -> Callable:
    """CDF of scale * |N(0,1)|."""
    from scipy.special import erf

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 0.0, erf(np.maximum(x, 0) / (scale * math.sqrt(2.0))))

    return F


# coupling diagnostics ---------------------------------------------------------

@dataclass(frozen=True)
class L2Discrepancy:
    mean: float
    se: float
    median: float
    bound: float | None = None


def coupled_l2_discrepancy(chain_values, limit_values, f_norm: float | None = None,
                           G: float | None = None, gamma: float | None = None) -> L2Discrepancy:
    """Monte-Carlo E(phi_n - phi)^2 over coupled pairs with the optional bound shape."""
    x = np.asarray(chain_values, dtype=float).ravel()
    y = np.asarray(limit_values, dtype=float).ravel()
    if x.size != y.size:
        raise DomainError(f"mismatched pair counts: {x.size} chain values vs {y.size} limit values")
    if x.size == 0:
        raise DomainError("empty sample")
    sq = (x - y) ** 2
    se = float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else 0.0
    bound = None
    if f_norm is not None and G is not None and gamma is not None:
        bound = 4.0 * f_norm * G + 4.0 * math.sqrt(2.0 * gamma) * f_norm ** 2
    return L2Discrepancy(float(sq.mean()), se, float(np.median(sq)), bound)


@dataclass(frozen=True)
class ProbabilityEstimate:
    p: float
    se: float
    M: int


def coupling_condition_iii(chain_knots: np.ndarray, limit_knots: np.ndarray, n: int, gamma: float,
                           T: float, K: int = 1, limit_refine: int = 1) -> ProbabilityEstimate:
    """Fraction of pairs with max_{i <= Tn/K} |chain(iK/n) - limit(iK/n)| > gamma."""
    if not isinstance(K, (int, np.integer)) or isinstance(K, bool) or K < 1:
        raise DomainError(f"K must be a positive integer, got {K!r}")
    chain = np.asarray(chain_knots, dtype=float)
    limit = np.asarray(limit_knots, dtype=float)
    if chain.shape[0] != limit.shape[0]:
        raise DomainError("mismatched pair counts")
    imax = int(math.floor(T * n / K + 1e-9))
    idx = np.arange(imax + 1) * K
    a = chain[:, idx]
    b = limit[:, idx * limit_refine]
    dist = np.abs(a - b) if a.ndim == 2 else np.linalg.norm(a - b, axis=-1)
    hit = dist.max(axis=1) > gamma
    M = hit.size
    p = float(hit.mean())
    return ProbabilityEstimate(p, math.sqrt(p * (1.0 - p) / M), M)


# reference local-time samples --------------------------------------------------

REFERENCE_KINDS = ("bm_point_levy", "fine_grid")


@dataclass(frozen=True, eq=False)
class FineGridTask:
    """(1/2eps) int_s^t 1{|Z(r) - z*| < eps} b(Z(r))^2 dr on a refined Euler path."""

    a: CoefficientExpr
    b: CoefficientExpr
    z0: float
    z_star: float
    s: float
    t: float
    n_fine: int
    eps: float
    seed: int
    offset: int = 0

    def __call__(self, start: int, stop: int) -> np.ndarray:
        st = streams(self.seed, start, stop, self.offset)
        W = bm_knots(self.n_fine, self.t, 1, st)
        Z = euler_knots(self.n_fine, self.a, self.b, self.z0, np.diff(W, axis=1), X=W)
        k_lo = int(math.ceil(self.s * self.n_fine - 1e-9))
        zk = Z[:, k_lo:-1]
        w = (np.abs(zk - self.z_star) < self.eps) * np.asarray(self.b(zk), dtype=float) ** 2
        return w.sum(axis=1) / (self.n_fine * 2.0 * self.eps)


def reference_local_time_sample(kind: str, params: dict, M: int, seed: int, workers: int = 1,
                                 offset: int = 0) -> SampleSummary:
    """M draws from the reference law of the limit local time phi^{s,t}.

    bm_point_levy: Brownian local time at z* started at z*, law sqrt(t - s) |N(0,1)|.
    fine_grid: refined Euler scheme for dZ = a dr + b dW with small-eps occupation.
    """
    if kind not in REFERENCE_KINDS:
        raise ConfigurationError(f"unknown reference kind {kind!r}; expected one of {REFERENCE_KINDS}")
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    s, t = float(params.get("s", 0.0)), float(params.get("t", 1.0))
    if t < s:
        raise DomainError(f"need t >= s, got s={s}, t={t}")
    z_star = float(params.get("z_star", 0.0))
    start = float(params.get("start", z_star))
    if kind == "bm_point_levy":
        if start != z_star:
            raise ConfigurationError("bm_point_levy is only available for a start at z*; use fine_grid")
        if s != 0.0:
            raise ConfigurationError("bm_point_levy is only available for s = 0; use fine_grid")
        return SampleSummary(math.sqrt(t) * _levy_draws(seed, M, offset, workers))
    a = parse_coefficient_expr(str(params.get("a", "0")))
    b = parse_coefficient_expr(str(params.get("b", "1")))
    n_fine = int(params.get("n_fine", 4096))
    eps = float(params.get("eps", 0.02))
    if eps <= 0 or n_fine < 1:
        raise ConfigurationError("fine_grid needs eps > 0 and n_fine >= 1")
    task = FineGridTask(a, b, start, z_star, s, t, n_fine, eps, seed, offset)
    return SampleSummary(run_paths(task, M, workers))


@dataclass(frozen=True)
class _LevyTask:
    seed: int
    offset: int

    def __call__(self, lo: int, hi: int) -> np.ndarray:
        return np.array([abs(st.gen.standard_normal()) for st in streams(self.seed, lo, hi, self.offset)])


def _levy_draws(seed: int, M: int, offset: int, workers: int) -> np.ndarray:
    return run_paths(_LevyTask(seed, offset), M, workers)
