"""Reproducible random streams and the increment laws driving the walks.

Every simulated path owns one :class:`RngStream`, derived from the pair
(master_seed, stream_index) through a counter-based Philox generator, so
results do not depend on how paths are distributed over workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import zeta

from .errors import ConfigurationError, DomainError

MASK64 = (1 << 64) - 1


@dataclass
class RngStream:
    master_seed: int
    stream_index: int
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= MASK64:
            raise ConfigurationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if int(self.stream_index) < 0:
            raise ConfigurationError(f"stream_index must be non-negative, got {self.stream_index}")

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            seq = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index),))
            self._gen = np.random.Generator(np.random.Philox(seq))
        return self._gen


def streams(master_seed: int, start: int, stop: int, offset: int = 0) -> list[RngStream]:
    """Streams for path indices ``start..stop-1``; ``offset`` separates experiment components."""
    return [RngStream(master_seed, offset + i) for i in range(start, stop)]


LAW_KINDS = ("rademacher", "lazy_lattice", "finite_lattice", "gaussian_iid", "pareto_lattice")


@dataclass(frozen=True)
class IncrementLaw:
    """Law of the i.i.d. jumps of a walk.

    Use the classmethod constructors; the dataclass validates itself on
    construction and raises :class:`ConfigurationError` on bad parameters.
    """

    kind: str
    support: tuple[int, ...] = ()
    probs: tuple[float, ...] = ()
    d: int = 1
    alpha: float = 2.0
    standardize: bool = True

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ConfigurationError(f"unknown increment law {self.kind!r}; expected one of {LAW_KINDS}")
        if self.is_finite_lattice:
            if len(self.support) == 0 or len(self.support) != len(self.probs):
                raise ConfigurationError("finite lattice law needs matching support and probs")
            if len(set(self.support)) != len(self.support):
                raise ConfigurationError("finite lattice support has repeated offsets")
            p = np.asarray(self.probs, dtype=float)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ConfigurationError(f"probabilities must be non-negative and sum to 1, got sum {p.sum()!r}")
            mean = float(np.dot(self.support, p))
            if abs(mean) > 1e-12:
                raise ConfigurationError(f"increment law must have zero mean, got {mean!r}")
            if self.variance == 0:
                raise ConfigurationError("degenerate increment law (zero variance)")
        elif self.kind == "gaussian_iid":
            if self.d < 1:
                raise ConfigurationError("gaussian_iid needs dimension d >= 1")
        elif self.kind == "pareto_lattice":
            if not 1.0 < self.alpha < 2.0:
                raise ConfigurationError(f"pareto_lattice tail index must lie in (1, 2), got {self.alpha}")

    # constructors -----------------------------------------------------------
    @classmethod
    def rademacher(cls, standardize: bool = True) -> IncrementLaw:
        return cls("rademacher", (-1, 1), (0.5, 0.5), standardize=standardize)

    @classmethod
    def lazy_lattice(cls, p0: float, standardize: bool = True) -> IncrementLaw:
        if not 0.0 <= p0 < 1.0:
            raise ConfigurationError(f"lazy_lattice p0 must lie in [0, 1), got {p0}")
        q = (1.0 - p0) / 2.0
        return cls("lazy_lattice", (-1, 0, 1), (q, p0, q), standardize=standardize)

    @classmethod
    def finite_lattice(cls, support, probs, standardize: bool = True) -> IncrementLaw:
        return cls("finite_lattice", tuple(int(j) for j in support), tuple(float(p) for p in probs),
                   standardize=standardize)

    @classmethod
    def gaussian(cls, d: int = 1) -> IncrementLaw:
        return cls("gaussian_iid", d=int(d))

    @classmethod
    def pareto_lattice(cls, alpha: float, standardize: bool = True) -> IncrementLaw:
        return cls("pareto_lattice", alpha=float(alpha), standardize=standardize)

    # derived quantities -----------------------------------------------------
    @property
    def is_finite_lattice(self) -> bool:
        return self.kind in ("rademacher", "lazy_lattice", "finite_lattice")

    @property
    def is_lattice(self) -> bool:
        return self.kind != "gaussian_iid"

    @property
    def tail_index(self) -> float:
        return self.alpha if self.kind == "pareto_lattice" else 2.0

    @property
    def variance(self) -> float:
        if self.is_finite_lattice:
            return float(sum(j * j * p for j, p in zip(self.support, self.probs)))
        if self.kind == "gaussian_iid":
            return 1.0
        return math.inf

    @property
    def sigma(self) -> float | None:
        v = self.variance
        return math.sqrt(v) if math.isfinite(v) else None

    @property
    def stable_scale(self) -> float:
        """Divisor putting n^{-1/alpha} S_n in the normalisation exp(-|u|^alpha).

        For P(xi = +-k) = k^{-1-alpha} / (2 zeta(1+alpha)) the tail is
        P(|xi| > x) ~ A x^{-alpha} with A = 1/(alpha zeta(1+alpha)); the
        limit characteristic function is then exp(-c |u|^alpha) with
        c = A Gamma(1-alpha) cos(pi alpha/2), and the divisor is c^{1/alpha}.
        """
        if self.kind != "pareto_lattice":
            raise ConfigurationError("stable_scale is defined for pareto_lattice only")
        a = self.alpha
        tail = 1.0 / (a * zeta(1.0 + a))
        c = tail * gamma_fn(1.0 - a) * math.cos(math.pi * a / 2.0)
        return c ** (1.0 / a)

    @property
    def norm(self) -> float:
        """Divisor applied to raw draws (1 when ``standardize`` is off)."""
        if not self.standardize:
            return 1.0
        if self.kind == "pareto_lattice":
            return self.stable_scale
        return self.sigma

    @property
    def p_nonzero(self) -> float:
        if self.is_finite_lattice:
            return float(sum(p for j, p in zip(self.support, self.probs) if j != 0))
        return 1.0

    @property
    def span(self) -> int:
        """gcd of differences between support points; 0 for a continuous law."""
        if self.kind == "gaussian_iid":
            return 0
        if self.kind == "pareto_lattice":
            return 1
        pts = [j for j, p in zip(self.support, self.probs) if p > 0]
        diffs = [abs(j - pts[0]) for j in pts[1:]]
        return reduce(math.gcd, diffs, 0)

    @property
    def min_step(self) -> int:
        """Smallest non-zero |jump| on the integer lattice."""
        if self.kind == "pareto_lattice":
            return 1
        if self.kind == "gaussian_iid":
            return 0
        return min(abs(j) for j, p in zip(self.support, self.probs) if j != 0 and p > 0)

    def unit(self, n: int, alpha: float | None = None) -> float:
        """Spacing of the scaled lattice: one integer jump equals ``unit`` in path space."""
        a = self.tail_index if alpha is None else alpha
        return 1.0 / (self.norm * n ** (1.0 / a))


@dataclass(frozen=True)
class LawProperties:
    sigma: float | None
    span: int
    p_nonzero: float
    aperiodic: bool
    alpha: float


def law_properties(law: IncrementLaw) -> LawProperties:
    if not isinstance(law, IncrementLaw):
        raise ConfigurationError("law_properties needs an IncrementLaw")
    span = law.span
    return LawProperties(
        sigma=law.sigma,
        span=span,
        p_nonzero=law.p_nonzero,
        aperiodic=(span == 1) or law.kind == "gaussian_iid",
        alpha=law.tail_index,
    )


def _check_law(law) -> None:
    if not isinstance(law, IncrementLaw):
        raise ConfigurationError(f"expected a validated IncrementLaw, got {type(law).__name__}")


def sample_lattice_offsets(law: IncrementLaw, stream: RngStream, size: int) -> np.ndarray:
    """Raw integer jumps (not divided by the norm) for lattice laws."""
    _check_law(law)
    g = stream.gen
    if law.is_finite_lattice:
        if law.kind == "rademacher":
            return g.integers(0, 2, size=size, dtype=np.int64) * 2 - 1
        idx = g.choice(len(law.support), size=size, p=np.asarray(law.probs))
        return np.asarray(law.support, dtype=np.int64)[idx]
    if law.kind == "pareto_lattice":
        mag = g.zipf(1.0 + law.alpha, size=size).astype(np.int64)
        sign = g.integers(0, 2, size=size, dtype=np.int64) * 2 - 1
        return sign * mag
    raise ConfigurationError("gaussian_iid is not a lattice law")


def sample_increments(law: IncrementLaw, stream: RngStream, size: int) -> np.ndarray:
    """``size`` draws, shape (size,) for d=1 and (size, d) otherwise."""
    _check_law(law)
    if law.kind == "gaussian_iid":
        z = stream.gen.standard_normal((size, law.d))
        return z[:, 0] if law.d == 1 else z
    return sample_lattice_offsets(law, stream, size) / law.norm


def sample_increment(law: IncrementLaw, stream: RngStream) -> np.ndarray:
    return np.atleast_1d(sample_increments(law, stream, 1)[0])


def stable_variates(alpha: float, stream: RngStream, size: int) -> np.ndarray:
    """Symmetric alpha-stable draws with characteristic function exp(-|u|^alpha).

    Chambers-Mallows-Stuck transform of a uniform angle and a unit
    exponential; alpha=2 returns N(0, 2) and alpha=1 the standard Cauchy law.
    """
    if not 0.0 < alpha <= 2.0:
        raise DomainError(f"stable index alpha must lie in (0, 2], got {alpha}")
    g = stream.gen
    v = g.uniform(-math.pi / 2, math.pi / 2, size)
    w = g.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(v)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def stable_variate(alpha: float, stream: RngStream) -> float:
    return float(stable_variates(alpha, stream, 1)[0])
