"""Additive functionals of chains observed on the grid {k/n}.

A functional is a window kernel F_n of L consecutive knots summed over the
cells k with s <= k/n < t. Kernels are small callable classes (so that they
pickle into worker processes) evaluated on numpy arrays: each positional
argument holds one window position for a whole batch of paths.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError
from .processes import GRID_EPS, PathGrid, grid_ceil, n_cells
from .sources import IncrementLaw

log = logging.getLogger(__name__)


# kernels --------------------------------------------------------------------

class CensoredPointKernel:
    """(1/n)(1/|y-x|)[1{crossing z*} + 1/2 (1{x != z*, y = z*} + 1{x = z*, y != z*})]."""

    L = 2

    def __init__(self, z_star: float = 0.0, law: IncrementLaw | None = None, alpha: float | None = None):
        self.z_star = float(z_star)
        self.law = law
        self.alpha = float(alpha if alpha is not None else (law.tail_index if law else 2.0))

    def __call__(self, x, y, n):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx = x - self.z_star
        dy = y - self.z_star
        weight = (dx * dy < 0).astype(float)
        weight += 0.5 * (((dx != 0) & (dy == 0)) | ((dx == 0) & (dy != 0)))
        gap = np.abs(y - x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(weight > 0, weight / (n * gap), 0.0)
        return out

    def delta(self, n: int) -> float:
        # paper-style bound 2 n^{1/alpha - 1}, scaled to the law's smallest lattice jump
        if self.law is None:
            return 2.0 * n ** (1.0 / self.alpha - 1.0)
        if not self.law.is_lattice:
            return math.inf
        smallest = self.law.min_step * self.law.unit(n, self.alpha)
        return 2.0 / (n * smallest)


class DoobZeroKernel:
    """|cur| (2 1{prev cur < 0} + 1{prev = 0}): the Doob-decomposition local time at 0."""

    L = 2

    def __call__(self, prev, cur, n):
        prev = np.asarray(prev, dtype=float)
        cur = np.asarray(cur, dtype=float)
        return np.abs(cur) * (2.0 * (prev * cur < 0) + (prev == 0))

    def delta(self, n: int):
        return None


class VisitCountKernel:
    """(1/sqrt n) 1{cur = z*}."""

    L = 1

    def __init__(self, z_star: float = 0.0):
        self.z_star = float(z_star)

    def __call__(self, cur, n):
        return (np.asarray(cur) == self.z_star) / math.sqrt(n)

    def delta(self, n: int) -> float:
        return 1.0 / math.sqrt(n)


class ConstantKernel:
    L = 1

    def __init__(self, c: float):
        if c < 0:
            raise ConfigurationError("kernels must be non-negative")
        self.c = float(c)

    def __call__(self, cur, n):
        return np.full(np.shape(cur), self.c)

    def delta(self, n: int) -> float:
        return self.c


class UnitCircle:
    """The circle of given radius in R^2 with its epsilon-tube (annulus)."""

    def __init__(self, radius: float = 1.0):
        self.radius = float(radius)

    def __call__(self, x, eps):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        return np.abs(r - self.radius) <= eps

    def area(self, eps: float) -> float:
        inner = max(self.radius - eps, 0.0)
        return math.pi * ((self.radius + eps) ** 2 - inner ** 2)


class TubeKernel:
    """1{cur in K_eps} / (n lambda(K_eps)) with eps = 1/sqrt n."""

    L = 1

    def __init__(self, set_oracle, area: Callable[[float], float] | None = None):
        self.set_oracle = set_oracle
        self.area = area if area is not None else set_oracle.area

    def _area(self, n: int) -> float:
        a = float(self.area(1.0 / math.sqrt(n)))
        if a <= 0:
            raise ConfigurationError("tube volume lambda(K_eps) must be positive")
        return a

    def __call__(self, cur, n):
        inside = self.set_oracle(cur, 1.0 / math.sqrt(n))
        return inside / (n * self._area(n))

    def delta(self, n: int) -> float:
        return 1.0 / (n * self._area(n))


class ChiReducedKernel:
    """Psi(x) = sum_j P_j F(x, x + j unit): the one-step conditional mean of an L=2 kernel."""

    L = 1

    def __init__(self, base, steps: np.ndarray, probs: np.ndarray):
        self.base = base
        self.steps = np.asarray(steps, dtype=float)
        self.probs = np.asarray(probs, dtype=float)

    def __call__(self, cur, n):
        cur = np.asarray(cur, dtype=float)
        out = np.zeros(np.shape(cur))
        for step, p in zip(self.steps, self.probs):
            if p > 0:
                out = out + p * self.base(cur, cur + step, n)
        return out

    def delta(self, n: int):
        return self.base.delta(n)


class GenericKernel:
    def __init__(self, fn: Callable, L: int, delta: Callable[[int], float] | None = None):
        self.fn = fn
        self.L = int(L)
        self._delta = delta

    def __call__(self, *args):
        return self.fn(*args)

    def delta(self, n: int):
        return None if self._delta is None else self._delta(n)


def kernel_censored_point(z_star: float = 0.0, law: IncrementLaw | None = None) -> CensoredPointKernel:
    return CensoredPointKernel(z_star, law)


def kernel_doob_zero() -> DoobZeroKernel:
    return DoobZeroKernel()


def kernel_visit_count(z_star: float = 0.0) -> VisitCountKernel:
    return VisitCountKernel(z_star)


def kernel_tube(set_oracle, beta_area=None) -> TubeKernel:
    return TubeKernel(set_oracle, beta_area)


# functional specs -----------------------------------------------------------

FUNCTIONAL_KINDS = ("censored_point", "doob_zero", "visit_count", "tube", "constant", "generic")


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    kind: str
    kernel: object
    L: int
    params: dict = field(default_factory=dict)
    symbol: object = None

    def __post_init__(self):
        if self.kind not in FUNCTIONAL_KINDS:
            raise ConfigurationError(f"unknown functional kind {self.kind!r}")
        if self.L < 1:
            raise ConfigurationError("window length L must be a positive integer")

    def delta_formula(self, n: int):
        return self.kernel.delta(n)

    # factories
    @classmethod
    def censored_point(cls, z_star: float = 0.0, law: IncrementLaw | None = None) -> FunctionalSpec:
        return cls("censored_point", CensoredPointKernel(z_star, law), 2, {"z_star": float(z_star)})

    @classmethod
    def doob_zero(cls) -> FunctionalSpec:
        return cls("doob_zero", DoobZeroKernel(), 2)

    @classmethod
    def visit_count(cls, z_star: float = 0.0) -> FunctionalSpec:
        return cls("visit_count", VisitCountKernel(z_star), 1, {"z_star": float(z_star)})

    @classmethod
    def tube(cls, set_oracle, area=None) -> FunctionalSpec:
        return cls("tube", TubeKernel(set_oracle, area), 1)

    @classmethod
    def constant(cls, c: float) -> FunctionalSpec:
        return cls("constant", ConstantKernel(c), 1, {"c": float(c)})

    @classmethod
    def generic(cls, fn: Callable, L: int, delta=None) -> FunctionalSpec:
        return cls("generic", GenericKernel(fn, L, delta), int(L))


# evaluation -----------------------------------------------------------------

def cell_range(n: int, s: float, t: float) -> tuple[int, int]:
    """Indices k with s <= k/n < t as a half-open range."""
    if s > t:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    return grid_ceil(n * s), grid_ceil(n * t)


def cell_increments(spec: FunctionalSpec, knots: np.ndarray, n: int, k_lo: int, k_hi: int) -> np.ndarray:
    """F_n on the windows starting at k_lo..k_hi-1; knots has shape (M, K[, d])."""
    need = k_hi - 1 + spec.L - 1
    have = knots.shape[1] - 1
    if k_hi > k_lo and need > have:
        raise ConfigurationError(
            f"insufficient lookahead: window needs knot {need} but the path ends at knot {have} "
            f"(short by {need - have} knots; generate the path with more lookahead)")
    if k_hi <= k_lo:
        return np.zeros((knots.shape[0], 0))
    windows = [knots[:, k_lo + j: k_hi + j] for j in range(spec.L)]
    return np.asarray(spec.kernel(*windows, n), dtype=float)


def ordered_sum(values: np.ndarray) -> np.ndarray:
    """Row sums accumulated left to right in extended precision."""
    acc = np.zeros(values.shape[0], dtype=np.longdouble)
    for k in range(values.shape[1]):
        acc += values[:, k]
    return acc.astype(float)


def additive_values(spec: FunctionalSpec, knots: np.ndarray, n: int, s: float, t: float) -> np.ndarray:
    """phi_n^{s,t} for every row of a knot batch."""
    k_lo, k_hi = cell_range(n, s, t)
    return ordered_sum(cell_increments(spec, knots, n, k_lo, k_hi))


def eval_additive(spec: FunctionalSpec, path: PathGrid, s: float, t: float) -> float:
    if t > path.T + GRID_EPS:
        raise DomainError(f"t={t} beyond the path horizon T={path.T}")
    return float(additive_values(spec, path.knots[None], path.n, s, t)[0])


@dataclass(frozen=True, eq=False)
class TwoTimeField:
    """phi_n^{s,t} / psi_n^{s,t} of one path, stored through its cell increments."""

    n: int
    T: float
    increments: np.ndarray          # increments[k-1] = phi^{(k-1)/n, k/n}
    prefix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if np.any(self.increments < 0):
            raise ConfigurationError("additive functional increments must be non-negative")
        acc = np.zeros(len(self.increments) + 1, dtype=np.longdouble)
        np.cumsum(self.increments, dtype=np.longdouble, out=acc[1:])
        object.__setattr__(self, "prefix", acc)

    @classmethod
    def from_path(cls, spec: FunctionalSpec, path: PathGrid) -> TwoTimeField:
        N = n_cells(path.n, path.T)
        inc = cell_increments(spec, path.knots[None], path.n, 0, N)[0]
        return cls(path.n, path.T, inc)

    def _check(self, s: float, t: float):
        if s > t:
            raise DomainError(f"need s <= t, got s={s}, t={t}")
        if s < 0 or t > self.T + GRID_EPS:
            raise DomainError("time pair outside [0, T]")

    def phi(self, s: float, t: float) -> float:
        """Step functional: sum over cells k with s <= k/n < t (k counts cells from 0)."""
        self._check(s, t)
        lo, hi = grid_ceil(self.n * s), grid_ceil(self.n * t)
        hi = min(hi, len(self.increments))
        return float(self.prefix[hi] - self.prefix[lo]) if hi > lo else 0.0

    def _psi_point(self, u: float) -> float:
        # psi^{0,u}: prefix up to floor(nu) plus the linear share of the current cell
        x = self.n * u
        r = round(x)
        if abs(x - r) < GRID_EPS:
            return float(self.prefix[min(int(r), len(self.increments))])
        k = int(math.floor(x))
        frac = x - k
        return float(self.prefix[k]) + frac * float(self.increments[k])

    def psi(self, s: float, t: float) -> float:
        self._check(s, t)
        return self._psi_point(t) - self._psi_point(s)


def eval_psi(field: TwoTimeField, s: float, t: float) -> float:
    return field.psi(s, t)


# doob decomposition ---------------------------------------------------------

def doob_terms(knots: np.ndarray, dX: np.ndarray, a, b, n: int, k_lo: int, k_hi: int) -> np.ndarray:
    """[a(Z_k)/n + b(Z_k) dX_k] sign(Z_k) for k in [k_lo, k_hi)."""
    Z = knots[:, k_lo:k_hi]
    return (np.asarray(a(Z), dtype=float) / n + np.asarray(b(Z), dtype=float) * dX[:, k_lo:k_hi]) * np.sign(Z)


def doob_residuals(knots: np.ndarray, dX: np.ndarray, a, b, n: int, s: float, t: float,
                   relative: bool = False) -> np.ndarray:
    """|Z(t)| - |Z(s)| - phi^{s,t} - sum of signed scheme increments, per row."""
    k_lo, k_hi = cell_range(n, s, t)
    phi = additive_values(FunctionalSpec.doob_zero(), knots, n, s, t)
    terms = doob_terms(knots, dX, a, b, n, k_lo, k_hi)
    mart = ordered_sum(terms)
    res = np.abs(knots[:, k_hi]) - np.abs(knots[:, k_lo]) - phi - mart
    if not relative:
        return res
    scale = np.abs(knots[:, k_hi]) + np.abs(knots[:, k_lo]) + phi + ordered_sum(np.abs(terms))
    return np.abs(res) / np.maximum(scale, np.finfo(float).tiny)


def doob_residual(path: PathGrid, s: float, t: float) -> float:
    if path.drive is None or path.coeffs is None:
        raise ConfigurationError("doob_residual needs an SDE-chain path with its driver increments")
    a, b = path.coeffs
    return float(doob_residuals(path.knots[None], path.drive[None], a, b, path.n, s, t)[0])


# reductions and bounds ------------------------------------------------------

def chi_reduce(spec: FunctionalSpec, law: IncrementLaw, n: int) -> FunctionalSpec:
    """Replace an L=2 kernel by its one-step conditional mean under a walk's increment law."""
    if spec.L != 2:
        raise ConfigurationError("chi_reduce expects a window length L=2 functional")
    if not law.is_finite_lattice:
        raise ConfigurationError(f"chi_reduce needs a finite-support lattice walk, got {law.kind}")
    unit = law.unit(n)
    steps = np.asarray(law.support, dtype=float) * unit
    kernel = ChiReducedKernel(spec.kernel, steps, np.asarray(law.probs))
    return FunctionalSpec("generic", kernel, 1, {"reduced_from": spec.kind})


def delta_sup(spec: FunctionalSpec, n: int, domain: tuple[float, float] | None = None,
              points: int = 401) -> float:
    """sup of the kernel: analytic when known, otherwise a grid search over ``domain``."""
    value = spec.delta_formula(n)
    if value is not None:
        return float(value)
    if domain is None:
        raise ConfigurationError(f"no analytic bound for {spec.kind}; pass a search domain")
    grid = np.linspace(domain[0], domain[1], points)
    mesh = np.meshgrid(*([grid] * spec.L), indexing="ij")
    vals = spec.kernel(*[m.ravel() for m in mesh], n)
    log.warning("delta_sup for %s is an approximate grid-search value", spec.kind)
    return float(np.max(vals))
