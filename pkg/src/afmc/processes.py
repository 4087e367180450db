"""Trajectory generators on the grid {k/n}.

Single-path generators return :class:`PathGrid`; the ``*_knots`` variants
take one stream per path and return stacked knot arrays for Monte-Carlo
work. Both routes draw identical variates for the same stream, so a row of
a batch equals the corresponding single path bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, NumericFailure
from .expr import CoefficientExpr, parse_coefficient_expr
from .sources import IncrementLaw, RngStream, sample_increments, sample_lattice_offsets, stable_variates

GRID_EPS = 1e-9


def n_cells(n: int, T: float) -> int:
    """Number of grid cells covering [0, T]: ceil(nT)."""
    return int(math.ceil(n * T - GRID_EPS))


def grid_ceil(x: float) -> int:
    return int(math.ceil(x - GRID_EPS))


@dataclass(frozen=True, eq=False)
class PathGrid:
    n: int
    T: float
    knots: np.ndarray
    interpolation: str = "broken_line"
    extra: int = 0
    drive: np.ndarray | None = None
    coeffs: tuple | None = None

    def __post_init__(self):
        if self.interpolation not in ("broken_line", "step"):
            raise ConfigurationError(f"unknown interpolation {self.interpolation!r}")
        expected = n_cells(self.n, self.T) + 1 + self.extra
        if len(self.knots) != expected:
            raise ConfigurationError(f"PathGrid expects {expected} knots, got {len(self.knots)}")

    @property
    def dim(self) -> int:
        return 1 if self.knots.ndim == 1 else self.knots.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.knots)) / self.n

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0) or np.any(t_arr > (len(self.knots) - 1) / self.n + GRID_EPS):
            raise DomainError("evaluation time outside the simulated horizon")
        u = t_arr * self.n
        r = np.rint(u)
        on_knot = np.abs(u - r) < GRID_EPS
        left = np.where(on_knot, r, np.floor(u)).astype(int)
        left = np.minimum(left, len(self.knots) - 1)
        frac = np.where(on_knot, 0.0, u - left)
        base = self.knots[left]
        if self.interpolation == "step":
            out = base
        else:
            right = np.minimum(left + 1, len(self.knots) - 1)
            if self.knots.ndim > 1:
                frac = frac[..., None]
            out = np.where(frac == 0, base, base + frac * (self.knots[right] - base))
        if np.ndim(t) == 0 and self.knots.ndim == 1:
            return float(out)
        return out

    def downsample(self, factor: int) -> PathGrid:
        """View on the coarser grid 1/(n/factor)."""
        if factor < 1 or self.n % factor:
            raise ConfigurationError(f"cannot downsample n={self.n} by {factor}")
        m = self.n // factor
        count = n_cells(m, self.T) + 1
        return PathGrid(m, self.T, self.knots[::factor][:count], self.interpolation)


@dataclass(frozen=True, eq=False)
class CoupledPair:
    chain: PathGrid
    limit: PathGrid
    K: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError("block constant K must be a positive integer")
        if self.limit.n % self.chain.n:
            raise ConfigurationError("limit grid must refine the chain grid")

    def block_values(self, T: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Chain and limit values at the block times iK/n <= T."""
        T = self.chain.T if T is None else T
        n = self.chain.n
        idx = np.arange(0, int(math.floor(n * T / self.K + GRID_EPS)) + 1) * self.K
        R = self.limit.n // n
        return self.chain.knots[idx], self.limit.knots[idx * R]


def _check_alpha(law: IncrementLaw, alpha: float | None) -> float:
    a = law.tail_index if alpha is None else float(alpha)
    if not 1.0 < a <= 2.0:
        raise ConfigurationError(f"walk scaling index must lie in (1, 2], got {a}")
    if a != law.tail_index:
        raise ConfigurationError(f"law {law.kind} has index {law.tail_index}, not {a}")
    if a == 2.0 and not law.standardize and law.sigma != 1.0:
        raise ConfigurationError("finite-variance walks need a standardized law (sigma != 1)")
    return a


def _lattice_start(x0: float, unit: float) -> tuple[int, float]:
    """Split the start point into an integer lattice offset and a residual shift."""
    i = round(x0 / unit)
    if abs(i * unit - x0) <= 1e-12 * max(1.0, abs(x0)):
        return int(i), 0.0
    return 0, float(x0)


def walk_knots(n: int, T: float, law: IncrementLaw, streams: Sequence[RngStream],
               x0=0.0, alpha: float | None = None, lookahead: int = 0) -> np.ndarray:
    """Knots S_k / (norm n^{1/alpha}) of independent walks, one row per stream."""
    a = _check_alpha(law, alpha)
    steps = n_cells(n, T) + lookahead
    M = len(streams)
    if law.kind == "gaussian_iid":
        shape = (M, steps + 1) if law.d == 1 else (M, steps + 1, law.d)
        out = np.zeros(shape)
        for r, st in enumerate(streams):
            out[r, 1:] = np.cumsum(sample_increments(law, st, steps), axis=0)
        out /= math.sqrt(n)
        return out + np.asarray(x0, dtype=float)
    unit = law.unit(n, a)
    i0, shift = _lattice_start(float(x0), unit)
    S = np.zeros((M, steps + 1), dtype=np.int64)
    for r, st in enumerate(streams):
        S[r, 1:] = np.cumsum(sample_lattice_offsets(law, st, steps))
    S += i0
    out = S * unit
    return out + shift if shift else out


def gen_walk_path(n: int, T: float, law: IncrementLaw, stream: RngStream, alpha: float | None = None,
                  x0=0.0, lookahead: int = 0) -> PathGrid:
    knots = walk_knots(n, T, law, [stream], x0=x0, alpha=alpha, lookahead=lookahead)[0]
    return PathGrid(n, T, knots, "broken_line", extra=lookahead)


def path_from_increments(n: int, T: float, increments, alpha: float = 2.0, x0: float = 0.0) -> PathGrid:
    """Broken line through x0 + S_k/n^{1/alpha} for prescribed (already normalised) jumps."""
    inc = np.asarray(increments, dtype=float)
    knots = np.concatenate([[0.0], np.cumsum(inc)]) / n ** (1.0 / alpha) + x0
    return PathGrid(n, T, knots, "broken_line", extra=len(inc) - n_cells(n, T))


def _as_expr(e) -> CoefficientExpr:
    return e if isinstance(e, CoefficientExpr) else parse_coefficient_expr(str(e))


def euler_knots(n: int, a, b, z0: float, dX: np.ndarray, X: np.ndarray | None = None) -> np.ndarray:
    """Z_{k+1} = Z_k + a(Z_k)/n + b(Z_k) dX_k, row-wise; dX has shape (M, steps).

    ``X`` optionally supplies the driver knots (X_0 = 0) so that the
    telescoping case a = 0, b = const reuses them exactly.
    """
    a, b = _as_expr(a), _as_expr(b)
    M, steps = dX.shape
    ca, cb = a.constant(), b.constant()
    if ca == 0.0 and cb is not None:
        # the recursion telescopes: Z = z0 + b X with X the driver's partial sums
        if X is None:
            X = np.zeros((M, steps + 1))
            np.cumsum(dX, axis=1, out=X[:, 1:])
        return z0 + cb * X if cb != 1.0 else z0 + X
    Z = np.empty((M, steps + 1))
    Z[:, 0] = z0
    h = 1.0 / n
    for k in range(steps):
        z = Z[:, k]
        try:
            drift = a(z)
            diff = b(z)
        except ZeroDivisionError as exc:
            raise NumericFailure(f"coefficient evaluation failed: {exc}", step=k) from None
        nxt = z + drift * h + diff * dX[:, k]
        if not np.all(np.isfinite(nxt)):
            raise NumericFailure("non-finite value in difference scheme", step=k)
        Z[:, k + 1] = nxt
    return Z


def _driver(n: int, law: IncrementLaw, streams, steps: int) -> tuple[np.ndarray, np.ndarray | None, float]:
    """Driver increments dX = xi/sqrt(n); for lattice laws also the integer jumps and the unit."""
    if law.kind == "gaussian_iid":
        if law.d != 1:
            raise ConfigurationError("difference schemes are one-dimensional (m = d = 1)")
        dX = np.stack([sample_increments(law, st, steps) for st in streams]) / math.sqrt(n)
        return dX, None, 0.0
    if law.kind == "pareto_lattice":
        raise ConfigurationError("difference schemes need a finite-variance driver")
    _check_alpha(law, 2.0)
    unit = law.unit(n, 2.0)
    ints = np.stack([sample_lattice_offsets(law, st, steps) for st in streams])
    return ints * unit, ints, unit


def sde_chain_knots(n: int, T: float, a, b, z0: float, law: IncrementLaw, streams: Sequence[RngStream],
                    lookahead: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Difference scheme driven by a walk; returns (knots, driver increments)."""
    steps = n_cells(n, T) + lookahead
    dX, ints, unit = _driver(n, law, streams, steps)
    cb = _as_expr(b).constant()
    if ints is not None and _as_expr(a).constant() == 0.0 and cb is not None:
        # Z = z0 + b X telescopes; keep lattice values exact so hits of z0 are exact
        S = np.zeros((len(streams), steps + 1), dtype=np.int64)
        np.cumsum(ints, axis=1, out=S[:, 1:])
        X = S * unit
        Z = X if cb == 1.0 else cb * X
        return (Z + z0 if z0 else Z), dX
    return euler_knots(n, a, b, float(z0), dX), dX


def gen_sde_chain(n: int, T: float, a, b, z0: float, law: IncrementLaw, stream: RngStream,
                  lookahead: int = 0) -> PathGrid:
    knots, dX = sde_chain_knots(n, T, a, b, z0, law, [stream], lookahead)
    return PathGrid(n, T, knots[0], "broken_line", extra=lookahead, drive=dX[0],
                    coeffs=(_as_expr(a), _as_expr(b)))


def bm_knots(n: int, T: float, d: int, streams: Sequence[RngStream], lookahead: int = 0) -> np.ndarray:
    return walk_knots(n, T, IncrementLaw.gaussian(d), streams, lookahead=lookahead)


def gen_bm_exact(n: int, T: float, d: int, stream: RngStream, lookahead: int = 0) -> PathGrid:
    return PathGrid(n, T, bm_knots(n, T, d, [stream], lookahead)[0], "broken_line", extra=lookahead)


def stable_knots(n: int, T: float, alpha: float, streams: Sequence[RngStream], lookahead: int = 0) -> np.ndarray:
    if not 1.0 < alpha <= 2.0:
        raise ConfigurationError(f"stable limit index must lie in (1, 2], got {alpha}")
    steps = n_cells(n, T) + lookahead
    out = np.zeros((len(streams), steps + 1))
    for r, st in enumerate(streams):
        out[r, 1:] = np.cumsum(stable_variates(alpha, st, steps))
    return out * (1.0 / n) ** (1.0 / alpha)


def gen_stable_exact(n: int, T: float, alpha: float, stream: RngStream, lookahead: int = 0) -> PathGrid:
    return PathGrid(n, T, stable_knots(n, T, alpha, [stream], lookahead)[0], "step", extra=lookahead)


def diffusion_reference_knots(n: int, T: float, a, b, z0: float, refine: int,
                              streams: Sequence[RngStream]) -> np.ndarray:
    """Fine-grid Euler knots (step 1/(n refine)) driven by exact Gaussian increments."""
    if refine < 1:
        raise ConfigurationError("refine must be >= 1")
    W = bm_knots(n * refine, T, 1, streams)
    return euler_knots(n * refine, a, b, float(z0), np.diff(W, axis=1), X=W)


def gen_diffusion_reference(n: int, T: float, a, b, z0: float, refine: int, stream: RngStream) -> PathGrid:
    knots = diffusion_reference_knots(n, T, a, b, z0, refine, [stream])[0]
    return PathGrid(n * refine, T, knots, "broken_line")


def trivial_coupling_knots(n: int, T: float, streams: Sequence[RngStream], refine: int = 1,
                           d: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(chain knots on 1/n, Brownian limit knots on 1/(n refine)) sharing one path."""
    W = bm_knots(n * refine, T, d, streams)
    chain = W[:, ::refine][:, : n_cells(n, T) + 1]
    return chain, W


def gen_trivial_coupling(n: int, T: float, d: int, stream: RngStream, refine: int = 1,
                         law: IncrementLaw | None = None) -> CoupledPair:
    if law is not None and law.kind != "gaussian_iid":
        raise ConfigurationError("the exact coupling is only available for Gaussian increments")
    chain, W = trivial_coupling_knots(n, T, [stream], refine, d)
    return CoupledPair(PathGrid(n, T, chain[0]), PathGrid(n * refine, T, W[0]), K=1)


def sde_coupled_knots(n: int, T: float, a, b, z0: float, refine: int,
                      streams: Sequence[RngStream]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chain (23) and fine Euler solution of (24) driven by one Brownian path.

    Returns (chain knots, limit knots, chain driver increments).
    """
    X, W = trivial_coupling_knots(n, T, streams, refine)
    dX = np.diff(X, axis=1)
    chain = euler_knots(n, a, b, float(z0), dX, X=X)
    limit = euler_knots(n * refine, a, b, float(z0), np.diff(W, axis=1), X=W)
    return chain, limit, dX


def gen_sde_coupled_pair(n: int, T: float, a, b, z0: float, refine: int, stream: RngStream) -> CoupledPair:
    chain, limit, dX = sde_coupled_knots(n, T, a, b, z0, refine, [stream])
    a, b = _as_expr(a), _as_expr(b)
    return CoupledPair(PathGrid(n, T, chain[0], drive=dX[0], coeffs=(a, b)),
                       PathGrid(n * refine, T, limit[0]), K=1)


PROCESS_KINDS = ("walk", "sde_chain", "bm_exact", "stable_exact", "diffusion_reference")


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    law: IncrementLaw | None = None
    a: object = "0"
    b: object = "1"
    z0: float = 0.0
    refine: int = 64
    d: int = 1
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in PROCESS_KINDS:
            raise ConfigurationError(f"unknown process kind {self.kind!r}; expected one of {PROCESS_KINDS}")
        if self.kind in ("walk", "sde_chain") and self.law is None:
            raise ConfigurationError(f"process {self.kind} needs an increment law")
        object.__setattr__(self, "a", _as_expr(self.a))
        object.__setattr__(self, "b", _as_expr(self.b))

    @property
    def dim(self) -> int:
        if self.kind == "walk":
            return self.law.d if self.law.kind == "gaussian_iid" else 1
        return self.d if self.kind == "bm_exact" else 1

    def simulate(self, n: int, T: float, streams: Sequence[RngStream], x0=None,
                 lookahead: int = 0) -> tuple[np.ndarray, np.ndarray | None]:
        """Knots of one path per stream started at ``x0`` (default: z0 / origin).

        The second element holds the driver increments for difference schemes.
        """
        if self.kind == "walk":
            start = 0.0 if x0 is None else x0
            return walk_knots(n, T, self.law, streams, x0=start, lookahead=lookahead), None
        if self.kind == "sde_chain":
            start = self.z0 if x0 is None else float(x0)
            return sde_chain_knots(n, T, self.a, self.b, start, self.law, streams, lookahead)
        if self.kind == "bm_exact":
            start = 0.0 if x0 is None else x0
            return bm_knots(n, T, self.d, streams, lookahead) + np.asarray(start, dtype=float), None
        if self.kind == "stable_exact":
            start = 0.0 if x0 is None else float(x0)
            return stable_knots(n, T, self.alpha, streams, lookahead) + start, None
        if lookahead:
            raise ConfigurationError("diffusion_reference does not support lookahead padding")
        start = self.z0 if x0 is None else float(x0)
        fine = diffusion_reference_knots(n, T, self.a, self.b, start, self.refine, streams)
        return fine[:, :: self.refine], None
