"""Transition densities, symbols and characteristics f^{s,t}(x).

Analytic characteristics integrate a transition density over the time lag;
Monte-Carlo characteristics average the functional over fresh chains
started at x; lattice characteristics are computed exactly from
convolution powers of the increment law.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.special import erfc, gamma as gamma_fn, ive

from .errors import ConfigurationError, DomainError
from .functionals import FunctionalSpec, additive_values, chi_reduce
from .parallel import run_paths
from .processes import GRID_EPS, ProcessSpec, n_cells
from .sources import IncrementLaw, streams

SQRT2PI = math.sqrt(2.0 * math.pi)


# densities ------------------------------------------------------------------

@lru_cache(maxsize=65536)
def stable_density_unit(alpha: float, z: float) -> float:
    """p_1(z) = (1/pi) int_0^inf cos(u z) exp(-u^alpha) du for the symmetric stable law."""
    z = abs(float(z))
    if z == 0.0:
        return gamma_fn(1.0 + 1.0 / alpha) / math.pi
    # exp(-u^alpha) < 1e-12 beyond this point
    upper = (-math.log(1e-12)) ** (1.0 / alpha)
    val, _ = integrate.quad(lambda u: math.exp(-u ** alpha), 0.0, upper, weight="cos", wvar=z,
                            epsabs=1e-12, limit=400)
    # the tail beyond `upper` contributes less than the envelope bound
    return max(val / math.pi, 0.0)


DENSITY_KINDS = ("gaussian", "stable", "ou", "lattice_exact")


@dataclass(frozen=True)
class DensityModel:
    kind: str
    d: int = 1
    alpha: float = 2.0
    law: IncrementLaw | None = None
    n: int = 1

    def __post_init__(self):
        if self.kind not in DENSITY_KINDS:
            raise ConfigurationError(f"unknown density model {self.kind!r}")
        if self.kind == "stable" and not 0.0 < self.alpha <= 2.0:
            raise ConfigurationError(f"stable index must lie in (0, 2], got {self.alpha}")
        if self.kind == "lattice_exact" and (self.law is None or not self.law.is_finite_lattice):
            raise ConfigurationError("lattice_exact needs a finite-support lattice law")

    @classmethod
    def gaussian(cls, d: int = 1) -> DensityModel:
        return cls("gaussian", d=d)

    @classmethod
    def stable(cls, alpha: float) -> DensityModel:
        return cls("stable", alpha=float(alpha))

    @classmethod
    def ou(cls) -> DensityModel:
        return cls("ou")

    @classmethod
    def lattice(cls, law: IncrementLaw, n: int) -> DensityModel:
        return cls("lattice_exact", law=law, n=int(n))

    @property
    def index(self) -> float:
        """Self-similarity index governing the r^{-1/index} blow-up at r = 0."""
        return self.alpha if self.kind == "stable" else 2.0

    @property
    def reference_measure(self) -> str:
        return "counting" if self.kind == "lattice_exact" else "lebesgue"


def ou_variance(r: float) -> float:
    return -math.expm1(-2.0 * r) / 2.0


def density_eval(model: DensityModel, r: float, x, y) -> float:
    if r <= 0:
        raise DomainError(f"time lag must be positive, got {r}")
    if model.kind == "gaussian":
        diff = np.atleast_1d(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        q = float(np.dot(diff, diff))
        return (2.0 * math.pi * r) ** (-model.d / 2.0) * math.exp(-q / (2.0 * r))
    if model.kind == "stable":
        scale = r ** (-1.0 / model.alpha)
        return scale * stable_density_unit(model.alpha, scale * (float(y) - float(x)))
    if model.kind == "ou":
        v = ou_variance(r)
        m = float(x) * math.exp(-r)
        return math.exp(-(float(y) - m) ** 2 / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)
    k = int(round(r * model.n))
    if abs(k - r * model.n) > GRID_EPS or k < 1:
        raise DomainError("lattice densities exist only at lags k/n, k >= 1")
    return lattice_transition(model.law, model.n, k, x, y)


# lattice transitions ---------------------------------------------------------

@lru_cache(maxsize=256)
def convolution_power(law: IncrementLaw, k: int) -> tuple[int, np.ndarray]:
    """(lowest reachable offset, P(S_k = lowest + i)) by binary doubling."""
    if k < 0:
        raise DomainError("k must be non-negative")
    if k == 0:
        return 0, np.ones(1)
    if k == 1:
        lo = min(law.support)
        p = np.zeros(max(law.support) - lo + 1)
        for j, q in zip(law.support, law.probs):
            p[j - lo] += q
        return lo, p
    half_lo, half = convolution_power(law, k // 2)
    lo, p = 2 * half_lo, np.convolve(half, half)
    if k % 2:
        one_lo, one = convolution_power(law, 1)
        lo, p = lo + one_lo, np.convolve(p, one)
    p.setflags(write=False)
    return lo, p


def lattice_transition(law: IncrementLaw, n: int, k: int, x: float, y: float) -> float:
    """P(X_n((i+k)/n) = y | X_n(i/n) = x) for a walk on the scaled lattice."""
    if not law.is_finite_lattice:
        raise DomainError("lattice_transition needs a finite-support lattice law")
    if k < 1:
        raise DomainError("k must be >= 1")
    unit = law.unit(n)
    m = (float(y) - float(x)) / unit
    mi = round(m)
    if abs(m - mi) > 1e-9:
        raise DomainError(f"displacement {y - x} is not on the lattice of spacing {unit}")
    lo, p = convolution_power(law, k)
    idx = mi - lo
    return float(p[idx]) if 0 <= idx < len(p) else 0.0


def normal_pdf(z):
    return np.exp(-0.5 * np.asarray(z, dtype=float) ** 2) / SQRT2PI


def llt_discrepancy(law: IncrementLaw, k: int) -> float:
    """eps_k = sup_i |(sigma sqrt(k)/h) P(S_k = i h) - p_1(i h / (sigma sqrt k))| over reachable i."""
    if not law.is_finite_lattice:
        raise ConfigurationError("llt_discrepancy needs a finite-support lattice law")
    span = law.span
    if span != 1:
        raise ConfigurationError(f"law is periodic with period {span}; the local limit theorem needs aperiodicity")
    sigma = math.sqrt(law.variance)
    lo, p = convolution_power(law, k)
    i = np.arange(lo, lo + len(p))
    reach = p > 0
    scale = sigma * math.sqrt(k)
    return float(np.max(np.abs(scale * p[reach] - normal_pdf(i[reach] / scale))))


def llt_surface(law: IncrementLaw, n: int, ks: Sequence[int], gamma: float = 0.5) -> dict[int, float]:
    """sup_y |p_{n,k}(0,y) - p_{k/n}(0,y)| (k/n)^gamma, lattice mass read as density per cell."""
    if not law.is_finite_lattice:
        raise ConfigurationError("llt_surface needs a finite-support lattice law")
    unit = law.unit(n)
    out = {}
    for k in ks:
        lo, p = convolution_power(law, int(k))
        y = np.arange(lo, lo + len(p)) * unit
        reach = p > 0
        r = k / n
        gauss = np.exp(-y[reach] ** 2 / (2 * r)) / math.sqrt(2 * math.pi * r)
        out[int(k)] = float(np.max(np.abs(p[reach] / unit - gauss)) * r ** gamma)
    return out


# analytic characteristics ----------------------------------------------------

def _gaussian_point_closed_form(tau: float, c: float) -> float:
    # int_0^tau (2 pi r)^{-1/2} exp(-c^2/(2r)) dr
    c = abs(c)
    if c == 0:
        return math.sqrt(2.0 * tau / math.pi)
    return math.sqrt(2.0 * tau / math.pi) * math.exp(-c * c / (2.0 * tau)) - c * erfc(c / math.sqrt(2.0 * tau))


def characteristic_analytic_point(z_star: float, p_nonzero: float, model: DensityModel,
                                  s: float, t: float, x: float) -> float:
    """p_nonzero * int_0^{t-s} p_r(x, z*) dr."""
    if t < s:
        raise DomainError(f"need t >= s, got s={s}, t={t}")
    if model.kind not in ("gaussian", "stable", "ou") or (model.kind == "gaussian" and model.d != 1):
        raise ConfigurationError("point characteristics need a one-dimensional gaussian, stable or ou model")
    alpha = model.index
    if alpha <= 1.0:
        raise DomainError(f"local time at a point does not exist for alpha={alpha} <= 1")
    tau = t - s
    if tau == 0:
        return 0.0
    if model.kind == "gaussian":
        return p_nonzero * _gaussian_point_closed_form(tau, float(z_star) - float(x))
    # r = u^q flattens the r^{-1/alpha} singularity at r = 0
    q = alpha / (alpha - 1.0)

    def integrand(u):
        if u == 0.0:
            if model.kind == "stable" and z_star == x:
                return q * stable_density_unit(alpha, 0.0)
            if model.kind == "ou" and z_star == x == 0:
                return q / math.sqrt(2.0 * math.pi)
            return 0.0
        r = u ** q
        return density_eval(model, r, x, z_star) * q * u ** (q - 1.0)

    val, _ = integrate.quad(integrand, 0.0, tau ** (1.0 / q), epsabs=1e-10, epsrel=1e-10, limit=200)
    return p_nonzero * val


MEASURE_KINDS = ("point", "surface_circle", "lattice_symbol")


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    kind: str
    mass: float = 1.0
    center: tuple = (0.0,)
    radius: float = 1.0
    points: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ConfigurationError(f"unknown measure kind {self.kind!r}")
        if not math.isfinite(self.total_mass) or self.total_mass < 0:
            raise ConfigurationError("symbol measures must have finite non-negative mass")

    @classmethod
    def point(cls, z_star, mass: float = 1.0) -> MeasureSpec:
        return cls("point", mass=float(mass), center=tuple(np.atleast_1d(z_star).astype(float)))

    @classmethod
    def circle(cls, radius: float = 1.0, mass: float = 1.0) -> MeasureSpec:
        return cls("surface_circle", mass=float(mass), center=(0.0, 0.0), radius=float(radius))

    @classmethod
    def lattice_symbol(cls, points, weights) -> MeasureSpec:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls("lattice_symbol", points=pts, weights=np.asarray(weights, dtype=float))

    @property
    def total_mass(self) -> float:
        if self.kind == "lattice_symbol":
            return float(np.sum(self.weights)) if self.weights is not None else 0.0
        return self.mass

    def ball_mass(self, x, R: float) -> float:
        """mu(B(x, R)) for the open ball."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "point":
            return self.mass if np.linalg.norm(x - np.asarray(self.center)) < R else 0.0
        if self.kind == "lattice_symbol":
            if self.points is None or len(self.points) == 0:
                return 0.0
            inside = np.linalg.norm(self.points - x, axis=1) < R
            return float(np.sum(self.weights[inside]))
        c = float(np.linalg.norm(x))
        rho = self.radius
        if c == 0.0:
            return self.mass if rho < R else 0.0
        cos_lim = (rho * rho + c * c - R * R) / (2.0 * rho * c)
        if cos_lim >= 1.0:
            return 0.0
        if cos_lim < -1.0:
            return self.mass
        return self.mass * math.acos(cos_lim) / math.pi

    def heat_integral(self, r: float, x) -> float:
        """int p_r(x, y) mu(dy) for the standard Gaussian kernel in the measure's dimension."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "surface_circle":
            c = float(np.linalg.norm(x))
            rho = self.radius
            # exp(-(c^2 + rho^2)/2r) I_0(c rho / r) written with the scaled Bessel function
            return self.mass * math.exp(-(c - rho) ** 2 / (2.0 * r)) * ive(0, c * rho / r) / (2.0 * math.pi * r)
        if self.kind == "point":
            pts, w = np.asarray(self.center)[None, :], np.array([self.mass])
        else:
            if self.points is None or len(self.points) == 0:
                return 0.0
            pts, w = self.points, self.weights
        d = pts.shape[1]
        sq = np.sum((pts - x) ** 2, axis=1)
        return float(np.sum(w * np.exp(-sq / (2.0 * r)))) * (2.0 * math.pi * r) ** (-d / 2.0)


def _blowup_exponent(mu: MeasureSpec, probes) -> float:
    rs = np.array([1e-3, 1e-4, 1e-5, 1e-6])
    sups = np.array([max(mu.heat_integral(r, p) for p in probes) for r in rs])
    if np.any(sups <= 0):
        return 0.0
    return float(np.polyfit(np.log(rs), np.log(sups), 1)[0])


def characteristic_analytic_measure(mu: MeasureSpec, model: DensityModel, s: float, t: float, x,
                                    probes=None) -> float:
    """int_0^{t-s} int p_r(x, y) mu(dy) dr for a Gaussian model."""
    if model.kind != "gaussian":
        raise ConfigurationError("measure characteristics are implemented for Gaussian models")
    if t < s:
        raise DomainError(f"need t >= s, got s={s}, t={t}")
    if t == s:
        return 0.0
    if probes is None:
        probes = _default_probes(mu)
    if _blowup_exponent(mu, probes) <= -1.0 + 1e-3:
        raise DomainError("int_0^T sup_x int p_r(x,y) mu(dy) dr diverges for this symbol")
    tau = t - s
    # r = u^2 absorbs an r^{-1/2} blow-up
    val, _ = integrate.quad(lambda u: mu.heat_integral(u * u, x) * 2.0 * u if u > 0 else 0.0,
                            0.0, math.sqrt(tau), epsabs=1e-11, epsrel=1e-10, limit=400)
    return val


def _default_probes(mu: MeasureSpec):
    if mu.kind == "surface_circle":
        ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        return [np.array([mu.radius * math.cos(a), mu.radius * math.sin(a)]) for a in ang] + [np.zeros(2)]
    if mu.kind == "point":
        return [np.asarray(mu.center)]
    return [p for p in mu.points] if mu.points is not None else [np.zeros(1)]


# tables ---------------------------------------------------------------------

@dataclass(eq=False)
class CharacteristicTable:
    s: list
    t: list
    x: list
    values: np.ndarray
    se: np.ndarray
    provenance: str | list
    n: int = 0
    M: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.se = np.asarray(self.se, dtype=float)
        if not (len(self.s) == len(self.t) == len(self.x) == len(self.values) == len(self.se)):
            raise ConfigurationError("characteristic table columns differ in length")
        if isinstance(self.provenance, str):
            self.provenance = [self.provenance] * len(self.values)

    def keys(self):
        return [(round(s, 12), round(t, 12), tuple(np.round(np.atleast_1d(x), 12)))
                for s, t, x in zip(self.s, self.t, self.x)]

    def write_csv(self, path) -> None:
        d = len(np.atleast_1d(self.x[0])) if self.x else 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "t"] + [f"x_{i + 1}" for i in range(d)] + ["value", "se", "provenance", "n", "M"])
            for s, t, x, v, e, p in zip(self.s, self.t, self.x, self.values, self.se, self.provenance):
                w.writerow([repr(float(s)), repr(float(t))] + [repr(float(c)) for c in np.atleast_1d(x)]
                           + [repr(float(v)), repr(float(e)), p, self.n, self.M])


@dataclass(frozen=True)
class GapReport:
    gap: float
    noise_floor: float
    argmax: int


def supnorm_gap(fn_table: CharacteristicTable, f_table: CharacteristicTable) -> GapReport:
    if fn_table.keys() != f_table.keys():
        raise DomainError("characteristic tables are on different (s, t, x) grids")
    diff = np.abs(fn_table.values - f_table.values)
    se = np.concatenate([fn_table.se, f_table.se])
    return GapReport(float(diff.max()), float(3.0 * se.max()) if len(se) else 0.0, int(diff.argmax()))


# Monte-Carlo and exact characteristics of chains -----------------------------

@dataclass(frozen=True, eq=False)
class FunctionalTask:
    """Per-block evaluation of phi_n^{0,tau} on fresh chains started at x0."""

    spec: FunctionalSpec
    process: ProcessSpec
    n: int
    tau: float
    x0: object
    seed: int
    offset: int = 0

    def __call__(self, start: int, stop: int) -> np.ndarray:
        st = streams(self.seed, start, stop, self.offset)
        knots, _ = self.process.simulate(self.n, self.tau, st, x0=self.x0, lookahead=self.spec.L - 1)
        return additive_values(self.spec, knots, self.n, 0.0, self.tau)


def characteristic_mc(spec: FunctionalSpec, process: ProcessSpec, x, s: float, t: float, M: int,
                      seed: int, n: int, workers: int = 1, offset: int = 0,
                      return_samples: bool = False):
    """(mean, standard error) of phi_n^{s,t} given X_n(s) = x over M fresh paths."""
    if abs(n * s - round(n * s)) > GRID_EPS:
        raise DomainError(f"s={s} is not on the chain grid 1/{n}")
    if t <= s:
        raise DomainError(f"need t > s, got s={s}, t={t}")
    vals = run_paths(FunctionalTask(spec, process, n, t - s, x, seed, offset), M, workers)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(M)) if M > 1 else 0.0
    if np.all(vals == vals[0]):
        se = 0.0
    return (mean, se, vals) if return_samples else (mean, se)


def occupation_green(law: IncrementLaw, steps: int) -> tuple[int, np.ndarray]:
    """(lowest offset, G) with G(m) = sum_{k<steps} P(S_k = m)."""
    lo1, p1 = convolution_power(law, 1)
    hi1 = lo1 + len(p1) - 1
    lo, hi = min(0, lo1 * steps), max(0, hi1 * steps)
    size = hi - lo + 1
    dist = np.zeros(size)
    dist[-lo] = 1.0
    green = np.zeros(size)
    for _ in range(steps):
        green += dist
        new = np.zeros(size)
        for j, q in enumerate(p1):
            if q == 0:
                continue
            shift = lo1 + j
            if shift >= 0:
                new[shift:] += q * dist[: size - shift]
            else:
                new[:shift] += q * dist[-shift:]
        dist = new
    return lo, green


def characteristic_lattice_exact(spec: FunctionalSpec, law: IncrementLaw, n: int, s: float, t: float,
                                 xs: Sequence[float]) -> np.ndarray:
    """Exact f_n^{s,t}(x) for a walk with a finite-support lattice law, x on the scaled lattice."""
    if t < s:
        raise DomainError(f"need t >= s, got s={s}, t={t}")
    if spec.L == 2:
        spec = chi_reduce(spec, law, n)
    elif spec.L != 1:
        raise ConfigurationError("exact lattice characteristics support L <= 2")
    steps = n_cells(n, t - s)
    unit = law.unit(n)
    lo, green = occupation_green(law, steps)
    m = np.arange(lo, lo + len(green))
    out = []
    for x in xs:
        i0 = round(float(x) / unit)
        if abs(i0 * unit - float(x)) > 1e-9 * max(1.0, abs(float(x))):
            raise DomainError(f"x={x} is not on the scaled lattice of spacing {unit}")
        vals = np.asarray(spec.kernel((i0 + m) * unit, n), dtype=float)
        out.append(float(np.dot(green, vals)))
    return np.array(out)


# condition diagnostics -------------------------------------------------------

def modulus_H(knots: np.ndarray, n: int, delta: float, T: float | None = None) -> np.ndarray:
    """H_{delta,n}^{0,T}: sup over knot pairs with |v-w| >= 1/n of |X(v)-X(w)|/|v-w|^delta."""
    K = knots.shape[1] - 1 if T is None else n_cells(n, T)
    H = np.zeros(knots.shape[0])
    for lag in range(1, K + 1):
        diff = knots[:, lag: K + 1] - knots[:, : K + 1 - lag]
        dist = np.abs(diff) if diff.ndim == 2 else np.linalg.norm(diff, axis=-1)
        H = np.maximum(H, dist.max(axis=1) / (lag / n) ** delta)
    return H


def modulus_moment(knots: np.ndarray, n: int, delta: float, C_delta: float, T: float | None = None):
    """Monte-Carlo estimate (mean, SE) of E[H_{delta,n}^{0,T}]^{C_delta}."""
    vals = modulus_H(knots, n, delta, T) ** C_delta
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return float(vals.mean()), se


@dataclass(frozen=True)
class BallGrowthReport:
    max_ratio: float
    center: tuple
    radius: float
    C_theta: float
    violated: bool


def ball_growth(mu: MeasureSpec, theta: float, C_theta: float, centers, radii,
                min_radius: float = 0.0) -> BallGrowthReport:
    """max over probes of mu(B(x,R))/R^theta, flagged against the bound C_theta."""
    best, arg = 0.0, (None, float("nan"))
    for c in centers:
        for R in radii:
            if R <= min_radius:
                continue
            ratio = mu.ball_mass(c, R) / R ** theta
            if ratio > best:
                best, arg = ratio, (tuple(np.atleast_1d(c).tolist()), float(R))
    return BallGrowthReport(best, arg[0], arg[1], C_theta, best > C_theta)


@dataclass(frozen=True)
class Thm61Constants:
    gamma: float
    delta: float
    theta: float
    C_delta: float
    C_gamma: float = 1.0
    C_theta: float = 1.0
    c_theta: float = 1.0

    def relations_hold(self) -> bool:
        return self.delta * self.theta + 1.0 > self.gamma and self.C_delta > 2.0 * self.theta + 2.0


def check_condition7(consts: Thm61Constants) -> bool:
    return consts.relations_hold()


def theorem61_report(*, delta_n: float | None = None, supnorm: GapReport | None = None,
                     llt: dict | None = None, modulus: tuple | None = None,
                     ballgrowth: BallGrowthReport | None = None,
                     constants: Thm61Constants | None = None) -> dict:
    """JSON-ready diagnostics keyed by condition name; absent inputs are omitted."""
    out: dict = {}
    if delta_n is not None:
        out["cond1_delta"] = {"delta_n": delta_n}
    if supnorm is not None:
        out["cond2_supnorm"] = {"gap": supnorm.gap, "noise_floor": supnorm.noise_floor}
    if llt is not None:
        out["cond4_llt"] = {str(k): v for k, v in llt.items()}
    if modulus is not None:
        out["cond5_modulus"] = {"mean": modulus[0], "se": modulus[1]}
    if ballgrowth is not None:
        out["cond6_ballgrowth"] = {"max_ratio": ballgrowth.max_ratio, "C_theta": ballgrowth.C_theta,
                                   "violated": ballgrowth.violated}
    if constants is not None:
        out["cond7_relations"] = {"gamma": constants.gamma, "delta": constants.delta,
                                  "theta": constants.theta, "C_delta": constants.C_delta,
                                  "holds": constants.relations_hold()}
    return out
