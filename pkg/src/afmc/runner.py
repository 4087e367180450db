"""Experiment pipeline: generate, evaluate functionals, compare, emit outputs."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import exp1

from . import __version__
from .characteristics import (CharacteristicTable, DensityModel, MeasureSpec, characteristic_analytic_measure,
                              characteristic_analytic_point, characteristic_lattice_exact, characteristic_mc,
                              llt_discrepancy, llt_surface, supnorm_gap, theorem61_report)
from .config import ExperimentConfig
from .diagnostics import (abs_normal_cdf, coupled_l2_discrepancy, coupling_condition_iii, ks_distance,
                          supnorm_report)
from .errors import ConfigurationError
from .functionals import FunctionalSpec, UnitCircle, additive_values
from .parallel import run_paths
from .processes import ProcessSpec, bm_knots
from .sources import IncrementLaw, streams

EXIT_PASS, EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    wall_time: float
    workers: int
    digests: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed, "version": self.version,
                "wall_time": self.wall_time, "workers": self.workers, "digests": self.digests}


@dataclass
class RunResult:
    manifest: RunManifest
    results: dict
    passed: bool

    @property
    def exit_code(self) -> int:
        return EXIT_PASS if self.passed else EXIT_FAIL


# config -> model objects ----------------------------------------------------

def build_law(cfg: ExperimentConfig) -> IncrementLaw:
    p = cfg.process
    if p.law == "rademacher":
        return IncrementLaw.rademacher()
    if p.law == "lazy_lattice":
        return IncrementLaw.lazy_lattice(p.p0)
    if p.law == "gaussian":
        return IncrementLaw.gaussian(p.d)
    return IncrementLaw.pareto_lattice(p.alpha)


def build_process(cfg: ExperimentConfig) -> ProcessSpec:
    p = cfg.process
    law = build_law(cfg)
    return ProcessSpec(p.kind, law, a=p.a, b=p.b, z0=p.z0, refine=p.refine, d=p.d,
                       alpha=law.tail_index if p.kind == "walk" else p.alpha)


def build_functional(cfg: ExperimentConfig) -> FunctionalSpec:
    f = cfg.functional
    law = build_law(cfg)
    if f.kind == "censored_point":
        return FunctionalSpec.censored_point(f.z_star, law if cfg.process.kind == "walk" else None)
    if f.kind == "doob_zero":
        return FunctionalSpec.doob_zero()
    if f.kind == "visit_count":
        return FunctionalSpec.visit_count(f.z_star)
    if f.kind == "tube":
        if f.set != "circle":
            raise ConfigurationError(f"functional.set: unknown set {f.set!r}; expected circle")
        return FunctionalSpec.tube(UnitCircle(f.radius))
    return FunctionalSpec.constant(f.c)


def start_point(cfg: ExperimentConfig, x: float):
    """Start points are scalars; for d > 1 the entry x stands for (x, 0, ..., 0)."""
    d = build_process(cfg).dim
    if d == 1:
        return float(x)
    v = np.zeros(d)
    v[0] = x
    return v


def limit_factor(cfg: ExperimentConfig) -> float:
    """Constant relating the chain functional's limit to the limit process local time."""
    law = build_law(cfg)
    kind = cfg.functional.kind
    if kind == "censored_point" and cfg.process.kind == "walk":
        return law.p_nonzero
    if kind == "visit_count" and law.is_lattice:
        return 1.0 / law.norm
    return 1.0


def density_model(cfg: ExperimentConfig) -> DensityModel:
    p = cfg.process
    law = build_law(cfg)
    if p.kind == "walk":
        if law.kind == "pareto_lattice":
            return DensityModel.stable(law.alpha)
        return DensityModel.gaussian(law.d if law.kind == "gaussian_iid" else 1)
    if p.kind == "stable_exact":
        return DensityModel.stable(p.alpha)
    if p.kind == "bm_exact":
        return DensityModel.gaussian(p.d)
    a, b = build_process(cfg).a, build_process(cfg).b
    if b.constant() == 1.0 and a.constant() == 0.0:
        return DensityModel.gaussian(1)
    xs = np.linspace(-3, 3, 13)
    if b.constant() == 1.0 and np.allclose(a(xs), -xs, rtol=0, atol=1e-15):
        return DensityModel.ou()
    raise ConfigurationError("compare.reference: no analytic transition density for these coefficients")


def reference_values(cfg: ExperimentConfig, xs) -> np.ndarray:
    e, c = cfg.estimate, cfg.compare
    if c.reference == "analytic_point":
        if cfg.functional.kind not in ("censored_point", "doob_zero", "visit_count"):
            raise ConfigurationError("compare.reference: analytic_point needs a point functional")
        z = cfg.functional.z_star if cfg.functional.kind != "doob_zero" else 0.0
        model = density_model(cfg)
        return np.array([characteristic_analytic_point(z, limit_factor(cfg), model, e.s, e.t, x) for x in xs])
    if c.reference == "circle_e1":
        if cfg.functional.kind != "tube" or build_process(cfg).dim != 2:
            raise ConfigurationError("compare.reference: circle_e1 needs a tube functional in d = 2")
        mu = MeasureSpec.circle(cfg.functional.radius)
        return np.array([characteristic_analytic_measure(mu, DensityModel.gaussian(2), e.s, e.t,
                                                         start_point(cfg, x)) for x in xs])
    if c.reference == "lattice_exact":
        law = build_law(cfg)
        return characteristic_lattice_exact(build_functional(cfg), law, cfg.process.n, e.s, e.t, xs)
    raise ConfigurationError(f"compare.reference: {c.reference} cannot produce characteristic values")


def circle_origin_value(t: float = 1.0) -> float:
    """Closed form of the unit-circle tube characteristic at the origin over [0, t]."""
    return float(exp1(1.0 / (2.0 * t)) / (2.0 * math.pi))


# modes ----------------------------------------------------------------------

def _run_distribution(cfg, workers):
    e, c = cfg.estimate, cfg.compare
    spec, proc, n = build_functional(cfg), build_process(cfg), cfg.process.n
    x0 = e.x[0]
    if c.reference != "abs_normal":
        raise ConfigurationError("compare.reference: distribution mode supports abs_normal only")
    if cfg.functional.kind not in ("censored_point", "doob_zero", "visit_count"):
        raise ConfigurationError("functional.kind: abs_normal reference needs a point functional")
    z = cfg.functional.z_star if cfg.functional.kind != "doob_zero" else 0.0
    if x0 != z:
        raise ConfigurationError("estimate.x: the abs_normal law holds only for a start at functional.z_star")
    if density_model(cfg).kind != "gaussian":
        raise ConfigurationError("compare.reference: abs_normal needs a Brownian limit")
    mean, se, vals = characteristic_mc(spec, proc, start_point(cfg, x0), e.s, e.t, e.paths, cfg.run.seed, n,
                                       workers, return_samples=True)
    scale = limit_factor(cfg) * math.sqrt(e.t - e.s)
    rep = ks_distance(vals, abs_normal_cdf(scale)).judge(c.tolerance)
    table = CharacteristicTable([e.s], [e.t], [x0], [mean], [se], "mc", n, e.paths)
    results = {"reports": [rep.to_json()],
               "summary": {"mean": mean, "se": se, "reference_mean": scale * math.sqrt(2.0 / math.pi),
                           "reference_scale": scale}}
    return results, table, vals, bool(rep.passed)


def _run_characteristic(cfg, workers):
    e, c = cfg.estimate, cfg.compare
    spec, proc, n = build_functional(cfg), build_process(cfg), cfg.process.n
    means, ses = [], []
    for i, x in enumerate(e.x):
        m, s = characteristic_mc(spec, proc, start_point(cfg, x), e.s, e.t, e.paths, cfg.run.seed, n, workers,
                                 offset=i * e.paths)
        means.append(m)
        ses.append(s)
    k = len(e.x)
    mc = CharacteristicTable([e.s] * k, [e.t] * k, list(e.x), means, ses, "mc", n, e.paths)
    ref_vals = reference_values(cfg, e.x)
    ref = CharacteristicTable([e.s] * k, [e.t] * k, list(e.x), ref_vals, np.zeros(k), c.reference, n, 0)
    gap = supnorm_gap(mc, ref)
    rep = supnorm_report(gap.gap, gap.noise_floor, e.paths)
    passed = gap.gap < gap.noise_floor + c.tolerance
    rep.tolerance, rep.passed = c.tolerance, bool(passed)
    results = {"reports": [rep.to_json()],
               "diagnostics": theorem61_report(delta_n=_delta(spec, n), supnorm=gap),
               "summary": {"mc": means, "se": ses, "reference": ref_vals.tolist()}}
    merged = CharacteristicTable(mc.s + ref.s, mc.t + ref.t, mc.x + ref.x,
                                 np.concatenate([mc.values, ref.values]), np.concatenate([mc.se, ref.se]),
                                 ["mc"] * k + [c.reference] * k, n, e.paths)
    return results, merged, None, bool(passed)


def _delta(spec: FunctionalSpec, n: int):
    d = spec.delta_formula(n)
    return None if d is None or not math.isfinite(d) else float(d)


def _run_llt(cfg, workers):
    law = build_law(cfg)
    ks = list(cfg.estimate.ks)
    eps = [llt_discrepancy(law, k) for k in ks]
    surface = llt_surface(law, cfg.process.n, ks)
    decreasing = all(a > b for a, b in zip(eps, eps[1:]))
    results = {"reports": [], "llt": {"k": ks, "eps_k": eps, "decreasing": decreasing},
               "diagnostics": theorem61_report(llt=surface)}
    m = len(ks)
    table = CharacteristicTable([0.0] * m, [k / cfg.process.n for k in ks], [0.0] * m, eps, np.zeros(m),
                                "llt_eps_k", cfg.process.n, 0)
    return results, table, None, decreasing


@dataclass(frozen=True, eq=False)
class CouplingTask:
    """Censored local time on one fine Brownian path and its subsampled chains."""

    ns: tuple
    n_fine: int
    s: float
    t: float
    z_star: float
    seed: int

    def __call__(self, lo: int, hi: int):
        W = bm_knots(self.n_fine, self.t, 1, streams(self.seed, lo, hi))
        spec = FunctionalSpec.censored_point(self.z_star)
        fine = additive_values(spec, W, self.n_fine, self.s, self.t)
        out = [fine]
        for n in self.ns:
            r = self.n_fine // n
            out.append(additive_values(spec, W[:, ::r], n, self.s, self.t))
        return tuple(out)


COUPLING_BLOCK = 100


def _run_coupling(cfg, workers):
    e, c = cfg.estimate, cfg.compare
    ns = tuple(int(n) for n in e.ns)
    parts = run_paths(CouplingTask(ns, e.n_fine, e.s, e.t, cfg.functional.z_star, cfg.run.seed), e.paths,
                      workers, block=COUPLING_BLOCK)
    fine, chains = parts[0], parts[1:]
    rows, meds = [], []
    for n, vals in zip(ns, chains):
        d = coupled_l2_discrepancy(vals, fine)
        meds.append(d.median)
        rows.append({"n": n, "mean": d.mean, "se": d.se, "median": d.median})
    decreasing = all(a > b for a, b in zip(meds, meds[1:]))
    # knot-distance probability for the trivial coupling, on a fresh block of pairs at the coarsest n
    n0 = ns[0]
    r = e.n_fine // n0
    W = bm_knots(e.n_fine, e.t, 1, streams(cfg.run.seed, 0, min(e.paths, 200), offset=10 ** 9))
    prob = coupling_condition_iii(W[:, ::r], W, n0, c.gamma, e.t, K=1, limit_refine=r)
    passed = decreasing and prob.p == 0.0
    results = {"reports": [], "coupling": {"discrepancy": rows, "median_decreasing": decreasing,
                                           "condition_iii": {"p": prob.p, "se": prob.se, "M": prob.M,
                                                             "gamma": c.gamma}}}
    m = len(ns)
    table = CharacteristicTable([e.s] * m, [e.t] * m, [0.0] * m, [np.mean(ch) for ch in chains],
                                [np.std(ch, ddof=1) / math.sqrt(len(ch)) for ch in chains], "mc", max(ns), e.paths)
    return results, table, fine, passed


MODES = {"distribution": _run_distribution, "characteristic": _run_characteristic, "llt": _run_llt,
         "coupling_l2": _run_coupling}


# outputs --------------------------------------------------------------------

def _write_samples(path: Path, vals) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path_index", "value"])
        if vals is not None:
            for i, v in enumerate(np.asarray(vals, dtype=float)):
                w.writerow([i, repr(float(v))])


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int | None = None) -> RunResult:
    """Run a validated config and write results.json, characteristics.csv, samples.csv, manifest.json."""
    cfg.validate()
    workers = cfg.run.workers if workers is None else int(workers)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results, table, samples, passed = MODES[cfg.estimate.mode](cfg, workers)
    results = {"name": cfg.name, "mode": cfg.estimate.mode, "seed": cfg.run.seed, "config": cfg.to_dict(),
               "status": "pass" if passed else "fail", **results}
    results["config"]["run"].pop("workers", None)
    with open(out / "results.json", "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    table.write_csv(out / "characteristics.csv")
    _write_samples(out / "samples.csv", samples)
    digests = {name: sha256_file(out / name) for name in ("results.json", "characteristics.csv", "samples.csv")}
    manifest = RunManifest(cfg.digest(), cfg.run.seed, __version__, round(time.perf_counter() - t0, 3), workers,
                           digests)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult(manifest, results, passed)
