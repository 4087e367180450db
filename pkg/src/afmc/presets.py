"""Pinned experiment presets.

| name            | model                                   | n     | M      | check                               |
|-----------------|-----------------------------------------|-------|--------|-------------------------------------|
| prop41          | Bernoulli walk, censored local time at 0| 2048  | 50000  | KS to law of abs N(0,1) < 0.03      |
| prop41_lazy     | lazy walk p0=1/2, censored at 0         | 2048  | 50000  | KS to law of abs N(0,1)/2 < 0.03    |
| prop41_stable   | Pareto lattice walk alpha=1.5, censored | 1024  | 20000  | f_n(0) within 3 SE + 0.03 of limit  |
| prop52_ou       | OU scheme a=-x, b=1, Doob functional    | 2048  | 100000 | f_n(0) within 3 SE + 0.02 of limit  |
| example4_circle | 2-D Gaussian walk, tube at unit circle  | 4096  | 20000  | f_n(0) within 3 SE + 0.02 of E1/2pi |
| llt             | lazy lattice, exact eps_k               | -     | -      | eps_4 > eps_64 > eps_1024           |
| coupling_l2     | trivial Gaussian coupling, censored     | 256, 4096 | 1000 | median L2 gap decreases; P(knot gap > gamma) = 0 |

Budgets on one core: prop41 and prop41_lazy about 15 s each, prop52_ou
about 25 s, prop41_stable about 6 s, example4_circle about 12 s, llt and
coupling_l2 under 30 s.
"""
from __future__ import annotations

from .config import config_from_dict, ExperimentConfig
from .errors import ConfigurationError

_PRESETS: dict[str, dict] = {
    "prop41": {
        "process": {"kind": "walk", "law": "rademacher", "n": 2048, "T": 1.0},
        "functional": {"kind": "censored_point", "z_star": 0.0},
        "estimate": {"mode": "distribution", "s": 0.0, "t": 1.0, "x": [0.0], "paths": 50000},
        "compare": {"reference": "abs_normal", "metric": "ks_one_sample", "tolerance": 0.03},
    },
    "prop41_lazy": {
        "process": {"kind": "walk", "law": "lazy_lattice", "p0": 0.5, "n": 2048, "T": 1.0},
        "functional": {"kind": "censored_point", "z_star": 0.0},
        "estimate": {"mode": "distribution", "s": 0.0, "t": 1.0, "x": [0.0], "paths": 50000},
        "compare": {"reference": "abs_normal", "metric": "ks_one_sample", "tolerance": 0.03},
    },
    "prop41_stable": {
        "process": {"kind": "walk", "law": "pareto_lattice", "alpha": 1.5, "n": 1024, "T": 1.0},
        "functional": {"kind": "censored_point", "z_star": 0.0},
        "estimate": {"mode": "characteristic", "s": 0.0, "t": 1.0, "x": [0.0], "paths": 20000},
        "compare": {"reference": "analytic_point", "metric": "supnorm", "tolerance": 0.03},
    },
    "prop52_ou": {
        "process": {"kind": "sde_chain", "law": "gaussian", "a": "-x", "b": "1", "z0": 0.0,
                    "n": 2048, "T": 1.0},
        "functional": {"kind": "doob_zero"},
        "estimate": {"mode": "characteristic", "s": 0.0, "t": 1.0, "x": [0.0], "paths": 100000},
        "compare": {"reference": "analytic_point", "metric": "supnorm", "tolerance": 0.02},
    },
    "example4_circle": {
        "process": {"kind": "walk", "law": "gaussian", "d": 2, "n": 4096, "T": 1.0},
        "functional": {"kind": "tube", "set": "circle", "radius": 1.0},
        "estimate": {"mode": "characteristic", "s": 0.0, "t": 1.0, "x": [0.0], "paths": 20000},
        "compare": {"reference": "circle_e1", "metric": "supnorm", "tolerance": 0.02},
    },
    "llt": {
        "process": {"kind": "walk", "law": "lazy_lattice", "p0": 0.5, "n": 1024, "T": 1.0},
        "functional": {"kind": "censored_point"},
        "estimate": {"mode": "llt", "ks": [1, 4, 64, 1024], "paths": 1},
        "compare": {"reference": "lattice_exact", "metric": "supnorm", "tolerance": 1e-3},
    },
    "coupling_l2": {
        "process": {"kind": "bm_exact", "law": "gaussian", "n": 4096, "T": 1.0},
        "functional": {"kind": "censored_point", "z_star": 0.0},
        "estimate": {"mode": "coupling_l2", "s": 0.0, "t": 1.0, "x": [0.0], "paths": 1000,
                     "ns": [256, 4096], "n_fine": 65536},
        "compare": {"reference": "none", "metric": "supnorm", "tolerance": 1e-12, "gamma": 0.01},
    },
}


def preset_names() -> list[str]:
    return list(_PRESETS)


def preset(name: str, seed: int | None = None, workers: int | None = None) -> ExperimentConfig:
    if name not in _PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; valid presets: {', '.join(_PRESETS)}")
    data = {k: dict(v) for k, v in _PRESETS[name].items()}
    data["name"] = name
    run = {}
    if seed is not None:
        run["seed"] = seed
    if workers is not None:
        run["workers"] = workers
    data["run"] = run
    return config_from_dict(data)
