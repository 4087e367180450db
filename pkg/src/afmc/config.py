"""Experiment configuration: INI files with [section] headers, or JSON.

Grammar of the INI form::

    [process]     kind, law, p0, alpha, d, n, T, a, b, z0, refine
    [functional]  kind, z_star, set, radius, c
    [estimate]    mode, s, t, x, paths, ns, ks, n_fine
    [compare]     reference, metric, tolerance, gamma
    [run]         seed, workers

Lists (``x``, ``ns``, ``ks``) are comma separated. Unknown keys are errors.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .expr import ExprSyntaxError, parse_coefficient_expr

PROCESS_KINDS = ("walk", "sde_chain", "bm_exact", "stable_exact")
LAWS = ("rademacher", "lazy_lattice", "gaussian", "pareto_lattice")
FUNCTIONAL_KINDS = ("censored_point", "doob_zero", "visit_count", "tube", "constant")
MODES = ("distribution", "characteristic", "llt", "coupling_l2")
REFERENCES = ("abs_normal", "analytic_point", "circle_e1", "lattice_exact", "none")
METRICS = ("ks_one_sample", "supnorm")


@dataclass
class ProcessBlock:
    kind: str = "walk"
    law: str = "rademacher"
    p0: float = 0.5
    alpha: float = 2.0
    d: int = 1
    n: int = 1024
    T: float = 1.0
    a: str = "0"
    b: str = "1"
    z0: float = 0.0
    refine: int = 16


@dataclass
class FunctionalBlock:
    kind: str = "censored_point"
    z_star: float = 0.0
    set: str = "circle"
    radius: float = 1.0
    c: float = 1.0


@dataclass
class EstimateBlock:
    mode: str = "distribution"
    s: float = 0.0
    t: float = 1.0
    x: list = field(default_factory=lambda: [0.0])
    paths: int = 1000
    ns: list = field(default_factory=list)
    ks: list = field(default_factory=list)
    n_fine: int = 65536


@dataclass
class CompareBlock:
    reference: str = "abs_normal"
    metric: str = "ks_one_sample"
    tolerance: float = 0.03
    gamma: float = 0.01


@dataclass
class RunBlock:
    seed: int = 42
    workers: int = 1


@dataclass
class ExperimentConfig:
    process: ProcessBlock = field(default_factory=ProcessBlock)
    functional: FunctionalBlock = field(default_factory=FunctionalBlock)
    estimate: EstimateBlock = field(default_factory=EstimateBlock)
    compare: CompareBlock = field(default_factory=CompareBlock)
    run: RunBlock = field(default_factory=RunBlock)
    name: str = "custom"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of everything that determines the outputs (worker count excluded)."""
        d = self.to_dict()
        d["run"] = {"seed": d["run"]["seed"]}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def validate(self) -> ExperimentConfig:
        p, f, e, c, r = self.process, self.functional, self.estimate, self.compare, self.run
        _choice("process.kind", p.kind, PROCESS_KINDS)
        _choice("process.law", p.law, LAWS)
        _choice("functional.kind", f.kind, FUNCTIONAL_KINDS)
        _choice("estimate.mode", e.mode, MODES)
        _choice("compare.reference", c.reference, REFERENCES)
        _choice("compare.metric", c.metric, METRICS)
        if p.n < 1:
            raise ConfigurationError(f"process.n: must be >= 1, got {p.n}")
        if not p.T > 0:
            raise ConfigurationError(f"process.T: must be positive, got {p.T}")
        if p.d < 1:
            raise ConfigurationError(f"process.d: must be >= 1, got {p.d}")
        if p.refine < 1:
            raise ConfigurationError(f"process.refine: must be >= 1, got {p.refine}")
        if not 0.0 <= p.p0 < 1.0:
            raise ConfigurationError(f"process.p0: must lie in [0, 1), got {p.p0}")
        for key in ("a", "b"):
            try:
                parse_coefficient_expr(getattr(p, key))
            except ExprSyntaxError as exc:
                raise ConfigurationError(f"process.{key}: {exc}") from exc
        if e.paths < 1:
            raise ConfigurationError(f"estimate.paths: must be >= 1, got {e.paths}")
        if e.s < 0:
            raise ConfigurationError(f"estimate.s: must be >= 0, got {e.s}")
        if e.t < e.s:
            raise ConfigurationError(f"estimate.t: must be >= estimate.s ({e.s}), got {e.t}")
        if e.t > p.T + 1e-12:
            raise ConfigurationError(f"estimate.t: exceeds process.T ({p.T})")
        if not e.x:
            raise ConfigurationError("estimate.x: needs at least one start point")
        if e.mode == "llt" and (not e.ks or min(e.ks) < 1):
            raise ConfigurationError("estimate.ks: llt mode needs a list of positive step counts")
        if e.mode == "coupling_l2" and len(e.ns) < 2:
            raise ConfigurationError("estimate.ns: coupling_l2 mode needs at least two resolutions")
        if e.mode == "coupling_l2" and any(e.n_fine % k for k in e.ns):
            raise ConfigurationError("estimate.n_fine: must be a multiple of every entry of estimate.ns")
        if not (isinstance(c.tolerance, (int, float)) and math.isfinite(c.tolerance) and c.tolerance > 0):
            raise ConfigurationError(f"compare.tolerance: must be > 0, got {c.tolerance}")
        if not 0 <= r.seed < 2 ** 64:
            raise ConfigurationError(f"run.seed: must be an unsigned 64-bit integer, got {r.seed}")
        if r.workers < 1:
            raise ConfigurationError(f"run.workers: must be >= 1, got {r.workers}")
        return self


def _choice(name: str, value, options) -> None:
    if value not in options:
        raise ConfigurationError(f"{name}: unknown value {value!r}; expected one of {', '.join(options)}")


_BLOCKS = {"process": ProcessBlock, "functional": FunctionalBlock, "estimate": EstimateBlock,
           "compare": CompareBlock, "run": RunBlock}


def _coerce(section: str, key: str, raw, default):
    name = f"{section}.{key}"
    try:
        if isinstance(default, bool):
            return str(raw).strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, list):
            if isinstance(raw, (list, tuple)):
                items = list(raw)
            else:
                items = [s for s in str(raw).replace(" ", "").split(",") if s]
            conv = int if key in ("ns", "ks") else float
            return [conv(v) for v in items]
        return str(raw).strip()
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{name}: cannot read {raw!r} ({exc})") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for section, values in data.items():
        if section == "name":
            cfg.name = str(values)
            continue
        if section not in _BLOCKS:
            raise ConfigurationError(f"unknown section [{section}]")
        block = getattr(cfg, section)
        known = {fl.name for fl in dataclasses.fields(block)}
        for key, raw in values.items():
            if key not in known:
                raise ConfigurationError(f"{section}.{key}: unknown key")
            setattr(block, key, _coerce(section, key, raw, getattr(block, key)))
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    text = open(path).read()
    if str(path).endswith(".json") or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON config: {exc}") from None
        return config_from_dict(data)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep key case (process.T)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"invalid config file: {exc}") from None
    data = {sec: dict(parser[sec]) for sec in parser.sections()}
    return config_from_dict(data)


def dump_ini(cfg: ExperimentConfig) -> str:
    lines = []
    for section in _BLOCKS:
        lines.append(f"[{section}]")
        for key, val in dataclasses.asdict(getattr(cfg, section)).items():
            if isinstance(val, list):
                val = ", ".join(repr(v) for v in val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)
