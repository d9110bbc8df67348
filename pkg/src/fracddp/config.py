"""Experiment configuration files.

Grammar: INI-style sections ``[name]`` holding ``key = value`` lines; ``#`` and
``;`` start comments. Lists are whitespace or comma separated; ``inf`` is
accepted wherever a number is. Every key is optional (defaults below) and
unknown sections or keys are rejected, with the offending ``section.key``
named in the error.

    [model]        kind, theta, d, kappa, drift_matrix (path), drift (bool)
    [grid]         N, L
    [solver]       dt, t_end, output_every, cfl_safety, amplitude, dealias,
                   perturbation, seed, positivity_tol, snapshot_every
    [diagnostics]  p_list, entropy_p, moment_q, fit_window (two numbers)
    [kernel]       thetas, d, t, N, L_factor, lambdas, K, s_values (start stop count)
    [checks]       ratio_max, mass_tol, slope_tol
    [sweep]        section.key = v1 v2 ...  (cartesian product of runs)
"""
import configparser
from dataclasses import dataclass, field, replace
import itertools
import math
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .diagnostics import DiagnosticsConfig
from .driftmatrix import read_matrix
from .exceptions import ConfigError
from .integrator import SolverConfig
from .models import ModelKind, ModelSpec
from .spectral import GridSpec

__all__ = ["ExperimentConfig", "KernelSuiteConfig", "ChecksConfig", "load_config", "parse_config"]


def _float(v):
    return float(v.strip())


def _int(v):
    f = float(v.strip())
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


def _floats(v):
    return tuple(float(x) for x in v.replace(",", " ").split())


def _optional(conv):
    def parse(v):
        return None if v.strip().lower() in ("", "none", "auto") else conv(v)
    return parse


SCHEMA = {
    "model": {
        "kind": str.strip, "theta": _float, "d": _int, "kappa": _float,
        "drift_matrix": _optional(str.strip), "drift": _bool,
    },
    "grid": {"N": _int, "L": _float},
    "solver": {
        "dt": _float, "t_end": _float, "output_every": _int, "cfl_safety": _float,
        "amplitude": _float, "dealias": _bool, "perturbation": _float,
        "seed": _optional(_int), "positivity_tol": _float, "snapshot_every": _int,
    },
    "diagnostics": {
        "p_list": _floats, "entropy_p": _float, "moment_q": _optional(_float),
        "fit_window": _optional(_floats),
    },
    "kernel": {
        "thetas": _floats, "d": _int, "t": _float, "N": _int, "L_factor": _float,
        "lambdas": _floats, "K": _float, "s_values": _floats,
    },
    "checks": {"ratio_max": _float, "mass_tol": _float, "slope_tol": _float},
}

DEFAULTS = {
    "model": {"kind": "drift_diffusion_poisson", "theta": 0.8, "d": 2, "kappa": 1.0,
              "drift_matrix": None, "drift": True},
    "grid": {"N": 256, "L": 40.0},
    "solver": {"dt": 0.05, "t_end": 20.0, "output_every": 5, "cfl_safety": 1.0,
               "amplitude": 0.5, "dealias": True, "perturbation": 0.0, "seed": None,
               "positivity_tol": 1e-8, "snapshot_every": 0},
    "diagnostics": {"p_list": (1.0, 2.0, math.inf), "entropy_p": 1.5, "moment_q": None,
                    "fit_window": None},
    "kernel": {"thetas": (0.8, 1.0, 1.5, 2.0), "d": 1, "t": 1.0, "N": 256, "L_factor": 20.0,
               "lambdas": (0.5, 1.0, 2.0), "K": 1.0, "s_values": (5.0, 50.0, 19.0)},
    "checks": {"ratio_max": 5.0, "mass_tol": 1e-10, "slope_tol": 0.15},
}


@dataclass(frozen=True)
class KernelSuiteConfig:
    thetas: Tuple[float, ...]
    d: int
    t: float
    N: int
    L_factor: float
    lambdas: Tuple[float, ...]
    K: float
    s_values: np.ndarray

    def grid(self, theta):
        return GridSpec(self.d, self.L_factor * self.t ** (1.0 / theta), self.N)


@dataclass(frozen=True)
class ChecksConfig:
    ratio_max: float = 5.0
    mass_tol: float = 1e-10
    slope_tol: float = 0.15


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    model: ModelSpec
    grid: GridSpec
    solver: SolverConfig
    diagnostics: DiagnosticsConfig
    kernel: KernelSuiteConfig
    checks: ChecksConfig
    amplitude: float = 0.5
    perturbation: float = 0.0
    seed: Optional[int] = None
    snapshot_every: int = 0
    raw: Dict[str, dict] = field(default_factory=dict, repr=False)
    sweep: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()

    def with_seed(self, seed):
        raw = {s: dict(v) for s, v in self.raw.items()}
        raw["solver"]["seed"] = seed
        return _build(raw, self.sweep)

    def expand(self):
        """One config per point of the sweep product (just ``self`` without a sweep)."""
        if not self.sweep:
            return [({}, self)]
        keys = [k for k, _ in self.sweep]
        out = []
        for combo in itertools.product(*[vals for _, vals in self.sweep]):
            raw = {s: dict(v) for s, v in self.raw.items()}
            params = {}
            for key, text in zip(keys, combo):
                section, name = key.split(".", 1)
                raw[section][name] = SCHEMA[section][name](text)
                params[key] = text
            out.append((params, _build(raw, ())))
        return out


def _build(raw, sweep):
    m, g, s, dg, k, c = (raw[n] for n in ("model", "grid", "solver", "diagnostics", "kernel", "checks"))

    def guard(key, fn):
        try:
            return fn()
        except ConfigError:
            raise
        except (ValueError, TypeError, OSError) as exc:
            raise ConfigError(f"invalid value for {key}: {exc}", key) from None

    D = None
    if m["drift_matrix"] is not None:
        D = guard("model.drift_matrix", lambda: read_matrix(m["drift_matrix"]))
    guard("model.kind", lambda: ModelKind.parse(m["kind"]))
    model = guard("model", lambda: ModelSpec(m["kind"], m["theta"], m["d"], kappa=m["kappa"],
                                             drift_matrix=D, drift=m["drift"]))
    grid = guard("grid", lambda: GridSpec(model.d, g["L"], g["N"]))
    solver = guard("solver", lambda: SolverConfig(
        dt=s["dt"], t_end=s["t_end"], output_every=s["output_every"], dealias=s["dealias"],
        cfl_safety=s["cfl_safety"], positivity_tol=s["positivity_tol"]))
    if not (s["amplitude"] > 0):
        raise ConfigError("solver.amplitude must be positive", "solver.amplitude")
    if not (0.0 <= s["perturbation"] < 1.0):
        raise ConfigError("solver.perturbation must lie in [0, 1)", "solver.perturbation")
    if s["snapshot_every"] < 0:
        raise ConfigError("solver.snapshot_every must be >= 0", "solver.snapshot_every")
    if any(p < 1 for p in dg["p_list"]):
        raise ConfigError("diagnostics.p_list entries must be >= 1", "diagnostics.p_list")
    if not (1.0 < dg["entropy_p"] < 2.0):
        raise ConfigError("diagnostics.entropy_p must lie in (1, 2)", "diagnostics.entropy_p")
    if dg["moment_q"] is not None and dg["moment_q"] < 1:
        raise ConfigError("diagnostics.moment_q must be >= 1", "diagnostics.moment_q")
    fw = dg["fit_window"]
    if fw is not None and (len(fw) != 2 or not (0 < fw[0] < fw[1])):
        raise ConfigError("diagnostics.fit_window needs two numbers 0 < t1 < t2", "diagnostics.fit_window")
    diag = DiagnosticsConfig(p_list=tuple(dg["p_list"]), entropy_p=dg["entropy_p"],
                             moment_q=dg["moment_q"], fit_window=None if fw is None else tuple(fw))
    sv = k["s_values"]
    if len(sv) != 3 or not (0 < sv[0] < sv[1]) or not float(sv[2]).is_integer() or sv[2] < 2:
        raise ConfigError("kernel.s_values needs 'start stop count' with 0 < start < stop", "kernel.s_values")
    for th in k["thetas"]:
        guard("kernel.thetas", lambda: ModelSpec("ddp", th, 1))
    if k["d"] not in (1, 2, 3):
        raise ConfigError("kernel.d must be 1, 2 or 3", "kernel.d")
    if k["N"] < 2 or k["N"] % 2:
        raise ConfigError("kernel.N must be even", "kernel.N")
    for key in ("t", "L_factor", "K"):
        if not k[key] > 0:
            raise ConfigError(f"kernel.{key} must be positive", f"kernel.{key}")
    if any(lam <= 0 for lam in k["lambdas"]):
        raise ConfigError("kernel.lambdas must be positive", "kernel.lambdas")
    kernel = KernelSuiteConfig(
        thetas=tuple(k["thetas"]), d=k["d"], t=k["t"], N=k["N"], L_factor=k["L_factor"],
        lambdas=tuple(k["lambdas"]), K=k["K"],
        s_values=np.geomspace(sv[0], sv[1], int(sv[2])),
    )
    checks = ChecksConfig(**c)
    return ExperimentConfig(
        model=model, grid=grid, solver=solver, diagnostics=diag, kernel=kernel, checks=checks,
        amplitude=s["amplitude"], perturbation=s["perturbation"], seed=s["seed"],
        snapshot_every=s["snapshot_every"], raw=raw, sweep=tuple(sweep),
    )


def parse_config(text, *, base_dir=None):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = {s: dict(v) for s, v in DEFAULTS.items()}
    lower = {s: {k.lower(): k for k in keys} for s, keys in SCHEMA.items()}
    sweep = []
    for section in cp.sections():
        if section == "sweep":
            for key, value in cp.items(section):
                sec, _, name = key.partition(".")
                canon = lower.get(sec, {}).get(name.lower())
                if canon is None:
                    raise ConfigError(f"unknown sweep key {key!r}", f"sweep.{key}")
                vals = tuple(value.replace(",", " ").split())
                if not vals:
                    raise ConfigError(f"empty sweep list for {key}", f"sweep.{key}")
                for v in vals:
                    try:
                        SCHEMA[sec][canon](v)
                    except ValueError as exc:
                        raise ConfigError(f"invalid value for sweep.{key}: {exc}", f"sweep.{key}") from None
                sweep.append((f"{sec}.{canon}", vals))
            continue
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", section)
        for key, value in cp.items(section):
            canon = lower[section].get(key.lower())
            if canon is None:
                raise ConfigError(f"unknown key {section}.{key}", f"{section}.{key}")
            try:
                raw[section][canon] = SCHEMA[section][canon](value)
            except ValueError as exc:
                raise ConfigError(f"invalid value for {section}.{canon}: {exc}", f"{section}.{canon}") from None
    dm = raw["model"]["drift_matrix"]
    if dm is not None and base_dir is not None and not Path(dm).is_absolute():
        raw["model"]["drift_matrix"] = str(Path(base_dir) / dm)
    return _build(raw, sweep)


def load_config(path=None):
    """Read ``path`` (``None`` gives the defaults)."""
    if path is None:
        return parse_config("")
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=p.parent)


def replace_solver(cfg, **changes):
    return replace(cfg, solver=replace(cfg.solver, **changes))
