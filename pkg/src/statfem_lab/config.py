"""Experiment configuration: flat ``key = value`` files with typed fields.

Example::

    # 1D posterior study
    experiment = posterior-1d
    epsilons = 5e-5, 1e-4, 1e-2, 1e-1
    h_ladder = geom:0.025:0.25:28
    seed = 7

``h_ladder`` accepts ``geom:H_MIN:H_MAX:COUNT`` (meshes for a log-log fit),
``dyadic:H_MIN:H_MAX`` (2D self-convergence; ``H_MIN`` is the finest
mesh, ``H_MAX`` the coarsest base mesh) or an explicit comma list of mesh
widths.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError

EXPERIMENTS = (
    "prior-1d",
    "posterior-1d",
    "prior-2d",
    "posterior-2d",
    "max-prior-1d",
    "max-posterior-1d",
)
KF_MODES = ("exact-quadrature", "nodal-mass")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "prior-1d"
    sigma_f: float = 0.1
    l_f: float = 0.4
    h_ladder: str = "geom:0.02:0.25:30"
    grid_n: int = 51
    sensors: int = 10
    sensor_lo: float = 0.01
    sensor_hi: float = 0.99
    epsilons: tuple = ()
    n_samples: int = 1000
    seed: int = 20240601
    kf_mode: str = "exact-quadrature"
    fine_h: float = 1 / 64
    lr_cutoff_h: float = 0.15
    output_dir: str = ""

    @property
    def dim(self) -> int:
        return 2 if self.experiment.endswith("2d") else 1

    @property
    def dyadic(self) -> bool:
        return self.dim == 2

    @property
    def has_posterior(self) -> bool:
        return "posterior" in self.experiment

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["epsilons"] = list(self.epsilons)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_DEFAULTS = {
    "prior-1d": dict(h_ladder="geom:0.02:0.25:30", grid_n=51),
    "posterior-1d": dict(
        h_ladder="geom:0.025:0.25:28", grid_n=41, epsilons=(5e-5, 1e-4, 1e-2, 1e-1)
    ),
    "prior-2d": dict(h_ladder=f"dyadic:{math.sqrt(2) / 64!r}:0.315", grid_n=41, kf_mode="nodal-mass"),
    "posterior-2d": dict(
        h_ladder=f"dyadic:{math.sqrt(2) / 64!r}:0.315",
        grid_n=41,
        kf_mode="nodal-mass",
        sensors=25,
        epsilons=(1e-3,),
    ),
    "max-prior-1d": dict(l_f=0.01, h_ladder="geom:0.02:0.25:30", grid_n=100, kf_mode="nodal-mass"),
    "max-posterior-1d": dict(
        l_f=0.01,
        h_ladder="geom:0.02:0.25:30",
        grid_n=41,
        kf_mode="nodal-mass",
        epsilons=(1e-2, 1e-3, 5e-4, 1e-4),
    ),
}


def default_config(experiment: str) -> ExperimentConfig:
    if experiment not in _DEFAULTS:
        raise ConfigError([("experiment", f"unknown experiment {experiment!r}")])
    return ExperimentConfig(experiment=experiment, **_DEFAULTS[experiment])


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    f = _FIELDS[name]
    typ = f.type if isinstance(f.type, str) else f.type.__name__
    raw = raw.strip()
    if typ == "float":
        if "/" in raw:
            num, den = raw.split("/", 1)
            return float(num) / float(den)
        return float(raw)
    if typ == "int":
        return int(raw)
    if typ == "tuple":
        return tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
    return raw


def parse_config_text(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse a config file body; experiment defaults fill unspecified keys."""
    values, problems = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append((f"line {lineno}", "expected 'key = value'"))
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            problems.append((key, "unknown field"))
            continue
        try:
            values[key] = _coerce(key, raw)
        except ValueError:
            problems.append((key, f"cannot parse {raw!r}"))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    if problems:
        raise ConfigError(problems)
    experiment = values.get("experiment", ExperimentConfig.experiment)
    base = default_config(experiment)
    cfg = dataclasses.replace(base, **values)
    validate_config(cfg)
    return cfg


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([("config", f"cannot read {path}: {exc.strerror}")]) from exc
    return parse_config_text(text, overrides)


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise ConfigError listing every invalid field."""
    from .experiments import mesh_ladder

    p = []
    if cfg.experiment not in EXPERIMENTS:
        p.append(("experiment", f"must be one of {', '.join(EXPERIMENTS)}"))
    for name in ("sigma_f", "l_f", "fine_h", "lr_cutoff_h"):
        if not getattr(cfg, name) > 0:
            p.append((name, "must be positive"))
    for name in ("grid_n", "n_samples", "sensors"):
        if getattr(cfg, name) < (2 if name == "grid_n" else 1):
            p.append((name, "too small"))
    if cfg.kf_mode not in KF_MODES:
        p.append(("kf_mode", f"must be one of {', '.join(KF_MODES)}"))
    if not 0 <= cfg.sensor_lo < cfg.sensor_hi <= 1:
        p.append(("sensor_lo/sensor_hi", "need 0 <= lo < hi <= 1"))
    if cfg.has_posterior:
        if not cfg.epsilons:
            p.append(("epsilons", "posterior experiments need at least one noise level"))
        elif any(not e > 0 for e in cfg.epsilons):
            p.append(("epsilons", "noise levels must be positive"))
        if cfg.dim == 2 and round(math.sqrt(cfg.sensors)) ** 2 != cfg.sensors:
            p.append(("sensors", "2D sensor count must be a perfect square"))
    if cfg.experiment in EXPERIMENTS and not any(k == "h_ladder" for k, _ in p):
        try:
            mesh_ladder(cfg)
        except ValueError as exc:
            p.append(("h_ladder", str(exc)))
    if p:
        raise ConfigError(p)
