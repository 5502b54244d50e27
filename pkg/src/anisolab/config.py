"""Experiment configuration stored as TOML.

A config has top-level keys ``exponents``, ``seed``, ``threads`` and ``out``
plus the sections ``grid``, ``initial``, ``run``, ``selfsim`` and ``probe``.
Unknown keys anywhere are rejected. Every field has a default, so an empty
file describes the default experiment: a 3D spike at ``p = 2.1`` on a 48-cube.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .anisotropy import ExponentError, validate_exponents
from .solver.grid import BOUNDARY_CODES

INITIAL_KINDS = ("spike", "constant", "travelling-wave", "barenblatt", "snapshot")


class ConfigError(ValueError):
    pass


@dataclass
class GridSection:
    dims: list[int] = field(default_factory=lambda: [48, 48, 48])
    lo: list[float] = field(default_factory=lambda: [-1.0, -1.0, -1.0])
    hi: list[float] = field(default_factory=lambda: [1.0, 1.0, 1.0])
    boundary: str = "dirichlet-zero"


@dataclass
class InitialSection:
    kind: str = "spike"
    mass: float = 1.0
    width_cells: float = 3.0
    value: float = 1.0
    c: float = 1.0
    t_shift: float = 0.01
    path: str = ""


@dataclass
class RunSection:
    horizon: float = 1e-3
    snapshots: list[float] = field(default_factory=list)
    snapshot_count: int = 10
    safety: float = 0.4
    dt_min: float = 0.0
    dt_max: float = 1.0
    gradient_floor: float = 0.0
    max_steps: int = 10**9
    flux_sign: float = 1.0


@dataclass
class SelfsimSection:
    frac: float = 0.4
    eps_rel: float = 1e-3
    growth: float = 1.05


@dataclass
class ProbeSection:
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 0.0
    eta_tilde: float = 0.0
    n: int = 512
    rho_range: list[float] = field(default_factory=lambda: [1e-4, 1e-1])
    theta_range: list[float] = field(default_factory=list)
    lambda_range: list[float] = field(default_factory=lambda: [1e-5, 1e-3])
    M: float = 1.0
    side_C3: float = 0.0
    x_box: str = "support"
    R: float = 0.05
    n_max: int = 6
    n_pairs: int = 2000
    pair_radius: float = 0.01


SECTIONS = {"grid": GridSection, "initial": InitialSection, "run": RunSection,
            "selfsim": SelfsimSection, "probe": ProbeSection}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    In ``probe``, zero for ``C3``, ``eta_tilde`` or ``side_C3`` means "derive it":
    ``C3`` from the Harnack probe, ``eta_tilde`` from the positivity fraction of
    the scaling fit, ``side_C3`` equal to ``C2``.
    """

    exponents: list[float] = field(default_factory=lambda: [2.1, 2.1, 2.1])
    seed: int = 0
    threads: int = 1
    out: str = "anisolab-run"
    grid: GridSection = field(default_factory=GridSection)
    initial: InitialSection = field(default_factory=InitialSection)
    run: RunSection = field(default_factory=RunSection)
    selfsim: SelfsimSection = field(default_factory=SelfsimSection)
    probe: ProbeSection = field(default_factory=ProbeSection)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        kw: dict[str, Any] = {}
        for name, sec in SECTIONS.items():
            raw = data.pop(name, {})
            if not isinstance(raw, dict):
                raise ConfigError(f"[{name}] must be a table")
            kw[name] = _build(sec, raw, name)
        top = {f.name for f in dataclasses.fields(cls)} - set(SECTIONS)
        unknown = set(data) - top
        if unknown:
            raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
        for k, v in data.items():
            kw[k] = _coerce(cls, k, v, "top level")
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def validate(self) -> None:
        try:
            params = validate_exponents(self.exponents)
        except ExponentError as exc:
            raise ConfigError(str(exc)) from exc
        g = self.grid
        if not (len(g.dims) == len(g.lo) == len(g.hi) == params.N):
            raise ConfigError(f"grid dims/lo/hi must all have {params.N} entries")
        if any(d < 4 for d in g.dims):
            raise ConfigError("every grid axis needs at least 4 cells")
        if any(b <= a for a, b in zip(g.lo, g.hi)):
            raise ConfigError("grid.hi must exceed grid.lo on every axis")
        if g.boundary not in BOUNDARY_CODES:
            raise ConfigError(f"grid.boundary must be one of {sorted(BOUNDARY_CODES)}")
        ini = self.initial
        if ini.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {INITIAL_KINDS}")
        if ini.kind == "snapshot" and not ini.path:
            raise ConfigError("initial.path is required for snapshot initial data")
        if ini.kind == "travelling-wave" and (params.N != 1 or g.boundary != "dirichlet-profile"):
            raise ConfigError("travelling-wave data needs a 1D grid with dirichlet-profile boundary")
        if ini.kind == "barenblatt" and not params.isotropic:
            raise ConfigError("the closed-form Barenblatt profile needs equal exponents")
        r = self.run
        if not r.horizon > 0:
            raise ConfigError("run.horizon must be positive")
        if not 0 < r.safety <= 1:
            raise ConfigError("run.safety must lie in (0, 1]")
        if r.snapshot_count < 1:
            raise ConfigError("run.snapshot_count must be at least 1")
        if not 0 < self.selfsim.frac < 1:
            raise ConfigError("selfsim.frac must lie in (0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        p = self.probe
        if len(p.rho_range) != 2 or len(p.lambda_range) != 2 or len(p.theta_range) not in (0, 2):
            raise ConfigError("probe ranges must be [lo, hi] pairs")
        if p.x_box not in ("support", "all"):
            raise ConfigError("probe.x_box must be 'support' or 'all'")


def _coerce(cls, key, value, where):
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[key]
    t = str(ftype)
    if t == "float" and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if t == "list[float]" and isinstance(value, list):
        return [float(v) for v in value]
    if t == "int" and isinstance(value, float) and value.is_integer():
        return int(value)
    expected = {"float": float, "int": int, "str": str, "list[float]": list, "list[int]": list}
    if t in expected and (not isinstance(value, expected[t]) or isinstance(value, bool)):
        raise ConfigError(f"{where}.{key}: expected {t}, got {type(value).__name__}")
    return value


def _build(sec, raw: dict, name: str):
    names = {f.name for f in dataclasses.fields(sec)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    return sec(**{k: _coerce(sec, k, v, name) for k, v in raw.items()})


def loads(text: str) -> ExperimentConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return ExperimentConfig.from_dict(data)


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)
