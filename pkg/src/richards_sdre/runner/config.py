"""Experiment configuration: dataclasses, YAML round-trip, built-in presets.

Validation errors carry the 1-based line of the offending key when the
configuration came from a file.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from ..cost import CostModel
from ..discretize import BoundaryData, Grid, SemidiscreteSystem
from ..errors import ConfigError, InvalidInputError
from ..hydraulics import FeddesParams, GardnerParams, HaverkampParams
from ..integrate import IntegratorConfig, NoiseConfig

__all__ = [
    "ModelSection",
    "ExperimentConfig",
    "PRESETS",
    "preset",
    "load_config",
    "loads_config",
    "dump_config",
]

MODEL_KINDS = {"haverkamp": HaverkampParams, "gardner": GardnerParams}
CONTROL_MODES = ("uncontrolled", "controlled", "both")


@dataclass
class ModelSection:
    kind: str = "haverkamp"
    params: Dict[str, float] = field(default_factory=dict)

    def build(self):
        return MODEL_KINDS[self.kind](**self.params)


@dataclass
class FeddesSection:
    h1: float = 0.0
    h2: float = -30.0
    h3: float = -50.0
    h4: float = -80.0
    S_max: float = 0.000125


@dataclass
class GridSection:
    Z: float = 80.0
    n_nodes: int = 31


@dataclass
class BoundarySection:
    h_T: float = -20.73
    # constant, or a list of [t, value] knots
    h_B: Union[float, List[List[float]]] = -61.5
    # constant, or a list of [z, value] knots
    h_0: Union[float, List[List[float]]] = -61.5


@dataclass
class NoiseSection:
    enabled: bool = False
    epsilon: float = 0.0
    controller_sees_noise: bool = True


@dataclass
class IntegratorSection:
    dt_init: float = 1e-4
    dt_min: float = 1e-10
    dt_max: float = 2.0
    newton_tol: float = 1e-3
    newton_max_iter: int = 8
    step_rtol: float = 1e-5
    step_atol: float = 1e-6


@dataclass
class OutputSection:
    dir: str = "out"
    figures: bool = False


@dataclass
class ExperimentConfig:
    name: str = "custom"
    description: str = ""
    model: ModelSection = field(default_factory=ModelSection)
    feddes: FeddesSection = field(default_factory=FeddesSection)
    grid: GridSection = field(default_factory=GridSection)
    boundary: BoundarySection = field(default_factory=BoundarySection)
    horizon: float = 1000.0
    lam: float = 1e-5
    control_mode: str = "both"
    use_null_augmentation: bool = True
    noise: NoiseSection = field(default_factory=NoiseSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 0

    # -- derived objects -------------------------------------------------
    def build_system(self) -> SemidiscreteSystem:
        return SemidiscreteSystem(
            grid=Grid(self.grid.Z, self.grid.n_nodes),
            model=self.model.build(),
            feddes=FeddesParams(**asdict(self.feddes)),
            boundary=BoundaryData(self.boundary.h_T, self.boundary.h_B, self.boundary.h_0),
            use_null_augmentation=self.use_null_augmentation,
        )

    def build_cost(self, sys: SemidiscreteSystem) -> CostModel:
        return CostModel(sys.feddes, sys.grid.dz, self.lam)

    def build_integrator(self, mode: str) -> IntegratorConfig:
        opts = asdict(self.integrator)
        # a horizon shorter than dt_max simply caps the step
        opts["dt_max"] = min(opts["dt_max"], self.horizon)
        return IntegratorConfig(
            t_end=self.horizon,
            control_mode="sdre" if mode == "controlled" else "uncontrolled",
            controller_sees_noise=self.noise.controller_sees_noise,
            **opts,
        )

    def build_noise(self) -> NoiseConfig:
        return NoiseConfig(self.noise.enabled, self.noise.epsilon, self.seed)

    def modes(self) -> Tuple[str, ...]:
        if self.control_mode == "both":
            return ("uncontrolled", "controlled")
        return (self.control_mode,)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        # keep the on-disk key order stable and readable
        order = [f.name if f.name != "lam" else "lambda" for f in fields(self)]
        return {k: out[k] for k in order}

    def validate(self) -> "ExperimentConfig":
        """Build every derived object once so that bad values surface early."""
        _validate(self, {})
        return self


# -- YAML (de)serialization -------------------------------------------------

_SECTIONS = {
    "model": ModelSection,
    "feddes": FeddesSection,
    "grid": GridSection,
    "boundary": BoundarySection,
    "noise": NoiseSection,
    "integrator": IntegratorSection,
    "output": OutputSection,
}


def _line_index(node, path=(), out=None) -> Dict[Tuple[str, ...], int]:
    """Map key paths to 1-based source lines from a composed YAML node tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for knode, vnode in node.value:
            key = path + (str(knode.value),)
            out[key] = knode.start_mark.line + 1
            _line_index(vnode, key, out)
    return out


def _line(lines, *path):
    while path:
        if path in lines:
            return lines[path]
        path = path[:-1]
    return None


def _typed(value, kind, lines, path):
    name = ".".join(path)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false, got {value!r}", _line(lines, *path))
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}", _line(lines, *path))
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}", _line(lines, *path))
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string, got {value!r}", _line(lines, *path))
        return value
    return value


def _schedule(value, lines, path):
    name = ".".join(path)
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, list) and value and all(
            isinstance(p, list) and len(p) == 2
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in p)
            for p in value):
        return [[float(a), float(b)] for a, b in value]
    raise ConfigError(f"{name}: expected a number or a list of [x, value] pairs",
                      _line(lines, *path))


_FIELD_TYPES = {
    FeddesSection: dict(h1=float, h2=float, h3=float, h4=float, S_max=float),
    GridSection: dict(Z=float, n_nodes=int),
    NoiseSection: dict(enabled=bool, epsilon=float, controller_sees_noise=bool),
    IntegratorSection: dict(dt_init=float, dt_min=float, dt_max=float, newton_tol=float,
                            newton_max_iter=int, step_rtol=float, step_atol=float),
    OutputSection: dict(dir=str, figures=bool),
}
_TOP_TYPES = dict(name=str, description=str, horizon=float, control_mode=str,
                  use_null_augmentation=bool, seed=int)


def _section(cls, raw, lines, key):
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: expected a mapping", _line(lines, key))
    known = {f.name for f in fields(cls)}
    for k in raw:
        if k not in known:
            raise ConfigError(f"{key}.{k}: unknown key", _line(lines, key, str(k)))
    if cls is ModelSection:
        kind = raw.get("kind", "haverkamp")
        if kind not in MODEL_KINDS:
            raise ConfigError(f"model.kind: expected one of {sorted(MODEL_KINDS)}, got {kind!r}",
                              _line(lines, key, "kind"))
        params = raw.get("params", {}) or {}
        if not isinstance(params, dict):
            raise ConfigError("model.params: expected a mapping", _line(lines, key, "params"))
        allowed = {f.name for f in fields(MODEL_KINDS[kind])}
        clean = {}
        for k, v in params.items():
            if k not in allowed:
                raise ConfigError(f"model.params.{k}: not a {kind} parameter",
                                  _line(lines, key, "params", str(k)))
            clean[k] = _typed(v, float, lines, (key, "params", k))
        return ModelSection(kind, clean)
    if cls is BoundarySection:
        kw = {}
        for k, v in raw.items():
            kw[k] = (_typed(v, float, lines, (key, k)) if k == "h_T"
                     else _schedule(v, lines, (key, k)))
        return BoundarySection(**kw)
    types = _FIELD_TYPES[cls]
    return cls(**{k: _typed(v, types[k], lines, (key, k)) for k, v in raw.items()})


def _from_mapping(raw, lines) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", 1)
    kw = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kw[key] = _section(_SECTIONS[key], value, lines, key)
        elif key == "lambda":
            kw["lam"] = _typed(value, float, lines, ("lambda",))
        elif key in _TOP_TYPES:
            kw[key] = _typed(value, _TOP_TYPES[key], lines, (key,))
        else:
            raise ConfigError(f"{key}: unknown key", _line(lines, str(key)))
    cfg = ExperimentConfig(**kw)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: ExperimentConfig, lines) -> None:
    if cfg.control_mode not in CONTROL_MODES:
        raise ConfigError(f"control_mode: expected one of {CONTROL_MODES}",
                          _line(lines, "control_mode"))
    if cfg.seed < 0:
        raise ConfigError("seed: must be >= 0", _line(lines, "seed"))
    checks = [
        ("model", lambda: cfg.model.build()),
        ("feddes", lambda: FeddesParams(**asdict(cfg.feddes))),
        ("grid", lambda: Grid(cfg.grid.Z, cfg.grid.n_nodes)),
        ("boundary", lambda: BoundaryData(cfg.boundary.h_T, cfg.boundary.h_B, cfg.boundary.h_0)),
        ("noise", lambda: cfg.build_noise()),
        ("integrator", lambda: cfg.build_integrator("controlled")),
        ("lambda", lambda: CostModel(FeddesParams(), 1.0, cfg.lam)),
    ]
    for key, build in checks:
        try:
            build()
        except (InvalidInputError, TypeError) as exc:
            raise ConfigError(f"{key}: {exc}", _line(lines, key)) from None
    if cfg.boundary.h_T >= 0:
        raise ConfigError("boundary.h_T: must be < 0", _line(lines, "boundary", "h_T"))


def loads_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML configuration string."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise ConfigError(f"YAML syntax error: {exc.problem}", line) from None
    if raw is None:
        raise ConfigError("empty configuration", 1)
    return _from_mapping(raw, _line_index(node))


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    """Deterministic YAML text; ``loads_config(dump_config(c)) == c``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=False,
                          allow_unicode=True, width=88)


# -- presets ----------------------------------------------------------------

def _haverkamp_preset(name, description, epsilon):
    return ExperimentConfig(
        name=name,
        description=description,
        model=ModelSection("haverkamp", dict(K_S=34.0, A_const=1175000.0, alpha=1611000.0,
                                             theta_S=0.287, theta_r=0.075,
                                             beta1=4.74, beta2=3.96)),
        noise=NoiseSection(enabled=epsilon > 0, epsilon=epsilon),
        output=OutputSection(dir=f"out/{name}"),
    )


def _gardner_preset(name, description, epsilon):
    return ExperimentConfig(
        name=name,
        description=description,
        model=ModelSection("gardner", dict(rho=0.1, K_S=1.0, theta_S=0.48, theta_r=0.0)),
        noise=NoiseSection(enabled=epsilon > 0, epsilon=epsilon),
        output=OutputSection(dir=f"out/{name}"),
    )


_GARDNER_NOTE = (" Initial and boundary data are not given separately for the Gardner"
                 " soil; the Haverkamp ones (h_0 = h_B = -61.5, h_T = -20.73) are reused.")

PRESETS = {
    "test1": lambda: _haverkamp_preset(
        "test1", "Haverkamp sand, noiseless conductivity.", 0.0),
    "test2": lambda: _haverkamp_preset(
        "test2", "Haverkamp sand, conductivity noise eps = 1e-5.", 1e-5),
    "test3": lambda: _gardner_preset(
        "test3", "Gardner soil, noiseless conductivity." + _GARDNER_NOTE, 0.0),
    "test4": lambda: _gardner_preset(
        "test4", "Gardner soil, conductivity noise eps = 1e-6." + _GARDNER_NOTE, 1e-6),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
