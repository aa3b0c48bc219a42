"""Run configuration: dataclass blocks, scenario presets and TOML loading."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCENARIOS = ("gp", "log", "custom")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "gp"
    g: float = 1.0
    poly_coeffs: tuple | None = None


@dataclass(frozen=True)
class GridConfig:
    kind: str = "periodic"
    n_points: int = 128
    length: float | None = 2 * math.pi
    half_width: float | None = None
    scheme: str = "spectral"


@dataclass(frozen=True)
class BackgroundConfig:
    omega: float = 1.0
    potential: str = "none"         # "none" or "harmonic"
    potential_strength: float = 1.0
    guess: str = "uniform"          # "uniform" or "gaussian"
    amplitude: float = 1.0
    tol: float = 1e-10


@dataclass(frozen=True)
class ModesConfig:
    count: int = 6
    pairs: bool = True
    method: str = "auto"


@dataclass(frozen=True)
class EvolveConfig:
    enabled: bool = False
    T: float = 5.0
    dt: float = 1e-3
    sample_stride: int = 10
    modes: tuple = (0,)
    alpha_scan: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "gp"
    alpha: float = 1e-2
    out: str = "out"
    threads: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    modes: ModesConfig = field(default_factory=ModesConfig)
    evolve: EvolveConfig = field(default_factory=EvolveConfig)

    def to_dict(self) -> dict:
        return asdict(self)


def preset(scenario: str) -> RunConfig:
    """Defaults for the two exactly solvable scenarios.

    ``gp``: uniform condensate on a periodic box of length 2π, ``ω = g = 1``.
    ``log``: Gaussian background of the logarithmic model on ``[-10, 10]``, ``ω = 1``.
    """
    if scenario in ("gp", "custom"):
        return RunConfig(scenario=scenario)
    if scenario == "log":
        return RunConfig(
            scenario="log",
            model=ModelConfig(kind="log"),
            grid=GridConfig(kind="line", n_points=401, length=None, half_width=10.0),
            background=BackgroundConfig(omega=1.0, guess="gaussian", amplitude=1.0),
            modes=ModesConfig(count=3),
            evolve=EvolveConfig(T=2.5, dt=1e-3, sample_stride=10, modes=(0,)),
        )
    raise ConfigError(f"unknown scenario {scenario!r} (expected one of {', '.join(SCENARIOS)})")


_BLOCKS = {"model": ModelConfig, "grid": GridConfig, "background": BackgroundConfig,
           "modes": ModesConfig, "evolve": EvolveConfig}


def _merge_block(base, table: dict, name: str):
    known = {f.name for f in fields(base)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in table.items()}
    return replace(base, **values)


def from_mapping(data: dict, scenario: str | None = None) -> RunConfig:
    scenario = scenario or data.get("scenario", "gp")
    cfg = preset(scenario)
    top = {}
    for key, value in data.items():
        if key in _BLOCKS:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            top[key] = _merge_block(getattr(cfg, key), value, key)
        elif key in ("scenario", "alpha", "out", "threads"):
            top[key] = value
        else:
            raise ConfigError(f"unknown top-level key {key!r}")
    top["scenario"] = scenario
    cfg = replace(cfg, **top)
    validate(cfg)
    return cfg


def load(path, scenario: str | None = None) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return from_mapping(data, scenario)


def validate(cfg: RunConfig) -> None:
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}")
    if cfg.model.kind not in ("gp", "log", "poly"):
        raise ConfigError(f"unknown model kind {cfg.model.kind!r}")
    if cfg.model.kind == "poly" and not cfg.model.poly_coeffs:
        raise ConfigError("model kind 'poly' needs poly_coeffs")
    if cfg.grid.kind not in ("periodic", "line"):
        raise ConfigError(f"unknown grid kind {cfg.grid.kind!r}")
    if cfg.background.potential not in ("none", "harmonic"):
        raise ConfigError(f"unknown potential {cfg.background.potential!r}")
    if cfg.background.guess not in ("uniform", "gaussian"):
        raise ConfigError(f"unknown guess {cfg.background.guess!r}")
    if cfg.modes.count < 1:
        raise ConfigError("modes.count must be positive")
    if not cfg.alpha >= 0:
        raise ConfigError("alpha must be nonnegative")
    if cfg.threads < 1:
        raise ConfigError("threads must be positive")
    if any(i < 0 or i >= cfg.modes.count for i in cfg.evolve.modes):
        raise ConfigError(f"evolve.modes {cfg.evolve.modes} outside 0..{cfg.modes.count - 1}")
    if not (cfg.evolve.dt > 0 and cfg.evolve.T > 0 and cfg.evolve.sample_stride >= 1):
        raise ConfigError("evolve needs dt > 0, T > 0 and sample_stride >= 1")
