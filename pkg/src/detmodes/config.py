"""Experiment configuration: a YAML mapping validated into a frozen dataclass."""
from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .solver import FORCING_KINDS, FORCING_PATTERNS, ForcingSpec

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "dump_config", "load_config"]

REQUIRED = ("nu", "L", "N", "dt", "T_total")


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (1e-6)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """A configuration document is malformed or has out-of-range values."""


@dataclass(frozen=True)
class ExperimentConfig:
    nu: float
    L: float
    N: int
    dt: float
    T_total: float
    snapshot_interval: float | None = None
    r: float = 2.5
    c_r: float = 0.05
    c0: float | str = 0.05
    forcing: ForcingSpec = field(default_factory=ForcingSpec)
    seed_u: int = 0
    seed_v: int = 1
    output_dir: str = "output"
    T_avg: float | None = None
    d_override: float | None = None
    initial_energy: float = 0.5
    k_peak: float = 2.0

    def __post_init__(self):
        _validate(self)

    @property
    def n_steps(self) -> int:
        return int(round(self.T_total / self.dt))

    @property
    def snapshot_every(self) -> int | None:
        """Steps between snapshots, or None when snapshots are off."""
        if self.snapshot_interval is None:
            return None
        return max(1, int(round(self.snapshot_interval / self.dt)))

    def grid(self):
        from .spectral import TorusGrid

        return TorusGrid(self.N, self.L)

    def resolved_c0(self) -> float:
        """c0 as a number; ``"calibrated"`` maps to the measured Bernstein constant times c_r."""
        if self.c0 == "calibrated":
            from .diagnostics import calibrated_c0

            return calibrated_c0(self.grid(), self.r, self.c_r)
        return float(self.c0)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self


def _positive(cfg, name):
    value = getattr(cfg, name)
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"{name} must be a finite number > 0, got {value!r}")


def _validate(cfg: ExperimentConfig):
    if isinstance(cfg.N, bool) or not isinstance(cfg.N, int) or cfg.N < 8 or cfg.N % 2:
        raise ConfigError(f"N must be an even integer >= 8, got {cfg.N!r}")
    for name in ("nu", "L", "dt", "T_total", "c_r", "initial_energy", "k_peak"):
        _positive(cfg, name)
    if not (isinstance(cfg.r, (int, float)) and 2 < cfg.r < 3):
        raise ConfigError(f"r must lie in the open interval (2,3), got {cfg.r!r}")
    if cfg.c0 != "calibrated":
        _positive(cfg, "c0")
    for name in ("snapshot_interval", "T_avg"):
        if getattr(cfg, name) is not None:
            _positive(cfg, name)
    if cfg.d_override is not None and not (isinstance(cfg.d_override, (int, float)) and 0 <= cfg.d_override <= 3):
        raise ConfigError(f"d_override must lie in [0,3], got {cfg.d_override!r}")
    for name in ("seed_u", "seed_v"):
        seed = getattr(cfg, name)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError(f"{name} must be an integer in [0, 2^64), got {seed!r}")
    if not isinstance(cfg.forcing, ForcingSpec):
        raise ConfigError("forcing must be a mapping")


_FLOATS = {"nu", "L", "dt", "T_total", "snapshot_interval", "r", "c_r", "T_avg", "d_override",
           "initial_energy", "k_peak"}
_FORCING_KEYS = {"kind", "amplitude", "pattern", "modes"}


def _as_float(key, value):
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _parse_forcing(raw) -> ForcingSpec:
    if raw is None:
        return ForcingSpec()
    if not isinstance(raw, dict):
        raise ConfigError("forcing must be a mapping with keys kind, amplitude, pattern, modes")
    unknown = set(raw) - _FORCING_KEYS
    if unknown:
        raise ConfigError(f"unknown forcing keys: {', '.join(sorted(unknown))}")
    kind = raw.get("kind", "none")
    pattern = raw.get("pattern", "taylor-green")
    if kind not in FORCING_KINDS:
        raise ConfigError(f"forcing.kind must be one of {', '.join(FORCING_KINDS)}, got {kind!r}")
    if pattern not in FORCING_PATTERNS:
        raise ConfigError(f"forcing.pattern must be one of {', '.join(FORCING_PATTERNS)}, got {pattern!r}")
    modes = []
    for row in raw.get("modes") or ():
        if not isinstance(row, (list, tuple)) or len(row) != 9:
            raise ConfigError("forcing.modes rows must be [kx, ky, kz, Re fx, Im fx, Re fy, Im fy, Re fz, Im fz]")
        if any(isinstance(x, bool) or not isinstance(x, int) for x in row[:3]):
            raise ConfigError("forcing.modes wavevector entries must be integers")
        modes.append(tuple(int(x) for x in row[:3]) + tuple(_as_float("forcing.modes", x) for x in row[3:]))
    if kind == "custom-coefficients" and not modes:
        raise ConfigError("forcing.kind custom-coefficients needs a non-empty forcing.modes list")
    amplitude = _as_float("forcing.amplitude", raw.get("amplitude", 0.0))
    return ForcingSpec(kind=kind, amplitude=amplitude, pattern=pattern, modes=tuple(modes))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML configuration document."""
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"configuration is not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of keys to values")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(map(str, unknown)))}")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    values = {}
    for key, value in raw.items():
        if key == "forcing":
            values[key] = _parse_forcing(value)
        elif key in _FLOATS:
            values[key] = _as_float(key, value)
        elif key == "c0":
            values[key] = value if value == "calibrated" else _as_float(key, value)
        elif key == "output_dir":
            values[key] = str(value)
        else:
            values[key] = value
    return ExperimentConfig(**values)


def dump_config(cfg: ExperimentConfig) -> str:
    """Normalized YAML with every key present, defaults included."""
    data = asdict(cfg)
    data["forcing"]["modes"] = [list(row) for row in cfg.forcing.modes]
    return yaml.safe_dump(data, sort_keys=False)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
