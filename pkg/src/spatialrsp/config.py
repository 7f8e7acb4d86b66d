"""Run configuration: TOML files with a schema version and unit-aware lengths.

Example::

    schema_version = 1

    [geometry]
    preset = "table1"          # or give the fields below
    slit_half_width = "40 um"
    slit_separation = "250um"
    wavelength = "670 nm"
    focal_length = 0.30        # bare numbers are metres

    [detector]
    width = "20 um"

    [sweep]
    preset = "coarse"
    n_theta = 300
    n_phi = 600

    [output]
    format = "csv"
    seed = 0
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DomainError
from .geometry import OpticalGeometry
from .sweep import BlochGrid, SweepConfig

SCHEMA_VERSION = 1

_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9}
_LENGTH = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Zµμ]*)\s*$")


class ConfigError(DomainError):
    """Malformed or inconsistent configuration."""


def parse_length(value) -> float:
    """Metres from a number or a string such as ``"40 um"``, ``"670nm"`` or ``"0.3"``."""
    if isinstance(value, bool):
        raise ConfigError(f"not a length: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _LENGTH.match(str(value))
    if not m:
        raise ConfigError(f"cannot parse length {value!r}")
    number, unit = m.groups()
    unit = unit or "m"
    if unit not in _UNITS:
        raise ConfigError(f"unknown length unit {unit!r} in {value!r}; use one of {sorted(_UNITS)}")
    return float(number) * _UNITS[unit]


GEOMETRY_PRESETS = {"table1": OpticalGeometry.table1, "taguchi": OpticalGeometry.taguchi}
_GEOMETRY_LENGTHS = ("slit_half_width", "slit_separation", "wavelength", "focal_length", "aperture_distance")


@dataclass
class RunConfig:
    geometry: OpticalGeometry = field(default_factory=OpticalGeometry.table1)
    width: float = 20e-6
    x: float | None = None
    z: float | None = None
    sweep_preset: str = "coarse"
    n_theta: int = 300
    n_phi: int = 600
    z_step: float | None = None
    x_step: float | None = None
    povm_n_theta: int = 100
    povm_n_chi: int = 100
    format: str | None = None  # None: each command picks its natural format
    out: str | None = None
    seed: int = 0

    def sweep_config(self) -> SweepConfig:
        cfg = SweepConfig.preset(self.sweep_preset, width=self.width, x_step=self.x_step,
                                 grid=BlochGrid(self.n_theta, self.n_phi))
        if self.z_step is not None:
            cfg = replace(cfg, z_step=self.z_step)
        return cfg


def _geometry(block: dict) -> OpticalGeometry:
    block = dict(block)
    preset = block.pop("preset", "table1")
    if preset not in GEOMETRY_PRESETS:
        raise ConfigError(f"unknown geometry preset {preset!r}; expected one of {sorted(GEOMETRY_PRESETS)}")
    overrides = {}
    for key, value in block.items():
        if key in _GEOMETRY_LENGTHS:
            overrides[key] = parse_length(value)
        elif key == "num_slits":
            overrides[key] = int(value)
        else:
            raise ConfigError(f"unknown geometry key {key!r}")
    return GEOMETRY_PRESETS[preset](**overrides)


def _take(block: dict, section: str, spec: dict) -> dict:
    out = {}
    for key, value in block.items():
        if key not in spec:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        name, conv = spec[key]
        try:
            out[name] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {section}.{key}: {value!r}") from exc
    return out


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    known = {"geometry", "detector", "sweep", "povm", "output"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")
    kwargs = {}
    if "geometry" in data:
        kwargs["geometry"] = _geometry(data["geometry"])
    kwargs.update(_take(data.get("detector", {}), "detector", {
        "width": ("width", parse_length), "x": ("x", parse_length), "z": ("z", parse_length)}))
    kwargs.update(_take(data.get("sweep", {}), "sweep", {
        "preset": ("sweep_preset", str), "n_theta": ("n_theta", int), "n_phi": ("n_phi", int),
        "z_step": ("z_step", parse_length), "x_step": ("x_step", parse_length)}))
    kwargs.update(_take(data.get("povm", {}), "povm", {
        "n_theta": ("povm_n_theta", int), "n_chi": ("povm_n_chi", int)}))
    kwargs.update(_take(data.get("output", {}), "output", {
        "format": ("format", str), "path": ("out", str), "seed": ("seed", int)}))
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.format not in (None, "csv", "json"):
        raise ConfigError(f"output format must be 'csv' or 'json', got {cfg.format!r}")
    if cfg.sweep_preset not in ("coarse", "full"):
        raise ConfigError(f"sweep preset must be 'coarse' or 'full', got {cfg.sweep_preset!r}")
    if not cfg.width >= 0:
        raise ConfigError("detector width must be >= 0")
    if cfg.n_theta < 2 or cfg.n_phi < 1:
        raise ConfigError("Bloch grid too small")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(Path(path), "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data)
