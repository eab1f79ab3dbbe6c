"""Experiment configuration: a TOML file with fixed sections, validated field by field.

Errors carry the 1-based line of the offending key, or of the section header
when a field is missing, so the CLI can point at the right place.
"""
from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..grid import Grid
from ..kernels import KernelSpec, coulomb, no_interaction, riesz
from ..potentials import Potential

SECTIONS = ("kernel", "potential", "grid", "solver", "sampler", "experiment")

# defaults applied when a section is present but a field is omitted
DEFAULTS = {
    "potential": {"kind": "power", "coef": 1.0, "power": 2.0, "shift": 0.0},
    "grid": {"center": 0.0},
    "solver": {"tol": 1e-9, "max_iter": 50000, "tau": 0.5, "thermal_max_iter": 3000, "thermal_tol": 1e-9},
    "sampler": {"step_size": 0.1, "n_steps": 1000, "burn_in": 200, "thinning": 10, "chains": 1,
                "proposal": "random-walk"},
    "experiment": {"seed": 0},
}

REQUIRED = {
    "kernel": ("family", "d"),
    "grid": ("half_width", "n"),
    "sampler": ("N", "beta"),
}

_LINE = re.compile(r"line (\d+)")


@dataclass
class Config:
    """Parsed configuration; ``data`` holds the sections with defaults filled in."""

    data: dict
    text: str = ""
    path: str = ""
    lines: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    def has(self, name: str) -> bool:
        return name in self.data

    def require(self, name: str) -> dict:
        if name not in self.data:
            raise ConfigError(f"missing required section [{name}]", line=1)
        return self.data[name]

    def get(self, section: str, key: str, default=None):
        return self.data.get(section, {}).get(key, default)

    def need(self, section: str, key: str):
        sec = self.require(section)
        if key not in sec:
            raise ConfigError(f"missing required field {section}.{key}", line=self.lines.get(section))
        return sec[key]

    def line_of(self, section: str, key: str | None = None) -> int | None:
        if key is not None and (section, key) in self.lines:
            return self.lines[(section, key)]
        return self.lines.get(section)

    @property
    def digest(self) -> str:
        return config_digest(self.data)

    @property
    def seed(self) -> int:
        return int(self.get("experiment", "seed", 0))


def config_digest(data: dict) -> str:
    """64-bit BLAKE2b digest (hex) of the canonical JSON of ``data``."""
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.blake2b(canon.encode(), digest_size=8).hexdigest()


def _index_lines(text: str) -> dict:
    """Map ``section`` and ``(section, key)`` to their 1-based line numbers."""
    lines: dict = {}
    current = None
    header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.-]+)\s*\]\s*(#.*)?$")
    key = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*=")
    for no, raw in enumerate(text.splitlines(), start=1):
        m = header.match(raw)
        if m:
            current = m.group(1)
            lines.setdefault(current, no)
            continue
        m = key.match(raw)
        if m and current is not None:
            lines.setdefault((current, m.group(1)), no)
    return lines


def parse_config(text: str, path: str = "<string>") -> Config:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE.search(str(exc))
        raise ConfigError(f"{path}: {exc}", line=int(m.group(1)) if m else None) from None
    lines = _index_lines(text)
    for name, value in raw.items():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]; expected one of {', '.join(SECTIONS)}",
                              line=lines.get(name))
        if not isinstance(value, dict):
            raise ConfigError(f"{name} must be a section", line=lines.get((name, name)) or 1)
    data = {}
    for name in SECTIONS:
        if name in raw:
            sec = dict(DEFAULTS.get(name, {}))
            sec.update(raw[name])
            data[name] = sec
    for name, keys in REQUIRED.items():
        if name in data:
            for k in keys:
                if k not in raw[name]:
                    raise ConfigError(f"missing required field {name}.{k}", line=lines.get(name))
    cfg = Config(data, text, path, lines)
    if "kernel" in data:
        kernel_from_config(cfg)
    if "grid" in data:
        grid_from_config(cfg)
    if "potential" in data:
        potential_from_config(cfg)
    return cfg


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _typed(cfg: Config, section: str, key: str, kind, check=None, message: str = ""):
    value = cfg.need(section, key)
    ok = isinstance(value, kind) and not isinstance(value, bool)
    if ok and check is not None:
        ok = check(value)
    if not ok:
        raise ConfigError(f"{section}.{key} = {value!r}: {message or 'invalid value'}",
                          line=cfg.line_of(section, key))
    return value


def kernel_from_config(cfg: Config) -> KernelSpec:
    fam = cfg.need("kernel", "family")
    d = _typed(cfg, "kernel", "d", int, lambda v: v >= 1, "dimension must be an integer >= 1")
    try:
        if fam == "coulomb":
            return coulomb(d)
        if fam == "riesz":
            s = _typed(cfg, "kernel", "s", (int, float), None, "order must be a number")
            return riesz(d, float(s))
        if fam == "none":
            return no_interaction(d)
    except ValueError as exc:
        raise ConfigError(f"[kernel]: {exc}", line=cfg.line_of("kernel")) from None
    if fam == "custom":
        raise ConfigError("custom kernels need callables and are only available through the library API",
                          line=cfg.line_of("kernel", "family"))
    raise ConfigError(f"kernel.family = {fam!r}: expected coulomb, riesz or none",
                      line=cfg.line_of("kernel", "family"))


def grid_from_config(cfg: Config, d: int | None = None, n: int | None = None) -> Grid:
    if d is None:
        d = cfg.get("kernel", "d") or cfg.get("grid", "d")
        if d is None:
            raise ConfigError("grid dimension unknown: set kernel.d or grid.d", line=cfg.line_of("grid"))
    hw = _typed(cfg, "grid", "half_width", (int, float), lambda v: v > 0, "must be positive")
    nn = n if n is not None else _typed(cfg, "grid", "n", int, lambda v: v >= 2 and not v & (v - 1),
                                        "points per axis must be a power of two")
    center = cfg.get("grid", "center", 0.0)
    return Grid.cube(int(d), float(hw), int(nn), float(center))


def potential_from_config(cfg: Config) -> Potential:
    sec = cfg.section("potential") if cfg.has("potential") else DEFAULTS["potential"]
    if sec.get("kind", "power") != "power":
        raise ConfigError("only power potentials can be configured from a file",
                          line=cfg.line_of("potential", "kind"))
    try:
        return Potential("power", float(sec["coef"]), float(sec["power"]), float(sec["shift"]),
                         tuple(float(v) for v in sec.get("center", ())))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[potential]: {exc}", line=cfg.line_of("potential")) from None


def experiment_value(cfg: Config, key: str, default=None, kind=None, check=None, message: str = ""):
    """Read ``[experiment].key`` with an optional type/predicate check."""
    value = cfg.get("experiment", key, default)
    if kind is not None and value is not None:
        ok = isinstance(value, kind) and not (isinstance(value, bool) and kind is not bool)
        if ok and check is not None:
            ok = check(value)
        if not ok:
            raise ConfigError(f"experiment.{key} = {value!r}: {message or 'invalid value'}",
                              line=cfg.line_of("experiment", key))
    return value
