"""Run configuration: TOML tables validated against a fixed schema.

Every key has a default; unknown tables or keys raise ``ConfigError``
naming the offending key.  ``docs/config.md`` documents the schema.
"""
from __future__ import annotations

import copy
import dataclasses
import logging
import math
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .elasticity import Materials
from .energy import Tensions
from .errors import ConfigError, FilmLabError
from .flow import FlowConfig
from .geometry import Profile, make_profile

log = logging.getLogger(__name__)

__all__ = ["DEFAULTS", "RunConfig", "load_config", "resolve", "build_profile", "parse_sector"]

DEFAULTS = {
    "domain": {"a": 0.0, "b": 1.0, "H": None, "lateral": "periodic"},
    "materials": {"mu_f": 1.0, "lambda_f": 1.0, "mu_s": 2.0, "lambda_s": 2.0, "e0": 0.0},
    "tensions": {"gamma_f": 1.0, "gamma_s": 1.5, "gamma_fs": 1.0},
    "profile": {
        "kind": "rectangle-island",
        "n": 400,
        "height": 0.1,
        "width": 0.5,
        "center": None,
        "path": None,
    },
    "mesh": {"target": None, "grade": 1.25, "max_aspect": 16.0},
    "flow": {f.name: f.default for f in dataclasses.fields(FlowConfig) if f.name not in ("lateral", "H", "mesh_target")},
    "run": {"seed": 0, "checkpoint_every": 100, "angle_tol_deg": 3.0},
    "sweep": {"parameter": "beta", "values": []},
    "pencil": {"kind": "border", "theta_deg": 60.0, "theta1": None, "theta2": None, "theta3": None, "n_angular": 256, "strip": [-0.75, 1.25]},
    "decay": {"r_max": 0.01, "n_radii": 8, "refine_depth": 10, "border": "left", "e0": None},
}

PROFILE_KINDS = ("flat", "tent", "rectangle-island", "file")
LATERAL = ("periodic", "free", "clamped")
SECTOR_KINDS = ("crack", "wedge", "border", "valley", "angles")


@dataclasses.dataclass
class RunConfig:
    """Resolved configuration, plus the plain dict echoed into manifests."""

    raw: dict
    materials: Materials
    tensions: Tensions
    flow: FlowConfig
    profile: Profile
    base_dir: Path = Path(".")

    @property
    def domain(self) -> dict:
        return self.raw["domain"]

    def section(self, name: str) -> dict:
        return self.raw[name]


def _merge(user: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for table, values in user.items():
        if table not in out:
            raise ConfigError(f"unknown table [{table}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{table}] must be a table")
        for key, val in values.items():
            if key not in out[table]:
                raise ConfigError(f"unknown key '{table}.{key}'")
            out[table][key] = val
    return out


def _num(d: dict, table: str, key: str, *, positive=False, allow_none=False, integer=False):
    v = d[table][key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"'{table}.{key}' must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"'{table}.{key}' must be finite")
    if positive and not v > 0:
        raise ConfigError(f"'{table}.{key}' must be positive, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"'{table}.{key}' must be an integer, got {v!r}")
    return int(v) if integer else float(v)


def build_profile(raw: dict, base_dir: Path = Path(".")) -> Profile:
    """Initial profile from the ``[profile]`` and ``[domain]`` tables."""
    pr = raw["profile"]
    a = _num(raw, "domain", "a")
    b = _num(raw, "domain", "b")
    if not b > a:
        raise ConfigError(f"'domain.b' must exceed 'domain.a' ({a} >= {b})")
    kind = pr["kind"]
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"'profile.kind' must be one of {PROFILE_KINDS}, got {kind!r}")
    if kind == "file":
        from .io import read_profile_csv

        if not pr["path"]:
            raise ConfigError("'profile.path' is required for kind = 'file'")
        path = Path(pr["path"])
        if not path.is_absolute():
            path = base_dir / path
        try:
            return read_profile_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"'profile.path': cannot read {path}: {exc}") from exc
    n = _num(raw, "profile", "n", positive=True, integer=True)
    if n < 2:
        raise ConfigError("'profile.n' must be at least 2")
    height = _num(raw, "profile", "height")
    if height < 0:
        raise ConfigError("'profile.height' must be >= 0")
    x = np.linspace(a, b, n + 1)
    if kind == "flat":
        h = np.full(n + 1, height)
    else:
        width = _num(raw, "profile", "width", positive=True)
        c = 0.5 * (a + b) if pr["center"] is None else _num(raw, "profile", "center")
        half = 0.5 * width
        if kind == "tent":
            h = height * np.maximum(0.0, 1.0 - np.abs(x - c) / half)
        else:
            tol = 1e-9 * (b - a)
            h = np.where(np.abs(x - c) <= half + tol, height, 0.0)
    return make_profile(a, b, h)


def parse_sector(raw: dict):
    from .pencil import SectorSpec

    pc = raw["pencil"]
    kind = pc["kind"]
    if kind not in SECTOR_KINDS:
        raise ConfigError(f"'pencil.kind' must be one of {SECTOR_KINDS}, got {kind!r}")
    try:
        if kind == "crack":
            return SectorSpec.wedge(2 * math.pi)
        if kind == "angles":
            th = [_num(raw, "pencil", k) for k in ("theta1", "theta2", "theta3")]
            return SectorSpec(*(math.radians(v) for v in th))
        theta = math.radians(_num(raw, "pencil", "theta_deg", positive=True))
        return {"wedge": SectorSpec.wedge, "border": SectorSpec.border, "valley": SectorSpec.valley}[kind](theta)
    except FilmLabError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[pencil]: {exc}") from exc


def resolve(user: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Merge ``user`` over the defaults and validate every component."""
    raw = _merge(user)
    dom = raw["domain"]
    if dom["lateral"] not in LATERAL:
        raise ConfigError(f"'domain.lateral' must be one of {LATERAL}, got {dom['lateral']!r}")
    _num(raw, "domain", "H", positive=True, allow_none=True)
    m = {k: _num(raw, "materials", k) for k in DEFAULTS["materials"]}
    t = {k: _num(raw, "tensions", k) for k in DEFAULTS["tensions"]}
    try:
        mat = Materials(**m)
        ten = Tensions(**t)
    except FilmLabError as exc:
        raise ConfigError(f"invalid material or tension values: {exc}") from exc
    if not mat.quasi_monotone:
        log.warning("materials are not quasi-monotone; decay exponent claims are disabled")
    fl = dict(raw["flow"])
    mesh = raw["mesh"]
    _num(raw, "mesh", "target", positive=True, allow_none=True)
    try:
        flow = FlowConfig(**fl, lateral=dom["lateral"], H=dom["H"], mesh_target=mesh["target"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[flow]: {exc}") from exc
    profile = build_profile(raw, base_dir)
    sw = raw["sweep"]
    if sw["parameter"] not in ("beta", "e0"):
        raise ConfigError(f"'sweep.parameter' must be 'beta' or 'e0', got {sw['parameter']!r}")
    if not isinstance(sw["values"], list):
        raise ConfigError("'sweep.values' must be a list")
    _num(raw, "run", "seed", integer=True)
    _num(raw, "run", "checkpoint_every", positive=True, integer=True)
    parse_sector(raw)
    return RunConfig(raw, mat, ten, flow, profile, base_dir)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a TOML file (or none, for all defaults) and resolve it."""
    user = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
        base = path.parent
    for table, values in (overrides or {}).items():
        user.setdefault(table, {}).update(values)
    return resolve(user, base)
