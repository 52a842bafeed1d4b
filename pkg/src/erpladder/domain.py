"""Shared value types and the TOML configuration schema."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import tomli
import tomli_w

TOL = 1e-9

# Upper pixel-count bounds of the 720p / 1080p / 4K / 8K encoding-cost classes.
DEFAULT_COST_THRESHOLDS = (921600, 2073600, 8388608, 33554432)


class ConfigError(ValueError):
    """Raised when a configuration value violates a domain invariant."""


class ModelKind(str, enum.Enum):
    DISTORTION = "distortion"
    DATA_SIZE = "data_size"


@dataclass(frozen=True)
class EncodingFeatures:
    f_spa: float
    f_tmp: float

    def __post_init__(self):
        if not (0.0 <= self.f_spa <= 1.0):
            raise ValueError(f"f_spa={self.f_spa} outside [0, 1]")
        if not self.f_tmp >= 0.0:
            raise ValueError(f"f_tmp={self.f_tmp} is negative")


@dataclass(frozen=True, order=True)
class ContentType:
    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("content type index starts at 1")

    @classmethod
    def parse(cls, text: str) -> "ContentType":
        s = text.strip().lower()
        if s.startswith("o"):
            s = s[1:]
        if s.startswith("_"):
            s = s[1:]
        try:
            return cls(int(s))
        except ValueError:
            raise ValueError(f"bad content type {text!r}, expected e.g. o1") from None

    def __str__(self) -> str:
        return f"o{self.index}"


@dataclass(frozen=True)
class Resolution:
    width: int
    height: int
    index: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid resolution {self.width}x{self.height}")

    @property
    def pixels(self) -> int:
        return self.width * self.height

    def __str__(self) -> str:
        return f"{self.width}x{self.height}"


@dataclass(frozen=True)
class PowerFitParams:
    """Parameters of ``k * z**omega + phi``."""

    k: float
    omega: float
    phi: float
    kind: ModelKind = ModelKind.DISTORTION

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.k, self.omega, self.phi)):
            raise ValueError("power-series parameters must be finite")


@dataclass(frozen=True)
class BandwidthProfile:
    b_min: float
    b_max: float
    lam: float = 1.0

    def contains(self, z: float) -> bool:
        return self.b_min - TOL <= z <= self.b_max + TOL


@dataclass(frozen=True)
class CandidateRep:
    resolution: Resolution
    z: float
    distortion: float
    data_size: float
    cost: float

    @property
    def key(self) -> Tuple[float, int]:
        return (self.z, self.resolution.index)


@dataclass(frozen=True)
class GridSpec:
    """Geometric bitrate grid for one profile: ``anchor * ratio**k`` inside the band."""

    anchor: float
    ratio: float


@dataclass(frozen=True)
class SolverConfig:
    gamma: float
    m_total: int
    tau: float
    s_max: float
    c_max: float
    mu_e: float
    mu_s: float
    n_tiles: int
    profiles: Tuple[BandwidthProfile, ...]
    # Scale cost and distortion by their candidate-set means before mixing.
    normalize: bool = False

    def quotas(self) -> Tuple[int, ...]:
        total = sum(p.lam for p in self.profiles)
        if total <= 0:
            return tuple(0 for _ in self.profiles)
        return tuple(int(math.floor(self.m_total * p.lam / total + TOL)) for p in self.profiles)


@dataclass(frozen=True)
class LadderEntry:
    profile: int
    rep: CandidateRep


@dataclass(frozen=True)
class Ladder:
    entries: Tuple[LadderEntry, ...]
    objective: float = 0.0
    gamma: float = 0.0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def total_cost(self) -> float:
        return math.fsum(e.rep.cost for e in self.entries)

    @property
    def total_distortion(self) -> float:
        return math.fsum(e.rep.distortion for e in self.entries)

    @property
    def total_data_size(self) -> float:
        return math.fsum(e.rep.data_size for e in self.entries)

    def pairs(self) -> list:
        """(resolution index, z) for each entry, in ladder order."""
        return [(e.rep.resolution.index, e.rep.z) for e in self.entries]


ModelKey = Tuple[int, int, ModelKind]


@dataclass(frozen=True)
class Config:
    """Everything a run needs: solver settings plus the data tables."""

    solver: SolverConfig
    resolutions: Tuple[Resolution, ...]
    models: Mapping[ModelKey, PowerFitParams]
    centroids: Mapping[int, EncodingFeatures]
    grids: Tuple[GridSpec, ...] = ()
    cost_thresholds: Tuple[int, ...] = DEFAULT_COST_THRESHOLDS

    def model(self, content_type: int, res_index: int, kind: ModelKind) -> PowerFitParams:
        try:
            return self.models[(content_type, res_index, ModelKind(kind))]
        except KeyError:
            raise ConfigError(
                f"no {ModelKind(kind).value} model for o{content_type}, g{res_index}"
            ) from None

    def resolution_for(self, width: int, height: int) -> Resolution:
        for r in self.resolutions:
            if r.width == width and r.height == height:
                return r
        raise ConfigError(f"resolution {width}x{height} not in configured set")

    def with_gamma(self, gamma: float) -> "Config":
        return replace(self, solver=replace(self.solver, gamma=gamma))


def _finite(name: str, v: float) -> None:
    if not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name} is not a finite number")


def validate_config(cfg: SolverConfig) -> SolverConfig:
    """Check every SolverConfig invariant; raise ConfigError naming the first failure."""
    for name in ("gamma", "tau", "s_max", "c_max", "mu_e", "mu_s"):
        _finite(name, getattr(cfg, name))
    if not 0.0 <= cfg.gamma <= 1.0:
        raise ConfigError("gamma out of [0,1]")
    if int(cfg.m_total) != cfg.m_total or cfg.m_total < 1:
        raise ConfigError("m_total < 1")
    if cfg.tau < 1.0:
        raise ConfigError("tau < 1")
    # A zero budget is a valid (infeasible) instance, reported by the solver.
    if cfg.s_max < 0:
        raise ConfigError("s_max < 0")
    if cfg.c_max < 0:
        raise ConfigError("c_max < 0")
    if cfg.mu_e < 0:
        raise ConfigError("mu_e < 0")
    if cfg.mu_s < 0:
        raise ConfigError("mu_s < 0")
    if int(cfg.n_tiles) != cfg.n_tiles or cfg.n_tiles < 1:
        raise ConfigError("n_tiles < 1")
    if len(cfg.profiles) < 1:
        raise ConfigError("no bandwidth profiles")
    for i, p in enumerate(cfg.profiles, start=1):
        for name in ("b_min", "b_max", "lam"):
            _finite(f"profile p{i} {name}", getattr(p, name))
        if p.b_min <= 0:
            raise ConfigError(f"profile p{i}: b_min <= 0")
        if p.b_min > p.b_max:
            raise ConfigError(f"profile p{i}: b_min > b_max")
        if p.lam < 0:
            raise ConfigError(f"profile p{i}: lambda < 0")
    return cfg


def validate_full(cfg: Config) -> Config:
    validate_config(cfg.solver)
    if not cfg.resolutions:
        raise ConfigError("no resolutions")
    for a, b in zip(cfg.resolutions, cfg.resolutions[1:]):
        if b.pixels <= a.pixels:
            raise ConfigError("resolutions not strictly ascending by pixel count")
    if cfg.grids and len(cfg.grids) != len(cfg.solver.profiles):
        raise ConfigError("grids must list one (anchor, ratio) per profile")
    for i, g in enumerate(cfg.grids, start=1):
        if g.ratio <= 1.0:
            raise ConfigError(f"grid p{i}: ratio <= 1")
        if g.anchor <= 0:
            raise ConfigError(f"grid p{i}: anchor <= 0")
    th = cfg.cost_thresholds
    if len(th) != 4 or any(b <= a for a, b in zip(th, th[1:])):
        raise ConfigError("cost thresholds must be 4 strictly increasing pixel counts")
    return cfg


# --- TOML (de)serialization -------------------------------------------------

def _section(doc: Mapping, name: str) -> Mapping:
    try:
        sec = doc[name]
    except KeyError:
        raise ConfigError(f"missing [{name}] section") from None
    if not isinstance(sec, Mapping):
        raise ConfigError(f"[{name}] is not a table")
    return sec


def _get(sec: Mapping, sname: str, key: str):
    try:
        return sec[key]
    except KeyError:
        raise ConfigError(f"[{sname}] missing key {key!r}") from None


def _ct_index(key: str) -> int:
    try:
        return ContentType.parse(key).index
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _res_index(key: str) -> int:
    s = key.lower()
    if not s.startswith("g") or not s[1:].isdigit():
        raise ConfigError(f"bad resolution key {key!r}, expected e.g. g1")
    return int(s[1:])


def config_from_dict(doc: Mapping) -> Config:
    try:
        return _config_from_dict(doc)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _config_from_dict(doc: Mapping) -> Config:
    prof = _section(doc, "profiles")
    b_min = list(_get(prof, "profiles", "b_min_mbps"))
    b_max = list(_get(prof, "profiles", "b_max_mbps"))
    lam = list(prof.get("lambda", [1.0] * len(b_min)))
    if not (len(b_min) == len(b_max) == len(lam)):
        raise ConfigError("[profiles] lists differ in length")
    profiles = tuple(
        BandwidthProfile(float(a), float(b), float(c)) for a, b, c in zip(b_min, b_max, lam)
    )

    s = _section(doc, "solver")
    solver = SolverConfig(
        gamma=float(_get(s, "solver", "gamma")),
        m_total=int(_get(s, "solver", "m_total")),
        tau=float(_get(s, "solver", "tau")),
        s_max=float(_get(s, "solver", "s_max")),
        c_max=float(_get(s, "solver", "c_max")),
        mu_e=float(_get(s, "solver", "mu_e")),
        mu_s=float(_get(s, "solver", "mu_s")),
        n_tiles=int(_get(s, "solver", "n_tiles")),
        profiles=profiles,
        normalize=bool(s.get("normalize", False)),
    )

    r = _section(doc, "resolutions")
    widths = list(_get(r, "resolutions", "width"))
    heights = list(_get(r, "resolutions", "height"))
    if len(widths) != len(heights):
        raise ConfigError("[resolutions] width/height lengths differ")
    resolutions = tuple(
        Resolution(int(w), int(h), i) for i, (w, h) in enumerate(zip(widths, heights), start=1)
    )

    models: Dict[ModelKey, PowerFitParams] = {}
    for ct_key, per_res in doc.get("models", {}).items():
        o = _ct_index(ct_key)
        for res_key, per_kind in per_res.items():
            g = _res_index(res_key)
            for kind_key, p in per_kind.items():
                try:
                    kind = ModelKind(kind_key)
                except ValueError:
                    raise ConfigError(f"unknown model kind {kind_key!r}") from None
                models[(o, g, kind)] = PowerFitParams(
                    float(_get(p, "models", "k")),
                    float(_get(p, "models", "omega")),
                    float(_get(p, "models", "phi")),
                    kind,
                )

    centroids = {
        _ct_index(k): EncodingFeatures(float(v["f_spa"]), float(v["f_tmp"]))
        for k, v in doc.get("centroids", {}).items()
    }

    grids: Tuple[GridSpec, ...] = ()
    if "grids" in doc:
        gs = doc["grids"]
        anchors = list(_get(gs, "grids", "anchor"))
        ratios = list(_get(gs, "grids", "ratio"))
        if len(anchors) != len(ratios):
            raise ConfigError("[grids] anchor/ratio lengths differ")
        grids = tuple(GridSpec(float(a), float(q)) for a, q in zip(anchors, ratios))

    thresholds = DEFAULT_COST_THRESHOLDS
    if "cost" in doc and "thresholds" in doc["cost"]:
        thresholds = tuple(int(t) for t in doc["cost"]["thresholds"])

    cfg = Config(solver, resolutions, models, centroids, grids, thresholds)
    return validate_full(cfg)


def config_to_dict(cfg: Config) -> dict:
    s = cfg.solver
    doc: dict = {
        "solver": {
            "gamma": s.gamma,
            "m_total": s.m_total,
            "tau": s.tau,
            "s_max": s.s_max,
            "c_max": s.c_max,
            "mu_e": s.mu_e,
            "mu_s": s.mu_s,
            "n_tiles": s.n_tiles,
            "normalize": s.normalize,
        },
        "profiles": {
            "b_min_mbps": [p.b_min for p in s.profiles],
            "b_max_mbps": [p.b_max for p in s.profiles],
            "lambda": [p.lam for p in s.profiles],
        },
        "resolutions": {
            "width": [r.width for r in cfg.resolutions],
            "height": [r.height for r in cfg.resolutions],
        },
    }
    if cfg.grids:
        doc["grids"] = {
            "anchor": [g.anchor for g in cfg.grids],
            "ratio": [g.ratio for g in cfg.grids],
        }
    if tuple(cfg.cost_thresholds) != DEFAULT_COST_THRESHOLDS:
        doc["cost"] = {"thresholds": list(cfg.cost_thresholds)}
    if cfg.centroids:
        doc["centroids"] = {
            f"o{o}": {"f_spa": f.f_spa, "f_tmp": f.f_tmp} for o, f in sorted(cfg.centroids.items())
        }
    models: dict = {}
    for (o, g, kind), p in sorted(cfg.models.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value)):
        models.setdefault(f"o{o}", {}).setdefault(f"g{g}", {})[kind.value] = {
            "k": p.k,
            "omega": p.omega,
            "phi": p.phi,
        }
    if models:
        doc["models"] = models
    return doc


def _parse_toml(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None


def _read_default() -> str:
    return resources.files("erpladder").joinpath("data/default.toml").read_text("utf-8")


def loads_config(text: str) -> Config:
    """Parse a complete config document."""
    return config_from_dict(_parse_toml(text))


def dumps_config(cfg: Config) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def default_config() -> Config:
    return loads_config(_read_default())


def _deep_merge(dst: dict, src: Mapping) -> None:
    for k, v in src.items():
        if isinstance(v, Mapping) and isinstance(dst.get(k), dict):
            _deep_merge(dst[k], v)
        else:
            dst[k] = v


def overlay(base: Config, doc: Mapping) -> Config:
    """Merge a partial document over ``base``.

    ``[solver]``, ``[models]`` and ``[centroids]`` merge per key; every other
    section present in ``doc`` replaces the base section whole.
    """
    merged = config_to_dict(base)
    if "profiles" in doc and "grids" not in doc:
        merged.pop("grids", None)
    for key, value in doc.items():
        if key in ("models", "centroids", "solver") and isinstance(value, Mapping):
            _deep_merge(merged.setdefault(key, {}), value)
        else:
            merged[key] = value
    return config_from_dict(merged)


def load_config(path: Union[str, Path, None] = None) -> Config:
    """Read a config file layered over the packaged defaults (``None``: defaults only)."""
    base = default_config()
    if path is None:
        return base
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return overlay(base, _parse_toml(text))
