"""Pipeline configuration: schema, defaults, loading and up-front validation."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from datetime import datetime
from pathlib import Path

import yaml

from .cluster.agglomerative import LINKAGES
from .cluster.kmeans import INITS
from .dataio import DEFAULT_DATE_FORMATS
from .errors import ConfigError
from .features import CUSTOMER_FEATURES, FREQUENCY_MODES, INVOICE_FEATURES, RECENCY_MODES
from .numeric import SCALINGS

ALGORITHMS = ("kmeans", "gmm", "dbscan", "birch", "agglo")
STAGES = ("clean", "rfm", "elbow", "cluster", "kdistance", "plotdata")


@dataclass
class CleaningOptions:
    drop_null_customer: bool = True
    drop_nonpositive_quantity: bool = True
    deduplicate: bool = True
    write_cleaned_csv: bool = False


@dataclass
class RfmOptions:
    frequency_mode: str = "lines"
    recency_mode: str = "elapsed"
    reference_date: str | None = None  # ISO timestamp; default is the latest invoice
    weights: list = field(default_factory=lambda: [0.15, 0.28, 0.57])
    scale_divisor: float = 20.0
    thresholds: dict = field(default_factory=lambda: {"top": 4.5, "high": 4.0, "medium": 3.0, "low": 1.6})


@dataclass
class FeatureOptions:
    level: str = "customer"  # or "invoice"
    columns: list = field(default_factory=lambda: ["frequency", "monetary"])


@dataclass
class KMeansOptions:
    k: int = 3
    init: str = "kmeanspp"
    scaler: str = "minmax"
    max_iter: int = 300
    tol: float = 1e-10
    seed_study_runs: int = 20  # random-init reruns measuring seed spread; 0 disables


@dataclass
class GmmOptions:
    k: int = 3
    scaler: str = "zscore"
    pca_components: int = 2  # 0 feeds the scaled features directly
    max_iter: int = 200
    tol: float = 1e-6
    reg: float = 1e-6


@dataclass
class DbscanOptions:
    eps: float = 0.3
    min_samples: int = 5
    scaler: str = "zscore"
    eps_grid: list = field(default_factory=list)


@dataclass
class BirchOptions:
    threshold: float = 0.01
    branching: int = 50
    n_clusters: int = 3
    scaler: str = "minmax"
    threshold_grid: list = field(default_factory=list)


@dataclass
class AggloOptions:
    n_clusters: int = 3
    linkage: str = "ward"
    scaler: str = "minmax"


@dataclass
class ElbowOptions:
    k_min: int = 2
    k_max: int = 10
    seeds: int = 10


@dataclass
class PipelineConfig:
    input: str = ""
    output_dir: str = "out"
    seed: int = 0
    date_formats: list = field(default_factory=lambda: list(DEFAULT_DATE_FORMATS))
    stages: list = field(default_factory=lambda: ["clean", "rfm", "elbow", "cluster", "kdistance", "plotdata"])
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    cleaning: CleaningOptions = field(default_factory=CleaningOptions)
    rfm: RfmOptions = field(default_factory=RfmOptions)
    features: FeatureOptions = field(default_factory=FeatureOptions)
    kmeans: KMeansOptions = field(default_factory=KMeansOptions)
    gmm: GmmOptions = field(default_factory=GmmOptions)
    dbscan: DbscanOptions = field(default_factory=DbscanOptions)
    birch: BirchOptions = field(default_factory=BirchOptions)
    agglo: AggloOptions = field(default_factory=AggloOptions)
    elbow: ElbowOptions = field(default_factory=ElbowOptions)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return _build(cls, data, "")

    def validate(self, check_input: bool = True) -> "PipelineConfig":
        validate(self, check_input)
        return self


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        key = f"{where}.{name}" if where else name
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value or {}, key)
        elif isinstance(current, float) and isinstance(value, str):
            # YAML 1.1 reads "1e-6" (no dot) as a string
            try:
                kwargs[name] = float(value)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {value!r}") from None
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Read a YAML/JSON config (or a run manifest embedding one) and apply overrides.

    ``overrides`` maps dotted keys (``"dbscan.eps"``) to values.
    """
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from None
        if isinstance(data, dict) and "config" in data and "artifacts" in data:
            data = data["config"]
    data = copy.deepcopy(data)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        *parents, last = dotted.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[last] = value
    return PipelineConfig.from_dict(data)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(cfg: PipelineConfig, check_input: bool = True) -> None:
    """Check every module's preconditions before any work runs."""
    _require(isinstance(cfg.input, str) and cfg.input, "input path is required")
    if check_input:
        _require(Path(cfg.input).is_file(), f"input file not found: {cfg.input}")
    _require(_is_int(cfg.seed), "seed must be an integer")
    _require(isinstance(cfg.date_formats, list) and cfg.date_formats, "date_formats must be a non-empty list")
    bad = [s for s in cfg.stages if s not in STAGES]
    _require(not bad, f"unknown stage(s) {bad}; expected from {STAGES}")
    bad = [a for a in cfg.algorithms if a not in ALGORITHMS]
    _require(not bad, f"unknown algorithm(s) {bad}; expected from {ALGORITHMS}")

    r = cfg.rfm
    _require(r.frequency_mode in FREQUENCY_MODES, f"rfm.frequency_mode must be one of {FREQUENCY_MODES}")
    _require(r.recency_mode in RECENCY_MODES, f"rfm.recency_mode must be one of {RECENCY_MODES}")
    if r.reference_date is not None:
        try:
            datetime.fromisoformat(str(r.reference_date))
        except ValueError:
            raise ConfigError(f"rfm.reference_date is not ISO formatted: {r.reference_date!r}") from None
    _require(isinstance(r.weights, list) and len(r.weights) == 3 and all(_is_num(w) and w >= 0 for w in r.weights),
             "rfm.weights must be three non-negative numbers")
    _require(sum(r.weights) > 0, "rfm.weights must not all be zero")
    _require(_is_num(r.scale_divisor) and r.scale_divisor > 0, "rfm.scale_divisor must be positive")
    t = r.thresholds
    _require(isinstance(t, dict) and set(t) == {"top", "high", "medium", "low"},
             "rfm.thresholds needs exactly top, high, medium, low")
    _require(t["top"] > t["high"] > t["medium"] > t["low"] > 0, "rfm.thresholds must be strictly decreasing and positive")

    f = cfg.features
    _require(f.level in ("customer", "invoice"), "features.level must be 'customer' or 'invoice'")
    allowed = CUSTOMER_FEATURES if f.level == "customer" else INVOICE_FEATURES
    _require(isinstance(f.columns, list) and f.columns, "features.columns must be a non-empty list")
    bad = [c for c in f.columns if c not in allowed]
    _require(not bad, f"features.columns {bad} are not {f.level}-level features {allowed}")
    d = len(f.columns)

    for name in ("kmeans", "gmm", "dbscan", "birch", "agglo"):
        scaler = getattr(cfg, name).scaler
        _require(scaler in SCALINGS, f"{name}.scaler must be one of {SCALINGS}")

    km = cfg.kmeans
    _require(_is_int(km.k) and km.k >= 1, "kmeans.k must be an integer >= 1")
    _require(km.init in INITS, f"kmeans.init must be one of {INITS}")
    _require(_is_int(km.max_iter) and km.max_iter >= 1, "kmeans.max_iter must be >= 1")
    _require(_is_num(km.tol) and km.tol >= 0, "kmeans.tol must be >= 0")
    _require(_is_int(km.seed_study_runs) and km.seed_study_runs >= 0, "kmeans.seed_study_runs must be >= 0")

    g = cfg.gmm
    _require(_is_int(g.k) and g.k >= 1, "gmm.k must be an integer >= 1")
    _require(_is_int(g.pca_components) and 0 <= g.pca_components <= d,
             f"gmm.pca_components must be in [0, {d}] (number of features)")
    _require(_is_int(g.max_iter) and g.max_iter >= 1, "gmm.max_iter must be >= 1")
    _require(_is_num(g.tol) and g.tol >= 0, "gmm.tol must be >= 0")
    _require(_is_num(g.reg) and g.reg >= 0, "gmm.reg must be >= 0")

    db = cfg.dbscan
    _require(_is_num(db.eps) and db.eps > 0, "dbscan.eps must be > 0")
    _require(_is_int(db.min_samples) and db.min_samples >= 1, "dbscan.min_samples must be >= 1")
    _require(all(_is_num(e) and e > 0 for e in db.eps_grid), "dbscan.eps_grid values must be > 0")

    b = cfg.birch
    _require(_is_num(b.threshold) and b.threshold > 0, "birch.threshold must be > 0")
    _require(_is_int(b.branching) and b.branching >= 2, "birch.branching must be >= 2")
    _require(_is_int(b.n_clusters) and b.n_clusters >= 1, "birch.n_clusters must be >= 1")
    _require(all(_is_num(x) and x > 0 for x in b.threshold_grid), "birch.threshold_grid values must be > 0")

    a = cfg.agglo
    _require(_is_int(a.n_clusters) and a.n_clusters >= 1, "agglo.n_clusters must be >= 1")
    _require(a.linkage in LINKAGES, f"agglo.linkage must be one of {LINKAGES}")

    e = cfg.elbow
    _require(_is_int(e.k_min) and _is_int(e.k_max) and 1 <= e.k_min and e.k_max >= e.k_min + 2,
             "elbow needs integers 1 <= k_min and k_max >= k_min + 2")
    _require(_is_int(e.seeds) and e.seeds >= 1, "elbow.seeds must be >= 1")


def dump_config(cfg: PipelineConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
