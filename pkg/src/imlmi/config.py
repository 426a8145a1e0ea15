"""Experiment configuration: JSON documents, dotted overrides and sweeps."""

from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
from dataclasses import dataclass, field

from .dgp import DgpSpec
from .imputation import ImputerSpec, default_m
from .missingness import MissSpec
from .models import GbtParams
from .uncertainty import ResampleSpec

__all__ = [
    "ConfigError", "LearnerSpec", "ExplainSpec", "VarianceMode", "ExperimentConfig",
    "parse_config", "expand_config", "apply_overrides", "config_hash", "EXPLAINERS",
]

EXPLAINERS = ("PD", "PFI", "SHAP")
LEARNERS = ("gbt", "ols")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "gbt"
    max_rounds: int = 20
    max_depth: int = 2
    learning_rate: float = 0.3
    reg_lambda: float = 1.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in LEARNERS:
            raise ValueError(f"unknown learner {self.kind!r}; expected one of {LEARNERS}")
        object.__setattr__(self, "kind", kind)
        self.gbt_params()

    def gbt_params(self) -> GbtParams:
        return GbtParams(self.max_rounds, self.max_depth, self.learning_rate, self.reg_lambda)


@dataclass(frozen=True)
class ExplainSpec:
    grid_size: int = 20
    n_perm: int = 5
    # simulation grids span these standard-normal quantiles of each feature
    grid_quantiles: tuple = (0.05, 0.95)

    def __post_init__(self):
        if self.grid_size < 2 or self.n_perm < 1:
            raise ValueError("grid_size must be >= 2 and n_perm >= 1")
        lo, hi = self.grid_quantiles
        if not 0 < lo < hi < 1:
            raise ValueError("grid_quantiles must satisfy 0 < lo < hi < 1")
        object.__setattr__(self, "grid_quantiles", (float(lo), float(hi)))


@dataclass(frozen=True)
class VarianceMode:
    adjusted: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    dgp: DgpSpec = field(default_factory=DgpSpec)
    n: int = 500
    miss: MissSpec | None = None
    imputer: ImputerSpec = field(default_factory=lambda: ImputerSpec("none"))
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    explainers: tuple = EXPLAINERS
    explain: ExplainSpec = field(default_factory=ExplainSpec)
    resample: ResampleSpec = field(default_factory=ResampleSpec)
    variance: VarianceMode = field(default_factory=VarianceMode)
    alpha: float = 0.05
    replications: int = 200
    ground_truth_replications: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.n < 10:
            raise ConfigError("n", "sample size must be >= 10")
        if self.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        if self.ground_truth_replications < 1:
            raise ConfigError("ground_truth_replications", "must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha", "must lie in (0, 1)")
        bad = [e for e in self.explainers if e not in EXPLAINERS]
        if bad or not self.explainers:
            raise ConfigError("explainers", f"expected a non-empty subset of {EXPLAINERS}")
        object.__setattr__(self, "explainers", tuple(e for e in EXPLAINERS if e in self.explainers))
        if self.miss is None and self.imputer.kind not in ("none", "mean", "missforest") \
                and self.imputer.m is None:
            raise ConfigError("imputer.m", "MICE on complete data needs an explicit m")
        if self.miss is not None and self.imputer.kind == "none":
            raise ConfigError("imputer.kind", "missing data needs an imputer")

    @property
    def m(self) -> int:
        if not self.imputer.multiple:
            return 1
        if self.imputer.m is not None:
            return self.imputer.m
        return default_m(self.miss.proportion)

    @property
    def mechanism(self) -> str:
        return "none" if self.miss is None else self.miss.mechanism

    @property
    def proportion(self) -> float:
        return 0.0 if self.miss is None else self.miss.proportion

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def compute_key(self) -> dict:
        """Fields that determine the raw replications (variants share them)."""
        d = self.to_dict()
        d.pop("variance")
        d.pop("alpha")
        d["resample"].pop("refits_used")
        return d

    def ground_truth_key(self) -> dict:
        d = self.to_dict()
        return {
            "dgp": d["dgp"], "n": d["n"], "learner": d["learner"], "explain": d["explain"],
            "explainers": d["explainers"],
            "resample": {k: d["resample"][k] for k in ("strategy", "k", "train_fraction")},
            "ground_truth_replications": d["ground_truth_replications"], "seed": d["seed"],
        }


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


_SECTIONS = {
    "dgp": DgpSpec, "miss": MissSpec, "imputer": ImputerSpec, "learner": LearnerSpec,
    "explain": ExplainSpec, "resample": ResampleSpec, "variance": VarianceMode,
}
_SCALARS = {"n": int, "alpha": float, "replications": int, "ground_truth_replications": int,
            "seed": int}


def _build_section(name, cls, raw):
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in names:
            raise ConfigError(f"{name}.{key}", "unknown field")
    kwargs = dict(raw)
    if "grid_quantiles" in kwargs:
        kwargs["grid_quantiles"] = tuple(kwargs["grid_quantiles"])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        key = f"{name}.kind" if "unknown" in str(exc) and "kind" in raw else name
        if "mechanism" in str(exc):
            key = f"{name}.mechanism"
        raise ConfigError(key, str(exc)) from None


def parse_config(raw: dict) -> ExperimentConfig:
    """Build one ExperimentConfig from a plain dict (no sweep)."""
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            if key == "miss" and value is None:
                kwargs[key] = None
            else:
                kwargs[key] = _build_section(key, _SECTIONS[key], value)
        elif key in _SCALARS:
            try:
                kwargs[key] = _SCALARS[key](value)
            except (TypeError, ValueError):
                raise ConfigError(key, f"cannot interpret {value!r}") from None
        elif key == "explainers":
            kwargs[key] = tuple(str(e).upper() for e in value)
        elif key == "sweep":
            raise ConfigError(key, "sweeps must be expanded with expand_config")
        else:
            raise ConfigError(key, "unknown field")
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError("config", str(exc)) from None


def _set_path(doc: dict, path: str, value):
    parts = path.split(".")
    node = doc
    for part in parts[:-1]:
        if node.get(part) is None:
            node[part] = {}
        node = node[part]
        if not isinstance(node, dict):
            raise ConfigError(path, "path does not address an object")
    node[parts[-1]] = value


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as JSON when possible."""
    doc = json.loads(json.dumps(doc))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        path, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        _top = path.split(".")[0]
        if _top not in _SECTIONS and _top not in _SCALARS and _top not in ("explainers", "sweep"):
            raise ConfigError(path, "unknown field")
        _set_path(doc, path, value)
    return doc


def expand_config(doc: dict) -> list[ExperimentConfig]:
    """Expand the optional ``sweep`` section (dotted path -> list) into a grid.

    The first sweep key varies slowest.
    """
    doc = json.loads(json.dumps(doc))
    sweep = doc.pop("sweep", None) or {}
    if not isinstance(sweep, dict):
        raise ConfigError("sweep", "expected an object of path -> list")
    keys = list(sweep)
    for k in keys:
        if not isinstance(sweep[k], list) or not sweep[k]:
            raise ConfigError(f"sweep.{k}", "expected a non-empty list")
    configs = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        d = json.loads(json.dumps(doc))
        for k, v in zip(keys, combo):
            _set_path(d, k, v)
        configs.append(parse_config(d))
    return configs
