"""Experiment configuration: strict parsing, validation, and presets.

Configs are YAML (or JSON) mappings with four core blocks -- model,
summary, method, replication -- plus optional compare/forecast blocks.
Unknown keys anywhere fail loudly with the offending field names.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .simulators import (
    ArchModelSpec,
    GaussianModelSpec,
    LorenzModelSpec,
    ModelSpec,
    RickerModelSpec,
)
from .summaries import SummaryMapSpec

_MODEL_KINDS = {
    "gaussian": GaussianModelSpec,
    "arch": ArchModelSpec,
    "ricker": RickerModelSpec,
    "lorenz": LorenzModelSpec,
}


def _reject_unknown(block: str, given: dict, allowed) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"{block}: unknown keys {unknown}; allowed keys are {sorted(allowed)}")


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


@dataclass(frozen=True)
class ModelBlock:
    kind: str
    theta0: tuple
    spec: ModelSpec

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelBlock":
        _reject_unknown("model", raw, {"kind", "theta0", "spec"})
        kind = raw.get("kind")
        if kind not in _MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {sorted(_MODEL_KINDS)}, got {kind!r}")
        spec_cls = _MODEL_KINDS[kind]
        spec_kwargs = {k: _tupled(v) for k, v in (raw.get("spec") or {}).items()}
        _reject_unknown(f"model.spec ({kind})", spec_kwargs, {f.name for f in fields(spec_cls)})
        spec = spec_cls(**spec_kwargs)
        theta0 = tuple(float(v) for v in (raw.get("theta0") or ()))
        if theta0 and len(theta0) != len(spec.param_names):
            raise ConfigError(
                f"model.theta0 needs {len(spec.param_names)} entries for kind {kind!r}"
            )
        return cls(kind, theta0, spec)


def _summary_from_dict(raw: dict) -> SummaryMapSpec:
    allowed = {f.name for f in fields(SummaryMapSpec)}
    _reject_unknown("summary", raw, allowed)
    if "base" not in raw:
        raise ConfigError("summary.base is required")
    return SummaryMapSpec(**raw)


@dataclass(frozen=True)
class GridAxisSpec:
    lo: float
    hi: float
    n: int

    def nodes(self) -> np.ndarray:
        if self.n < 2:
            raise ConfigError("grid axes need n >= 2")
        if not self.lo < self.hi:
            raise ConfigError("grid axis needs lo < hi")
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class MethodBlock:
    kind: str
    n_theta: int = 100
    n_m: int = 100
    folds: int = 10
    n_lambda: int = 100
    lambda_ratio: float = 1e-4
    fixed_lambda: float | None = None
    grid: tuple[GridAxisSpec, ...] = ()
    particles: int = 0
    n_sims: int = 0
    rate: float | None = None
    threshold: float | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "MethodBlock":
        _reject_unknown("method", raw, {f.name for f in fields(cls)})
        kind = raw.get("kind")
        if kind not in ("lfire", "synthlik", "abc"):
            raise ConfigError(f"method.kind must be lfire, synthlik, or abc, got {kind!r}")
        raw = dict(raw)
        grid_raw = raw.pop("grid", None) or ()
        axes = []
        for entry in grid_raw:
            if isinstance(entry, dict):
                _reject_unknown("method.grid axis", entry, {"lo", "hi", "n"})
                axes.append(GridAxisSpec(float(entry["lo"]), float(entry["hi"]), int(entry["n"])))
            else:
                lo, hi, n = entry
                axes.append(GridAxisSpec(float(lo), float(hi), int(n)))
        block = cls(grid=tuple(axes), **raw)
        if kind == "abc":
            if block.n_sims < 1:
                raise ConfigError("method.n_sims is required for abc")
            if (block.rate is None) == (block.threshold is None):
                raise ConfigError("abc needs exactly one of method.rate / method.threshold")
        else:
            if bool(block.grid) == bool(block.particles):
                raise ConfigError(f"{kind} needs exactly one of method.grid / method.particles")
        return block

    def grid_axes(self) -> tuple[np.ndarray, ...]:
        return tuple(ax.nodes() for ax in self.grid)


@dataclass(frozen=True)
class ReplicationBlock:
    n_datasets: int
    master_seed: int

    @classmethod
    def from_dict(cls, raw: dict) -> "ReplicationBlock":
        _reject_unknown("replication", raw, {"n_datasets", "master_seed"})
        if "master_seed" not in raw:
            raise ConfigError("replication.master_seed is mandatory")
        n = int(raw.get("n_datasets", 1))
        if n < 0:
            raise ConfigError("replication.n_datasets must be >= 0")
        return cls(n, int(raw["master_seed"]))


@dataclass(frozen=True)
class CompareBlock:
    methods: tuple[tuple[str, str], ...]  # (label, artifact dir), order matters
    reference: str = "truth"  # truth | abc
    abc_dir: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "CompareBlock":
        _reject_unknown("compare", raw, {"methods", "reference", "abc_dir"})
        methods = tuple((str(k), str(v)) for k, v in (raw.get("methods") or {}).items())
        if not methods:
            raise ConfigError("compare.methods must name at least one artifact directory")
        ref = raw.get("reference", "truth")
        if ref not in ("truth", "abc"):
            raise ConfigError("compare.reference must be 'truth' or 'abc'")
        if ref == "abc" and not raw.get("abc_dir"):
            raise ConfigError("compare.reference=abc needs compare.abc_dir")
        return cls(methods, ref, raw.get("abc_dir"))


@dataclass(frozen=True)
class ForecastBlock:
    lfire_dir: str
    synthlik_dir: str
    horizon_steps: int = 80

    @classmethod
    def from_dict(cls, raw: dict) -> "ForecastBlock":
        _reject_unknown("forecast", raw, {"lfire_dir", "synthlik_dir", "horizon_steps"})
        for key in ("lfire_dir", "synthlik_dir"):
            if not raw.get(key):
                raise ConfigError(f"forecast.{key} is required")
        return cls(raw["lfire_dir"], raw["synthlik_dir"], int(raw.get("horizon_steps", 80)))


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelBlock
    replication: ReplicationBlock
    output: str
    summary: SummaryMapSpec | None = None
    method: MethodBlock | None = None
    data_dir: str | None = None
    compare: CompareBlock | None = None
    forecast: ForecastBlock | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        _reject_unknown(
            "config",
            raw,
            {"model", "summary", "method", "replication", "output", "data_dir",
             "compare", "forecast"},
        )
        for key in ("model", "replication", "output"):
            if key not in raw:
                raise ConfigError(f"config.{key} is required")
        return cls(
            model=ModelBlock.from_dict(raw["model"]),
            summary=_summary_from_dict(raw["summary"]) if "summary" in raw else None,
            method=MethodBlock.from_dict(raw["method"]) if "method" in raw else None,
            replication=ReplicationBlock.from_dict(raw["replication"]),
            output=str(raw["output"]),
            data_dir=raw.get("data_dir"),
            compare=CompareBlock.from_dict(raw["compare"]) if "compare" in raw else None,
            forecast=ForecastBlock.from_dict(raw["forecast"]) if "forecast" in raw else None,
            raw=raw,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
        return cls.from_dict(raw)

    def resolved_data_dir(self) -> Path:
        return Path(self.data_dir) if self.data_dir else Path(self.output) / "data"
