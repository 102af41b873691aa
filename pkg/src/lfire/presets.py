"""Built-in experiment configurations.

`*-accept` presets are scaled-down benchmark reproductions sized for the
acceptance suite (minutes to a few hours); `*-paper` presets carry the
full published scale and are meant for nightly runs.  Presets that share
a model point at the same data directory so one `simulate` feeds every
method.
"""

from __future__ import annotations

import copy

from .config import ExperimentConfig
from .errors import ConfigError

_ARCH_MODEL = {"kind": "arch", "theta0": [0.3, 0.7], "spec": {"T": 100}}
_ARCH_GRID = [[-1.0, 1.0, 50], [0.0, 1.0, 50]]
_ARCH_SEED = 20260810
_LORENZ_MODEL = {"kind": "lorenz", "theta0": [2.0, 0.1], "spec": {}}
_LORENZ_SEED = 20260811

PRESETS: dict[str, dict] = {
    "gaussian-coeff": {
        "model": {"kind": "gaussian", "theta0": [2.3], "spec": {"sigma_o": 3.0}},
        "summary": {"base": "gaussian-poly", "poly_degree": 9},
        "method": {
            "kind": "lfire", "n_theta": 1000, "n_m": 1000,
            "grid": [[-5.0, 5.0, 21]],
        },
        "replication": {"n_datasets": 1, "master_seed": 20260801},
        "output": "out/gaussian/coeff",
        "data_dir": "out/gaussian/data",
    },
    "gaussian-fig2": {
        "model": {"kind": "gaussian", "theta0": [2.3], "spec": {"sigma_o": 3.0}},
        "summary": {"base": "gaussian-poly", "poly_degree": 9},
        "method": {
            "kind": "lfire", "n_theta": 1000, "n_m": 1000,
            "grid": [[-5.0, 5.0, 101]],
        },
        "replication": {"n_datasets": 1, "master_seed": 20260801},
        "output": "out/gaussian/lfire",
        "data_dir": "out/gaussian/data",
    },
    "gaussian-sl": {
        "model": {"kind": "gaussian", "theta0": [2.3], "spec": {"sigma_o": 3.0}},
        "summary": {"base": "gaussian-identity"},
        "method": {
            "kind": "synthlik", "n_theta": 1000,
            "grid": [[-5.0, 5.0, 101]],
        },
        "replication": {"n_datasets": 1, "master_seed": 20260801},
        "output": "out/gaussian/sl",
        "data_dir": "out/gaussian/data",
    },
    "arch-accept": {
        "model": _ARCH_MODEL,
        "summary": {"base": "arch"},
        "method": {
            "kind": "lfire", "n_theta": 1000, "n_m": 1000, "grid": _ARCH_GRID,
        },
        "replication": {"n_datasets": 20, "master_seed": _ARCH_SEED},
        "output": "out/arch/lfire",
        "data_dir": "out/arch/data",
    },
    "arch-accept-noise": {
        "model": _ARCH_MODEL,
        "summary": {"base": "arch", "noise_dims": 15},
        "method": {
            "kind": "lfire", "n_theta": 1000, "n_m": 1000, "grid": _ARCH_GRID,
        },
        "replication": {"n_datasets": 20, "master_seed": _ARCH_SEED},
        "output": "out/arch/lfire-noise",
        "data_dir": "out/arch/data",
    },
    "arch-accept-sl": {
        "model": _ARCH_MODEL,
        "summary": {"base": "arch-acorr"},
        "method": {"kind": "synthlik", "n_theta": 1000, "grid": _ARCH_GRID},
        "replication": {"n_datasets": 20, "master_seed": _ARCH_SEED},
        "output": "out/arch/sl",
        "data_dir": "out/arch/data",
    },
    "arch-abc": {
        "model": _ARCH_MODEL,
        "summary": {"base": "arch-raw-logvar"},
        "method": {"kind": "abc", "n_sims": 10000, "rate": 0.02},
        "replication": {"n_datasets": 20, "master_seed": _ARCH_SEED},
        "output": "out/arch/abc",
        "data_dir": "out/arch/data",
    },
    "arch-compare": {
        "model": _ARCH_MODEL,
        "replication": {"n_datasets": 20, "master_seed": _ARCH_SEED},
        "compare": {
            "methods": {"lfire": "out/arch/lfire", "synthlik": "out/arch/sl"},
            "reference": "truth",
        },
        "output": "out/arch/compare",
        "data_dir": "out/arch/data",
    },
    "arch-compare-noise": {
        "model": _ARCH_MODEL,
        "replication": {"n_datasets": 20, "master_seed": _ARCH_SEED},
        "compare": {
            "methods": {"lfire-noise": "out/arch/lfire-noise", "synthlik": "out/arch/sl"},
            "reference": "truth",
        },
        "output": "out/arch/compare-noise",
        "data_dir": "out/arch/data",
    },
    "ricker-demo": {
        "model": {"kind": "ricker", "theta0": [3.8, 0.3, 10.0], "spec": {"T": 50}},
        "summary": {"base": "ricker-wood", "pairwise": True},
        "method": {"kind": "lfire", "n_theta": 100, "n_m": 100, "particles": 1000},
        "replication": {"n_datasets": 1, "master_seed": 20260812},
        "output": "out/ricker/lfire",
        "data_dir": "out/ricker/data",
    },
    "lorenz-lfire": {
        "model": _LORENZ_MODEL,
        "summary": {"base": "lorenz-hakkarainen", "pairwise": True},
        "method": {"kind": "lfire", "n_theta": 100, "n_m": 100, "particles": 1000},
        "replication": {"n_datasets": 20, "master_seed": _LORENZ_SEED},
        "output": "out/lorenz/lfire",
        "data_dir": "out/lorenz/data",
    },
    "lorenz-sl": {
        "model": _LORENZ_MODEL,
        "summary": {"base": "lorenz-hakkarainen"},
        "method": {"kind": "synthlik", "n_theta": 100, "particles": 1000},
        "replication": {"n_datasets": 20, "master_seed": _LORENZ_SEED},
        "output": "out/lorenz/sl",
        "data_dir": "out/lorenz/data",
    },
    "lorenz-forecast": {
        "model": _LORENZ_MODEL,
        "replication": {"n_datasets": 20, "master_seed": _LORENZ_SEED},
        "forecast": {
            "lfire_dir": "out/lorenz/lfire",
            "synthlik_dir": "out/lorenz/sl",
            "horizon_steps": 80,
        },
        "output": "out/lorenz/forecast",
        "data_dir": "out/lorenz/data",
    },
}

# full published scale, for nightly runs rather than per-commit
PRESETS["arch-paper"] = copy.deepcopy(PRESETS["arch-accept"])
PRESETS["arch-paper"]["method"]["grid"] = [[-1.0, 1.0, 100], [0.0, 1.0, 100]]
PRESETS["arch-paper"]["replication"]["n_datasets"] = 100
PRESETS["arch-paper"]["output"] = "out/arch-paper/lfire"
PRESETS["arch-paper"]["data_dir"] = "out/arch-paper/data"

PRESETS["lorenz-paper"] = copy.deepcopy(PRESETS["lorenz-lfire"])
PRESETS["lorenz-paper"]["method"]["particles"] = 10000
PRESETS["lorenz-paper"]["replication"]["n_datasets"] = 250
PRESETS["lorenz-paper"]["output"] = "out/lorenz-paper/lfire"
PRESETS["lorenz-paper"]["data_dir"] = "out/lorenz-paper/data"


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(copy.deepcopy(PRESETS[name]))
