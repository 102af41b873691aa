"""Config-driven experiment runner.

Subcommands: `simulate` (write observed datasets), `infer` (run the
configured method over each dataset), `compare` (metric tables from
posterior artifacts), `forecast` (Lorenz prediction-gain experiment).
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, baselines, engine, metrics
from .config import ExperimentConfig
from .errors import ConfigError, LfireError, NumericalError
from .presets import load_preset
from .rng import Rng
from .simulators import (
    LorenzModelSpec,
    dataset_from_csv,
    dataset_to_csv,
    simulate_dataset,
    simulate_lorenz,
)

logger = logging.getLogger(__name__)


def _manifest(out_dir: Path, config: ExperimentConfig, seed: int, stage: str,
              files: list[str], timings: dict[str, float], extra: dict | None = None) -> None:
    record = {
        "version": __version__,
        "stage": stage,
        "master_seed": seed,
        "stream_scheme": "Rng(master_seed).substream(stage, dataset_index)",
        "config": config.raw,
        "files": files,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    if extra:
        record.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _data_path(data_dir: Path, index: int) -> Path:
    return data_dir / f"data_{index:04d}.csv"


def cmd_simulate(config: ExperimentConfig, seed: int, workers: int, out: Path) -> None:
    if not config.model.theta0:
        raise ConfigError("simulate needs model.theta0")
    data_dir = Path(config.data_dir) if config.data_dir else out / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    master = Rng(seed)
    files = []
    timings = {}
    for i in range(config.replication.n_datasets):
        t0 = time.perf_counter()
        x = simulate_dataset(config.model.spec, config.model.theta0, master.substream("data", i))
        path = _data_path(data_dir, i)
        dataset_to_csv(config.model.spec, x, path)
        files.append(str(path))
        timings[f"data_{i:04d}"] = time.perf_counter() - t0
    _manifest(data_dir, config, seed, "simulate", files, timings)
    logger.info("wrote %d datasets to %s", len(files), data_dir)


def _load_datasets(config: ExperimentConfig, out: Path):
    data_dir = Path(config.data_dir) if config.data_dir else out / "data"
    datasets = []
    for i in range(config.replication.n_datasets):
        path = _data_path(data_dir, i)
        if not path.exists():
            raise ConfigError(f"missing dataset file {path}; run `simulate` first")
        datasets.append(dataset_from_csv(config.model.spec, path))
    return datasets


def cmd_infer(config: ExperimentConfig, seed: int, workers: int, out: Path) -> None:
    if config.summary is None or config.method is None:
        raise ConfigError("infer needs summary and method blocks")
    method = config.method
    datasets = _load_datasets(config, out)
    out.mkdir(parents=True, exist_ok=True)
    master = Rng(seed)
    model = engine.Model(config.model.spec, config.summary)
    files = []
    timings = {}
    extra: dict = {}
    for i, x0 in enumerate(datasets):
        rng = master.substream("infer", i)
        t0 = time.perf_counter()
        if method.kind == "lfire":
            if method.grid:
                gp = engine.posterior_on_grid(
                    model, x0, method.grid_axes(), method.n_theta, method.n_m, rng,
                    workers=workers,
                )
                path = out / f"grid_{i:04d}.csv"
                engine.grid_to_csv(gp, model.param_names, path)
            else:
                ws = engine.importance_posterior(
                    model, x0, method.particles, method.n_theta, method.n_m, rng,
                    workers=workers,
                )
                path = out / f"particles_{i:04d}.csv"
                engine.sample_to_csv(ws, model.param_names, path)
                extra.setdefault("ess", {})[f"{i:04d}"] = ws.ess
        elif method.kind == "synthlik":
            if method.grid:
                gp = baselines.synthetic_posterior_on_grid(
                    model, x0, method.grid_axes(), method.n_theta, rng, workers=workers
                )
                path = out / f"grid_{i:04d}.csv"
                engine.grid_to_csv(gp, model.param_names, path)
            else:
                ws = baselines.synthetic_importance_posterior(
                    model, x0, method.particles, method.n_theta, rng, workers=workers
                )
                path = out / f"particles_{i:04d}.csv"
                engine.sample_to_csv(ws, model.param_names, path)
        else:  # abc
            res = baselines.rejection_abc(
                model, x0, method.n_sims, rng, rate=method.rate, threshold=method.threshold
            )
            path = out / f"particles_{i:04d}.csv"
            engine.sample_to_csv(res.to_weighted_sample(), model.param_names, path)
            extra.setdefault("abc", {})[f"{i:04d}"] = {
                "threshold": res.threshold,
                "acceptance_rate": res.acceptance_rate,
            }
        files.append(str(path))
        timings[f"dataset_{i:04d}"] = time.perf_counter() - t0
        logger.info("dataset %d/%d done in %.1fs", i + 1, len(datasets), timings[f"dataset_{i:04d}"])
    _manifest(out, config, seed, f"infer-{method.kind}", files, timings, extra)


def _load_artifacts(directory: Path, n: int):
    """Per-dataset posterior artifacts: GridPosterior or WeightedSample."""
    artifacts = []
    for i in range(n):
        grid_path = directory / f"grid_{i:04d}.csv"
        part_path = directory / f"particles_{i:04d}.csv"
        if grid_path.exists():
            artifacts.append(engine.grid_from_csv(grid_path))
        elif part_path.exists():
            artifacts.append(engine.sample_from_csv(part_path))
        else:
            raise ConfigError(f"no posterior artifact for dataset {i} in {directory}")
    return artifacts


def _truth_posterior(config: ExperimentConfig, x0, axes) -> engine.GridPosterior:
    kind = config.model.kind
    if kind == "gaussian":
        return baselines.gaussian_true_posterior(x0, config.model.spec, axes[0]).grid
    if kind == "arch":
        return baselines.arch_true_posterior(x0, axes)
    raise ConfigError(f"no exact posterior is available for model kind {kind!r}; "
                      "use compare.reference=abc")


def cmd_compare(config: ExperimentConfig, seed: int, workers: int, out: Path) -> None:
    if config.compare is None:
        raise ConfigError("compare needs a compare block")
    block = config.compare
    n = config.replication.n_datasets
    datasets = _load_datasets(config, out)
    out.mkdir(parents=True, exist_ok=True)
    per_method = {label: _load_artifacts(Path(d), n) for label, d in block.methods}
    labels = [label for label, _ in block.methods]
    files = []
    timings = {}
    t0 = time.perf_counter()

    if block.reference == "truth":
        for label in labels:
            if not all(isinstance(a, engine.GridPosterior) for a in per_method[label]):
                raise ConfigError("sKL comparison needs grid artifacts")
        axes0 = per_method[labels[0]][0].axes
        for label in labels:
            for a in per_method[label]:
                if len(a.axes) != len(axes0) or any(
                    not np.array_equal(x, y) for x, y in zip(a.axes, axes0)
                ):
                    raise ConfigError("artifacts must share one grid for comparison")
        skl_rows = []
        skl_values = {label: [] for label in labels}
        for i, x0 in enumerate(datasets):
            truth = _truth_posterior(config, x0, axes0)
            for label in labels:
                value = metrics.skl(per_method[label][i], truth)
                skl_values[label].append(value)
                skl_rows.append({"dataset": i, "method": label, "skl": value})
        path = out / "skl.csv"
        metrics.tidy_table_to_csv(skl_rows, ["dataset", "method", "skl"], path)
        files.append(str(path))
        summary_rows = [
            {"method": label, "mean_skl": float(np.mean(skl_values[label])), "n": n}
            for label in labels
        ]
        path = out / "summary.csv"
        metrics.tidy_table_to_csv(summary_rows, ["method", "mean_skl", "n"], path)
        files.append(str(path))
        if len(labels) == 2:
            deltas = np.array(skl_values[labels[0]]) - np.array(skl_values[labels[1]])
            delta_rows = [
                {"dataset": i, "delta_skl": float(dv)} for i, dv in enumerate(deltas)
            ]
            path = out / "delta_skl.csv"
            metrics.tidy_table_to_csv(delta_rows, ["dataset", "delta_skl"], path)
            files.append(str(path))
            if n >= 5:
                stat, p = metrics.wilcoxon_signed_rank(deltas)
                wil_rows = [{
                    "comparison": f"{labels[0]}-vs-{labels[1]}", "metric": "skl", "n": n,
                    "statistic": stat, "p_value": p,
                    "frac_negative": float(np.mean(deltas < 0)),
                }]
                path = out / "wilcoxon.csv"
                metrics.tidy_table_to_csv(
                    wil_rows,
                    ["comparison", "metric", "n", "statistic", "p_value", "frac_negative"],
                    path,
                )
                files.append(str(path))
            else:
                logger.info("skipping the signed-rank test: fewer than 5 datasets")
    else:  # reference == "abc"
        abc_arts = _load_artifacts(Path(block.abc_dir), n)
        param_names = config.model.spec.param_names
        moments = {"mean": 0, "std": 1}
        rel_rows = []
        rel = {}  # (label, param, moment) -> per-dataset values
        for i in range(n):
            ref = engine.posterior_moments(abc_arts[i])
            for label in labels:
                est = engine.posterior_moments(per_method[label][i])
                for mom_name, mom_idx in moments.items():
                    re_vec = metrics.relative_error(est[mom_idx], ref[mom_idx])
                    for pj, pname in enumerate(param_names):
                        rel.setdefault((label, pname, mom_name), []).append(float(re_vec[pj]))
                        rel_rows.append({
                            "dataset": i, "method": label, "param": pname,
                            "moment": mom_name, "rel_error": float(re_vec[pj]),
                        })
        path = out / "rel_error.csv"
        metrics.tidy_table_to_csv(
            rel_rows, ["dataset", "method", "param", "moment", "rel_error"], path
        )
        files.append(str(path))
        if len(labels) == 2:
            delta_rows = []
            wil_rows = []
            for pname in param_names:
                for mom_name in moments:
                    a = np.array(rel[(labels[0], pname, mom_name)])
                    b = np.array(rel[(labels[1], pname, mom_name)])
                    deltas = metrics.delta_rel_error(a, b)
                    for i, dv in enumerate(deltas):
                        delta_rows.append({
                            "dataset": i, "param": pname, "moment": mom_name,
                            "delta_rel_error": float(dv),
                        })
                    if n >= 5:
                        stat, p = metrics.wilcoxon_signed_rank(deltas)
                        wil_rows.append({
                            "comparison": f"{labels[0]}-vs-{labels[1]}",
                            "metric": f"rel_error[{pname},{mom_name}]", "n": n,
                            "statistic": stat, "p_value": p,
                            "frac_negative": float(np.mean(deltas < 0)),
                        })
            path = out / "delta_rel_error.csv"
            metrics.tidy_table_to_csv(
                delta_rows, ["dataset", "param", "moment", "delta_rel_error"], path
            )
            files.append(str(path))
            if wil_rows:
                path = out / "wilcoxon.csv"
                metrics.tidy_table_to_csv(
                    wil_rows,
                    ["comparison", "metric", "n", "statistic", "p_value", "frac_negative"],
                    path,
                )
                files.append(str(path))
    timings["compare"] = time.perf_counter() - t0
    _manifest(out, config, seed, "compare", files, timings)


def cmd_forecast(config: ExperimentConfig, seed: int, workers: int, out: Path) -> None:
    if config.forecast is None:
        raise ConfigError("forecast needs a forecast block")
    if not isinstance(config.model.spec, LorenzModelSpec):
        raise ConfigError("forecast is defined for the Lorenz model")
    if not config.model.theta0:
        raise ConfigError("forecast needs model.theta0")
    block = config.forecast
    n = config.replication.n_datasets
    spec = config.model.spec
    datasets = _load_datasets(config, out)
    lfire_arts = _load_artifacts(Path(block.lfire_dir), n)
    sl_arts = _load_artifacts(Path(block.synthlik_dir), n)
    out.mkdir(parents=True, exist_ok=True)
    master = Rng(seed)
    horizon = block.horizon_steps
    theta0 = np.asarray(config.model.theta0)
    zeta_rows = []
    zeta_matrix = np.empty((n, horizon))
    t_values = spec.dt * spec.T + spec.dt * np.arange(1, horizon + 1)
    t0 = time.perf_counter()
    for i, x0 in enumerate(datasets):
        init = np.asarray(x0)[:, -1]
        mean_lf, _ = engine.posterior_moments(lfire_arts[i])
        mean_sl, _ = engine.posterior_moments(sl_arts[i])
        rng = master.substream("forecast", i)
        runs = {}
        for key, theta in (("true", theta0), ("lfire", mean_lf), ("synthlik", mean_sl)):
            traj = simulate_lorenz(
                spec, theta[0], theta[1], rng, initial_state=init, n_steps=horizon
            )
            runs[key] = traj[:, 1:].T  # (horizon, K)
        zeta = metrics.forecast_gain(runs["true"], runs["lfire"], runs["synthlik"])
        zeta_matrix[i] = zeta
        for k in range(horizon):
            zeta_rows.append({
                "dataset": i, "step": k + 1, "t": float(t_values[k]), "zeta": float(zeta[k]),
            })
    files = []
    path = out / "zeta.csv"
    metrics.tidy_table_to_csv(zeta_rows, ["dataset", "step", "t", "zeta"], path)
    files.append(str(path))
    median, q25, q75 = metrics.quantile_band(zeta_matrix)
    band_rows = [
        {"step": k + 1, "t": float(t_values[k]), "q25": float(q25[k]),
         "median": float(median[k]), "q75": float(q75[k])}
        for k in range(horizon)
    ]
    path = out / "zeta_bands.csv"
    metrics.tidy_table_to_csv(band_rows, ["step", "t", "q25", "median", "q75"], path)
    files.append(str(path))
    _manifest(out, config, seed, "forecast", files, {"forecast": time.perf_counter() - t0})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lfire",
        description="Likelihood-free inference by ratio estimation: experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "write observed-data CSVs for the configured model"),
        ("infer", "run the configured method on every dataset"),
        ("compare", "emit sKL / relative-error / Wilcoxon tables"),
        ("forecast", "Lorenz forecast-gain experiment"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, help="YAML/JSON config file")
        p.add_argument("--preset", type=str, help="built-in config name")
        p.add_argument("--seed", type=int, help="override replication.master_seed")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--out", type=str, help="override the output directory")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "infer": cmd_infer,
    "compare": cmd_compare,
    "forecast": cmd_forecast,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if bool(args.config) == bool(args.preset):
            raise ConfigError("give exactly one of --config or --preset")
        if args.config:
            config = ExperimentConfig.from_file(args.config)
        else:
            config = load_preset(args.preset)
        if args.seed is not None:
            raw = copy.deepcopy(config.raw)
            raw["replication"]["master_seed"] = args.seed
            config = ExperimentConfig.from_dict(raw)
        seed = config.replication.master_seed
        out = Path(args.out) if args.out else Path(config.output)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        _COMMANDS[args.command](config, seed, args.workers, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except LfireError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
