"""Experiment registry, worker dispatch, and result post-processing.

Every experiment is a list of independent grid points evaluated by a pure
function, so runs parallelize over a process pool and merge by point index;
identical (config, seed) pairs give byte-identical CSV bodies for any
worker count.  Partial results are flushed per point to a sidecar so
interrupted runs can resume.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import cluster as cluster_mod
from . import noise as noise_mod
from . import singlet as singlet_mod
from .config import ExperimentConfig
from .liouville import DensityMatrix, HilbertSpec, evolve_units, lindblad_generator
from .magnus import coefficients
from .pulses import repeat, sequence_from_tag
from .results import ResultTable
from . import operators as ops


# ---------------------------------------------------------------------------
# per-experiment point builders and evaluators
# ---------------------------------------------------------------------------


def _singlet_grid(config: ExperimentConfig) -> dict:
    grid = {
        "n_qubits": config.system["n_qubits"],
        "lambda_h": config.system["lambda_h"],
        "lambda_i": config.system["lambda_i"],
        "avg_tol": config.run["avg_tol"],
        "max_time": config.run["max_time"],
        "deltas": config.grid["deltas"],
    }
    for key in ("sequences", "t_p", "tau_bar", "nbar"):
        if key in config.schedule:
            grid[key] = config.schedule[key]
    if config.experiment == "fig6":
        grid["nbars"] = config.grid["nbars"]
        grid["n_seeds"] = config.schedule["n_seeds"]
        grid["seed"] = config.run["seed"]
    elif "nbars" in config.grid:
        grid["nbars"] = config.grid["nbars"]
    return grid


def _singlet_points(config: ExperimentConfig) -> list:
    return singlet_mod.figure_points(config.experiment, _singlet_grid(config))


def _singlet_assemble(config: ExperimentConfig, fragments: list) -> ResultTable:
    return singlet_mod.assemble_table(config.experiment, _singlet_grid(config), fragments)


def _cluster_grid(config: ExperimentConfig) -> dict:
    return {
        "n_qubits": config.system["n_qubits"],
        "gamma": config.system["gamma"],
        "sequence": config.schedule["sequence"],
        "include_unprotected": config.schedule["include_unprotected"],
        "deltas": config.grid["deltas"],
        "nbars": config.grid["nbars"],
        "max_time": config.run["max_time"],
    }


def _cluster_points(config: ExperimentConfig) -> list:
    return cluster_mod.figure_points("fig8", _cluster_grid(config))


def _cluster_assemble(config: ExperimentConfig, fragments: list) -> ResultTable:
    return cluster_mod.assemble_table("fig8", _cluster_grid(config), fragments)


TABLE1_COLUMNS = ["sequence", "N", "alpha1", "alpha2", "alpha3a", "alpha3b", "alpha3b_N2"]


def _table1_points(config: ExperimentConfig) -> list:
    return [
        {"experiment": "table1", "sequence": tag, "point_index": i}
        for i, tag in enumerate(config.schedule["sequences"])
    ]


def _table1_evaluate(point: dict) -> dict:
    seq = sequence_from_tag(point["sequence"], 1.0)
    c = coefficients(seq)
    return {
        "sequence": point["sequence"],
        "N": seq.n_pulses,
        "alpha1": c.alpha1,
        "alpha2": c.alpha2,
        "alpha3a": c.alpha3a,
        "alpha3b": c.alpha3b,
        "alpha3b_N2": c.alpha3b * seq.n_pulses**2,
    }


def _table1_assemble(config: ExperimentConfig, fragments: list) -> ResultTable:
    table = ResultTable(list(TABLE1_COLUMNS))
    for frag in fragments:
        table.append(frag)
    return table


DYNAMIC_COLUMNS = ["tau_bar", "sigma2", "tau_c", "infidelity", "stderr", "n_traj"]


def _dynamic_points(config: ExperimentConfig) -> list:
    points = []
    for i, tau_bar in enumerate(config.grid["tau_bars"]):
        points.append(
            {
                "experiment": "dynamic_noise_scaling",
                "point_index": i,
                "tau_bar": float(tau_bar),
                "n_qubits": config.system["n_qubits"],
                "lambda_h": config.system["lambda_h"],
                "lambda_i": config.system["lambda_i"],
                "sigma2": config.noise["sigma2"],
                "tau_c": config.noise["tau_c"],
                "sequence": config.schedule["sequence"],
                "n_traj": config.run["n_traj"],
                "seed": config.run["seed"],
                "max_time": config.run["max_time"],
                "average_window": config.run["average_window"],
            }
        )
    return points


def _dynamic_evaluate(point: dict) -> dict:
    spec = singlet_mod.SingletChannelSpec(
        point["n_qubits"], point["lambda_h"], point["lambda_i"]
    )
    chan = singlet_mod.build_pump_channel(spec)
    proj = singlet_mod.singlet_projector(point["n_qubits"])
    space = HilbertSpec(point["n_qubits"])

    horizon = point["max_time"]
    gen = lindblad_generator(chan)
    rho0 = DensityMatrix(space, ops.fully_polarized(point["n_qubits"]))
    step = 0.05 / point["lambda_i"]
    base = evolve_units(rho0, [(gen, step)], max(1, math.ceil(horizon / step)))
    p0 = float(np.trace(proj @ base.state.entries).real)

    probe = sequence_from_tag(point["sequence"], 1.0)
    seq = sequence_from_tag(point["sequence"], point["tau_bar"] * max(probe.n_pulses, 1))
    schedule = repeat(seq, max(1, math.ceil(horizon / seq.t_p)))
    ou = noise_mod.OUNoiseSpec(point["sigma2"], point["tau_c"])
    seed_seq = np.random.SeedSequence(point["seed"], spawn_key=(point["point_index"],))
    run_seed = int(seed_seq.generate_state(1)[0])
    res = noise_mod.monte_carlo_protected_run(
        chan,
        ou,
        schedule,
        n_traj=point["n_traj"],
        seed=run_seed,
        observable=proj,
        average_window=point["average_window"],
    )
    return {
        "tau_bar": point["tau_bar"],
        "sigma2": point["sigma2"],
        "tau_c": point["tau_c"],
        "infidelity": p0 - res.observable_mean,
        "stderr": res.observable_stderr,
        "n_traj": point["n_traj"],
    }


def _dynamic_assemble(config: ExperimentConfig, fragments: list) -> ResultTable:
    table = ResultTable(list(DYNAMIC_COLUMNS))
    for frag in fragments:
        table.append(frag)
    return table


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    experiment_id: str
    description: str
    anchor: str
    points: callable
    evaluate: callable
    assemble: callable


REGISTRY = {
    "table1": Experiment(
        "table1",
        "Magnus coefficients of the built-in pulse units",
        "table1",
        _table1_points,
        _table1_evaluate,
        _table1_assemble,
    ),
    "fig3a": Experiment(
        "fig3a",
        "singlet population vs detuning spread at fixed unit duration",
        "fig3a",
        _singlet_points,
        singlet_mod.evaluate_point,
        _singlet_assemble,
    ),
    "fig3b": Experiment(
        "fig3b",
        "singlet population vs detuning spread at fixed average pulse interval",
        "fig3b",
        _singlet_points,
        singlet_mod.evaluate_point,
        _singlet_assemble,
    ),
    "fig4": Experiment(
        "fig4",
        "singlet population over the (detuning, pulse density) plane",
        "fig4",
        _singlet_points,
        singlet_mod.evaluate_point,
        _singlet_assemble,
    ),
    "fig5": Experiment(
        "fig5",
        "Magnus convergence check: exact vs leading-order steady state",
        "fig5",
        _singlet_points,
        singlet_mod.evaluate_point,
        _singlet_assemble,
    ),
    "fig6": Experiment(
        "fig6",
        "singlet population under random pulse streams, seed-averaged",
        "fig6",
        _singlet_points,
        singlet_mod.evaluate_point,
        _singlet_assemble,
    ),
    "fig8": Experiment(
        "fig8",
        "linear-cluster fidelity under pulse protection (effective pumping model)",
        "fig8",
        _cluster_points,
        cluster_mod.evaluate_point,
        _cluster_assemble,
    ),
    "dynamic_noise_scaling": Experiment(
        "dynamic_noise_scaling",
        "steady-state infidelity vs pulse interval under dynamic Gaussian noise",
        "dynamic",
        _dynamic_points,
        _dynamic_evaluate,
        _dynamic_assemble,
    ),
}


def list_experiments() -> list:
    """Registry rows (id, description, anchor) in stable order."""
    return [
        (e.experiment_id, e.description, e.anchor)
        for _, e in sorted(REGISTRY.items())
    ]


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------


def _evaluate_job(job):
    experiment_id, point = job
    fragment = REGISTRY[experiment_id].evaluate(point)
    return point["point_index"], fragment


class ExperimentFailure(RuntimeError):
    """One or more grid points failed; details in the error log."""


def run_experiment(
    config: ExperimentConfig,
    output_dir,
    workers: int = None,
    resume: bool = False,
    make_figure: bool = True,
) -> dict:
    """Evaluate all grid points and write <id>.csv plus metadata and figure.

    Results are flushed per point to ``<id>.partial.jsonl``; with ``resume``
    previously completed points are reused.  Output rows are merged by grid
    index, so the CSV body depends only on (config, seed).
    """
    experiment = REGISTRY[config.experiment]
    os.makedirs(output_dir, exist_ok=True)
    csv_path = os.path.join(output_dir, f"{config.experiment}.csv")
    meta_path = os.path.join(output_dir, f"{config.experiment}.meta.json")
    partial_path = os.path.join(output_dir, f"{config.experiment}.partial.jsonl")
    errlog_path = os.path.join(output_dir, f"{config.experiment}.errors.log")
    figure_path = os.path.join(output_dir, f"{config.experiment}.png")

    points = experiment.points(config)
    done: dict[int, dict] = {}
    if resume and os.path.exists(partial_path):
        with open(partial_path) as fh:
            for line in fh:
                record = json.loads(line)
                done[record["point_index"]] = record["fragment"]
    pending = [p for p in points if p["point_index"] not in done]

    failures = []
    if workers is None:
        workers = config.run.get("workers") or os.cpu_count() or 1
    flush = open(partial_path, "a" if resume else "w")
    try:
        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(_evaluate_job, (config.experiment, p)): p
                    for p in pending
                }
                for future in as_completed(futures):
                    point = futures[future]
                    try:
                        index, fragment = future.result()
                    except Exception as exc:  # noqa: BLE001 - report and continue
                        failures.append((point["point_index"], repr(exc)))
                        continue
                    done[index] = fragment
                    flush.write(
                        json.dumps({"point_index": index, "fragment": fragment}) + "\n"
                    )
                    flush.flush()
        else:
            for point in pending:
                try:
                    index, fragment = _evaluate_job((config.experiment, point))
                except Exception as exc:  # noqa: BLE001 - report and continue
                    failures.append((point["point_index"], repr(exc)))
                    continue
                done[index] = fragment
                flush.write(json.dumps({"point_index": index, "fragment": fragment}) + "\n")
                flush.flush()
    finally:
        flush.close()

    if failures:
        failures.sort()
        with open(errlog_path, "w") as fh:
            for index, message in failures:
                point = points[index]
                fh.write(f"point {index} {json.dumps(point)}: {message}\n")
        raise ExperimentFailure(
            f"{len(failures)} grid point(s) failed; see {errlog_path}"
        )

    fragments = [done[p["point_index"]] for p in points]
    table = experiment.assemble(config, fragments)
    table.metadata = {
        "experiment": config.experiment,
        "config": json.loads(config.to_json()),
        "seed": config.run.get("seed", 0),
        "code_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "anchor": experiment.anchor,
    }
    if config.experiment == "fig8":
        table.metadata["note"] = (
            "effective stabilizer-pumping model; detuning spread in units of gamma"
        )
    table.write(csv_path, meta_path)
    os.unlink(partial_path)

    outputs = {"csv": csv_path, "meta": meta_path}
    if make_figure:
        from .plotting import render_figure

        try:
            render_figure(config.experiment, table, figure_path)
            outputs["figure"] = figure_path
        except Exception as exc:  # noqa: BLE001 - figures are best effort
            import warnings

            warnings.warn(f"figure rendering failed: {exc!r}", stacklevel=2)
    return outputs


# ---------------------------------------------------------------------------
# post-run analysis helpers
# ---------------------------------------------------------------------------


def contour_slope(deltas, nbars, values, level) -> float:
    """Slope d(log10 nbar)/d(log10 delta) of a level line of values(delta, nbar).

    For each detuning column the crossing density is found by linear
    interpolation in log10(nbar); the slope is a least-squares fit through
    the crossings.
    """
    deltas = np.asarray(deltas, dtype=float)
    nbars = np.asarray(nbars, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (deltas.size, nbars.size):
        raise ValueError("values must have shape (len(deltas), len(nbars))")
    log_n = np.log10(nbars)
    xs, ys = [], []
    for i, delta in enumerate(deltas):
        row = values[i]
        for j in range(len(nbars) - 1):
            lo, hi = row[j], row[j + 1]
            if (lo - level) * (hi - level) <= 0 and lo != hi:
                frac = (level - lo) / (hi - lo)
                xs.append(np.log10(delta))
                ys.append(log_n[j] + frac * (log_n[j + 1] - log_n[j]))
                break
    if len(xs) < 3:
        raise ValueError(f"level {level} crossed in fewer than 3 detuning columns")
    return float(np.polyfit(xs, ys, 1)[0])


def loglog_exponents(deltas, tau_bars, deficits) -> tuple:
    """Exponents (a, b) of deficit ~ delta^a * tau_bar^b by least squares."""
    deltas = np.asarray(deltas, dtype=float)
    tau_bars = np.asarray(tau_bars, dtype=float)
    deficits = np.asarray(deficits, dtype=float)
    if deficits.shape != (deltas.size, tau_bars.size):
        raise ValueError("deficits must have shape (len(deltas), len(tau_bars))")
    if np.any(deficits <= 0):
        raise ValueError("deficits must be positive for a log-log fit")
    rows = []
    rhs = []
    for i, d in enumerate(deltas):
        for j, tb in enumerate(tau_bars):
            rows.append([1.0, np.log(d), np.log(tb)])
            rhs.append(np.log(deficits[i, j]))
    sol, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(rhs), rcond=None)
    return float(sol[1]), float(sol[2])
