"""Dissipative preparation of linear cluster states by stabilizer pumping.

Each jump operator moves population into the +1 eigenspace of one stabilizer
generator, L_k = sqrt(gamma) * A_k * (I - S_k)/2 with A_k the single-site
flip that anticommutes with S_k, so the joint +1 eigenstate (the cluster
state) is dark and all pumps acting together make it the unique steady
state.  This is an effective qubit-level model of the optical
stabilizer-pumping mechanism: it keeps the fixed-point structure and the
pulse-toggling physics but makes no claim about absolute rates of any
specific atomic realization, so results are reported in units of the pump
rate gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import operators as ops
from .liouville import (
    ConvergenceError,
    DensityMatrix,
    HilbertSpec,
    LindbladChannel,
    evolve_units,
    lindblad_generator,
)
from .pulses import Schedule, repeat, sequence_from_tag
from .results import ResultTable
from .singlet import (
    DEFAULT_STATIONARITY_TOL,
    InhomogeneousNoiseSpec,
    dephasing_generator,
    unit_segments,
)

DEFAULT_HORIZON_FACTOR = 50.0


def _commute(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.max(np.abs(a @ b - b @ a)) < 1e-12)


@dataclass(frozen=True)
class StabilizerSpec:
    """Mutually commuting Pauli strings that jointly fix a target state."""

    n_qubits: int
    stabilizers: tuple

    def __post_init__(self):
        object.__setattr__(self, "stabilizers", tuple(self.stabilizers))
        for s in self.stabilizers:
            if len(s) != self.n_qubits:
                raise ValueError(f"stabilizer {s!r} does not match {self.n_qubits} qubits")
            if any(letter not in "IXYZ" for letter in s):
                raise ValueError(f"invalid Pauli letter in {s!r}")
        mats = self.matrices()
        for i, a in enumerate(mats):
            if np.max(np.abs(a @ a - np.eye(a.shape[0]))) > 1e-12:
                raise ValueError(f"stabilizer {self.stabilizers[i]!r} does not square to identity")
            for b in mats[i + 1 :]:
                if not _commute(a, b):
                    raise ValueError("stabilizers must mutually commute")

    def matrices(self) -> list:
        return [ops.pauli_string(s) for s in self.stabilizers]

    def joint_projector(self) -> np.ndarray:
        d = 2**self.n_qubits
        proj = np.eye(d, dtype=complex)
        for s in self.matrices():
            proj = proj @ (np.eye(d) + s) / 2.0
        return proj


@dataclass(frozen=True)
class PumpSpec:
    """Pump rate and the flip site chosen for each stabilizer."""

    gamma: float
    flip_sites: tuple

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("pump rate must be positive")
        object.__setattr__(self, "flip_sites", tuple(int(s) for s in self.flip_sites))


def linear_cluster_stabilizers(n_qubits: int) -> StabilizerSpec:
    """Generators X1 Z2, Z_(k-1) X_k Z_(k+1), Z_(n-1) X_n of the linear cluster."""
    if n_qubits < 2:
        raise ValueError("need at least two qubits")
    strings = []
    for k in range(n_qubits):
        letters = ["I"] * n_qubits
        letters[k] = "X"
        if k > 0:
            letters[k - 1] = "Z"
        if k < n_qubits - 1:
            letters[k + 1] = "Z"
        strings.append("".join(letters))
    return StabilizerSpec(n_qubits, tuple(strings))


def default_pump(spec: StabilizerSpec, gamma: float = 1.0) -> PumpSpec:
    """Flip each stabilizer at its X site (lowest index if several)."""
    sites = []
    for s in spec.stabilizers:
        x_positions = [i for i, letter in enumerate(s) if letter in "XY"]
        if not x_positions:
            raise ValueError(f"stabilizer {s!r} has no X site to flip at")
        sites.append(x_positions[0])
    return PumpSpec(gamma, tuple(sites))


def cluster_state(n_qubits: int) -> DensityMatrix:
    """The unique joint +1 eigenstate of the linear-cluster generators."""
    spec = linear_cluster_stabilizers(n_qubits)
    proj = spec.joint_projector()
    rank = np.trace(proj).real
    if abs(rank - 1.0) > 1e-9:
        raise ValueError(f"stabilizer set does not fix a unique state (rank {rank})")
    return DensityMatrix(HilbertSpec(n_qubits), proj / rank)


def pump_channel(
    spec: StabilizerSpec, pump: PumpSpec, parity: str = "even"
) -> LindbladChannel:
    """Stabilizer-pumping jumps; odd parity conjugates by the global flip."""
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    if len(pump.flip_sites) != len(spec.stabilizers):
        raise ValueError("need one flip site per stabilizer")
    n = spec.n_qubits
    d = 2**n
    jumps = []
    for s_mat, site in zip(spec.matrices(), pump.flip_sites):
        flip = ops.single_site(ops.SIGMA_Z, site, n)
        if np.max(np.abs(flip @ s_mat + s_mat @ flip)) > 1e-12:
            raise ValueError(
                f"flip operator at site {site} does not anticommute with its stabilizer"
            )
        jumps.append(np.sqrt(pump.gamma) * flip @ (np.eye(d) - s_mat) / 2.0)
    if parity == "odd":
        g = ops.global_flip(n)
        jumps = [g @ L @ g for L in jumps]
    return LindbladChannel(HilbertSpec(n), np.zeros((d, d)), tuple(jumps))


@dataclass(frozen=True)
class ClusterRunResult:
    fidelity: float
    state: DensityMatrix
    diagnostics: dict


def run_protected_cluster(
    spec: StabilizerSpec,
    pump: PumpSpec,
    noise: InhomogeneousNoiseSpec,
    schedule: Schedule,
    max_time: Optional[float] = None,
    stationarity_tol: float = DEFAULT_STATIONARITY_TOL,
) -> ClusterRunResult:
    """Toggling-frame evolution under pump +- dephasing to the horizon state."""
    if schedule.kind != "periodic":
        raise ValueError("cluster runs use periodic schedules")
    if noise.n_qubits != spec.n_qubits:
        raise ValueError("noise profile length must match the register size")
    l_pump = lindblad_generator(pump_channel(spec, pump, "even"))
    l_n = dephasing_generator(noise)
    g_plus, g_minus = l_pump + l_n, l_pump - l_n
    space = HilbertSpec(spec.n_qubits)
    rho0 = DensityMatrix(space, ops.fully_polarized(spec.n_qubits))
    if max_time is None:
        max_time = DEFAULT_HORIZON_FACTOR / pump.gamma

    segments = unit_segments(schedule.unit, g_plus, g_minus)
    n_units = max(1, min(math.ceil(max_time / schedule.unit.t_p), schedule.repetitions))
    res = evolve_units(rho0, segments, n_units)
    velocity = res.trace_distance / schedule.unit.t_p / pump.gamma
    if velocity > stationarity_tol:
        raise ConvergenceError(
            f"state still moving at the horizon (rate {velocity:.3e} per 1/gamma)",
            res.trace_distance,
            n_units,
        )
    target = cluster_state(spec.n_qubits)
    fidelity = float(np.trace(target.entries @ res.state.entries).real)
    return ClusterRunResult(
        min(max(fidelity, 0.0), 1.0),
        res.state,
        {
            "units_to_converge": res.units,
            "unit_trace_distance": res.trace_distance,
            "trace_drift": res.trace_drift,
        },
    )


def run_sequential_cluster(
    spec: StabilizerSpec,
    pump: PumpSpec,
    noise: InhomogeneousNoiseSpec,
    dwell: float,
    cycles: int,
) -> ClusterRunResult:
    """Pump the stabilizers one by one (comparison mode, not the default).

    Each cycle applies every single-stabilizer channel for ``dwell`` time in
    turn; the noise stays on throughout.
    """
    n = spec.n_qubits
    space = HilbertSpec(n)
    l_n = dephasing_generator(noise)
    segments = []
    for k in range(len(spec.stabilizers)):
        single = StabilizerSpec(n, (spec.stabilizers[k],))
        single_pump = PumpSpec(pump.gamma, (pump.flip_sites[k],))
        gen = lindblad_generator(pump_channel(single, single_pump, "even")) + l_n
        segments.append((gen, dwell))
    rho0 = DensityMatrix(space, ops.fully_polarized(n))
    res = evolve_units(rho0, segments, cycles)
    target = cluster_state(n)
    fidelity = float(np.trace(target.entries @ res.state.entries).real)
    return ClusterRunResult(
        min(max(fidelity, 0.0), 1.0),
        res.state,
        {"units_to_converge": res.units, "trace_drift": res.trace_drift},
    )


# ---------------------------------------------------------------------------
# figure sweep
# ---------------------------------------------------------------------------

RESULT_COLUMNS = ["delta", "nbar", "sequence", "fidelity", "units_to_converge"]


def default_grid(experiment_id: str) -> dict:
    if experiment_id != "fig8":
        raise ValueError(f"unknown cluster experiment {experiment_id!r}")
    return {
        "n_qubits": 4,
        "gamma": 1.0,
        "sequence": "udd3",
        "deltas": [0.125, 0.25, 0.5, 1.0, 2.0],
        "nbars": [3.0, 10.0, 30.0, 100.0, 300.0],
        "include_unprotected": True,
        "max_time": None,
    }


def figure_points(experiment_id: str, grid: dict) -> list:
    if experiment_id != "fig8":
        raise ValueError(f"unknown cluster experiment {experiment_id!r}")
    points = []
    base = {
        "experiment": experiment_id,
        "n_qubits": grid["n_qubits"],
        "gamma": grid["gamma"],
        "max_time": grid.get("max_time"),
    }
    for delta in grid["deltas"]:
        for nbar in grid["nbars"]:
            points.append(
                dict(base, sequence=grid["sequence"], delta=float(delta), nbar=float(nbar))
            )
        if grid.get("include_unprotected", True):
            points.append(dict(base, sequence="none", delta=float(delta), nbar=0.0))
    for index, point in enumerate(points):
        point["point_index"] = index
    return points


def evaluate_point(point: dict) -> dict:
    n = point["n_qubits"]
    spec = linear_cluster_stabilizers(n)
    pump = default_pump(spec, point["gamma"])
    noise = InhomogeneousNoiseSpec.linear(n, point["delta"])
    max_time = point.get("max_time") or DEFAULT_HORIZON_FACTOR / point["gamma"]
    if point["sequence"] == "none":
        seq = sequence_from_tag("none", 0.1 / point["gamma"])
    else:
        probe = sequence_from_tag(point["sequence"], 1.0)
        seq = sequence_from_tag(point["sequence"], probe.n_pulses / point["nbar"])
    schedule = repeat(seq, max(1, math.ceil(max_time / seq.t_p)))
    result = run_protected_cluster(spec, pump, noise, schedule, max_time=max_time)
    return {
        "delta": point["delta"],
        "nbar": point["nbar"],
        "sequence": point["sequence"],
        "fidelity": result.fidelity,
        "units_to_converge": result.diagnostics["units_to_converge"],
    }


def assemble_table(experiment_id: str, grid: dict, fragments: list) -> ResultTable:
    table = ResultTable(list(RESULT_COLUMNS))
    for frag in fragments:
        table.append({c: frag.get(c) for c in RESULT_COLUMNS})
    return table


def sweep_figure(experiment_id: str, grid: dict = None, map_fn=map) -> ResultTable:
    merged = default_grid(experiment_id)
    merged.update(grid or {})
    points = figure_points(experiment_id, merged)
    fragments = list(map_fn(evaluate_point, points))
    table = assemble_table(experiment_id, merged, fragments)
    table.metadata = {
        "experiment": experiment_id,
        "grid": {k: (list(v) if isinstance(v, (list, tuple)) else v) for k, v in merged.items()},
        "note": "detuning spread delta is swept in units of the pump rate gamma",
    }
    return table
