"""Cost-landscape scans, the shot-based measurement protocol, and optimization.

A "point" is one (beta, gamma) grid cell evaluated either exactly (ideal mode)
or through the full measurement pipeline (sampled mode): prepare the ansatz
with each readout flip pattern, record mean photon counts, estimate the
calibration empirically from basis-state preparations taken with the same shot
budget, reconstruct populations, and score them against the diagonal cost.

Reproducibility contract: every (grid point, realization) derives its random
substreams from ``SeedSequence(master_seed, spawn_key=(point_index,
realization_index))``, so results are independent of evaluation order and
thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import count
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from ._bitstrings import all_bitstrings
from .circuits import (
    Circuit,
    QaoaParams,
    append_flips,
    build_ansatz,
    calibration_circuits,
    flip_patterns,
    simulate,
)
from .graph_problem import Graph, diagonal_costs
from .noise import NoiseConfig, perturb_calibration
from .readout import CalibrationTable, measure_circuit
from .reconstruction import reconstruct
from .statevector import expectation_diagonal, populations

DEFAULT_BETA_RANGE = (0.1 * math.pi, 0.6 * math.pi, 0.025 * math.pi)
DEFAULT_GAMMA_RANGE = (0.1 * math.pi, 2.1 * math.pi, 0.05 * math.pi)
DEFAULT_SHOTS = 300_000
DEFAULT_REALIZATIONS = 4
DEFAULT_CHECKPOINT_EVERY = 1000
DEFAULT_SEED = 1

CSV_HEADER = "beta,gamma,realization,F_measured,F_ideal,abs_diff,norm,pops"


def grid_axis(range_spec: Sequence[float]) -> np.ndarray:
    """Inclusive arithmetic grid start:stop:step, robust to float endpoint error."""
    start, stop, step = (float(v) for v in range_spec)
    if not all(map(math.isfinite, (start, stop, step))):
        raise ValueError("grid range must be finite")
    if step <= 0:
        raise ValueError("grid step must be positive")
    if stop < start:
        raise ValueError("grid stop must not precede start")
    num = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(num)


@dataclass(frozen=True)
class ScanConfig:
    """Everything a scan needs; immutable so it can be echoed verbatim into manifests."""

    graph: Graph
    p: int = 1
    beta_range: tuple[float, float, float] = DEFAULT_BETA_RANGE
    gamma_range: tuple[float, float, float] = DEFAULT_GAMMA_RANGE
    shots: int = DEFAULT_SHOTS
    realizations: int = DEFAULT_REALIZATIONS
    mode: str = "ideal"
    noise: NoiseConfig | None = None
    calibration: CalibrationTable | None = None
    master_seed: int = DEFAULT_SEED
    checkpoint_every: int = DEFAULT_CHECKPOINT_EVERY
    exact_calibration: bool = False

    def __post_init__(self):
        if self.mode not in ("ideal", "sampled"):
            raise ValueError(f"mode must be 'ideal' or 'sampled', got {self.mode!r}")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.shots < 1 or self.realizations < 1 or self.checkpoint_every < 1:
            raise ValueError("shots, realizations and checkpoint_every must be positive")
        object.__setattr__(self, "beta_range", tuple(float(v) for v in self.beta_range))
        object.__setattr__(self, "gamma_range", tuple(float(v) for v in self.gamma_range))
        grid_axis(self.beta_range)
        grid_axis(self.gamma_range)
        if self.mode == "sampled":
            if self.calibration is None:
                raise ValueError("sampled mode requires a calibration table")
            if self.calibration.num_qubits != self.graph.num_vertices:
                raise ValueError(
                    f"calibration covers {self.calibration.num_qubits} qubit(s) "
                    f"but the graph has {self.graph.num_vertices} vertices"
                )
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def betas(self) -> np.ndarray:
        return grid_axis(self.beta_range)

    def gammas(self) -> np.ndarray:
        return grid_axis(self.gamma_range)


@dataclass(frozen=True, eq=False)
class PointRecord:
    """One evaluated grid point (one realization). All layers share (beta, gamma) in scans."""

    params: QaoaParams
    realization: int
    pops: np.ndarray
    norm: float
    F_measured: float
    F_ideal: float
    abs_diff: float
    valid: bool = True
    error: str | None = None

    def __post_init__(self):
        pops = np.array(self.pops, dtype=float)
        pops.setflags(write=False)
        object.__setattr__(self, "pops", pops)

    @property
    def beta(self) -> float:
        return self.params.betas[0]

    @property
    def gamma(self) -> float:
        return self.params.gammas[0]


@dataclass(frozen=True, eq=False)
class LandscapeGrid:
    """Scan output: points ordered beta-major, then gamma, then realization."""

    points: tuple[PointRecord, ...]
    betas: np.ndarray
    gammas: np.ndarray
    realizations: int
    cost_range: float


def closed_form_cost_k2(beta: float, gamma: float) -> float:
    """Exact single-layer expected cost for the two-vertex unit-weight graph."""
    return -0.5 + 0.5 * math.sin(4.0 * beta) * math.sin(gamma)


def ideal_cost(graph: Graph, params: QaoaParams) -> float:
    """Expected cost of the exact ansatz state."""
    state = simulate(build_ansatz(graph, params))
    return expectation_diagonal(state, diagonal_costs(graph))


def measure_point(
    config: ScanConfig,
    params: QaoaParams,
    realization_index: int = 0,
    point_index: int = 0,
) -> PointRecord:
    """Run the full measurement protocol at one parameter point.

    Per sub-circuit seeds are spawned from (master_seed, point_index,
    realization_index). The calibration used for reconstruction is estimated
    empirically from basis-state preparations unless ``exact_calibration`` is
    set, in which case the true generating table (including any
    per-realization perturbation) is used to isolate shot noise.

    A degenerate empirical calibration makes the point invalid rather than
    raising, so long scans survive unlucky draws.
    """
    if config.mode != "sampled":
        raise ValueError("measure_point requires mode='sampled'")
    graph = config.graph
    diag = diagonal_costs(graph)
    true_cal, streams = _point_streams(config, realization_index, point_index)
    cal_records, flip_records = _measure_subcircuits(config, params, true_cal, streams)
    empirical = np.array([record.running_mean for record in cal_records])
    means = np.array([record.running_mean for record in flip_records])
    F_ideal = ideal_cost(graph, params)
    size = diag.size
    try:
        table = true_cal if config.exact_calibration else CalibrationTable(empirical)
        estimate = reconstruct(table, means)
    except ValueError as exc:
        nans = np.full(size, math.nan)
        return PointRecord(
            params=params,
            realization=realization_index,
            pops=nans,
            norm=math.nan,
            F_measured=math.nan,
            F_ideal=F_ideal,
            abs_diff=math.nan,
            valid=False,
            error=str(exc),
        )
    F_measured = float(np.dot(estimate.pops, diag))
    return PointRecord(
        params=params,
        realization=realization_index,
        pops=estimate.pops,
        norm=estimate.norm,
        F_measured=F_measured,
        F_ideal=F_ideal,
        abs_diff=abs(F_measured - F_ideal),
        valid=True,
    )


def run_scan(config: ScanConfig, threads: int = 1) -> LandscapeGrid:
    """Evaluate the full (beta, gamma) grid.

    Ideal mode ignores shot settings and collapses to one exact evaluation per
    point. Output ordering and content are independent of ``threads``.
    """
    betas = config.betas()
    gammas = config.gammas()
    realizations = 1 if config.mode == "ideal" else config.realizations
    diag = diagonal_costs(config.graph)
    cost_range = float(diag.max() - diag.min())

    tasks = []
    for bi, beta in enumerate(betas):
        for gi, gamma in enumerate(gammas):
            point_index = bi * gammas.size + gi
            for realization in range(realizations):
                tasks.append((point_index, float(beta), float(gamma), realization))

    def evaluate(task):
        point_index, beta, gamma, realization = task
        params = QaoaParams((beta,) * config.p, (gamma,) * config.p)
        if config.mode == "ideal":
            return _ideal_point(config.graph, params, diag)
        return measure_point(config, params, realization, point_index)

    if threads <= 1:
        points = [evaluate(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(evaluate, tasks))
    return LandscapeGrid(tuple(points), betas, gammas, realizations, cost_range)


def landscape_error(grid: LandscapeGrid) -> float:
    """Mean |realization-averaged F_measured - F_ideal| over the grid, relative to the cost range.

    Realizations are averaged at the cost level before taking the absolute
    difference. Points with no valid realization are skipped; a graph with a
    flat cost spectrum (zero range) reports zero error.
    """
    realizations = grid.realizations
    diffs = []
    for i in range(0, len(grid.points), realizations):
        chunk = grid.points[i : i + realizations]
        valid = [pt for pt in chunk if pt.valid]
        if not valid:
            continue
        f_avg = sum(pt.F_measured for pt in valid) / len(valid)
        diffs.append(abs(f_avg - chunk[0].F_ideal))
    if not diffs:
        raise ValueError("no valid points in grid")
    if grid.cost_range == 0.0:
        return 0.0
    return float(np.mean(diffs) / grid.cost_range)


@dataclass(frozen=True)
class OptimizeResult:
    best_params: QaoaParams
    best_F: float
    trace: tuple[tuple[tuple[float, ...], tuple[float, ...], float], ...]

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def optimize(config: ScanConfig, strategy: str = "grid_then_refine", refine_tolerance: float = 1e-3) -> OptimizeResult:
    """Minimize the (measured or ideal) cost over the 2p angle coordinates.

    Both strategies start from the best point of the configured coarse grid
    (all layers sharing each grid (beta, gamma); ties broken toward the
    lexicographically smallest pair). ``grid_then_refine`` then runs
    coordinate descent over all 2p coordinates, halving the steps until they
    drop below ``refine_tolerance`` radians; ``simplex`` hands the best grid
    point to Nelder-Mead. Sampled-mode evaluations consume consecutive point
    indices of the master seed, so a given call sequence is reproducible.
    """
    if strategy not in ("grid_then_refine", "simplex"):
        raise ValueError(f"unknown strategy {strategy!r}")
    p = config.p
    trace: list[tuple[tuple[float, ...], tuple[float, ...], float]] = []
    eval_index = count()

    def evaluate(betas: tuple[float, ...], gammas: tuple[float, ...]) -> float:
        params = QaoaParams(betas, gammas)
        if config.mode == "ideal":
            value = ideal_cost(config.graph, params)
        else:
            record = measure_point(config, params, 0, point_index=next(eval_index))
            if not record.valid:
                raise ValueError(f"measurement failed during optimization: {record.error}")
            value = record.F_measured
        trace.append((betas, gammas, value))
        return value

    best_value = math.inf
    best_pair = None
    for beta in config.betas():
        for gamma in config.gammas():
            value = evaluate((float(beta),) * p, (float(gamma),) * p)
            if value < best_value:
                best_value = value
                best_pair = (float(beta), float(gamma))
    x = np.array([best_pair[0]] * p + [best_pair[1]] * p)

    if strategy == "simplex":
        def objective(vec: np.ndarray) -> float:
            return evaluate(tuple(vec[:p]), tuple(vec[p:]))

        minimize(
            objective,
            x,
            method="Nelder-Mead",
            options={"xatol": 1e-7, "fatol": 1e-12, "maxfev": 20_000},
        )
        best = min(trace, key=lambda entry: (entry[2], entry[0], entry[1]))
        return OptimizeResult(QaoaParams(best[0], best[1]), best[2], tuple(trace))

    base_steps = np.array([config.beta_range[2]] * p + [config.gamma_range[2]] * p)
    scale = 1.0
    value = best_value
    grid_evals = len(trace)
    # A shot-noise objective can keep producing spurious "improvements"
    # forever, so the descent gets a hard evaluation budget on top of the
    # step-size stopping rule. The budget is far above anything an ideal
    # objective needs.
    budget = 10_000
    while (base_steps * scale).max() >= refine_tolerance:
        while len(trace) - grid_evals < budget:
            improved = False
            for coord in range(2 * p):
                step = base_steps[coord] * scale
                candidates = []
                for delta in (-step, +step):
                    trial = x.copy()
                    trial[coord] += delta
                    trial_value = evaluate(tuple(trial[:p]), tuple(trial[p:]))
                    candidates.append((trial_value, tuple(trial)))
                candidates.sort(key=lambda item: (item[0], item[1]))
                if candidates[0][0] < value:
                    value = candidates[0][0]
                    x = np.array(candidates[0][1])
                    improved = True
            if not improved:
                break
        scale *= 0.5
    return OptimizeResult(QaoaParams(tuple(x[:p]), tuple(x[p:])), value, tuple(trace))


@dataclass(frozen=True, eq=False)
class ConvergenceProfile:
    """Population and norm estimates at every checkpoint, aggregated over realizations."""

    checkpoint_shots: np.ndarray
    mean_pops: np.ndarray
    std_pops: np.ndarray
    mean_norm: np.ndarray
    std_norm: np.ndarray
    realizations: int
    num_qubits: int


def convergence_profile(config: ScanConfig, params: QaoaParams, point_index: int = 0) -> ConvergenceProfile:
    """Reconstruct populations from the running means at every checkpoint.

    Uses exactly the same substreams as :func:`measure_point`, so when
    ``shots`` is a multiple of ``checkpoint_every`` the final checkpoint
    reproduces that point's estimate. Standard deviations are sample standard
    deviations across realizations (NaN when fewer than two are valid).
    """
    if config.mode != "sampled":
        raise ValueError("convergence_profile requires mode='sampled'")
    if config.shots < config.checkpoint_every:
        raise ValueError("need at least one full checkpoint block")
    size = 1 << config.graph.num_vertices
    num_checkpoints = config.shots // config.checkpoint_every
    pops_runs = np.full((config.realizations, num_checkpoints, size), math.nan)
    norm_runs = np.full((config.realizations, num_checkpoints), math.nan)
    for realization in range(config.realizations):
        true_cal, streams = _point_streams(config, realization, point_index)
        cal_records, flip_records = _measure_subcircuits(config, params, true_cal, streams)
        for k in range(num_checkpoints):
            empirical = np.array([record.checkpoints[k][1] for record in cal_records])
            means = np.array([record.checkpoints[k][1] for record in flip_records])
            try:
                table = true_cal if config.exact_calibration else CalibrationTable(empirical)
                estimate = reconstruct(table, means)
            except ValueError:
                continue
            pops_runs[realization, k] = estimate.pops
            norm_runs[realization, k] = estimate.norm

    mean_pops = np.full((num_checkpoints, size), math.nan)
    std_pops = np.full((num_checkpoints, size), math.nan)
    mean_norm = np.full(num_checkpoints, math.nan)
    std_norm = np.full(num_checkpoints, math.nan)
    for k in range(num_checkpoints):
        good = ~np.isnan(norm_runs[:, k])
        if not good.any():
            continue
        mean_pops[k] = pops_runs[good, k].mean(axis=0)
        mean_norm[k] = norm_runs[good, k].mean()
        if good.sum() >= 2:
            std_pops[k] = pops_runs[good, k].std(axis=0, ddof=1)
            std_norm[k] = norm_runs[good, k].std(ddof=1)
    shots_axis = config.checkpoint_every * np.arange(1, num_checkpoints + 1)
    return ConvergenceProfile(
        checkpoint_shots=shots_axis,
        mean_pops=mean_pops,
        std_pops=std_pops,
        mean_norm=mean_norm,
        std_norm=std_norm,
        realizations=config.realizations,
        num_qubits=config.graph.num_vertices,
    )


def write_landscape_csv(grid: LandscapeGrid, destination) -> None:
    """CSV with one row per (point, realization); 10 significant digits, pops joined with '|'."""
    lines = [CSV_HEADER]
    for pt in grid.points:
        pops_text = "|".join(format(v, ".10g") for v in pt.pops)
        lines.append(
            ",".join(
                (
                    format(pt.beta, ".10g"),
                    format(pt.gamma, ".10g"),
                    str(pt.realization),
                    format(pt.F_measured, ".10g"),
                    format(pt.F_ideal, ".10g"),
                    format(pt.abs_diff, ".10g"),
                    format(pt.norm, ".10g"),
                    pops_text,
                )
            )
        )
    _write_text(destination, "\n".join(lines) + "\n")


def write_convergence_csv(profile: ConvergenceProfile, destination) -> None:
    labels = all_bitstrings(profile.num_qubits)
    header = (
        ["shots"]
        + [f"p{label}" for label in labels]
        + ["norm"]
        + [f"std_p{label}" for label in labels]
        + ["std_norm"]
    )
    lines = [",".join(header)]
    for k, shots in enumerate(profile.checkpoint_shots):
        row = [str(int(shots))]
        row += [format(v, ".10g") for v in profile.mean_pops[k]]
        row.append(format(profile.mean_norm[k], ".10g"))
        row += [format(v, ".10g") for v in profile.std_pops[k]]
        row.append(format(profile.std_norm[k], ".10g"))
        lines.append(",".join(row))
    _write_text(destination, "\n".join(lines) + "\n")


def scan_summary(grid: LandscapeGrid, config: ScanConfig) -> dict:
    """Deterministic summary (JSON-friendly) of a finished scan."""
    invalid = sum(1 for pt in grid.points if not pt.valid)
    try:
        error = landscape_error(grid)
    except ValueError:
        error = None
    return {
        "landscape_error": error,
        "num_beta": int(grid.betas.size),
        "num_gamma": int(grid.gammas.size),
        "realizations": grid.realizations,
        "points_total": len(grid.points),
        "points_invalid": invalid,
        "cost_range": grid.cost_range,
        "config": config_to_dict(config),
    }


def config_to_dict(config: ScanConfig) -> dict:
    """Fully resolved, JSON-serializable echo of a scan configuration."""
    return {
        "graph": {
            "num_vertices": config.graph.num_vertices,
            "edges": [[i, j, w] for i, j, w in config.graph.edges()],
        },
        "p": config.p,
        "beta_range": list(config.beta_range),
        "gamma_range": list(config.gamma_range),
        "shots": config.shots,
        "realizations": config.realizations,
        "mode": config.mode,
        "noise": config.noise.to_dict() if config.noise is not None else None,
        "calibration": (
            [float(v) for v in config.calibration.intensities] if config.calibration is not None else None
        ),
        "master_seed": config.master_seed,
        "checkpoint_every": config.checkpoint_every,
        "exact_calibration": config.exact_calibration,
    }


def config_from_dict(data: dict) -> ScanConfig:
    graph = Graph.from_edges(data["graph"]["num_vertices"], data["graph"]["edges"])
    noise = NoiseConfig.from_dict(data["noise"]) if data.get("noise") is not None else None
    calibration = (
        CalibrationTable(np.array(data["calibration"], dtype=float))
        if data.get("calibration") is not None
        else None
    )
    return ScanConfig(
        graph=graph,
        p=data["p"],
        beta_range=tuple(data["beta_range"]),
        gamma_range=tuple(data["gamma_range"]),
        shots=data["shots"],
        realizations=data["realizations"],
        mode=data["mode"],
        noise=noise,
        calibration=calibration,
        master_seed=data["master_seed"],
        checkpoint_every=data["checkpoint_every"],
        exact_calibration=data.get("exact_calibration", False),
    )


def _ideal_point(graph: Graph, params: QaoaParams, diag: np.ndarray) -> PointRecord:
    state = simulate(build_ansatz(graph, params))
    pops = populations(state)
    value = float(np.dot(pops, diag))
    return PointRecord(
        params=params,
        realization=0,
        pops=pops,
        norm=float(pops.sum()),
        F_measured=value,
        F_ideal=value,
        abs_diff=0.0,
        valid=True,
    )


def _point_streams(config: ScanConfig, realization_index: int, point_index: int):
    """True calibration (possibly perturbed) plus one substream per sub-circuit."""
    size = 1 << config.graph.num_vertices
    root = np.random.SeedSequence(config.master_seed, spawn_key=(point_index, realization_index))
    streams = root.spawn(1 + 2 * size)
    true_cal = config.calibration
    if config.noise is not None and config.noise.calibration_sigma > 0.0:
        true_cal = perturb_calibration(true_cal, config.noise.calibration_sigma, streams[0])
    return true_cal, streams[1:]


def _measure_subcircuits(config: ScanConfig, params: QaoaParams, true_cal, streams):
    """Measure the 2^n basis preparations and the 2^n flip variants of the ansatz."""
    n = config.graph.num_vertices
    size = 1 << n
    ansatz = build_ansatz(config.graph, params)
    preps = calibration_circuits(n)
    patterns = flip_patterns(n)
    cal_records = [
        measure_circuit(
            preps[s], true_cal, config.shots, streams[s], config.checkpoint_every, config.noise
        )
        for s in range(size)
    ]
    flip_records = [
        measure_circuit(
            append_flips(ansatz, patterns[x]),
            true_cal,
            config.shots,
            streams[size + x],
            config.checkpoint_every,
            config.noise,
        )
        for x in range(size)
    ]
    return cal_records, flip_records


def _write_text(destination, text: str) -> None:
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        Path(destination).write_text(text)
