"""Config-driven experiment runs and side-by-side comparison of run outputs."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from linflow import __version__
from linflow.carleman import (enumerate_monomials, lift_decay, lift_vdp,
                              propagate_linear, solve_via_invariant)
from linflow.config import GRID_METHODS, ExperimentConfig
from linflow.diagnostics import SummaryStatistics, summarize, trajectory_error
from linflow.edmd import build_snapshots, fit_koopman, predict_recursive
from linflow.errors import LinflowError, ObservableOverflow
from linflow.grids import make_grid
from linflow.kvn import (KvnPropagator, assemble_kvn_hamiltonian, delta_initial,
                         gaussian_initial)
from linflow.liouville import CmePropagator, assemble_cme
from linflow.models import (Trajectory, analytic_decay_solution, decay_flow,
                            reference_trajectory, vdp_flow, vdp_limit_cycle_point)

log = logging.getLogger(__name__)

FLOAT_FMT = "{:.17g}"


@dataclass
class RunResult:
    output_dir: Path
    status: str
    meta: dict
    summary: Optional[SummaryStatistics] = None
    trajectory: Optional[Trajectory] = None
    densities: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _fmt(v) -> str:
    return FLOAT_FMT.format(float(v))


def write_table(path: Path, names: Sequence[str], data: np.ndarray, preamble: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if preamble:
            fh.write(preamble)
        fh.write(",".join(names) + "\n")
        for row in np.atleast_2d(data):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_table(path: Path):
    """Inverse of :func:`write_table`; comment lines starting with ``#`` are skipped."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    names = lines[0].split(",")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 \
        else np.zeros((0, len(names)))
    return names, data


def initial_state(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.x0 is not None:
        return np.asarray(cfg.x0, dtype=float)
    return vdp_limit_cycle_point(cfg.mu, cfg.warmup.start, cfg.warmup.time, cfg.tolerance)


def flow_for(cfg: ExperimentConfig):
    return decay_flow() if cfg.model == "decay" else vdp_flow(cfg.mu)


def reference_states(cfg: ExperimentConfig, x0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Analytic solution for the decay model, tight adaptive RK otherwise."""
    if cfg.model == "decay":
        return np.asarray(analytic_decay_solution(float(x0[0]), times)).reshape(-1, 1)
    return reference_trajectory(flow_for(cfg), x0, times, cfg.tolerance,
                                cfg.tolerance).states


def default_threshold(cfg: ExperimentConfig) -> float:
    """Two grid cells for grid methods, 0.05 absolute for observable methods."""
    if cfg.method in GRID_METHODS:
        return 2.0 * max((hi - lo) / n for (lo, hi), n in zip(cfg.grid.bounds, cfg.grid.points))
    return 0.05


def _point_summary(traj: Trajectory, ref: np.ndarray, epsilons) -> SummaryStatistics:
    # an observable method predicts a single state: a point mass for the statistics
    peps = {float(e): np.all(np.abs(traj.states - ref) < e, axis=1).astype(float)
            for e in epsilons}
    return SummaryStatistics(traj.times, traj.states, traj.states,
                             np.zeros_like(traj.states), peps)


def _run_observable(cfg: ExperimentConfig, x0, times, meta) -> Trajectory:
    if cfg.method == "reference":
        return reference_trajectory(flow_for(cfg), x0, times, cfg.tolerance, cfg.tolerance)
    if cfg.method == "invariant_exact":
        return Trajectory(times, np.asarray(solve_via_invariant(float(x0[0]), times)).reshape(-1, 1))
    if cfg.method == "carleman_truncation":
        system = (lift_decay(cfg.truncation_order) if cfg.model == "decay"
                  else lift_vdp(cfg.truncation_order, cfg.mu))
        meta["invariants"]["carleman_basis_size"] = system.basis.size
        meta["invariants"]["carleman_nonzeros"] = int(system.generator.nnz)
        try:
            obs = propagate_linear(system, x0, times, tol=cfg.tolerance)
        except ObservableOverflow as exc:
            if exc.partial is not None:
                meta["partial_trajectory"] = system.state_estimate(exc.partial)
            raise
        return system.state_estimate(obs)
    if cfg.method == "edmd_projection":
        spec = cfg.edmd
        n_train = int(round(spec.train_time / cfg.delta))
        train_times = np.arange(n_train + 1) * cfg.delta
        train_states = reference_states(cfg, x0, train_times)
        dictionary = enumerate_monomials(cfg.dim, spec.dictionary_degree)
        snaps = build_snapshots(Trajectory(train_times, train_states), dictionary, cfg.delta)
        koop = fit_koopman(snaps, spec.regularization)
        meta["invariants"].update(edmd_rank=koop.rank, edmd_residual=koop.residual,
                                  edmd_snapshot_pairs=snaps.pairs,
                                  edmd_dictionary_size=dictionary.size)
        meta["koopman_matrix"] = koop.K.tolist()
        return koop.state_estimate(predict_recursive(koop, x0, cfg.steps))
    raise ValueError(cfg.method)


def _run_grid(cfg: ExperimentConfig, x0, meta):
    grid = make_grid(cfg.grid.bounds, cfg.grid.points)
    flow = flow_for(cfg)
    if cfg.initial.kind == "delta":
        psi0 = delta_initial(grid, x0)
    else:
        psi0 = gaussian_initial(grid, x0, cfg.initial.points, cfg.initial.width)
    inv = meta["invariants"]
    inv["grid_spacing"] = list(grid.spacing)
    if cfg.method == "kvn":
        H = assemble_kvn_hamiltonian(grid, flow)
        prop = KvnPropagator(H, cfg.delta, cfg.propagator, cfg.tolerance)
        inv["propagator"] = prop.method
        dens = prop.run(psi0, cfg.steps)
        inv["hermiticity_residual"] = H.hermiticity_residual()
        inv["norm_drift"] = prop.max_norm_drift
        inv["renormalizations"] = prop.renormalizations
    else:
        L = assemble_cme(grid, flow)
        inv["column_sum_residual"] = L.column_sum_residual()
        inv["offdiagonal_min"] = L.offdiagonal_min()
        method = "exponential" if cfg.method == "cme_exponential" else "forward_euler"
        prop = CmePropagator(L, cfg.delta, method, cfg.propagator, cfg.tolerance)
        inv["propagator"] = prop.expm_method or "forward_euler"
        p0 = np.abs(psi0.amplitudes) ** 2
        dens = prop.run(p0, cfg.steps)
        inv["probability_drift"] = float(np.max(np.abs(dens.sum(axis=1) - 1.0)))
        inv["min_probability"] = float(dens.min())
    return grid, dens


def run_experiment(cfg: ExperimentConfig, output_dir: Optional[Path] = None,
                   figures: bool = False) -> RunResult:
    """Run one experiment and write ``summary.csv``, ``meta.json`` and either
    ``heatmap.csv`` (grid methods) or ``trajectory.csv`` (observable methods).

    Numerical failures are caught, recorded in ``meta.json`` and reported
    through ``status``; configuration errors propagate.
    """
    out = Path(output_dir) if output_dir is not None else cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    meta: Dict = {"config": cfg.to_dict(), "version": __version__, "invariants": {}}
    times = np.arange(cfg.steps + 1) * cfg.delta
    result = RunResult(out, "ok", meta, times=times)
    try:
        x0 = initial_state(cfg)
        meta["initial_state"] = x0.tolist()
        ref = reference_states(cfg, x0, times)
        if cfg.method in GRID_METHODS:
            grid, dens = _run_grid(cfg, x0, meta)
            result.densities = dens
            summary = summarize(dens, grid, times, ref, cfg.epsilons)
            rows = np.arange(0, cfg.steps + 1, cfg.heatmap_every)
            shape = "x".join(str(p) for p in grid.points)
            bounds = ";".join(f"{lo:g}:{hi:g}" for lo, hi in grid.bounds)
            write_table(out / "heatmap.csv", ["t"] + [f"n{i}" for i in range(grid.size)],
                        np.column_stack([times[rows], dens[rows]]),
                        preamble=f"# shape={shape} bounds={bounds} order=row-major\n")
        else:
            traj = _run_observable(cfg, x0, times, meta)
            result.trajectory = traj
            summary = _point_summary(traj, reference_states(cfg, x0, traj.times), cfg.epsilons)
            axes = ["x", "y"][: traj.dim]
            write_table(out / "trajectory.csv", ["t"] + axes,
                        np.column_stack([traj.times, traj.states]))
        names, data = summary.columns()
        write_table(out / "summary.csv", names, data)
        result.summary = summary
        truth = Trajectory(summary.times, reference_states(cfg, x0, summary.times))
        threshold = default_threshold(cfg)
        mode_rmse, mode_h = trajectory_error(summary.mode_trajectory(), truth, threshold)
        mean_rmse, mean_h = trajectory_error(summary.mean_trajectory(), truth, threshold)
        # a null horizon means the threshold was never exceeded
        meta["error_vs_reference"] = {
            "threshold": threshold, "mode_rmse": _finite(mode_rmse), "mode_horizon": _finite(mode_h),
            "mean_rmse": _finite(mean_rmse), "mean_horizon": _finite(mean_h),
        }
    except LinflowError as exc:
        result.status = "numerical_failure"
        result.error = f"{type(exc).__name__}: {exc}"
        meta["failure"] = {"type": type(exc).__name__, "message": str(exc),
                           "time": getattr(exc, "time", None)}
        partial = meta.pop("partial_trajectory", None)
        if partial is not None:
            result.trajectory = partial
            axes = ["x", "y"][: partial.dim]
            write_table(out / "trajectory.csv", ["t"] + axes,
                        np.column_stack([partial.times, partial.states]))
        log.error("run %s failed: %s", cfg.name, result.error)
    meta["status"] = result.status
    meta["wall_time_s"] = time.perf_counter() - started
    (out / "meta.json").write_text(json.dumps(meta, indent=2, default=_json_default, allow_nan=False) + "\n")
    if figures:
        from linflow import plotting
        plotting.render_run(result, cfg)
    return result


def _finite(v: float):
    return v if np.isfinite(v) else None


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


@dataclass
class ComparisonRow:
    run: str
    method: str
    mode_rmse: float
    mode_horizon: float
    mean_rmse: float
    mean_horizon: float


@dataclass
class ComparisonReport:
    reference: str
    threshold: float
    rows: List[ComparisonRow] = field(default_factory=list)

    def table(self) -> str:
        head = f"{'run':<32} {'method':<20} {'mode_rmse':>12} {'mode_hzn':>9} " \
               f"{'mean_rmse':>12} {'mean_hzn':>9}"
        lines = [f"reference: {self.reference}  threshold: {self.threshold:g}", head,
                 "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.run:<32} {r.method:<20} {r.mode_rmse:>12.5g} "
                         f"{r.mode_horizon:>9.4g} {r.mean_rmse:>12.5g} {r.mean_horizon:>9.4g}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("run,method,mode_rmse,mode_horizon,mean_rmse,mean_horizon\n")
            for r in self.rows:
                fh.write(f"{r.run},{r.method},{_fmt(r.mode_rmse)},{_fmt(r.mode_horizon)},"
                         f"{_fmt(r.mean_rmse)},{_fmt(r.mean_horizon)}\n")


def load_summary(run_dir) -> Dict[str, np.ndarray]:
    names, data = read_table(Path(run_dir) / "summary.csv")
    return {n: data[:, i] for i, n in enumerate(names)}


def _method_of(run_dir: Path) -> str:
    meta = Path(run_dir) / "meta.json"
    if meta.exists():
        return json.loads(meta.read_text())["config"]["method"]
    return "?"


def compare_runs(run_dirs: Sequence, reference, threshold: float) -> ComparisonReport:
    """Mode and mean error of each run against the reference run's state.

    The reference run's ``mean`` columns are used as the true state (for an
    observable method they hold the predicted state itself). A run's sample
    times must all appear among the reference's sample times.
    """
    ref = load_summary(reference)
    axes = [a for a in ("x", "y") if f"mean_{a}" in ref]
    ref_t = ref["t"]
    ref_state = np.column_stack([ref[f"mean_{a}"] for a in axes])
    report = ComparisonReport(str(reference), float(threshold))
    for run in run_dirs:
        s = load_summary(run)
        if not all(f"mean_{a}" in s for a in axes):
            raise ValueError(f"{run}: state dimension differs from the reference")
        t = s["t"]
        idx = np.searchsorted(ref_t, t - 1e-9)
        idx = np.clip(idx, 0, len(ref_t) - 1)
        if not np.allclose(ref_t[idx], t, rtol=0, atol=1e-9):
            raise ValueError(f"{run}: sample times are not contained in the reference sampling")
        truth = Trajectory(t, ref_state[idx])
        mode_rmse, mode_h = trajectory_error(
            Trajectory(t, np.column_stack([s[f"mode_{a}"] for a in axes])), truth, threshold)
        mean_rmse, mean_h = trajectory_error(
            Trajectory(t, np.column_stack([s[f"mean_{a}"] for a in axes])), truth, threshold)
        report.rows.append(ComparisonRow(str(run), _method_of(run), mode_rmse, mode_h,
                                         mean_rmse, mean_h))
    return report
