"""Command-line experiment runner

``coevonet <mode> --config <path> [--seed N] [--out DIR] [--ensemble E]``

Exit status is 0 on success, 1 when the configuration is rejected and 2 when a run fails.
"""

import argparse
import json
import logging
import math
import platform
import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from coevonet.config import (
    ConstantGraphonInit,
    DistanceKernelInit,
    ExperimentConfig,
    GraphFileInit,
    InitSpec,
    SampleGraphonInit,
    config_hash,
    load_config,
)
from coevonet.diagnostics import ConnectivityReport, mixing_check, monitor_connectivity
from coevonet.ensemble import run_ensemble
from coevonet.exceptions import ConfigError, ConnectivityWarning, SimulationError, UsageError
from coevonet.generator import random_graph, verification_report
from coevonet.graphon import ColouredGraphon, embed
from coevonet.limit import LimitState, integrate_limit, motif_flow, polarisation_probability
from coevonet.model import ColouredGraph
from coevonet.motifs import MotifCatalog
from coevonet.paths import SampledPath, absorption_estimate, d_m, d_m_tilde, homogenisation_gap
from coevonet.simulation import (
    ConnectivityObserver,
    MotifObserver,
    Observer,
    ScalarObserver,
    SimState,
    distance_kernel_graphon,
    init_distance_kernel,
    init_from_graphon,
    simulate,
)
from coevonet.streams import make_generator
from coevonet.trajectory import SCALAR_COLUMNS, Trajectory, checkpoint_grid

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_RUNTIME",
    "INIT_STREAM_OFFSET",
    "graph_from_spec",
    "initial_graph",
    "initial_limit_state",
    "run_config",
    "run",
    "main",
]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

# initial graphs draw from streams above this offset so they never share numbers with a run
INIT_STREAM_OFFSET = 1 << 20

PATH_COLUMNS = ("q", "p", "C", "D")


@dataclass(frozen=True)
class Member:
    """One ensemble member: the experiment and the run index that keys its random streams"""

    config: ExperimentConfig
    index: int


def _horizon(config: ExperimentConfig) -> float:
    if config.horizon is None:
        raise ConfigError(f"mode {config.mode} needs a horizon")
    return config.horizon


def graph_from_spec(init: InitSpec | None, n: int | None, seed: int, index: int = 0) -> ColouredGraph:
    """Starting graph of finite-n run ``index``, drawn from its own initialisation stream"""
    stream = INIT_STREAM_OFFSET + index
    if isinstance(init, GraphFileInit):
        graph = ColouredGraph.load(init.path)
        if n is not None and n != graph.n:
            raise ConfigError(f"n={n} but {init.path} holds a graph on {graph.n} vertices")
        return graph
    if n is None:
        raise ConfigError("n is required to build an initial graph")
    if isinstance(init, DistanceKernelInit):
        return init_distance_kernel(n, seed, stream)
    if isinstance(init, ConstantGraphonInit):
        return init_from_graphon(ColouredGraphon.constant(init.p, init.q), n, seed, stream)
    if isinstance(init, SampleGraphonInit):
        return init_from_graphon(ColouredGraphon.load(init.path), n, seed, stream)
    raise ConfigError("no init spec given")


def initial_graph(config: ExperimentConfig, index: int = 0) -> ColouredGraph:
    return graph_from_spec(config.init, config.n, config.seed, index)


def initial_limit_state(config: ExperimentConfig) -> LimitState:
    """Deterministic starting point of the limit integrator for the configured init spec"""
    init = config.init
    if isinstance(init, DistanceKernelInit):
        return LimitState.from_graphon(distance_kernel_graphon(config.m))
    if isinstance(init, ConstantGraphonInit):
        return LimitState.constant(init.p, init.q, config.m)
    if isinstance(init, GraphFileInit):
        return LimitState.from_graphon(embed(ColouredGraph.load(init.path)))
    if isinstance(init, SampleGraphonInit):
        return LimitState.from_graphon(ColouredGraphon.load(init.path))
    raise ConfigError("no init spec given")


def _observers(config: ExperimentConfig) -> list[Observer]:
    observers: list[Observer] = [ScalarObserver()]
    if config.record_nu:
        observers.append(ConnectivityObserver())
    if config.record_motifs:
        observers.append(MotifObserver(MotifCatalog.build(config.max_size).motifs))
    return observers


def _simulate_member(member: Member) -> Trajectory:
    config = member.config
    graph = initial_graph(config, member.index)
    state = SimState(graph, config.params.to_params(), config.seed, member.index)
    return simulate(state, _horizon(config), config.checkpoints, _observers(config))


def _limit_member(member: Member) -> tuple[Trajectory, Trajectory | None]:
    config = member.config
    params = config.params.to_params()
    init = initial_limit_state(config)
    horizon = _horizon(config)
    trajectory = integrate_limit(
        init, params, horizon, config.step, config.seed, member.index, config.checkpoints
    )
    motifs = None
    if config.record_motifs:
        catalog = MotifCatalog.build(config.max_size)
        motifs = motif_flow(
            catalog.motifs, init, params, horizon, config.step, config.seed, member.index, config.checkpoints
        )
    return trajectory, motifs


def _compare_member(member: Member) -> tuple[Trajectory, Trajectory, pd.DataFrame, ConnectivityReport]:
    """Finite-n run with graph snapshots at the start and the gap times, and the matching limit run"""
    config = member.config
    horizon = _horizon(config)
    graph = initial_graph(config, member.index)
    state = SimState(graph, config.params.to_params(), config.seed, member.index)
    grid = checkpoint_grid(horizon, config.checkpoints)
    gap_times = np.asarray(config.compare.gap_times)
    observer = ScalarObserver()
    finite = Trajectory(columns=observer.columns, metadata={"seed": config.seed, "stream": member.index})
    snapshots = Trajectory(columns=())
    connectivity = Trajectory(columns=())

    def record(t: float) -> None:
        finite.append(t, observer.observe(state.graph))
        at_gap = bool(np.isclose(gap_times, t, rtol=0, atol=1e-12).any())
        if at_gap or t == grid[0]:
            snapshot = state.graph.copy()
            connectivity.append(t, {}, snapshot)
            if at_gap:
                snapshots.append(t, {}, snapshot)

    state.run_until(horizon, grid, record)
    finite.metadata["event_count"] = state.event_count
    limit, _ = _limit_member(member)
    report = monitor_connectivity(connectivity, config.params.to_params())
    return finite, limit, homogenisation_gap(snapshots, config.max_size), report


def _mean_trajectory(trajectories: Sequence[Trajectory], columns: Sequence[str]) -> Trajectory:
    """Checkpoint-wise ensemble mean; all members share one checkpoint grid"""
    stacked = np.stack([np.column_stack([t.column(c) for c in columns]) for t in trajectories])
    frame = pd.DataFrame(stacked.mean(axis=0), columns=list(columns))
    frame.insert(0, "t", trajectories[0].times)
    return Trajectory.from_frame(frame)


def _json_default(value: Any) -> Any:
    if isinstance(value, Fraction | np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _write_json(path: Path, data: Any) -> None:
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _versions() -> dict[str, str]:
    try:
        package = version("coevonet")
    except PackageNotFoundError:
        package = "unknown"
    return {
        "coevonet": package,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "python": platform.python_version(),
    }


def _write_metadata(config: ExperimentConfig, out: Path, streams: Sequence[int]) -> None:
    _write_json(
        out / "metadata.json",
        {
            "config": config.model_dump(mode="json"),
            "config_hash": config_hash(config),
            "mode": config.mode,
            "seed": config.seed,
            "streams": list(streams),
            "init_streams": [INIT_STREAM_OFFSET + s for s in streams],
            "versions": _versions(),
        },
    )


def _run_simulate(config: ExperimentConfig, out: Path) -> None:
    members = [Member(config, i) for i in range(config.ensemble)]
    trajectories = run_ensemble(_simulate_member, members, config.threads)
    scalar = list(SCALAR_COLUMNS) + (["nu"] if config.record_nu else [])
    for member, trajectory in zip(members, trajectories, strict=True):
        trajectory.to_csv(out / f"run_{member.index:04d}.csv", scalar)
        if config.record_motifs:
            labels = MotifCatalog.build(config.max_size).labels
            trajectory.to_csv(out / f"run_{member.index:04d}_motifs.csv", labels)


def _run_limit(config: ExperimentConfig, out: Path) -> None:
    members = [Member(config, i) for i in range(config.ensemble)]
    results = run_ensemble(_limit_member, members, config.threads)
    for member, (trajectory, motifs) in zip(members, results, strict=True):
        trajectory.to_csv(out / f"limit_{member.index:04d}.csv")
        if motifs is not None:
            motifs.to_csv(out / f"limit_{member.index:04d}_motifs.csv")


def _overlay(finite: Trajectory, limit: Trajectory) -> pd.DataFrame:
    """Colour densities, then edge, concordant and discordant densities, finite-n beside limit"""
    frame = pd.DataFrame({"t": finite.times})
    for source, trajectory in (("finite", finite), ("limit", limit)):
        q = trajectory.column("q")
        frame[f"white_{source}"] = q
        frame[f"black_{source}"] = 1.0 - q
    for source, trajectory in (("finite", finite), ("limit", limit)):
        frame[f"edge_{source}"] = trajectory.column("p")
        frame[f"concordant_{source}"] = trajectory.column("C")
        frame[f"discordant_{source}"] = trajectory.column("D")
    return frame


def _run_compare(config: ExperimentConfig, out: Path) -> None:
    horizon = _horizon(config)
    members = [Member(config, i) for i in range(config.ensemble)]
    results = run_ensemble(_compare_member, members, config.threads)
    finite_runs = [finite for finite, _, _, _ in results]
    limit_runs = [limit for _, limit, _, _ in results]
    connectivity = [report for _, _, _, report in results]
    nu0 = connectivity[0].nu0
    floor = config.compare.connectivity_floor
    if nu0 <= floor:
        warnings.warn(
            f"initial common-neighbour density {nu0:.4g} is at or below {floor}; the finite-n runs need not "
            "approach the limit",
            ConnectivityWarning,
            stacklevel=2,
        )
    violations = sum(report.violations for report in connectivity)
    if violations:
        logger.warning("common-neighbour density fell below its floor at %d snapshots", violations)
    for member, (finite, limit, _, _) in zip(members, results, strict=True):
        finite.to_csv(out / f"run_{member.index:04d}.csv")
        limit.to_csv(out / f"limit_{member.index:04d}.csv")

    finite_mean = _mean_trajectory(finite_runs, PATH_COLUMNS)
    limit_mean = _mean_trajectory(limit_runs, PATH_COLUMNS)
    _overlay(finite_mean, limit_mean).to_csv(out / "overlay.csv", index=False, float_format="%.17g")

    gaps = pd.concat([gap for _, _, gap, _ in results]).groupby("t")["gap"].agg(["mean", "sem"]).reset_index()
    gaps.to_csv(out / "homogenisation.csv", index=False, float_format="%.17g")

    x = SampledPath.from_trajectory(finite_mean, PATH_COLUMNS)
    y = SampledPath.from_trajectory(limit_mean, PATH_COLUMNS)
    distance = d_m(x, y)
    finite_absorption = absorption_estimate(finite_runs, horizon)
    limit_absorption = absorption_estimate(limit_runs, horizon)
    per_column = {}
    for column in PATH_COLUMNS:
        single = d_m(
            SampledPath.from_trajectory(finite_mean, column), SampledPath.from_trajectory(limit_mean, column)
        )
        per_column[column] = single.value
    _write_json(
        out / "report.json",
        {
            "nu0": nu0,
            "connectivity": {
                "regime": connectivity[0].regime,
                "hypothesis_met": connectivity[0].hypothesis_met,
                "min_nu": min(report.min_nu for report in connectivity),
                "violations": violations,
            },
            "d_m": distance.value,
            "d_m_tail_bound": distance.tail_bound,
            "d_m_tilde": d_m_tilde(x, y),
            "d_m_by_column": per_column,
            "homogenisation_gap": {f"{t:g}": gap for t, gap in zip(gaps["t"], gaps["mean"], strict=True)},
            "absorption": {
                "finite": finite_absorption._asdict(),
                "limit": limit_absorption._asdict(),
            },
            "event_counts": [finite.metadata["event_count"] for finite in finite_runs],
        },
    )


def _run_verify(config: ExperimentConfig, out: Path) -> None:
    options = config.verify
    report = verification_report(
        config.params.to_params(),
        max_size=options.max_size,
        n_values=tuple(options.n_values),
        graphs=options.graphs,
        seed=config.seed,
        colour_sum_graphs=options.colour_sum_graphs,
    )
    _write_json(out / "report.json", report)
    if not report["passed"]:
        raise SimulationError(f"generator verification failed; see {out / 'report.json'}")
    logger.info("generator verification passed")


def _run_mixing(config: ExperimentConfig, out: Path) -> None:
    options = config.mixing
    graph = random_graph(options.n, make_generator(config.seed, 0), options.edge_probability)
    table = mixing_check(graph, config.params.eta, options.times)
    table.to_csv(out / "mixing.csv", index=False, float_format="%.17g")
    _write_json(
        out / "report.json",
        {"n": graph.n, "nu": graph.connectivity_nu(), "all_hold": bool(table["holds"].all())},
    )


def _finite_absorption_member(member: Member) -> Trajectory:
    config = member.config
    options = config.polarisation
    graphon = ColouredGraphon.constant(options.finite_p0, options.q0)
    if options.finite_n is None:
        raise ConfigError("polarisation.finite_n is required for the finite-n check")
    graph = init_from_graphon(graphon, options.finite_n, config.seed, INIT_STREAM_OFFSET + member.index)
    state = SimState(graph, config.params.to_params(), config.seed, member.index)
    return simulate(state, _horizon(config), config.checkpoints)


def _run_polarisation(config: ExperimentConfig, out: Path) -> None:
    options = config.polarisation
    params = config.params.to_params()
    rows = []
    estimates = {}
    for p0 in sorted(set(options.p0_values) | ({options.finite_p0} if options.finite_n else set())):
        changed = polarisation_probability(
            p0, params, options.q0, options.samples, config.step, config.seed, method="time_change"
        )
        direct = polarisation_probability(
            p0, params, options.q0, options.samples, config.step, config.seed, method="direct"
        )
        combined = math.hypot(changed.stderr, direct.stderr)
        estimates[p0] = changed
        rows.append(
            {
                "p0": p0,
                "time_change": changed.value,
                "time_change_stderr": changed.stderr,
                "direct": direct.value,
                "direct_stderr": direct.stderr,
                "agree": abs(changed.value - direct.value) <= 2 * combined,
            }
        )
    pd.DataFrame(rows).to_csv(out / "polarisation.csv", index=False, float_format="%.17g")
    report: dict[str, Any] = {"estimates": rows}
    if options.finite_n:
        members = [Member(config, i) for i in range(config.ensemble)]
        runs = run_ensemble(_finite_absorption_member, members, config.threads)
        absorption = absorption_estimate(runs, _horizon(config))
        interior = absorption.p_interior
        interior_stderr = math.sqrt(interior * (1 - interior) / len(runs))
        limit = estimates[options.finite_p0]
        report["finite"] = {
            "n": options.finite_n,
            "runs": len(runs),
            "interior": interior,
            "interior_stderr": interior_stderr,
            "limit": limit.value,
            "within_3_stderr": abs(interior - limit.value) <= 3 * math.hypot(interior_stderr, limit.stderr),
        }
    _write_json(out / "report.json", report)


_MODES = {
    "simulate": _run_simulate,
    "limit": _run_limit,
    "compare": _run_compare,
    "verify-generator": _run_verify,
    "mixing-check": _run_mixing,
    "polarisation": _run_polarisation,
}


def _streams(config: ExperimentConfig) -> list[int]:
    if config.mode in ("simulate", "limit", "compare") or (
        config.mode == "polarisation" and config.polarisation.finite_n
    ):
        return list(range(config.ensemble))
    return [0]


def run_config(config: ExperimentConfig) -> None:
    """Run a validated experiment and write its artifacts under ``config.out``"""
    out = config.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"out: cannot create output directory {out}: {e}") from e
    logger.info("running %s (seed=%d, ensemble=%d) into %s", config.mode, config.seed, config.ensemble, out)
    _MODES[config.mode](config, out)
    _write_metadata(config, out, _streams(config))
    logger.info("finished %s", config.mode)


def run(
    config_path: str | Path,
    mode: str | None = None,
    seed: int | None = None,
    out: str | Path | None = None,
    ensemble: int | None = None,
) -> int:
    """Load, validate and run a configuration file; returns the exit status"""
    try:
        config = load_config(config_path, mode=mode, seed=seed, out=out, ensemble=ensemble)
        run_config(config)
    except ConfigError as e:
        logger.error("%s", e.message)
        return EXIT_CONFIG
    except (SimulationError, UsageError) as e:
        logger.error("run failed: %s", e.message)
        return EXIT_RUNTIME
    except Exception:
        logger.exception("run failed unexpectedly")
        return EXIT_RUNTIME
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coevonet", description="Co-evolving voter network simulation and limit experiments"
    )
    parser.add_argument("mode", choices=sorted(_MODES), help="experiment to run")
    parser.add_argument("--config", required=True, type=Path, help="YAML or JSON experiment file")
    parser.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    parser.add_argument("--out", type=Path, default=None, help="override the output directory")
    parser.add_argument("--ensemble", type=int, default=None, help="override the ensemble size")
    parser.add_argument("-v", "--verbose", action="store_true", help="log sampler details")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    logging.captureWarnings(True)
    return run(args.config, args.mode, args.seed, args.out, args.ensemble)


if __name__ == "__main__":
    raise SystemExit(main())
