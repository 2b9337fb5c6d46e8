import json
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import pytest
import yaml

from coevonet.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    INIT_STREAM_OFFSET,
    graph_from_spec,
    initial_limit_state,
    main,
    run,
)
from coevonet.config import ConstantGraphonInit, DistanceKernelInit, GraphFileInit, load_config
from coevonet.exceptions import ConfigError, ConnectivityWarning
from coevonet.simulation import init_distance_kernel

dir = Path(__file__).parent

CONSENSUS = {"eta": 1.0, "rho": 1.1, "s_c0": 1.5, "s_c1": 0.5, "s_d0": 0.7, "s_d1": 2.0}
POLARISING = {"eta": 1.0, "rho": 2.0, "s_c0": 0.0, "s_c1": 1.0, "s_d0": 0.0, "s_d1": 1.0}


def write_config(tmp_path: Path, data: dict[str, Any]) -> Path:
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump({"out": str(tmp_path / "out"), **data}))
    return path


def read_report(out: Path) -> dict[str, Any]:
    with open(out / "report.json") as f:
        return json.load(f)


def test_graph_from_spec() -> None:
    graph = graph_from_spec(DistanceKernelInit(kind="distance_kernel"), 12, seed=3, index=2)
    assert graph == init_distance_kernel(12, 3, INIT_STREAM_OFFSET + 2)
    assert graph != graph_from_spec(DistanceKernelInit(kind="distance_kernel"), 12, seed=3, index=1)
    constant = graph_from_spec(ConstantGraphonInit(kind="constant_graphon", p=1.0, q=1.0), 5, seed=0)
    assert constant.summary()[:2] == (1.0, 1.0)
    assert constant.n_pairs == 10


def test_graph_from_spec__error() -> None:
    init = GraphFileInit(kind="graph_file", path=dir / "config/path_graph.json")
    assert graph_from_spec(init, None, seed=0).n == 4
    with pytest.raises(ConfigError, match="holds a graph on 4 vertices"):
        graph_from_spec(init, 5, seed=0)
    with pytest.raises(ConfigError, match="n is required"):
        graph_from_spec(DistanceKernelInit(kind="distance_kernel"), None, seed=0)


def test_initial_limit_state() -> None:
    state = initial_limit_state(load_config(dir / "config/experiment_graph_file.yaml"))
    assert state.q == 0.5
    assert state.kappa.shape == (4, 4)
    assert state.p == pytest.approx(6 / 16)


def test_run__simulate(tmp_path: Path) -> None:
    out = tmp_path / "simulate"
    assert run(dir / "config/experiment_simulate.yaml", out=out) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["metadata.json", "run_0000.csv", "run_0001.csv"]
    frame = pd.read_csv(out / "run_0000.csv")
    assert list(frame.columns) == ["t", "q", "p", "C", "D", "D_count"]
    assert len(frame) == 6
    with open(out / "metadata.json") as f:
        metadata = json.load(f)
    assert metadata["streams"] == [0, 1]
    assert metadata["init_streams"] == [INIT_STREAM_OFFSET, INIT_STREAM_OFFSET + 1]
    assert len(metadata["config_hash"]) == 64


def test_run__byte_reproducible(tmp_path: Path) -> None:
    for name in ("first", "second"):
        assert run(dir / "config/experiment_simulate.yaml", out=tmp_path / name) == EXIT_OK
    for csv in ("run_0000.csv", "run_0001.csv"):
        assert (tmp_path / "first" / csv).read_bytes() == (tmp_path / "second" / csv).read_bytes()
    assert (tmp_path / "first/run_0000.csv").read_bytes() != (tmp_path / "first/run_0001.csv").read_bytes()


def test_run__seed_override(tmp_path: Path) -> None:
    run(dir / "config/experiment_simulate.yaml", out=tmp_path / "a")
    run(dir / "config/experiment_simulate.yaml", out=tmp_path / "b", seed=99)
    assert (tmp_path / "a/run_0000.csv").read_bytes() != (tmp_path / "b/run_0000.csv").read_bytes()


def test_run__simulate_records(tmp_path: Path) -> None:
    data = {
        "mode": "simulate",
        "params": CONSENSUS,
        "init": {"kind": "constant_graphon", "p": 0.5, "q": 0.5},
        "n": 12,
        "horizon": 0.2,
        "checkpoints": 2,
        "record_nu": True,
        "record_motifs": True,
        "max_size": 2,
    }
    assert run(write_config(tmp_path, data)) == EXIT_OK
    assert "nu" in pd.read_csv(tmp_path / "out/run_0000.csv").columns
    assert len(pd.read_csv(tmp_path / "out/run_0000_motifs.csv").columns) == 1 + 8


def test_run__limit_from_graph_file(tmp_path: Path) -> None:
    assert run(dir / "config/experiment_graph_file.yaml", out=tmp_path) == EXIT_OK
    frame = pd.read_csv(tmp_path / "limit_0000.csv")
    assert frame["D_count"].isna().all()
    np.testing.assert_allclose(frame["p"], 0.5 - (0.5 - 6 / 16) * np.exp(-2.0 * frame["t"]))


def test_run__compare(tmp_path: Path) -> None:
    data = {
        "mode": "compare",
        "params": CONSENSUS,
        "init": {"kind": "distance_kernel"},
        "n": 20,
        "m": 8,
        "horizon": 0.5,
        "step": 0.01,
        "checkpoints": 5,
        "ensemble": 2,
        "threads": 1,
        "max_size": 2,
    }
    assert run(write_config(tmp_path, data)) == EXIT_OK
    out = tmp_path / "out"
    overlay = pd.read_csv(out / "overlay.csv")
    assert list(overlay.columns[:5]) == ["t", "white_finite", "black_finite", "white_limit", "black_limit"]
    np.testing.assert_allclose(overlay["white_finite"] + overlay["black_finite"], 1.0)
    gaps = pd.read_csv(out / "homogenisation.csv")
    assert list(gaps.columns) == ["t", "mean", "sem"]
    assert list(gaps["t"]) == [0.0, 0.5]
    report = read_report(out)
    assert set(report["homogenisation_gap"]) == {"0", "0.5"}
    assert 0.0 <= report["d_m"] <= 1.0
    assert report["d_m_tail_bound"] == pytest.approx(np.exp(-10))
    assert set(report["d_m_by_column"]) == {"q", "p", "C", "D"}
    assert len(report["event_counts"]) == 2
    assert report["connectivity"]["regime"] == "recurrent"
    assert report["connectivity"]["min_nu"] <= report["nu0"]
    assert (out / "limit_0001.csv").exists()


def test_run__compare_connectivity_floor(tmp_path: Path) -> None:
    data = {
        "mode": "compare",
        "params": CONSENSUS,
        "init": {"kind": "distance_kernel"},
        "n": 10,
        "m": 4,
        "horizon": 0.2,
        "step": 0.01,
        "ensemble": 1,
        "threads": 1,
        "max_size": 2,
        "compare": {"gap_times": [0.2], "connectivity_floor": 1.0},
    }
    with pytest.warns(ConnectivityWarning, match="common-neighbour density"):
        assert run(write_config(tmp_path, data)) == EXIT_OK
    report = read_report(tmp_path / "out")
    assert report["nu0"] == pytest.approx(init_distance_kernel(10, 0, INIT_STREAM_OFFSET).connectivity_nu())


def test_run__polarisation(tmp_path: Path) -> None:
    data = {
        "mode": "polarisation",
        "params": POLARISING,
        "horizon": 1.0,
        "step": 0.05,
        "checkpoints": 2,
        "ensemble": 4,
        "threads": 1,
        "polarisation": {"p0_values": [0.25, 1.0], "samples": 200, "finite_n": 10, "finite_p0": 0.5},
    }
    assert run(write_config(tmp_path, data)) == EXIT_OK
    table = pd.read_csv(tmp_path / "out/polarisation.csv")
    assert list(table["p0"]) == [0.25, 0.5, 1.0]
    report = read_report(tmp_path / "out")
    assert report["finite"]["runs"] == 4
    assert 0.0 <= report["finite"]["interior"] <= 1.0


def test_run__mixing_check(tmp_path: Path) -> None:
    data = {"mode": "mixing-check", "params": CONSENSUS, "mixing": {"n": 30, "times": [0.05, 0.1]}}
    assert run(write_config(tmp_path, data)) == EXIT_OK
    assert len(pd.read_csv(tmp_path / "out/mixing.csv")) == 2
    assert read_report(tmp_path / "out")["n"] == 30


def test_run__verify_generator(tmp_path: Path) -> None:
    data = {
        "mode": "verify-generator",
        "params": CONSENSUS,
        "verify": {"max_size": 2, "n_values": [3, 5], "graphs": 2, "colour_sum_graphs": 1},
    }
    status = run(write_config(tmp_path, data))
    report = read_report(tmp_path / "out")
    assert report["injective"]["passed"]
    assert status == (EXIT_OK if report["passed"] else EXIT_RUNTIME)


exit_data = [
    pytest.param({"params": {**CONSENSUS, "eta": 0.0}}, EXIT_CONFIG, id="invalid rate"),
    pytest.param({"mode": "simulate"}, EXIT_CONFIG, id="missing horizon"),
    pytest.param({"mixing": {"n": 600}}, EXIT_RUNTIME, id="mixing graph too large"),
]


@pytest.mark.parametrize("changes,status", exit_data)
def test_run__exit_status(tmp_path: Path, changes: dict[str, Any], status: int) -> None:
    data = {"mode": "mixing-check", "params": CONSENSUS, **changes}
    assert run(write_config(tmp_path, data)) == status


def test_run__missing_config(tmp_path: Path) -> None:
    assert run(tmp_path / "missing.yaml") == EXIT_CONFIG


def test_main(tmp_path: Path) -> None:
    config = str(dir / "config/experiment_graph_file.yaml")
    argv = ["limit", "--config", config, "--out", str(tmp_path), "--seed", "2"]
    assert main(argv) == EXIT_OK
    with open(tmp_path / "metadata.json") as f:
        assert json.load(f)["seed"] == 2


def test_main__mode_override(tmp_path: Path) -> None:
    """The positional mode replaces the one in the file"""
    argv = ["simulate", "--config", str(dir / "config/experiment_graph_file.yaml"), "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    assert (tmp_path / "run_0000.csv").exists()


def test_main__bad_arguments() -> None:
    with pytest.raises(SystemExit):
        main(["sweep", "--config", "x.yaml"])


def test_run__unexpected_error(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(config: Any) -> None:
        raise RuntimeError("worker died")

    monkeypatch.setattr("coevonet.cli.run_config", broken)
    assert run(dir / "config/experiment_simulate.yaml", out=tmp_path) == EXIT_RUNTIME
