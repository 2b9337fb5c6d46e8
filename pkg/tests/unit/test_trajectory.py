import math

import numpy as np
import pytest

from coevonet.exceptions import UsageError
from coevonet.trajectory import SCALAR_COLUMNS, Trajectory, checkpoint_grid


@pytest.fixture
def trajectory() -> Trajectory:
    trajectory = Trajectory(columns=SCALAR_COLUMNS, metadata={"n": 10})
    trajectory.append(0.0, {"q": 0.5, "p": 0.3, "C": 0.1, "D": 0.2, "D_count": 9})
    trajectory.append(0.5, {"q": 0.1 + 0.2, "p": 0.25, "C": 0.05, "D": 0.2, "D_count": math.nan})
    return trajectory


def test_append__error(trajectory: Trajectory) -> None:
    with pytest.raises(UsageError, match="must increase"):
        trajectory.append(0.5, dict.fromkeys(SCALAR_COLUMNS, 0.0))


def test_column(trajectory: Trajectory) -> None:
    np.testing.assert_array_equal(trajectory.column("p"), [0.3, 0.25])
    with pytest.raises(UsageError, match="no column 'nu'"):
        trajectory.column("nu")


def test_value_at(trajectory: Trajectory) -> None:
    assert trajectory.value_at("p", 0.4) == 0.3
    assert trajectory.value_at("p", 7.0) == 0.25
    with pytest.raises(UsageError, match="precedes the first checkpoint"):
        trajectory.value_at("p", -1.0)


def test_csv(tmp_path, trajectory: Trajectory) -> None:  # type: ignore[no-untyped-def]
    trajectory.to_csv(tmp_path / "run.csv")
    loaded = Trajectory.from_csv(tmp_path / "run.csv")
    assert loaded.columns == SCALAR_COLUMNS
    assert loaded.times == trajectory.times
    assert loaded.rows[0] == trajectory.rows[0]
    assert loaded.value_at("q", 0.5) == 0.1 + 0.2
    assert math.isnan(loaded.value_at("D_count", 0.5))


def test_to_frame__columns(trajectory: Trajectory) -> None:
    assert list(trajectory.to_frame(["q"]).columns) == ["t", "q"]


checkpoint_data = [
    pytest.param(1.0, 4, 0.0, [0.0, 0.25, 0.5, 0.75, 1.0], id="count"),
    pytest.param(2.0, [0.0, 0.5, 2.0], 0.0, [0.0, 0.5, 2.0], id="explicit"),
    pytest.param(3.0, 2, 1.0, [1.0, 2.0, 3.0], id="late start"),
]


@pytest.mark.parametrize("horizon,checkpoints,start,expected", checkpoint_data)
def test_checkpoint_grid(horizon: float, checkpoints: object, start: float, expected: list[float]) -> None:
    assert checkpoint_grid(horizon, checkpoints, start) == pytest.approx(expected)  # type: ignore[arg-type]


checkpoint_error_data = [
    pytest.param(0.0, None, "horizon must exceed", id="zero horizon"),
    pytest.param(1.0, 0, "at least one checkpoint", id="no intervals"),
    pytest.param(1.0, [0.5, 1.0], "first checkpoint must be the start time", id="late first"),
    pytest.param(1.0, [0.0, 0.5, 0.5], "strictly increasing", id="repeated"),
    pytest.param(1.0, [0.0, 2.0], "beyond the horizon", id="beyond"),
]


@pytest.mark.parametrize("horizon,checkpoints,message", checkpoint_error_data)
def test_checkpoint_grid__error(horizon: float, checkpoints: object, message: str) -> None:
    with pytest.raises(UsageError, match=message):
        checkpoint_grid(horizon, checkpoints)  # type: ignore[arg-type]
