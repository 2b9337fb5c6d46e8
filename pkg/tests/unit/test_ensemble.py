import pytest

from coevonet.ensemble import THREADS_VARIABLE, run_ensemble, worker_count

worker_data = [
    pytest.param(3, 8, None, 3, id="fewer tasks than workers"),
    pytest.param(10, 4, None, 4, id="requested cap"),
    pytest.param(10, 8, "2", 2, id="environment cap"),
    pytest.param(10, 8, "many", 8, id="environment cap ignored"),
    pytest.param(0, 8, None, 1, id="no tasks"),
]


@pytest.mark.parametrize("tasks,requested,cap,expected", worker_data)
def test_worker_count(
    monkeypatch: pytest.MonkeyPatch, tasks: int, requested: int, cap: str | None, expected: int
) -> None:
    monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    if cap is not None:
        monkeypatch.setenv(THREADS_VARIABLE, cap)
    assert worker_count(tasks, requested) == expected


def test_run_ensemble__serial() -> None:
    assert run_ensemble(abs, [-1, 2, -3], threads=1) == [1, 2, 3]


def test_run_ensemble__pool(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    items = list(range(-20, 0))
    assert run_ensemble(abs, items, threads=2) == [abs(i) for i in items]
