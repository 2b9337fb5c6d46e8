from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_array_almost_equal, assert_array_equal

from coevonet.bmi import BmiCoevolvingNetwork
from coevonet.config import DistanceKernelInit, ModelParamsConfig

dir = Path(__file__).parent


@pytest.fixture
def distance_model() -> BmiCoevolvingNetwork:
    model = BmiCoevolvingNetwork()
    model.initialize(dir / "config/bmi_distance_kernel.yaml")
    return model


@pytest.fixture
def file_model() -> BmiCoevolvingNetwork:
    """Four-vertex path read from a graph file next to the config"""
    model = BmiCoevolvingNetwork()
    model.initialize(dir / "config/bmi_graph_file.yaml")
    return model


def test_init() -> None:
    model = BmiCoevolvingNetwork()
    assert model.input_names == ("eta", "rho", "s_c0", "s_c1", "s_d0", "s_d1")
    assert model.output_names == (
        "white_fraction",
        "edge_density",
        "concordant_density",
        "discordant_density",
        "discordant_edge_count",
    )
    assert model.state is None
    assert model.output["discordant_edge_count"].dtype == np.int64


def test_initialize(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    assert model.config.params == ModelParamsConfig(eta=1.0, rho=1.1, s_c0=1.5, s_c1=0.5, s_d0=0.7, s_d1=2.0)
    assert model.config.init == DistanceKernelInit(kind="distance_kernel")
    assert model.input["s_d1"][0] == 2.0
    assert model.output["white_fraction"][0] == 0.5
    assert model.get_current_time() == 0.0


def test_initialize__graph_file(file_model: BmiCoevolvingNetwork) -> None:
    model = file_model
    assert_array_almost_equal(
        [model.output[name][0] for name in model.output_names], [0.5, 0.5, 2 / 6, 1 / 6, 1]
    )


def test_update(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    model.update()
    assert model.get_current_time() == pytest.approx(0.1)
    model.update_until(0.75)
    assert model.get_current_time() == 0.75
    assert model.state is not None
    assert model.state.graph.counts_consistent()
    assert model.output["white_fraction"][0] == model.state.graph.summary().q


def test_update__reproducible() -> None:
    outputs = []
    for _ in range(2):
        model = BmiCoevolvingNetwork()
        model.initialize(dir / "config/bmi_distance_kernel.yaml")
        model.update_until(1.0)
        outputs.append({name: model.output[name].copy() for name in model.output_names})
    for name in outputs[0]:
        assert_array_equal(outputs[0][name], outputs[1][name])


def test_update__edges_only_die(file_model: BmiCoevolvingNetwork) -> None:
    model = file_model
    densities = [model.output["edge_density"][0]]
    while model.get_current_time() < model.get_end_time():
        model.update()
        densities.append(model.output["edge_density"][0])
    assert all(b <= a for a, b in zip(densities, densities[1:], strict=False))


def test_update_until__error(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    model.update_until(0.5)
    with pytest.raises(ValueError, match="cannot run backwards"):
        model.update_until(0.25)


def test_set_value__rates(distance_model: BmiCoevolvingNetwork) -> None:
    """Rates set between updates take effect at the next update"""
    model = distance_model
    for name in ("s_c0", "s_c1", "s_d0", "s_d1"):
        model.set_value(name, 0.0)
    model.update()
    assert model.state is not None
    assert model.state.params.s_c0 == 0.0


def test_set_value__error(distance_model: BmiCoevolvingNetwork) -> None:
    with pytest.raises(ValueError, match="Variable white_fraction is not an input variable"):
        distance_model.set_value("white_fraction", [0.3])


def test_get_value(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    model.set_value("rho", [2.5])
    dest_array = np.zeros(1)
    model.get_value("rho", dest_array)
    assert_array_equal(dest_array, np.array([2.5]))
    model.set_value_at_indices("eta", np.array([0]), np.array([3.0]))
    assert model.get_value_at_indices("eta", np.zeros(1), np.array([0]))[0] == 3.0


def test_set_value_at_indices__error(distance_model: BmiCoevolvingNetwork) -> None:
    with pytest.raises(IndexError, match="the only valid index is 0"):
        distance_model.set_value_at_indices("eta", np.array([1]), np.array([3.0]))


def test_get_value_ptr(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    pointer = model.get_value_ptr("edge_density")
    model.update()
    assert pointer is model.output["edge_density"]


def test_get_value_ptr__error(distance_model: BmiCoevolvingNetwork) -> None:
    with pytest.raises(KeyError, match="fake is not a known variable"):
        distance_model.get_value_ptr("fake")


var_data = [
    pytest.param("eta", "float64", 8, id="rate"),
    pytest.param("discordant_edge_count", "int64", 8, id="count"),
]


@pytest.mark.parametrize("name,dtype,nbytes", var_data)
def test_var_metadata(distance_model: BmiCoevolvingNetwork, name: str, dtype: str, nbytes: int) -> None:
    model = distance_model
    assert model.get_var_type(name) == dtype
    assert model.get_var_nbytes(name) == nbytes
    assert model.get_var_itemsize(name) == nbytes
    assert model.get_var_grid(name) == 0
    assert model.get_var_units(name) == "1"
    assert model.get_grid_rank(0) == 0
    assert model.get_grid_size(0) == 1


def test_time(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    assert model.get_start_time() == 0.0
    assert model.get_end_time() == 1.0
    assert model.get_time_step() == 0.1


def test_counts(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    assert model.get_input_item_count() == 6
    assert model.get_output_item_count() == 5
    assert model.get_input_var_names() == model.input_names


def test_get_component_name(distance_model: BmiCoevolvingNetwork) -> None:
    assert distance_model.get_component_name() == "Co-evolving Voter Network"


def test_finalize(distance_model: BmiCoevolvingNetwork) -> None:
    model = distance_model
    model.finalize()
    assert model.state is None
    with pytest.raises(RuntimeError, match="not initialized"):
        model.update()
