import logging
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from numpy.typing import NDArray

from coevonet.bmi.bmi_base import BmiBase
from coevonet.bmi.config import BmiCoevolvingNetworkConfig
from coevonet.cli import graph_from_spec
from coevonet.config import GraphFileInit, SampleGraphonInit
from coevonet.model import ModelParams
from coevonet.simulation import SimState

__all__ = ["BmiCoevolvingNetwork"]

logger = logging.getLogger(__name__)


class BmiCoevolvingNetwork(BmiBase):
    """BMI composition wrapper for the exact co-evolving voter simulation

    Inputs are the six rate constants; a new value takes effect at the next update. Outputs are
    the colour and pair statistics of the current graph.
    """

    def __init__(self) -> None:
        super().__init__()

        self.input_names = ("eta", "rho", "s_c0", "s_c1", "s_d0", "s_d1")
        self.output_names = (
            "white_fraction",
            "edge_density",
            "concordant_density",
            "discordant_density",
            "discordant_edge_count",
        )

        self.input: dict[str, NDArray] = {name: np.zeros(1, dtype=np.float64) for name in self.input_names}
        self.output: dict[str, NDArray] = {name: np.zeros(1, dtype=np.float64) for name in self.output_names}
        self.output["discordant_edge_count"] = np.zeros(1, dtype=np.int64)
        self.state: SimState | None = None

    def initialize(self, config_file: str | Path) -> None:
        """Build the initial graph and the event stream from a YAML config

        Args:
            config_file (str | Path): path of a ``BmiCoevolvingNetworkConfig`` YAML file
        """
        config_file = Path(config_file)
        with open(config_file) as f:
            config_read = yaml.safe_load(f)

        self.config = BmiCoevolvingNetworkConfig.model_validate(config_read)
        init = self.config.init
        if isinstance(init, GraphFileInit | SampleGraphonInit) and not init.path.is_absolute():
            init = init.model_copy(update={"path": config_file.parent / init.path})

        for name, value in self.config.params.model_dump().items():
            self.input[name][0] = value
        graph = graph_from_spec(init, self.config.n, self.config.seed)
        self.state = SimState(graph, self._params(), self.config.seed)
        self._refresh_outputs()
        logger.info("initialized %d-vertex network at t=0", graph.n)

    def _params(self) -> ModelParams:
        return ModelParams(**{name: float(self.input[name][0]) for name in self.input_names})

    def _require_state(self) -> SimState:
        if self.state is None:
            raise RuntimeError("model is not initialized; call initialize() first")
        return self.state

    def _refresh_outputs(self) -> None:
        q, p, concordant, discordant, count = self._require_state().graph.summary()
        self.output["white_fraction"][0] = q
        self.output["edge_density"][0] = p
        self.output["concordant_density"][0] = concordant
        self.output["discordant_density"][0] = discordant
        self.output["discordant_edge_count"][0] = count

    def update(self) -> None:
        """Advance the chain by one time step"""
        state = self._require_state()
        self.update_until(state.clock + self.config.time_step)

    def update_until(self, time: float) -> None:
        """Advance the chain to absolute time ``time``

        Args:
            time (float): target model time, not before the current time
        """
        state = self._require_state()
        if time < state.clock:
            raise ValueError(f"cannot run backwards from t={state.clock} to t={time}")
        state.params = self._params()
        state.run_until(time)
        self._refresh_outputs()

    def finalize(self) -> None:
        """Clean up any internal resources of the model"""
        self.state = None

    def get_component_name(self) -> str:
        return "Co-evolving Voter Network"

    def get_input_item_count(self) -> int:
        return len(self.input_names)

    def get_input_var_names(self) -> tuple[str, ...]:  # type: ignore[override]
        return self.input_names

    def get_output_item_count(self) -> int:
        return len(self.output_names)

    def get_output_var_names(self) -> tuple[str, ...]:  # type: ignore[override]
        return self.output_names

    def get_current_time(self) -> float:
        return self._require_state().clock

    def get_end_time(self) -> float:
        return self.config.end_time

    def get_time_step(self) -> float:
        return self.config.time_step

    def set_value(self, name: str, src: Any) -> None:
        """Sets a rate constant

        Args:
            name (str): name of an input variable
            src (Any): new value, a scalar or one-element array

        Raises
        ------
            ValueError: If name is not an input variable
        """
        if name not in self.input_names:
            raise ValueError(f"Variable {name} is not an input variable. Inputs are {self.input_names}.")
        self.input[name][:] = np.asarray(src, dtype=np.float64).reshape(-1)

    def get_value_ptr(self, name: str) -> NDArray:
        """The live array of an input or output variable"""
        if name in self.output:
            return self.output[name]
        if name in self.input:
            return self.input[name]
        raise KeyError(f"{name} is not a known variable")
