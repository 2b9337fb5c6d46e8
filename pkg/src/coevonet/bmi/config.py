from pydantic import BaseModel, Field

from coevonet.config import InitSpec, ModelParamsConfig

__all__ = ["BmiCoevolvingNetworkConfig"]


class BmiCoevolvingNetworkConfig(BaseModel):
    """Validates inputs to the BMI model. Values become arrays only in the BMI module."""

    params: ModelParamsConfig = Field(description="Initial rate constants; each can be reset between updates")
    n: int | None = Field(
        default=None, ge=2, description="Vertex count; omit when the graph is read from a file"
    )
    init: InitSpec = Field(description="Initial graph, using the same specs as the experiment runner")
    seed: int = Field(default=0, ge=0, description="Seed of the event stream and of the initial graph")
    time_step: float = Field(gt=0, description="Simulated time advanced by one update()")
    end_time: float = Field(gt=0, description="Time at which the coupled run stops")
