import math

import numpy as np

__all__ = ["make_generator", "UniformBuffer"]


def make_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for run ``stream`` of experiment ``seed``

    Streams are keyed by (seed, stream) alone, so ensemble members draw the same numbers whatever
    order or process they run in.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(sequence))


class UniformBuffer:
    """Batched uniform draws on [0, 1) served one at a time as Python floats"""

    def __init__(self, generator: np.random.Generator, batch: int = 8192) -> None:
        self.generator = generator
        self.batch = batch
        self._values: list[float] = []
        self._index = 0

    def _refill(self) -> None:
        self._values = self.generator.random(self.batch).tolist()
        self._index = 0

    def next(self) -> float:
        if self._index >= len(self._values):
            self._refill()
        value = self._values[self._index]
        self._index += 1
        return value

    def exponential(self, rate: float) -> float:
        """Waiting time of an exponential clock with the given total rate"""
        return -math.log1p(-self.next()) / rate

    def below(self, size: int) -> int:
        """Uniform integer in ``range(size)``"""
        return min(int(self.next() * size), size - 1)
