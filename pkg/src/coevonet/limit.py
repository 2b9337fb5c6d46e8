"""Numerical realisation of the limiting process

The colour density follows a Fisher-Wright-type diffusion ``dq = sqrt(2 eta p q (1 - q)) dW``
absorbed at 0 and 1, and every kernel cell relaxes towards the switching equilibrium of the
current colour density, ``dkappa = rho [A(q) - (A(q) + B(q)) kappa] dt``.
"""

import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from coevonet.exceptions import AbsorptionWarning, SimulationError, UsageError
from coevonet.graphon import ColouredGraphon, uncoloured_density
from coevonet.model import ModelParams
from coevonet.motifs import Motif, close_under_edge_deletion
from coevonet.streams import make_generator
from coevonet.trajectory import SCALAR_COLUMNS, Trajectory, checkpoint_grid

__all__ = [
    "drift_V",
    "switching_rates",
    "Equilibrium",
    "equilibrium_p",
    "concordant_discordant",
    "LimitState",
    "LimitIntegrator",
    "integrate_limit",
    "Estimate",
    "polarisation_probability",
    "motif_flow",
    "flow_gap",
]

logger = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-10

# stream of the first direct polarisation path; the time-change estimator draws from stream 0
DIRECT_STREAM_OFFSET = 1


def switching_rates(q: float, params: ModelParams) -> tuple[float, float]:
    """Colour-averaged connection rate ``A(q)`` and disconnection rate ``B(q)``"""
    concordant = q * q + (1.0 - q) * (1.0 - q)
    discordant = 2.0 * q * (1.0 - q)
    return (
        concordant * params.s_c0 + discordant * params.s_d0,
        concordant * params.s_c1 + discordant * params.s_d1,
    )


def drift_V(p: float, q: float, params: ModelParams) -> float:
    """Edge-density drift per unit ``rho``: ``(1 - p) A(q) - p B(q)``"""
    connect, disconnect = switching_rates(q, params)
    return (1.0 - p) * connect - p * disconnect


class Equilibrium(NamedTuple):
    p: float | None
    regime: str


def equilibrium_p(q: float, params: ModelParams) -> Equilibrium:
    """Edge density at which the drift vanishes for a frozen colour density

    The root mixes the concordant and discordant equilibria ``p_c`` and ``p_d`` with weight
    ``alpha_q``, where ``(1 - alpha_q) / alpha_q`` is the ratio of discordant to concordant
    switching mass.
    """
    concordant_sum = params.s_c0 + params.s_c1
    discordant_sum = params.s_d0 + params.s_d1
    if concordant_sum == 0:
        return Equilibrium(None, "degenerate_concordant")
    if discordant_sum == 0:
        return Equilibrium(None, "degenerate_discordant")
    p_c = params.s_c0 / concordant_sum
    p_d = params.s_d0 / discordant_sum
    odds = (discordant_sum / concordant_sum) * (2 * q * (1 - q) / (q * q + (1 - q) * (1 - q)))
    alpha = 1.0 / (1.0 + odds)
    return Equilibrium(alpha * p_c + (1.0 - alpha) * p_d, "interior")


def concordant_discordant(p: float, q: float) -> tuple[float, float]:
    """Concordant and discordant parts of the edge density when colours are homogenised"""
    concordant = p * (q * q + (1.0 - q) * (1.0 - q))
    return concordant, p - concordant


@dataclass
class LimitState:
    """Colour density, kernel grid and their clock; the colour function is implicitly constant ``q``"""

    q: float
    kappa: NDArray[np.float64]
    t: float = 0.0
    p: float | None = None
    absorbed: bool | None = None

    def __post_init__(self) -> None:
        self.kappa = np.array(self.kappa, dtype=np.float64, ndmin=2)
        if not 0.0 <= self.q <= 1.0:
            raise UsageError(f"colour density must lie in [0, 1], got {self.q}")
        mean = float(self.kappa.mean())
        if self.p is None:
            self.p = mean
        elif abs(self.p - mean) > GRID_TOLERANCE:
            raise UsageError(f"edge density {self.p} does not match the kernel mean {mean}")
        if self.absorbed is None:
            self.absorbed = self.q in (0.0, 1.0)

    @classmethod
    def constant(cls, p: float, q: float, m: int = 64) -> "LimitState":
        return cls(q=q, kappa=np.full((m, m), float(p)))

    @classmethod
    def from_graphon(cls, graphon: ColouredGraphon) -> "LimitState":
        return cls(q=graphon.mean_colour, kappa=graphon.kernel.copy())

    def graphon(self) -> ColouredGraphon:
        m = self.kappa.shape[0]
        return ColouredGraphon(np.clip(self.kappa, 0.0, 1.0), np.full(m, self.q))


def _step_times(horizon: float, step: float) -> NDArray[np.float64]:
    if not step > 0:
        raise UsageError(f"step must be positive, got {step}")
    steps = max(1, math.ceil(horizon / step - 1e-9))
    times = np.minimum(np.arange(steps + 1) * step, horizon)
    times[-1] = horizon
    return times


class LimitIntegrator:
    """Advances a LimitState along a fixed step grid driven by one Gaussian stream

    The colour density takes Euler-Maruyama steps and is absorbed on its first exit from (0, 1).
    Kernel cells take the exact exponential step of their linear ODE with ``q`` frozen over the
    step, and the edge density is carried by the same exact step.
    """

    def __init__(
        self, init: LimitState, params: ModelParams, horizon: float, step: float, seed: int, stream: int = 0
    ) -> None:
        if not horizon > init.t:
            raise UsageError(f"horizon must exceed the start time {init.t}, got {horizon}")
        self.params = params
        self.times = init.t + _step_times(horizon - init.t, step)
        gaussian = make_generator(seed, stream).standard_normal(len(self.times) - 1)
        self.increments = np.sqrt(np.diff(self.times)) * gaussian
        self.q = float(init.q)
        self.p = float(init.p)  # type: ignore[arg-type]
        self.kappa = init.kappa.copy()
        self.absorbed = bool(init.absorbed)
        self.absorbed_at: float | None = init.t if self.absorbed else None
        self.t = float(init.t)

    @property
    def steps(self) -> int:
        return len(self.increments)

    def advance(self, i: int) -> None:
        """Take step ``i`` from ``times[i]`` to ``times[i + 1]``"""
        h = self.times[i + 1] - self.times[i]
        params = self.params
        q, p = self.q, self.p

        connect, disconnect = switching_rates(q, params)
        total = connect + disconnect
        if total > 0:
            target = connect / total
            decay = math.exp(-params.rho * total * h)
            self.kappa -= target
            self.kappa *= decay
            self.kappa += target
            self.p = target + (p - target) * decay

        if not self.absorbed:
            q_next = q + math.sqrt(max(2.0 * params.eta * p * q * (1.0 - q), 0.0)) * self.increments[i]
            if q_next <= 0.0 or q_next >= 1.0:
                q_next = 0.0 if q_next <= 0.0 else 1.0
                self.absorbed = True
                self.absorbed_at = float(self.times[i + 1])
            self.q = q_next

        self.t = float(self.times[i + 1])
        gap = abs(self.p - float(self.kappa.mean()))
        if gap > GRID_TOLERANCE:
            raise SimulationError(f"edge density drifted {gap:.3g} from the kernel mean at t={self.t}")
        if not -GRID_TOLERANCE <= self.p <= 1.0 + GRID_TOLERANCE:
            raise SimulationError(f"edge density left [0, 1] at t={self.t}: {self.p}")

    def state(self) -> LimitState:
        return LimitState(q=self.q, kappa=self.kappa.copy(), t=self.t, p=self.p, absorbed=self.absorbed)

    def record(self) -> dict[str, float]:
        concordant, discordant = concordant_discordant(self.p, self.q)
        return {"q": self.q, "p": self.p, "C": concordant, "D": discordant, "D_count": math.nan}


def _due(grid: Sequence[float], index: int, t_next: float, tolerance: float) -> bool:
    return index < len(grid) and grid[index] < t_next - tolerance


def integrate_limit(
    init: LimitState,
    params: ModelParams,
    horizon: float,
    step: float = 1e-3,
    seed: int = 0,
    stream: int = 0,
    checkpoints: ArrayLike | int | None = None,
    record_kernels: bool = False,
) -> Trajectory:
    """Integrate the limit system and record (t, q, p, C, D) at the checkpoints

    Checkpoints see the state at the last step time at or before them. ``D_count`` has no
    meaning in the limit and is left empty so the table matches the finite-n schema.
    """
    integrator = LimitIntegrator(init, params, horizon, step, seed, stream)
    grid = checkpoint_grid(horizon, checkpoints, start=init.t)
    trajectory = Trajectory(
        columns=SCALAR_COLUMNS,
        metadata={"params": params.as_dict(), "seed": seed, "stream": stream, "step": step},
    )

    def record(t: float) -> None:
        snapshot = integrator.state().graphon() if record_kernels else None
        trajectory.append(t, integrator.record(), snapshot)

    tolerance = 1e-9 * step
    index = 0
    for i in range(integrator.steps):
        while _due(grid, index, integrator.times[i + 1], tolerance):
            record(grid[index])
            index += 1
        integrator.advance(i)
    while index < len(grid):
        record(grid[index])
        index += 1
    trajectory.metadata["absorbed_at"] = integrator.absorbed_at
    return trajectory


class Estimate(NamedTuple):
    value: float
    stderr: float


def _fisher_wright_survival(
    q0: float, increments: Sequence[float], samples: int, rng: np.random.Generator
) -> NDArray[np.bool_]:
    """Paths of ``dq = sqrt(2 q (1 - q)) dW`` on the given clock increments; True where never absorbed"""
    q = np.full(samples, q0)
    alive = np.ones(samples, dtype=bool)
    for dt in increments:
        z = rng.standard_normal(samples)
        moved = q + np.sqrt(np.maximum(2.0 * q * (1.0 - q) * dt, 0.0)) * z
        q = np.where(alive, moved, q)
        alive &= (q > 0.0) & (q < 1.0)
    return alive


def _integrator_survival(
    q0: float, p0: float, params: ModelParams, horizon: float, samples: int, step: float, seed: int
) -> NDArray[np.bool_]:
    """Limit paths from a constant kernel, one stream each; True where q never left (0, 1)"""
    init = LimitState.constant(p0, q0, m=1)
    alive = np.zeros(samples, dtype=bool)
    for sample in range(samples):
        integrator = LimitIntegrator(init, params, horizon, step, seed, stream=DIRECT_STREAM_OFFSET + sample)
        for i in range(integrator.steps):
            integrator.advance(i)
            if integrator.absorbed:
                break
        alive[sample] = not integrator.absorbed
    return alive


def polarisation_probability(
    p0: float,
    params: ModelParams,
    q0: float = 0.5,
    samples: int = 4000,
    step: float = 1e-3,
    seed: int = 0,
    method: Literal["time_change", "direct"] = "time_change",
) -> Estimate:
    """Probability that colours freeze before consensus when edges only die

    With ``s_c0 = s_d0 = 0`` and ``s_c1 = s_d1 = s1`` the edge density decays as
    ``p0 exp(-rho s1 t)`` and the colour density is a standard Fisher-Wright diffusion run on the
    clock ``eta * int p``, which stops at ``eta p0 / (rho s1)``.

    ``time_change`` runs the standard diffusion to that budget in clock steps of ``step``.
    ``direct`` runs ``LimitIntegrator`` paths from the constant kernel ``p0`` in real-time steps of
    ``step`` until the remaining clock budget drops below ``1e-3 * step``, and counts the paths
    whose colour density was never absorbed. The two use independent streams.
    """
    if not (params.s_c0 == 0 and params.s_d0 == 0 and params.s_c1 == params.s_d1 and params.s_c1 > 0):
        raise UsageError("polarisation estimate needs s_c0 = s_d0 = 0 and s_c1 = s_d1 > 0")
    if not 0.0 < q0 < 1.0:
        raise UsageError(f"initial colour density must lie in (0, 1), got {q0}")
    if not 0.0 <= p0 <= 1.0:
        raise UsageError(f"initial edge density must lie in [0, 1], got {p0}")
    if method not in ("time_change", "direct"):
        raise UsageError(f"unknown estimator {method!r}")
    if p0 == 0.0:
        return Estimate(1.0, 0.0)
    decay_rate = params.rho * params.s_c1
    budget = params.eta * p0 / decay_rate

    if method == "time_change":
        full = int(budget // step)
        clock = [step] * full
        if budget - full * step > 0:
            clock.append(budget - full * step)
        alive = _fisher_wright_survival(q0, clock, samples, make_generator(seed, 0))
    else:
        tail = 1e-3 * step
        horizon = max(step, math.log(max(budget / tail, 1.0)) / decay_rate)
        alive = _integrator_survival(q0, p0, params, horizon, samples, step, seed)

    value = float(alive.mean())
    logger.debug("%s estimate at p0=%g: %.4f from %d paths", method, p0, value, samples)
    return Estimate(value, math.sqrt(value * (1.0 - value) / samples))


def motif_flow(
    motifs: Sequence[Motif],
    init: LimitState,
    params: ModelParams,
    horizon: float,
    step: float = 1e-3,
    seed: int = 0,
    stream: int = 0,
    checkpoints: ArrayLike | int | None = None,
) -> Trajectory:
    """Integrate the coupled flow of coloured motif densities along the limit path

    The motif list is closed under edge deletion first. Each density ``x_F`` follows the drift
    from edge switching on its edges plus the Ito correction of ``q^w (1 - q)^b``, with diffusion
    ``x_F (w (1 - q) - b q) sqrt(2 eta p / (q (1 - q)))`` on the same Gaussian increments as the
    colour density. The Ito correction is applied on the squared increment, which keeps the flow
    within O(step) of ``q^w (1 - q)^b t(kappa)``.

    Columns hold the flow value under each motif label and the directly evaluated density under
    ``label:direct``. The flow freezes when the colour density is absorbed.
    """
    if not 0.0 < init.q < 1.0:
        raise UsageError(f"motif flow needs an interior colour density, got {init.q}")
    closed = close_under_edge_deletion(motifs)
    position = {m.canonical_key: i for i, m in enumerate(closed)}
    deleted = [[position[m.remove_edge(a, b).canonical_key] for a, b in m.sorted_edges()] for m in closed]
    whites = np.array([m.white_count for m in closed], dtype=np.float64)
    blacks = np.array([m.black_count for m in closed], dtype=np.float64)
    max_size = max(m.k for m in closed)

    def direct(q: float, kappa: NDArray[np.float64]) -> NDArray[np.float64]:
        m = kappa.shape[0]
        graphon = ColouredGraphon(np.clip(kappa, 0.0, 1.0), np.full(m, q))
        shapes = np.array([uncoloured_density(graphon, motif, max_size) for motif in closed])
        return q**whites * (1.0 - q) ** blacks * shapes

    integrator = LimitIntegrator(init, params, horizon, step, seed, stream)
    grid = checkpoint_grid(horizon, checkpoints, start=init.t)
    labels = [m.label for m in closed]
    trajectory = Trajectory(
        columns=("q", "p", *labels, *(f"{label}:direct" for label in labels)),
        metadata={"params": params.as_dict(), "seed": seed, "stream": stream, "step": step},
    )

    x = direct(integrator.q, integrator.kappa)
    frozen = False

    def record(t: float) -> None:
        values = {"q": integrator.q, "p": integrator.p}
        values.update(zip(labels, x.tolist(), strict=True))
        exact = direct(integrator.q, integrator.kappa)
        values.update(zip((f"{label}:direct" for label in labels), exact.tolist(), strict=True))
        trajectory.append(t, values)

    tolerance = 1e-9 * step
    index = 0
    for i in range(integrator.steps):
        while _due(grid, index, integrator.times[i + 1], tolerance):
            record(grid[index])
            index += 1
        if not frozen:
            h = integrator.times[i + 1] - integrator.times[i]
            dw = integrator.increments[i]
            q, p = integrator.q, integrator.p
            connect, disconnect = switching_rates(q, params)
            edge = np.array(
                [
                    sum(connect * (x[j] - x[f]) - disconnect * x[f] for j in deleted[f])
                    for f in range(len(closed))
                ]
            )
            vertex = (
                params.eta
                * p
                * x
                * (
                    whites * (whites - 1) * (1 - q) / q
                    - 2 * whites * blacks
                    + blacks * (blacks - 1) * q / (1 - q)
                )
            )
            diffusion = x * (whites * (1 - q) - blacks * q) * math.sqrt(2 * params.eta * p / (q * (1 - q)))
            x = x + params.rho * edge * h + diffusion * dw + vertex * dw * dw
        integrator.advance(i)
        if integrator.absorbed and not frozen:
            frozen = True
            warnings.warn(
                f"colour density absorbed at t={integrator.absorbed_at}; motif flow frozen from there",
                AbsorptionWarning,
                stacklevel=2,
            )
    while index < len(grid):
        record(grid[index])
        index += 1
    trajectory.metadata["absorbed_at"] = integrator.absorbed_at
    trajectory.metadata["motifs"] = labels
    return trajectory


def flow_gap(trajectory: Trajectory) -> float:
    """Largest gap between flow and direct densities over checkpoints before absorption"""
    labels = trajectory.metadata["motifs"]
    absorbed_at = trajectory.metadata.get("absorbed_at")
    times = trajectory.time_array
    keep = times < absorbed_at if absorbed_at is not None else np.ones(times.size, dtype=bool)
    gaps = [np.abs(trajectory.column(label) - trajectory.column(f"{label}:direct"))[keep] for label in labels]
    return float(max((g.max() for g in gaps if g.size), default=0.0))
