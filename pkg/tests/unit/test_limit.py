import math
import warnings
from typing import Any

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from coevonet.exceptions import AbsorptionWarning, UsageError
from coevonet.graphon import ColouredGraphon
from coevonet.limit import (
    LimitIntegrator,
    LimitState,
    concordant_discordant,
    drift_V,
    equilibrium_p,
    flow_gap,
    integrate_limit,
    motif_flow,
    polarisation_probability,
    switching_rates,
)
from coevonet.model import BLACK, WHITE, ModelParams
from coevonet.motifs import Motif


@pytest.fixture
def consensus() -> ModelParams:
    return ModelParams.consensus_profile()


@pytest.fixture
def polarising() -> ModelParams:
    return ModelParams.polarisation_profile()


@pytest.fixture
def equal_rates() -> ModelParams:
    return ModelParams(eta=1.0, rho=1.0, s_c0=1.0, s_c1=1.0, s_d0=1.0, s_d1=1.0)


def test_switching_rates(consensus: ModelParams) -> None:
    assert switching_rates(1.0, consensus) == (1.5, 0.5)
    assert switching_rates(0.5, consensus) == pytest.approx((1.1, 1.25))


def test_drift_V(consensus: ModelParams) -> None:
    assert drift_V(0.5, 0.5, consensus) == pytest.approx(-0.075)


@pytest.mark.parametrize("p,q", [(0.0, 0.3), (0.4, 0.5), (1.0, 0.9)])
def test_drift_V__equal_switching(p: float, q: float) -> None:
    params = ModelParams(eta=1.0, rho=1.0, s_c0=0.8, s_c1=0.3, s_d0=0.8, s_d1=0.3)
    assert drift_V(p, q, params) == pytest.approx(0.8 * (1 - p) - 0.3 * p)


def test_equilibrium_p(consensus: ModelParams) -> None:
    for q in (0.0, 1.0):
        assert equilibrium_p(q, consensus) == (pytest.approx(0.75), "interior")
    mixed = equilibrium_p(0.5, consensus)
    assert mixed.p == pytest.approx(1.1 / 2.35)
    assert drift_V(mixed.p, 0.5, consensus) == pytest.approx(0.0, abs=1e-12)


def test_equilibrium_p__degenerate(consensus: ModelParams) -> None:
    assert equilibrium_p(0.5, consensus.replace(s_c0=0.0, s_c1=0.0)).regime == "degenerate_concordant"
    assert equilibrium_p(0.5, consensus.replace(s_d0=0.0, s_d1=0.0)) == (None, "degenerate_discordant")


concordant_data = [
    pytest.param(0.6, 0.5, (0.3, 0.3), id="balanced colours"),
    pytest.param(0.6, 1.0, (0.6, 0.0), id="consensus"),
    pytest.param(0.0, 0.3, (0.0, 0.0), id="empty"),
]


@pytest.mark.parametrize("p,q,expected", concordant_data)
def test_concordant_discordant(p: float, q: float, expected: tuple[float, float]) -> None:
    assert concordant_discordant(p, q) == pytest.approx(expected)


def test_limit_state() -> None:
    state = LimitState.constant(0.3, 0.0, m=4)
    assert state.p == pytest.approx(0.3)
    assert state.absorbed
    graphon = LimitState.from_graphon(ColouredGraphon(np.full((2, 2), 0.5), [1.0, 0.0])).graphon()
    assert_allclose(graphon.colour, [0.5, 0.5])


def test_limit_state__error() -> None:
    with pytest.raises(UsageError, match="colour density must lie in"):
        LimitState.constant(0.3, 1.5)
    with pytest.raises(UsageError, match="does not match the kernel mean"):
        LimitState(q=0.5, kappa=np.full((2, 2), 0.4), p=0.6)


def test_integrate_limit__equal_rates(equal_rates: ModelParams) -> None:
    init = LimitState.constant(0.2, 0.5, m=4)
    trajectory = integrate_limit(init, equal_rates, 1.0, step=0.125, seed=3, checkpoints=8)
    times = trajectory.time_array
    assert_allclose(trajectory.column("p"), 0.5 - 0.3 * np.exp(-2.0 * times), atol=1e-8)


@pytest.mark.parametrize("q0", [pytest.param(0.0, id="all black"), pytest.param(1.0, id="all white")])
def test_integrate_limit__absorbed_start(consensus: ModelParams, q0: float) -> None:
    trajectory = integrate_limit(LimitState.constant(0.4, q0, m=4), consensus, 0.5, step=0.01, checkpoints=5)
    assert_allclose(trajectory.column("q"), q0)
    assert trajectory.metadata["absorbed_at"] == 0.0
    assert_allclose(trajectory.column("p")[-1], 0.75 + (0.4 - 0.75) * math.exp(-1.1 * 2.0 * 0.5))


def test_integrate_limit__homogenised_split(consensus: ModelParams) -> None:
    trajectory = integrate_limit(LimitState.constant(0.5, 0.5, m=8), consensus, 1.0, step=1e-3, seed=1)
    q, p = trajectory.column("q"), trajectory.column("p")
    assert_allclose(trajectory.column("C") - trajectory.column("D"), p * (2 * q - 1) ** 2, atol=1e-12)
    assert np.isnan(trajectory.column("D_count")).all()
    assert trajectory.columns == ("q", "p", "C", "D", "D_count")


def test_integrate_limit__kernels(consensus: ModelParams) -> None:
    init = LimitState.from_graphon(ColouredGraphon(np.array([[0.1, 0.9], [0.9, 0.1]]), [0.0, 1.0]))
    trajectory = integrate_limit(init, consensus, 0.2, step=0.01, checkpoints=2, record_kernels=True)
    assert trajectory.snapshots is not None
    for t, graphon in zip(trajectory.times, trajectory.snapshots, strict=True):
        assert graphon.edge_density == pytest.approx(trajectory.value_at("p", t))


def test_integrate_limit__reproducible(consensus: ModelParams) -> None:
    init = LimitState.constant(0.5, 0.5, m=4)
    runs = [integrate_limit(init, consensus, 0.5, step=0.01, seed=5, stream=s) for s in (2, 2, 3)]
    assert runs[0].rows == runs[1].rows
    assert runs[0].rows != runs[2].rows


def test_integrate_limit__martingale(consensus: ModelParams) -> None:
    init = LimitState.constant(0.5, 0.4, m=2)
    finals = [
        integrate_limit(init, consensus, 0.5, step=0.01, seed=11, stream=s, checkpoints=1).column("q")[-1]
        for s in range(1000)
    ]
    assert abs(np.mean(finals) - 0.4) <= 3 * np.std(finals, ddof=1) / math.sqrt(len(finals))


def test_integrate_limit__permutation_equivariant(consensus: ModelParams) -> None:
    rng = np.random.default_rng(3)
    kernel = rng.uniform(0, 1, (5, 5))
    kernel = (kernel + kernel.T) / 2
    order = np.array([3, 0, 4, 1, 2])
    p = float(kernel.mean())
    options: dict[str, Any] = {"step": 0.01, "seed": 8, "checkpoints": 4, "record_kernels": True}
    original = integrate_limit(LimitState(q=0.4, kappa=kernel, p=p), consensus, 0.4, **options)
    shuffled = LimitState(q=0.4, kappa=kernel[np.ix_(order, order)], p=p)
    permuted = integrate_limit(shuffled, consensus, 0.4, **options)
    assert original.times == permuted.times
    assert original.column("q").tolist() == permuted.column("q").tolist()
    assert original.column("p").tolist() == permuted.column("p").tolist()
    assert original.snapshots is not None and permuted.snapshots is not None
    for before, after in zip(original.snapshots, permuted.snapshots, strict=True):
        assert_array_equal(before.kernel[np.ix_(order, order)], after.kernel)


def test_integrate_limit__error(consensus: ModelParams) -> None:
    with pytest.raises(UsageError, match="step must be positive"):
        integrate_limit(LimitState.constant(0.5, 0.5, m=2), consensus, 1.0, step=0.0)
    with pytest.raises(UsageError, match="horizon must exceed"):
        integrate_limit(LimitState.constant(0.5, 0.5, m=2), consensus, 0.0)


@pytest.mark.parametrize("method", ["time_change", "direct"])
def test_polarisation_probability__no_edges(polarising: ModelParams, method: str) -> None:
    assert polarisation_probability(0.0, polarising, method=method) == (1.0, 0.0)  # type: ignore[arg-type]


def test_polarisation_probability__monotone(polarising: ModelParams) -> None:
    sparse = polarisation_probability(0.25, polarising, samples=2000, step=1e-2, seed=1)
    dense = polarisation_probability(1.0, polarising, samples=2000, step=1e-2, seed=1)
    assert sparse.value > dense.value + 3 * math.hypot(sparse.stderr, dense.stderr)


def test_polarisation_probability__direct_paths(polarising: ModelParams) -> None:
    """The direct estimate is the share of integrator paths from the constant kernel never absorbed"""
    options: dict[str, Any] = {"samples": 40, "step": 0.05, "seed": 6, "method": "direct"}
    estimate = polarisation_probability(0.5, polarising, **options)
    budget = 0.5 / 2.0
    horizon = math.log(budget / (1e-3 * 0.05)) / 2.0
    survived = 0
    for sample in range(40):
        init = LimitState.constant(0.5, 0.5, m=1)
        integrator = LimitIntegrator(init, polarising, horizon, 0.05, 6, stream=1 + sample)
        for i in range(integrator.steps):
            integrator.advance(i)
        survived += not integrator.absorbed
    assert estimate.value == survived / 40
    assert estimate == polarisation_probability(0.5, polarising, **options)


@pytest.mark.slow
@pytest.mark.parametrize("p0", [0.25, 0.5, 0.75])
def test_polarisation_probability__estimators_agree(polarising: ModelParams, p0: float) -> None:
    options: dict[str, Any] = {"samples": 4000, "step": 1e-2, "seed": 2}
    by_clock = polarisation_probability(p0, polarising, method="time_change", **options)
    direct = polarisation_probability(p0, polarising, method="direct", **options)
    assert abs(by_clock.value - direct.value) <= 2 * math.hypot(by_clock.stderr, direct.stderr)

polarisation_error_data = [
    pytest.param({"params": ModelParams.consensus_profile()}, "needs s_c0 = s_d0 = 0", id="wrong rates"),
    pytest.param({"q0": 1.0}, "initial colour density", id="absorbed start"),
    pytest.param({"p0": 1.5}, "initial edge density", id="bad density"),
    pytest.param({"method": "euler"}, "unknown estimator", id="unknown method"),
]


@pytest.mark.parametrize("changes,message", polarisation_error_data)
def test_polarisation_probability__error(
    polarising: ModelParams, changes: dict[str, object], message: str
) -> None:
    kwargs: dict[str, object] = {"p0": 0.5, "params": polarising, "samples": 10} | changes
    with pytest.raises(UsageError, match=message):
        polarisation_probability(**kwargs)  # type: ignore[arg-type]


def test_motif_flow__white_vertex(consensus: ModelParams) -> None:
    white = Motif.vertex(WHITE)
    init = LimitState.constant(0.5, 0.5, m=4)
    trajectory = motif_flow([white, Motif.edge(WHITE, BLACK)], init, consensus, 0.5, 1e-3)
    absorbed_at = trajectory.metadata["absorbed_at"]
    keep = trajectory.time_array < (absorbed_at if absorbed_at is not None else np.inf)
    assert_allclose(trajectory.column(white.label)[keep], trajectory.column("q")[keep], atol=1e-9)
    assert len(trajectory.metadata["motifs"]) == 3


def test_motif_flow__gap(consensus: ModelParams) -> None:
    motifs = [Motif((WHITE, BLACK, WHITE), {(0, 1), (1, 2)}), Motif.edge(BLACK, BLACK)]
    step = 1e-3
    init = LimitState.from_graphon(ColouredGraphon(np.array([[0.2, 0.6], [0.6, 0.4]]), [0.5, 0.5]))
    trajectory = motif_flow(motifs, init, consensus, 1.0, step, seed=4, checkpoints=20)
    assert flow_gap(trajectory) <= 5 * step


@pytest.mark.slow
def test_motif_flow__gap_halves(consensus: ModelParams) -> None:
    """Halving the step roughly halves the ensemble-mean gap between flow and direct densities"""
    motifs = [Motif((WHITE, BLACK, WHITE), {(0, 1), (1, 2)}), Motif.edge(BLACK, BLACK)]
    init = LimitState.from_graphon(ColouredGraphon(np.array([[0.2, 0.6], [0.6, 0.4]]), [0.5, 0.5]))
    mean_gap = {}
    for step in (1e-3, 5e-4):
        gaps = []
        for stream in range(8):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", AbsorptionWarning)
                trajectory = motif_flow(
                    motifs, init, consensus, 1.0, step, seed=4, stream=stream, checkpoints=20
                )
            gaps.append(flow_gap(trajectory))
        assert max(gaps) <= 5 * step
        mean_gap[step] = float(np.mean(gaps))
    assert 0.3 <= mean_gap[5e-4] / mean_gap[1e-3] <= 0.7


def test_motif_flow__absorbed(consensus: ModelParams) -> None:
    with pytest.raises(UsageError, match="interior colour density"):
        motif_flow([Motif.vertex(WHITE)], LimitState.constant(0.5, 1.0, m=2), consensus, 1.0)


def test_motif_flow__freezes(consensus: ModelParams) -> None:
    fast = consensus.replace(eta=50.0)
    with pytest.warns(AbsorptionWarning, match="motif flow frozen"):
        trajectory = motif_flow([Motif.vertex(WHITE)], LimitState.constant(0.9, 0.95, m=2), fast, 2.0, 1e-3)
    label = Motif.vertex(WHITE).label
    assert trajectory.column(label)[-1] == trajectory.column(label)[-2]
