from coevonet.bmi import BmiCoevolvingNetwork
from coevonet.graphon import ColouredGraphon
from coevonet.limit import LimitState, integrate_limit
from coevonet.model import ColouredGraph, ModelParams
from coevonet.motifs import Motif, MotifCatalog
from coevonet.simulation import SimState, simulate
from coevonet.trajectory import Trajectory

__all__ = [
    "ModelParams",
    "ColouredGraph",
    "Motif",
    "MotifCatalog",
    "ColouredGraphon",
    "SimState",
    "simulate",
    "LimitState",
    "integrate_limit",
    "Trajectory",
    "BmiCoevolvingNetwork",
]
