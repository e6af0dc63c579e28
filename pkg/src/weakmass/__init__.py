"""Weak-measurement simulation of internal-energy / kinetic coupling in atom interferometry."""

from .detector import NoiseModel, recover_g0, simulate_counts
from .dynamics import CouplingParams, dyson_first_order, evolve_exact_x, evolve_split_step_z
from .hilbert import Grid1D, JointState, QubitState, WavePacket, make_gaussian
from .kd import KDParams, apply_kd_phase, bessel_spectrum, theta_moment
from .pipeline import CALCIUM, RunConfig, derive_groups, run_pipeline
from .weakmeas import (
    PostSelection,
    WeakValue,
    exact_class_oracle,
    p_n_first_order,
    p_s_first_order,
    weak_value_from_rotation,
)

__version__ = "0.1.0"

__all__ = [
    "CALCIUM",
    "CouplingParams",
    "Grid1D",
    "JointState",
    "KDParams",
    "NoiseModel",
    "PostSelection",
    "QubitState",
    "RunConfig",
    "WavePacket",
    "WeakValue",
    "apply_kd_phase",
    "bessel_spectrum",
    "derive_groups",
    "dyson_first_order",
    "evolve_exact_x",
    "evolve_split_step_z",
    "exact_class_oracle",
    "make_gaussian",
    "p_n_first_order",
    "p_s_first_order",
    "recover_g0",
    "run_pipeline",
    "simulate_counts",
    "theta_moment",
    "weak_value_from_rotation",
]
