"""Numerical cross-checks between independent computational routes.

Each check returns plain numbers so the CLI can emit them and tests can
assert on them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    CouplingParams,
    apply_h0_z,
    apply_h_zc,
    bch_transformed_zc,
    commutator,
    dyson_first_order,
    evolve_split_step_z,
    heisenberg_sandwich,
)
from .hilbert import Grid1D, JointState, QubitState, make_gaussian
from .kd import KDParams, bessel_spectrum
from .pipeline import OMEGA_K_SIM, grid_class_distribution
from .weakmeas import PostSelection, exact_class_oracle, first_order_residual

# shared test configuration for the perturbative checks
DEFAULT_QUBIT = (0.6, 0.8)
DEFAULT_THETA = 1.1
DEFAULT_OMEGA_T = 0.7
DEFAULT_OMEGA_K_T = 0.01


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log10(np.asarray(x, float)), np.log10(np.asarray(y, float)), 1)[0])


def _z_packet():
    return make_gaussian(Grid1D(512, 60.0, "position"), 1.0, 0.0, 0.5)


@dataclass(frozen=True)
class DysonResult:
    g0: np.ndarray
    errors: np.ndarray

    @property
    def slope(self) -> float:
        return loglog_slope(self.g0, self.errors)


def dyson_convergence(
    g0_list=(1e-2, 1e-3, 1e-4),
    gbar: float = 1.0,
    t: float = 1.0,
    omega_t: float = 0.3,
    n_steps: int = 1000,
) -> DysonResult:
    """L2 distance between the first-order Dyson state and split-step evolution."""
    packet = _z_packet()
    state = JointState.product(QubitState.from_amplitudes(1, 1), packet)
    errs = []
    for g0 in g0_list:
        params = CouplingParams(g0, omega_t, t, gbar)
        exact = evolve_split_step_z(state, params, n_steps)
        approx = dyson_first_order(state, params, n_steps)
        errs.append(exact.distance(approx))
    return DysonResult(np.asarray(g0_list, float), np.asarray(errs))


@dataclass(frozen=True)
class BCHResult:
    n_steps: int
    halving_change: float
    max_deviation: float
    triple_commutator: float


def bch_check(
    gbar: float = 1.0,
    time_s: float = 1.0,
    n_steps: int = 25,
    halving_tol: float = 1e-8,
    max_steps: int = 1 << 14,
) -> BCHResult:
    """Sandwich exp(iH0t) H_zc exp(-iH0t) on a z-grid against the coefficient record.

    The step count is doubled until a further doubling moves the sandwich by less
    than ``halving_tol``.
    """
    packet = _z_packet()
    prev = heisenberg_sandwich(packet, gbar, time_s, n_steps)
    while True:
        nxt = heisenberg_sandwich(packet, gbar, time_s, 2 * n_steps)
        change = float(np.max(np.abs(nxt.amplitudes - prev.amplitudes)))
        if change < halving_tol or 2 * n_steps >= max_steps:
            break
        prev, n_steps = nxt, 2 * n_steps
    direct = bch_transformed_zc(CouplingParams(0.0, 0.0, time_s, gbar), time_s).apply(packet)
    dev = float(np.max(np.abs(prev.amplitudes - direct.amplitudes)))

    def h0(f):
        return apply_h0_z(f, gbar)

    def hz(f):
        return apply_h_zc(f, gbar)

    def c1(f):
        return commutator(h0, hz, f)

    def c2(f):
        return commutator(h0, c1, f)

    c3 = commutator(h0, c2, packet)
    return BCHResult(n_steps, change, dev, float(np.max(np.abs(c3.amplitudes))))


def oracle_convergence(
    orders=(1, 5, 10),
    g0_list=(1e-6, 1e-5, 1e-4, 1e-3, 1e-2),
    eta: float = 10.0,
    omega_k_t: float = DEFAULT_OMEGA_K_T,
) -> dict[int, tuple[np.ndarray, float]]:
    """|P_n(exact) - P_n(first order)| per g0 and its log-log slope, per class."""
    qubit = QubitState.from_amplitudes(*DEFAULT_QUBIT)
    sel = PostSelection(DEFAULT_THETA)
    spec = bessel_spectrum(KDParams(eta))
    t = omega_k_t / OMEGA_K_SIM
    resid = np.array(
        [first_order_residual(qubit, sel, g0, DEFAULT_OMEGA_T, OMEGA_K_SIM, t, spec) for g0 in g0_list]
    )
    out = {}
    for n in orders:
        col = np.abs(resid[:, int(np.nonzero(spec.orders == n)[0][0])])
        out[int(n)] = (col, loglog_slope(g0_list, col))
    return out


def grid_vs_oracle(
    g0: float = 1e-3,
    eta: float = 10.0,
    delta: float = 15.0,
    n_points: int = 4096,
    n_max: int = 15,
    omega_k_t: float = 1.0,
) -> float:
    """Largest |P_n(grid) - P_n(closed form)| over |n| <= n_max."""
    qubit = QubitState.from_amplitudes(*DEFAULT_QUBIT)
    sel = PostSelection(DEFAULT_THETA)
    orders = np.arange(-n_max, n_max + 1)
    grid = grid_class_distribution(
        qubit, sel, g0, DEFAULT_OMEGA_T, omega_k_t, eta, orders, delta=delta, n_points=n_points
    )
    spec = bessel_spectrum(KDParams(eta))
    exact = exact_class_oracle(qubit, sel, g0, DEFAULT_OMEGA_T, OMEGA_K_SIM, omega_k_t / OMEGA_K_SIM, spec)
    ref = np.array([exact[int(n)] for n in orders])
    return float(np.max(np.abs(grid - ref)))
