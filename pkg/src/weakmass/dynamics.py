"""Coupled internal/external evolution under the mass-energy Hamiltonian.

Internal level |e> carries the factor ``1 - g0`` on the kinetic term and
``1 + g0`` on the gravitational potential; |g> carries neither. The
horizontal problem is diagonal in momentum and is evolved by exact phase
multiplication. The vertical problem with gravity uses Strang split-step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .hilbert import (
    CLIP_TOL,
    HBAR,
    MASS,
    GridError,
    JointState,
    PacketClippedError,
    WavePacket,
    as_momentum,
    as_position,
    to_momentum,
    to_position,
)

PERTURBATIVE_LIMIT = 0.1


class PerturbativeWarning(UserWarning):
    """First-order treatment is outside its validity range."""


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class CouplingParams:
    g0: float
    omega_t: float
    t: float
    gbar: float = 0.0

    def __post_init__(self):
        if self.g0 < 0:
            raise ValueError("g0 must be non-negative")

    def kinetic_coupling_phase(self, p_max: float) -> float:
        """g0 * p_max^2 t / (2 m hbar): the largest phase the coupling imprints."""
        return self.g0 * p_max**2 * abs(self.t) / (2 * MASS * HBAR)

    def perturbative(self, p_max: float) -> bool:
        return self.kinetic_coupling_phase(p_max) <= PERTURBATIVE_LIMIT


@dataclass(frozen=True)
class EffectiveG:
    """G = m gbar z + p_z gbar t - m (gbar t)^2 / 3."""

    gbar: float
    t: float

    def apply(self, packet: WavePacket) -> WavePacket:
        if self.gbar == 0.0:
            return packet.scaled(0.0)
        pos = as_position(packet)
        z = pos.grid.values
        out = MASS * self.gbar * z * pos.amplitudes
        out += self.gbar * self.t * _apply_p(pos).amplitudes
        out -= MASS * (self.gbar * self.t) ** 2 / 3 * pos.amplitudes
        res = WavePacket(pos.grid, out)
        return res if packet.axis_kind == "position" else to_momentum(res)


def _apply_p(pos: WavePacket, power: int = 1) -> WavePacket:
    mom = to_momentum(pos)
    return to_position(WavePacket(mom.grid, mom.amplitudes * mom.grid.values**power))


def _kinetic(pos: WavePacket) -> np.ndarray:
    return _apply_p(pos, 2).amplitudes / (2 * MASS)


def evolve_exact_x(state: JointState, params: CouplingParams) -> JointState:
    """Exact evolution with gravity off: per-momentum phases, all orders in g0."""
    if params.gbar != 0.0:
        raise ValueError("evolve_exact_x requires gbar = 0; use evolve_split_step_z")
    if state.grid.axis_kind != "momentum":
        raise GridError("evolve_exact_x needs a momentum-space state")
    p = state.grid.values
    kin = p**2 * params.t / (2 * MASS * HBAR)
    phase_g = np.exp(-1j * kin)
    phase_e = np.exp(-1j * (params.omega_t + (1 - params.g0) * kin))
    return JointState(
        WavePacket(state.grid, state.comp_g.amplitudes * phase_g),
        WavePacket(state.grid, state.comp_e.amplitudes * phase_e),
    )


def _split_step(
    pos: WavePacket,
    kin_factor: float,
    pot_factor: float,
    gbar: float,
    t: float,
    n_steps: int,
) -> WavePacket:
    """Strang steps for H = kin_factor p^2/2m + pot_factor m gbar z."""
    dt = t / n_steps
    z = pos.grid.values
    p = pos.grid.conjugate().values
    half_kin = np.fft.ifftshift(np.exp(-0.5j * kin_factor * p**2 * dt / (2 * MASS * HBAR)))
    pot = np.fft.ifftshift(np.exp(-1j * pot_factor * MASS * gbar * z * dt / HBAR))
    # work in unshifted FFT order for the whole loop
    psi = np.fft.fft(np.fft.ifftshift(pos.amplitudes))
    for _ in range(n_steps):
        psi *= half_kin
        psi = np.fft.fft(np.fft.ifft(psi) * pot)
        psi *= half_kin
    return WavePacket(pos.grid, np.fft.fftshift(np.fft.ifft(psi)))


def _check_clipping(state: JointState) -> None:
    for comp in (state.comp_g, state.comp_e):
        for rep in (as_position(comp), as_momentum(comp)):
            if rep.edge_weight() > CLIP_TOL * max(comp.norm2(), 1e-300):
                raise PacketClippedError(
                    f"{rep.axis_kind} edge weight {rep.edge_weight():.2e} exceeds tolerance"
                )


def evolve_split_step_z(
    state: JointState,
    params: CouplingParams,
    n_steps: int,
    check_convergence: bool = False,
    convergence_tol: float = 1e-6,
) -> JointState:
    """Split-step evolution of both internal components along the gravity axis.

    H_g = p^2/2m + m gbar z and H_e = hbar omega + (1 - g0) p^2/2m + (1 + g0) m gbar z.
    With ``check_convergence`` the run is repeated at twice the step count and
    ``NonConvergenceError`` raised if the states differ by more than
    ``convergence_tol``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    pos_g, pos_e = as_position(state.comp_g), as_position(state.comp_e)
    g0, gbar, t = params.g0, params.gbar, params.t
    out_g = _split_step(pos_g, 1.0, 1.0, gbar, t, n_steps)
    out_e = _split_step(pos_e, 1.0 - g0, 1.0 + g0, gbar, t, n_steps)
    out = JointState(out_g, out_e.scaled(np.exp(-1j * params.omega_t)))
    _check_clipping(out)
    if check_convergence:
        fine = evolve_split_step_z(state, params, 2 * n_steps)
        err = out.distance(fine)
        if err > convergence_tol:
            raise NonConvergenceError(
                f"doubling n_steps={n_steps} changed the state by {err:.2e}"
            )
    if state.grid.axis_kind == "momentum":
        out = out.map(to_momentum)
    return out


def free_propagate(packet: WavePacket, t: float, gbar: float = 0.0, n_steps: int = 1) -> WavePacket:
    """exp(-i (p^2/2m + m gbar z) t / hbar) on a single packet; exact when gbar = 0."""
    if gbar == 0.0:
        mom = as_momentum(packet)
        p = mom.grid.values
        out = WavePacket(mom.grid, mom.amplitudes * np.exp(-1j * p**2 * t / (2 * MASS * HBAR)))
        return out if packet.axis_kind == "momentum" else to_position(out)
    out = _split_step(as_position(packet), 1.0, 1.0, gbar, t, n_steps)
    return out if packet.axis_kind == "position" else to_momentum(out)


# vertical operators on the |e><e| sector, all acting on position-space packets

def apply_h0_z(pos: WavePacket, gbar: float) -> WavePacket:
    z = pos.grid.values
    return WavePacket(pos.grid, _kinetic(pos) + MASS * gbar * z * pos.amplitudes)


def apply_h_zc(pos: WavePacket, gbar: float) -> WavePacket:
    z = pos.grid.values
    return WavePacket(pos.grid, _kinetic(pos) - MASS * gbar * z * pos.amplitudes)


def apply_h_rc(pos: WavePacket) -> WavePacket:
    """Horizontal coupling p_x^2 / 2m on a packet along x."""
    return WavePacket(pos.grid, _kinetic(pos))


def commutator(apply_a, apply_b, pos: WavePacket) -> WavePacket:
    return apply_a(apply_b(pos)) - apply_b(apply_a(pos))


@dataclass(frozen=True)
class BCHCoefficients:
    """Polynomial c_kin p^2/2m + c_z z + c_pz p + c_const on the |e> sector."""

    c_kin: float
    c_z: float
    c_pz: float
    c_const: float

    def apply(self, packet: WavePacket) -> WavePacket:
        pos = as_position(packet)
        z = pos.grid.values
        out = self.c_kin * _kinetic(pos)
        out = out + self.c_z * z * pos.amplitudes
        out = out + self.c_pz * _apply_p(pos).amplitudes
        out = out + self.c_const * pos.amplitudes
        res = WavePacket(pos.grid, out)
        return res if packet.axis_kind == "position" else to_momentum(res)


def bch_transformed_zc(params: CouplingParams, time_s: float) -> BCHCoefficients:
    """Interaction-picture vertical coupling H_zc - gbar t (2 p_z - m gbar t)."""
    g = params.gbar
    return BCHCoefficients(
        c_kin=1.0,
        c_z=-MASS * g,
        c_pz=-2.0 * g * time_s,
        c_const=MASS * (g * time_s) ** 2,
    )


def heisenberg_sandwich(pos: WavePacket, gbar: float, time_s: float, n_steps: int) -> WavePacket:
    """exp(i H0 t) H_zc exp(-i H0 t) |pos> with split-step propagators."""
    fwd = _split_step(pos, 1.0, 1.0, gbar, time_s, n_steps)
    mid = apply_h_zc(fwd, gbar)
    return _split_step(mid, 1.0, 1.0, gbar, -time_s, n_steps)


def _is_product(state: JointState, tol: float = 1e-10) -> bool:
    a, b = state.comp_g, state.comp_e
    na, nb = a.norm2(), b.norm2()
    if na == 0 or nb == 0:
        return True
    return abs(abs(a.inner(b)) ** 2 - na * nb) <= tol * na * nb


def effective_hamiltonian(packet: WavePacket, params: CouplingParams) -> WavePacket:
    """H_eff = p^2/2m - G applied to a packet."""
    pos = as_position(packet)
    out = WavePacket(pos.grid, _kinetic(pos)) - EffectiveG(params.gbar, params.t).apply(pos)
    return out if packet.axis_kind == "position" else to_momentum(out)


def dyson_first_order(state: JointState, params: CouplingParams, n_steps: int = 1) -> JointState:
    """U0 [1 + i g0 t H_eff |e><e| / hbar] |psi_i>, dropping O(g0^2).

    U0 carries the internal phase on |e> and free fall; it is exact when gravity
    is off and split-step otherwise.
    """
    if not _is_product(state):
        raise ValueError("dyson_first_order expects a product internal x external state")
    if params.gbar != 0.0 and n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    corr = effective_hamiltonian(state.comp_e, params).scaled(1j * params.g0 * params.t / HBAR)
    comp_e = state.comp_e + corr
    g = free_propagate(state.comp_g, params.t, params.gbar, n_steps)
    e = free_propagate(comp_e, params.t, params.gbar, n_steps).scaled(np.exp(-1j * params.omega_t))
    return JointState(g, e)


def warn_if_nonperturbative(params: CouplingParams, p_max: float) -> None:
    if not params.perturbative(p_max):
        warnings.warn(
            f"g0 kinetic phase {params.kinetic_coupling_phase(p_max):.3g} exceeds "
            f"{PERTURBATIVE_LIMIT}", PerturbativeWarning, stacklevel=2,
        )
