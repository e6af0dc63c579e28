"""Weak values, post-selection and momentum-class statistics.

The first-order formulas (``p_s_first_order``, ``p_n_first_order``) are the
perturbative predictions. ``exact_class_oracle`` evaluates the same quantities
to all orders in g0 from the per-class internal phases, so the two can be
checked against each other.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .dynamics import PerturbativeWarning
from .hilbert import HBAR, MASS, JointState, QubitState, WavePacket, as_momentum
from .kd import KDSpectrum

SINGULAR_P_S0 = 1e-10


@dataclass(frozen=True)
class PostSelection:
    """Rotation R = exp[-i theta (|e><g| + |g><e|)] followed by selecting ``selected``."""

    theta: float
    selected: Literal["g", "e"] = "g"

    def __post_init__(self):
        if self.selected not in ("g", "e"):
            raise ValueError("selected must be 'g' or 'e'")

    @property
    def bra(self) -> np.ndarray:
        """Row vector <A_s| = <sel|R in the (|g>, |e>) basis."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        if self.selected == "g":
            return np.array([c, -1j * s])
        return np.array([-1j * s, c])


@dataclass(frozen=True)
class WeakValue:
    re: float
    im: float
    p_s0: float = 1.0

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def near_singular(self) -> bool:
        return self.p_s0 < SINGULAR_P_S0

    @classmethod
    def from_complex(cls, a_w: complex, p_s0: float = 1.0) -> "WeakValue":
        return cls(float(a_w.real), float(a_w.imag), float(p_s0))


@dataclass(frozen=True, eq=False)
class MomentumClassDistribution:
    orders: np.ndarray
    probs: np.ndarray
    p_s: float
    flags: tuple[str, ...] = field(default=())

    @property
    def breakdown(self) -> bool:
        return bool(np.any(self.probs < 0))

    def __getitem__(self, n: int) -> float:
        hit = np.nonzero(self.orders == n)[0]
        return float(self.probs[hit[0]]) if len(hit) else 0.0

    def as_dict(self) -> dict[int, float]:
        return {int(n): float(p) for n, p in zip(self.orders, self.probs)}


# generic algebra

def weak_value(post: np.ndarray, observable: np.ndarray, pre: np.ndarray) -> complex:
    """<A_s|A|A_i> / <A_s|A_i> for vectors ``post``, ``pre`` (kets)."""
    post = np.asarray(post, dtype=complex)
    pre = np.asarray(pre, dtype=complex)
    return complex(np.vdot(post, observable @ pre) / np.vdot(post, pre))


def correlation_term(b_i: np.ndarray, m: np.ndarray, b: np.ndarray) -> complex:
    """M_B = <B_i|M B|B_i> - <B_i|M|B_i><B_i|B|B_i>."""
    b_i = np.asarray(b_i, dtype=complex)
    return complex(
        np.vdot(b_i, m @ b @ b_i) - np.vdot(b_i, m @ b_i) * np.vdot(b_i, b @ b_i)
    )


def generic_weak_expectation(a_w: WeakValue | complex, g: float, m_i: float, m_b: complex) -> float:
    """Post-selected <M> to first order: m_i + 2 g Im(A_w M_B)."""
    aw = a_w.value if isinstance(a_w, WeakValue) else complex(a_w)
    if abs(g * aw) > 0.1:
        warnings.warn(f"|g A_w| = {abs(g * aw):.3g} is not small", PerturbativeWarning, stacklevel=2)
    return float(m_i + 2 * g * (aw * complex(m_b)).imag)


# scheme-specific weak value

def evolved_internal(initial: QubitState, omega_t: float) -> np.ndarray:
    """|A_i'> = exp(-i omega t |e><e|) |A_i>."""
    return np.array([initial.amp_g, initial.amp_e * np.exp(-1j * omega_t)])


def weak_value_from_rotation(initial: QubitState, omega_t: float, theta: float) -> WeakValue:
    """A_w = beta / (beta + i e^{i omega t} alpha cot theta) for the <g|R selection.

    Written with sin/cos rather than cot so theta = n*pi is a regular point.
    An exactly vanishing denominator returns an infinite weak value with
    p_s0 = 0.
    """
    alpha, beta = initial.amp_g, initial.amp_e
    s, c = math.sin(theta), math.cos(theta)
    num = beta * s
    den = beta * s + 1j * np.exp(1j * omega_t) * alpha * c
    p_s0 = abs(alpha * c - 1j * beta * s * np.exp(-1j * omega_t)) ** 2
    if den == 0:
        return WeakValue(math.inf, math.inf, 0.0)
    return WeakValue.from_complex(complex(num / den), p_s0)


def weak_value_general(initial: QubitState, omega_t: float, sel: PostSelection) -> WeakValue:
    """A_w = <A_s|e><e|A_i'> / <A_s|A_i'> for either selection."""
    bra = sel.bra
    ket = evolved_internal(initial, omega_t)
    a = complex(bra @ ket)
    b = complex(bra[1] * ket[1])
    p_s0 = abs(a) ** 2
    if a == 0:
        return WeakValue(math.inf, math.inf, 0.0)
    return WeakValue.from_complex(b / a, p_s0)


def omega_t_for_target(initial: QubitState, theta: float, target_im: float) -> float:
    """Internal phase omega*t in [0, 2pi) at which Im A_w equals ``target_im``.

    As omega*t varies, w = 1/A_w = 1 + C e^{i omega t} with
    C = i alpha cos(theta) / (beta sin(theta)) runs round a circle, and
    Im(1/w) = T is the circle |w|^2 + Im(w)/T = 0. The answer is read off
    their intersection; of the two roots the one with the larger zeroth-order
    post-selection probability is returned.
    """
    alpha, beta = initial.amp_g, initial.amp_e
    s, c = math.sin(theta), math.cos(theta)
    if beta * s == 0 or alpha * c == 0 or target_im == 0:
        raise ValueError("Im A_w cannot be tuned by omega*t for this state and rotation")
    big_c = 1j * alpha * c / (beta * s)
    R = abs(big_c)
    r = 1.0 / (2.0 * abs(target_im))
    c1 = np.array([1.0, 0.0])
    c2 = np.array([0.0, -1.0 / (2.0 * target_im)])
    d = float(np.hypot(*(c2 - c1)))
    if d > R + r or d < abs(R - r):
        raise ValueError(f"no internal phase reaches Im A_w = {target_im}")
    along = (R**2 - r**2 + d**2) / (2 * d)
    h = math.sqrt(max(R**2 - along**2, 0.0))
    base = c1 + along * (c2 - c1) / d
    perp = np.array([-(c2 - c1)[1], (c2 - c1)[0]]) / d
    best, best_ps = None, -1.0
    for sign in (1.0, -1.0):
        wx, wy = base + sign * h * perp
        phase = float(np.angle((complex(wx, wy) - 1.0) / big_c)) % (2 * math.pi)
        aw = weak_value_from_rotation(initial, phase, theta)
        if aw.p_s0 > best_ps:
            best, best_ps = phase, aw.p_s0
    return best


# post-selection

def postselect(state: JointState, sel: PostSelection) -> WavePacket:
    """Unnormalised external packet <A_s|state>; its norm^2 is the success probability."""
    bra = sel.bra
    return state.comp_g.scaled(bra[0]) + state.comp_e.scaled(bra[1])


def yz_gaussian_term(
    delta_y: float,
    delta_z: float,
    gbar: float,
    t: float,
    z0: float = 0.0,
    pz0: float = 0.0,
) -> float:
    """<p_y^2 + p_z^2 - 2m G> for Gaussian y/z packets of widths delta_y, delta_z."""
    sy = HBAR / (2 * delta_y)
    sz = HBAR / (2 * delta_z)
    g_mean = MASS * gbar * z0 + pz0 * gbar * t - MASS * (gbar * t) ** 2 / 3
    return sy**2 + sz**2 + pz0**2 - 2 * MASS * g_mean


def p_s_first_order(
    a_w: WeakValue,
    g0: float,
    omega_k: float,
    t: float,
    vartheta: float,
    yz_term: float = 0.0,
) -> float:
    """P_s = p_s0 [1 - g0 omega_k t vartheta A_w^i - g0 t A_w^i <yz> / (m hbar)]."""
    shift = g0 * omega_k * t * vartheta * a_w.im + g0 * t * a_w.im * yz_term / (MASS * HBAR)
    return a_w.p_s0 * (1.0 - shift)


def p_n_first_order(
    a_w: WeakValue,
    g0: float,
    omega_k: float,
    t: float,
    spectrum: KDSpectrum,
    yz_term: float = 0.0,
) -> MomentumClassDistribution:
    """P_n = p_s0 J_n^2 (1 - g0 omega_k t n^2 A_w^i) over the spectrum's classes."""
    n = spectrum.orders.astype(float)
    j2 = spectrum.probabilities
    shift = g0 * omega_k * t * n**2 * a_w.im + g0 * t * a_w.im * yz_term / (MASS * HBAR)
    probs = a_w.p_s0 * j2 * (1.0 - shift)
    vartheta = float(np.sum(n**2 * j2))
    p_s = p_s_first_order(a_w, g0, omega_k, t, vartheta, yz_term)
    flags = []
    n_max = float(np.max(np.abs(n))) if len(n) else 0.0
    if abs(g0 * omega_k * t * n_max**2 * a_w.im) >= 1.0:
        flags.append("perturbative-limit")
    if np.any(probs < 0):
        flags.append("negative-probability")
    if a_w.near_singular:
        flags.append("near-singular")
    return MomentumClassDistribution(spectrum.orders.copy(), probs, p_s, tuple(flags))


def reshaped_x_state(packet: WavePacket, a_w: WeakValue, g0: float, t: float) -> WavePacket:
    """Apply exp(-i t_r p^2 / 2m hbar) exp(-t_i p^2 / 2m hbar) in momentum space."""
    mom = as_momentum(packet)
    t_r = t * (1 - g0 * a_w.re)
    t_i = g0 * t * a_w.im
    p2 = mom.grid.values**2 / (2 * MASS * HBAR)
    return WavePacket(mom.grid, mom.amplitudes * np.exp(-1j * t_r * p2 - t_i * p2))


# all-orders oracle

def _class_phases(g0: float, omega_k: float, t: float, orders: np.ndarray) -> np.ndarray:
    # g0 * p_n^2 t / (2 m hbar) with p_n = 2 n hbar k, i.e. g0 omega_k t n^2 / 2
    return 0.5 * g0 * omega_k * t * orders.astype(float) ** 2


def _selection_amplitudes(initial: QubitState, sel: PostSelection, omega_t: float) -> tuple[complex, complex]:
    """(a, b) = (<A_s|A_i'>, <A_s|e><e|A_i'>)."""
    bra = sel.bra
    ket = evolved_internal(initial, omega_t)
    return complex(bra @ ket), complex(bra[1] * ket[1])


def exact_class_oracle(
    initial: QubitState,
    sel: PostSelection,
    g0: float,
    omega_t: float,
    omega_k: float,
    t: float,
    spectrum: KDSpectrum,
) -> MomentumClassDistribution:
    """Per-class post-selection probabilities to all orders in g0.

    Class n evolves with internal phases p_n^2 t/2m hbar on |g> and
    omega t + (1 - g0) p_n^2 t/2m hbar on |e>. Pulling out the common kinetic
    phase leaves amplitude phi(n) [a + b (e^{i eps_n} - 1)] with
    eps_n = g0 omega_k t n^2 / 2. The bracket is evaluated with
    e^{i eps} - 1 = -2 sin^2(eps/2) + i sin(eps), which keeps full relative
    precision for tiny eps.
    """
    a, b = _selection_amplitudes(initial, sel, omega_t)
    eps = _class_phases(g0, omega_k, t, spectrum.orders)
    w = -2.0 * np.sin(eps / 2) ** 2 + 1j * np.sin(eps)
    probs = spectrum.probabilities * np.abs(a + b * w) ** 2
    flags = ("near-singular",) if abs(a) ** 2 < SINGULAR_P_S0 else ()
    return MomentumClassDistribution(spectrum.orders.copy(), probs, float(np.sum(probs)), flags)


def first_order_residual(
    initial: QubitState,
    sel: PostSelection,
    g0: float,
    omega_t: float,
    omega_k: float,
    t: float,
    spectrum: KDSpectrum,
) -> np.ndarray:
    """P_n(exact) - P_n(first order), rearranged so no O(1) terms cancel.

    With c = conj(a) b the difference is
    J_n^2 [4 sin^2(eps/2) (|b|^2 - Re c) + 2 Im c (eps - sin eps)].
    """
    a, b = _selection_amplitudes(initial, sel, omega_t)
    c = a.conjugate() * b
    eps = _class_phases(g0, omega_k, t, spectrum.orders)
    s2 = np.sin(eps / 2) ** 2
    return spectrum.probabilities * (4 * s2 * (abs(b) ** 2 - c.real) + 2 * c.imag * (eps - np.sin(eps)))


def exact_from_weak_value(
    a_w: WeakValue,
    g0: float,
    omega_k: float,
    t: float,
    spectrum: KDSpectrum,
) -> MomentumClassDistribution:
    """All-orders class probabilities p_s0 J_n^2 |1 + A_w (e^{i eps_n} - 1)|^2.

    Needs only the weak value and p_s0, for runs configured by A_w directly.
    """
    eps = _class_phases(g0, omega_k, t, spectrum.orders)
    w = -2.0 * np.sin(eps / 2) ** 2 + 1j * np.sin(eps)
    probs = a_w.p_s0 * spectrum.probabilities * np.abs(1 + a_w.value * w) ** 2
    return MomentumClassDistribution(spectrum.orders.copy(), probs, float(np.sum(probs)))
