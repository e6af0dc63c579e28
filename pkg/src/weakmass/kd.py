"""Kapitza-Dirac scattering in the Raman-Nath regime.

The standing wave imprints ``exp(i eta cos 2kx)`` on the packet, which splits it
into momentum classes ``n`` displaced by ``2 n hbar k`` with amplitudes
``i**n J_n(eta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hilbert import (
    HBAR,
    MASS,
    Grid1D,
    GridTooCoarseError,
    GridError,
    WavePacket,
    as_momentum,
    as_position,
    momentum_uncertainty,
    to_momentum,
    to_position,
)

TRUNCATION_TOL = 1e-12
SERIES_BELOW = 1e-3


def bessel_j(n_max: int, x: float) -> np.ndarray:
    """J_0(x) .. J_{n_max}(x) by Miller's downward recurrence.

    The recurrence ``J_{m-1} = (2m/x) J_m - J_{m+1}`` is started far above both
    ``n_max`` and ``x`` from an arbitrary seed, and the result normalised with
    ``J_0 + 2 sum_k J_{2k} = 1``.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    x = float(x)
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    sign = 1.0
    if x < 0:
        x, sign = -x, -1.0
    if x < SERIES_BELOW:
        # the recurrence factor 2m/x overflows here; the series converges at once
        out[:] = [bessel_j_series(n, x) for n in range(n_max + 1)]
        if sign < 0:
            out[1::2] *= -1.0
        return out
    top = max(n_max, int(math.ceil(x)))
    start = top + 30 + int(math.ceil(4.0 * math.sqrt(top + 1)))
    start += start % 2
    vals = np.zeros(start + 2)
    vals[start] = 1e-300
    for m in range(start, 0, -1):
        vals[m - 1] = (2.0 * m / x) * vals[m] - vals[m + 1]
        if abs(vals[m - 1]) > 1e250:
            vals[m - 1 :] *= 1e-250
    norm = vals[0] + 2.0 * vals[2:start + 1:2].sum()
    out[:] = vals[: n_max + 1] / norm
    if sign < 0:
        out[1::2] *= -1.0
    return out


def bessel_j_series(n: int, x: float, terms: int = 60) -> float:
    """Power series for J_n(x); reference for small arguments only."""
    n_abs = abs(n)
    total = 0.0
    half = x / 2.0
    for s in range(terms):
        total += (-1) ** s * half ** (2 * s + n_abs) / (math.factorial(s) * math.factorial(s + n_abs))
    if n < 0 and n_abs % 2:
        total = -total
    return total


def default_n_max(eta: float, tol: float = TRUNCATION_TOL) -> int:
    """Smallest n_max with sum_{|n|>n_max} J_n(eta)^2 < tol."""
    big = int(math.ceil(abs(eta))) + 60
    j2 = bessel_j(big, eta) ** 2
    # two-sided tail beyond each order
    tail = 2.0 * np.cumsum(j2[::-1])[::-1]
    for n in range(big):
        if tail[n + 1] < tol:
            return n
    return big


@dataclass(frozen=True)
class KDParams:
    eta: float
    k_light: float = 1.0
    n_max: int | None = None

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.k_light <= 0:
            raise ValueError("k_light must be positive")
        if self.n_max is None:
            object.__setattr__(self, "n_max", default_n_max(self.eta))
        elif self.n_max < 0:
            raise ValueError("n_max must be non-negative")


@dataclass(frozen=True, eq=False)
class KDSpectrum:
    orders: np.ndarray
    coeffs: np.ndarray
    eta: float

    def __getitem__(self, n: int) -> complex:
        idx = int(n) + self.n_max
        if not 0 <= idx < len(self.orders):
            return 0j
        return complex(self.coeffs[idx])

    @property
    def n_max(self) -> int:
        return (len(self.orders) - 1) // 2

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2

    def as_dict(self) -> dict[int, complex]:
        return {int(n): complex(c) for n, c in zip(self.orders, self.coeffs)}


def bessel_spectrum(params: KDParams) -> KDSpectrum:
    n_max = params.n_max
    j = bessel_j(n_max, params.eta)
    orders = np.arange(-n_max, n_max + 1)
    jn = np.concatenate([j[:0:-1] * (-1.0) ** np.arange(n_max, 0, -1), j])
    coeffs = (1j) ** (orders % 4) * jn
    return KDSpectrum(orders, coeffs, params.eta)


def theta_moment(params: KDParams) -> float:
    """Second moment sum n^2 J_n(eta)^2 of the truncated spectrum (eta^2/2 in the limit)."""
    spec = bessel_spectrum(params)
    return float(np.sum(spec.orders.astype(float) ** 2 * spec.probabilities))


def apply_kd_phase(
    packet: WavePacket,
    params: KDParams,
    pulse_time: float | None = None,
) -> WavePacket:
    """Multiply by exp(i eta cos 2kx) on the position grid.

    ``pulse_time`` keeps the free kinetic phase exp(-i p^2 tau / 2m hbar) over the
    pulse, which the Raman-Nath treatment drops; it is off by default.
    """
    if packet.axis_kind != "position":
        raise GridError("apply_kd_phase needs a position-space packet")
    k = params.k_light
    if packet.grid.spacing >= math.pi / (4 * k):
        raise GridTooCoarseError(
            f"spacing {packet.grid.spacing:.3g} does not resolve the standing wave (k={k})"
        )
    x = packet.grid.values
    out = WavePacket(packet.grid, packet.amplitudes * np.exp(1j * params.eta * np.cos(2 * k * x)))
    if pulse_time:
        mom = to_momentum(out)
        p = mom.grid.values
        mom = WavePacket(mom.grid, mom.amplitudes * np.exp(-1j * p**2 * pulse_time / (2 * MASS * HBAR)))
        out = to_position(mom)
    return out


def displaced_superposition(packet: WavePacket, spectrum: KDSpectrum, k: float) -> WavePacket:
    """sum_n phi(n) exp(i 2nkx)|packet>, built by shifting the momentum profile.

    Each class is the input momentum amplitude translated by 2nk. Shifts must
    land on grid points.
    """
    mom = as_momentum(packet)
    dp = mom.grid.spacing
    step = 2 * HBAR * k / dp
    if abs(step - round(step)) > 1e-9:
        raise GridError("2*hbar*k must be an integer multiple of the momentum spacing")
    step = int(round(step))
    out = np.zeros_like(mom.amplitudes)
    for n, c in zip(spectrum.orders, spectrum.coeffs):
        shift = int(n) * step
        if abs(shift) >= mom.grid.n_points:
            continue
        shifted = np.zeros_like(mom.amplitudes)
        if shift >= 0:
            shifted[shift:] = mom.amplitudes[: mom.grid.n_points - shift]
        else:
            shifted[:shift] = mom.amplitudes[-shift:]
        out += c * shifted
    return WavePacket(mom.grid, out)


def class_probabilities(packet: WavePacket, orders, k: float = 1.0) -> np.ndarray:
    """Weight in each momentum window [2nk - k, 2nk + k) for the given orders."""
    mom = as_momentum(packet)
    p = mom.grid.values
    w = np.abs(mom.amplitudes) ** 2 * mom.grid.spacing
    idx = np.floor((p + HBAR * k) / (2 * HBAR * k)).astype(int)
    out = np.zeros(len(orders))
    for i, n in enumerate(orders):
        out[i] = w[idx == n].sum()
    return out


def kd_grid(width_delta: float, k: float, n_points: int = 4096, n_max: int = 25) -> Grid1D:
    """Position grid whose extent is a multiple of pi/k so 2nk lands on momentum nodes.

    The extent holds the packet to better than the clipping tolerance and the
    momentum range must reach past class ``n_max`` with an 8-sigma margin.
    """
    period = math.pi / k
    m = max(1, math.ceil(13.5 * width_delta / period))
    grid = Grid1D(n_points, m * period, "position")
    sigma = momentum_uncertainty(width_delta)
    p_edge = math.pi * HBAR / grid.spacing
    if p_edge < 2 * HBAR * k * n_max + 8 * sigma:
        raise GridTooCoarseError(
            f"momentum range {p_edge:.3g} too small for class {n_max}; raise n_points"
        )
    return grid


@dataclass(frozen=True)
class Separation:
    D_n: float
    spread: float
    resolvable: bool


def separation_check(
    params: KDParams,
    delta: float,
    t0: float,
    n: int,
    threshold: float = 5.0,
    hbar: float = HBAR,
    mass: float = MASS,
) -> Separation:
    """Free-flight separation of class n from class 0 after time t0."""
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    lam = 2 * math.pi / params.k_light
    d_n = 4 * n * math.pi * hbar * t0 / (mass * lam)
    delta_d = hbar * t0 / (2 * mass * delta)
    spread = math.hypot(delta, delta_d)
    return Separation(d_n, spread, n != 0 and abs(d_n) > threshold * spread)


def min_separation_time(
    params: KDParams,
    delta: float,
    n: int,
    threshold: float = 5.0,
    hbar: float = HBAR,
    mass: float = MASS,
) -> float:
    """Flight time at which D_n reaches ``threshold`` times the spread; inf if never."""
    a = (2 * n * hbar * params.k_light / mass) ** 2
    b = threshold**2 * (hbar / (2 * mass * delta)) ** 2
    if n == 0 or a <= b:
        return math.inf
    return threshold * delta / math.sqrt(a - b)
