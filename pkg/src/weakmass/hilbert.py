"""State representation: internal qubit, external wave packets on dual grids.

Everything here works in simulation units with ``HBAR = MASS = 1``. Position
and momentum grids are centred on zero and related by a unitary DFT, so a
packet can be moved freely between the two representations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

HBAR = 1.0
MASS = 1.0

NORM_TOL = 1e-8
CLIP_TOL = 1e-8

AxisKind = Literal["position", "momentum"]


class GridError(ValueError):
    """Grid cannot represent the requested object."""


class GridTooCoarseError(GridError):
    pass


class PacketClippedError(GridError):
    """Packet carries more than the allowed weight at the grid edges."""


class NotNormalizedError(ValueError):
    pass


@dataclass(frozen=True)
class QubitState:
    amp_g: complex
    amp_e: complex

    def __post_init__(self):
        norm = abs(self.amp_g) ** 2 + abs(self.amp_e) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise NotNormalizedError(f"qubit norm {norm!r} != 1")

    @classmethod
    def from_amplitudes(cls, alpha: complex, beta: complex) -> "QubitState":
        n = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        if n == 0.0:
            raise ValueError("zero qubit state")
        return cls(complex(alpha) / n, complex(beta) / n)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_g, self.amp_e], dtype=complex)


@dataclass(frozen=True, eq=False)
class Grid1D:
    n_points: int
    extent: float
    axis_kind: AxisKind = "position"

    def __post_init__(self):
        n = self.n_points
        if n < 16 or n & (n - 1):
            raise GridError(f"n_points must be a power of two >= 16, got {n}")
        if not self.extent > 0:
            raise GridError("extent must be positive")
        if self.axis_kind not in ("position", "momentum"):
            raise GridError(f"unknown axis kind {self.axis_kind!r}")

    def __eq__(self, other):
        # extents pick up rounding when hopping between conjugate grids
        if not isinstance(other, Grid1D):
            return NotImplemented
        return (
            self.n_points == other.n_points
            and self.axis_kind == other.axis_kind
            and math.isclose(self.extent, other.extent, rel_tol=1e-12)
        )

    def __hash__(self):
        return hash((self.n_points, self.axis_kind, float(f"{self.extent:.10e}")))

    @property
    def spacing(self) -> float:
        return self.extent / self.n_points

    @property
    def values(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.n_points // 2) * self.spacing

    def conjugate(self) -> "Grid1D":
        # dp * dx = 2*pi*hbar / N
        other = "momentum" if self.axis_kind == "position" else "position"
        return Grid1D(self.n_points, 2 * math.pi * HBAR / self.spacing, other)


@dataclass(frozen=True, eq=False)
class WavePacket:
    grid: Grid1D
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitudes shape {amps.shape} does not match grid ({self.grid.n_points},)"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def axis_kind(self) -> AxisKind:
        return self.grid.axis_kind

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing)

    def normalized(self) -> "WavePacket":
        return self.scaled(1.0 / math.sqrt(self.norm2()))

    def scaled(self, factor: complex) -> "WavePacket":
        return WavePacket(self.grid, self.amplitudes * factor)

    def inner(self, other: "WavePacket") -> complex:
        """<self|other> on a shared grid."""
        if other.grid != self.grid:
            raise GridError("inner product needs packets on the same grid")
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.spacing)

    def __add__(self, other: "WavePacket") -> "WavePacket":
        if other.grid != self.grid:
            raise GridError("cannot add packets on different grids")
        return WavePacket(self.grid, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "WavePacket") -> "WavePacket":
        return self + other.scaled(-1.0)

    def edge_weight(self, fraction: float = 1 / 32) -> float:
        """Squared norm carried by the outer ``fraction`` of the grid on each side."""
        m = max(1, int(self.grid.n_points * fraction))
        a = np.abs(self.amplitudes) ** 2
        return float((a[:m].sum() + a[-m:].sum()) * self.grid.spacing)


@dataclass(frozen=True, eq=False)
class JointState:
    """Internal-resolved pair: external packet paired with |g> and with |e>."""

    comp_g: WavePacket
    comp_e: WavePacket

    def __post_init__(self):
        if self.comp_g.grid != self.comp_e.grid:
            raise GridError("components of a joint state must share a grid")

    @property
    def grid(self) -> Grid1D:
        return self.comp_g.grid

    @classmethod
    def product(cls, qubit: QubitState, packet: WavePacket) -> "JointState":
        return cls(packet.scaled(qubit.amp_g), packet.scaled(qubit.amp_e))

    def norm2(self) -> float:
        return self.comp_g.norm2() + self.comp_e.norm2()

    def map(self, fn) -> "JointState":
        return JointState(fn(self.comp_g), fn(self.comp_e))

    def distance(self, other: "JointState") -> float:
        """L2 distance over both internal components."""
        return math.sqrt((self.comp_g - other.comp_g).norm2() + (self.comp_e - other.comp_e).norm2())


def to_momentum(packet: WavePacket) -> WavePacket:
    if packet.axis_kind != "position":
        raise GridError("to_momentum expects a position-space packet")
    g = packet.grid
    amps = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(packet.amplitudes)))
    amps *= g.spacing / math.sqrt(2 * math.pi * HBAR)
    return WavePacket(g.conjugate(), amps)


def to_position(packet: WavePacket) -> WavePacket:
    if packet.axis_kind != "momentum":
        raise GridError("to_position expects a momentum-space packet")
    g = packet.grid
    amps = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(packet.amplitudes)))
    amps *= g.n_points * g.spacing / math.sqrt(2 * math.pi * HBAR)
    return WavePacket(g.conjugate(), amps)


def as_momentum(packet: WavePacket) -> WavePacket:
    return packet if packet.axis_kind == "momentum" else to_momentum(packet)


def as_position(packet: WavePacket) -> WavePacket:
    return packet if packet.axis_kind == "position" else to_position(packet)


def momentum_uncertainty(width_delta: float, hbar: float = HBAR) -> float:
    return hbar / (2.0 * width_delta)


def class_overlap(width_delta: float, k: float, hbar: float = HBAR) -> float:
    """Overlap <n|n+1> of neighbouring KD momentum classes, exp(-(hbar k)^2 / 2 sigma^2)."""
    sigma = momentum_uncertainty(width_delta, hbar)
    return math.exp(-((hbar * k) ** 2) / (2 * sigma**2))


def _gaussian_tail(lo: float, hi: float, centre: float, width: float) -> float:
    s = math.sqrt(2.0) * width
    return 0.5 * math.erfc((hi - centre) / s) + 0.5 * math.erfc((centre - lo) / s)


def make_gaussian(
    grid: Grid1D,
    width_delta: float,
    center_x: float = 0.0,
    center_p: float = 0.0,
) -> WavePacket:
    """Minimum-uncertainty Gaussian with position width ``width_delta``.

    On a position grid the packet is sampled in x; on a momentum grid it is
    sampled in p with width ``hbar / (2 * width_delta)``. Raises
    ``GridTooCoarseError`` when the spacing exceeds a quarter of the relevant
    width and ``PacketClippedError`` when more than 1e-8 of the weight would
    fall outside the grid.
    """
    if not width_delta > 0:
        raise ValueError("width_delta must be positive")
    sigma = momentum_uncertainty(width_delta)
    if grid.axis_kind == "position":
        width, centre = width_delta, center_x
    else:
        width, centre = sigma, center_p
    if grid.spacing >= width / 4:
        raise GridTooCoarseError(
            f"grid spacing {grid.spacing:.3g} does not resolve width {width:.3g}"
        )
    v = grid.values
    tail = _gaussian_tail(v[0] - grid.spacing / 2, v[-1] + grid.spacing / 2, centre, width)
    if tail > CLIP_TOL:
        raise PacketClippedError(f"Gaussian tail weight {tail:.2e} lies outside the grid")

    if grid.axis_kind == "position":
        amps = (2 * math.pi * width_delta**2) ** -0.25 * np.exp(
            -((v - center_x) ** 2) / (4 * width_delta**2) + 1j * center_p * v / HBAR
        )
    else:
        amps = (2 * math.pi * sigma**2) ** -0.25 * np.exp(
            -((v - center_p) ** 2) / (4 * sigma**2) - 1j * center_x * v / HBAR
        )
    return WavePacket(grid, amps)


_OBSERVABLES = ("p", "p2", "x", "x2")


def expectation(packet: WavePacket, observable: str) -> float:
    """<O> for O in {p, p2, x, x2}; ``p²``/``x²`` spellings are also accepted."""
    obs = observable.replace("²", "2")
    if obs not in _OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}")
    n2 = packet.norm2()
    if abs(n2 - 1.0) > NORM_TOL:
        raise NotNormalizedError(f"packet norm^2 = {n2:.12g}")
    rep = as_momentum(packet) if obs.startswith("p") else as_position(packet)
    v = rep.grid.values
    w = np.abs(rep.amplitudes) ** 2 * rep.grid.spacing
    if obs.endswith("2"):
        return float(np.sum(w * v**2))
    return float(np.sum(w * v))


def write_csv(packet: WavePacket, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid_value", "re", "im"])
        for x, a in zip(packet.grid.values, packet.amplitudes):
            w.writerow([repr(float(x)), repr(float(a.real)), repr(float(a.imag))])


def read_csv(path: str | Path, axis_kind: AxisKind = "position") -> WavePacket:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x, re, im = data.T
    n = len(x)
    grid = Grid1D(n, float((x[1] - x[0]) * n), axis_kind)
    return WavePacket(grid, re + 1j * im)
