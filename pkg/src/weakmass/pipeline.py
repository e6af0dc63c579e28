"""Physical presets, run configuration and the end-to-end measurement pipeline.

Simulation units set hbar = m = k = 1, with k the KD light wavenumber. In
these units the recoil frequency ``omega_k = 4 hbar k^2 / m`` equals 4, so a
coupling window is fully described by the products ``g0`` and
``omega_k * t``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import constants

from .detector import G0Estimate, NoiseModel, recover_g0, simulate_counts
from .dynamics import CouplingParams, evolve_exact_x
from .hilbert import JointState, QubitState, make_gaussian, to_momentum
from .kd import KDParams, apply_kd_phase, bessel_spectrum, class_probabilities, kd_grid
from .weakmeas import (
    PostSelection,
    WeakValue,
    exact_class_oracle,
    exact_from_weak_value,
    omega_t_for_target,
    p_n_first_order,
    postselect,
    weak_value_from_rotation,
)

OMEGA_K_SIM = 4.0

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BREAKDOWN = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalPreset:
    name: str
    mass_kg: float
    omega_transition_hz: float  # angular
    lambda_kd_m: float
    lifetime_s: float
    delta_m: float
    gbar_ms2: float = 9.81

    @property
    def k(self) -> float:
        return 2 * math.pi / self.lambda_kd_m

    @property
    def time_unit_s(self) -> float:
        """m / (hbar k^2): one unit of simulation time."""
        return self.mass_kg / (constants.hbar * self.k**2)

    @property
    def length_unit_m(self) -> float:
        return 1.0 / self.k


CALCIUM = PhysicalPreset(
    name="calcium",
    mass_kg=6.7e-26,
    omega_transition_hz=4.6e14,
    lambda_kd_m=0.4e-6,
    lifetime_s=0.4e-3,
    delta_m=1e-6,
)

PRESETS = {"calcium": CALCIUM}


@dataclass(frozen=True)
class Groups:
    g0: float
    omega_k: float
    g0_t: float
    g0_omega_k_t: float

    @property
    def omega_k_t(self) -> float:
        return self.g0_omega_k_t / self.g0 if self.g0 else self.omega_k * self.g0_t


def derive_groups(preset: PhysicalPreset, t_coupling: float | None = None) -> Groups:
    """g0 = hbar omega / m c^2 and omega_k = 4 hbar k^2 / m for a preset (SI)."""
    t = preset.lifetime_s if t_coupling is None else t_coupling
    if t > preset.lifetime_s:
        warnings.warn(
            f"coupling time {t:g} s exceeds the excited-state lifetime {preset.lifetime_s:g} s",
            stacklevel=2,
        )
    g0 = constants.hbar * preset.omega_transition_hz / (preset.mass_kg * constants.c**2)
    omega_k = 4 * constants.hbar * preset.k**2 / preset.mass_kg
    return Groups(g0=g0, omega_k=omega_k, g0_t=g0 * t, g0_omega_k_t=g0 * omega_k * t)


def _float_or_none(v: str):
    return None if v.lower() in ("none", "") else float(v)


def _int_or_none(v: str):
    return None if v.lower() in ("none", "") else int(v)


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _str_or_none(v: str):
    return None if v.lower() in ("none", "") else v


@dataclass
class RunConfig:
    # either a preset ...
    preset: str | None = None
    t_coupling: float | None = None
    # ... or the dimensionless groups directly
    g0: float | None = None
    omega_k_t: float | None = None

    eta: float = 10.0
    n_max: int | None = None
    alpha: float = 1 / math.sqrt(2)
    beta: float = 1 / math.sqrt(2)
    theta: float = 3 * math.pi / 4
    omega_t: float | None = None
    aw_target: float | None = None
    aw_real: float | None = None
    aw_imag: float | None = None
    p_s0: float = 1.0

    grid_check: bool = False
    n_points: int = 4096
    delta: float = 15.0

    trials: int = 0
    n_atoms: float = 1e16
    xi_s: float = 0.0
    xi_d: float = 0.0
    dark_rate: float = 0.0
    shot_noise: bool = True
    seed: int = 0
    classes: str = "0,5,10"

    def validate(self) -> None:
        explicit = self.g0 is not None or self.omega_k_t is not None
        if (self.preset is None) == (not explicit):
            raise ConfigError("give exactly one of a preset or explicit g0/omega_k_t")
        if explicit and (self.g0 is None or self.omega_k_t is None):
            raise ConfigError("explicit groups need both g0 and omega_k_t")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; known: {sorted(PRESETS)}")
        if self.g0 is not None and self.g0 < 0:
            raise ConfigError("g0 must be non-negative")
        if self.eta < 0:
            raise ConfigError("eta must be non-negative")
        has_direct = self.aw_real is not None or self.aw_imag is not None
        if self.omega_t is None and self.aw_target is None and not has_direct:
            raise ConfigError("need omega_t, aw_target or a direct weak value")
        try:
            self.class_list()
        except ValueError as exc:
            raise ConfigError(f"bad classes {self.classes!r}") from exc

    def class_list(self) -> list[int]:
        return [int(s) for s in self.classes.split(",") if s.strip()]

    def groups(self) -> tuple[float, float]:
        """(g0, omega_k * t) for this run."""
        if self.preset is not None:
            grp = derive_groups(PRESETS[self.preset], self.t_coupling)
            return grp.g0, grp.omega_k_t
        return float(self.g0), float(self.omega_k_t)

    def serialize(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, bool):
                text = "true" if v else "false"
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in names:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                values[key] = _PARSERS[key](val)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.parse(Path(path).read_text())


_PARSERS = {
    "preset": _str_or_none,
    "t_coupling": _float_or_none,
    "g0": _float_or_none,
    "omega_k_t": _float_or_none,
    "eta": float,
    "n_max": _int_or_none,
    "alpha": float,
    "beta": float,
    "theta": float,
    "omega_t": _float_or_none,
    "aw_target": _float_or_none,
    "aw_real": _float_or_none,
    "aw_imag": _float_or_none,
    "p_s0": float,
    "grid_check": _bool,
    "n_points": int,
    "delta": float,
    "trials": int,
    "n_atoms": float,
    "xi_s": float,
    "xi_d": float,
    "dark_rate": float,
    "shot_noise": _bool,
    "seed": int,
    "classes": str,
}


def grid_class_distribution(
    qubit: QubitState,
    sel: PostSelection,
    g0: float,
    omega_t: float,
    omega_k_t: float,
    eta: float,
    orders,
    delta: float = 15.0,
    n_points: int = 4096,
) -> np.ndarray:
    """P_n from wave packets on a grid: Gaussian -> KD -> rotation -> coupling -> selection."""
    kdp = KDParams(eta)
    grid = kd_grid(delta, 1.0, n_points, n_max=max(kdp.n_max, max(abs(int(n)) for n in orders)))
    packet = to_momentum(apply_kd_phase(make_gaussian(grid, delta), kdp))
    state = JointState.product(qubit, packet)
    evolved = evolve_exact_x(state, CouplingParams(g0, omega_t, omega_k_t / OMEGA_K_SIM))
    return class_probabilities(postselect(evolved, sel), orders)


@dataclass
class PipelineResult:
    rows: list[dict]
    a_w: WeakValue
    omega_t: float | None
    g0: float
    omega_k_t: float
    p_s_first_order: float
    p_s_exact: float
    flags: list[str] = field(default_factory=list)
    estimate: G0Estimate | None = None
    counts: list | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_BREAKDOWN if "negative-probability" in self.flags else EXIT_OK

    def summary(self) -> dict:
        out = {
            "g0": self.g0,
            "omega_k_t": self.omega_k_t,
            "g0_omega_k_t": self.g0 * self.omega_k_t,
            "omega_t": self.omega_t,
            "aw_real": self.a_w.re,
            "aw_imag": self.a_w.im,
            "p_s0": self.a_w.p_s0,
            "p_s_first_order": self.p_s_first_order,
            "p_s_exact": self.p_s_exact,
            "flags": list(self.flags),
        }
        if self.estimate is not None:
            out.update(
                g0_hat=self.estimate.g0_hat,
                stderr=self.estimate.stderr,
                significance=self.estimate.significance,
                detectable=self.estimate.detectable,
            )
        return out


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Preparation, coupling, post-selection and detection for one configuration."""
    config.validate()
    g0, omega_k_t = config.groups()
    t = omega_k_t / OMEGA_K_SIM
    spectrum = bessel_spectrum(KDParams(config.eta, 1.0, config.n_max))
    qubit = QubitState.from_amplitudes(config.alpha, config.beta)
    sel = PostSelection(config.theta)
    flags: list[str] = []

    omega_t = config.omega_t
    if config.aw_target is not None:
        omega_t = omega_t_for_target(qubit, config.theta, config.aw_target)
    direct = None
    if config.aw_real is not None or config.aw_imag is not None:
        direct = WeakValue(config.aw_real or 0.0, config.aw_imag or 0.0, config.p_s0)

    if omega_t is not None:
        a_w = weak_value_from_rotation(qubit, omega_t, config.theta)
        exact = exact_class_oracle(qubit, sel, g0, omega_t, OMEGA_K_SIM, t, spectrum)
        if direct is not None and abs(direct.value - a_w.value) > 1e-9 * max(1.0, abs(a_w.value)):
            msg = f"direct weak value {direct.value} ignored in favour of rotation value {a_w.value}"
            warnings.warn(msg, stacklevel=2)
            flags.append("weak-value-mismatch")
    else:
        a_w = direct
        exact = exact_from_weak_value(a_w, g0, OMEGA_K_SIM, t, spectrum)

    first = p_n_first_order(a_w, g0, OMEGA_K_SIM, t, spectrum)
    flags.extend(f for f in first.flags if f not in flags)

    grid_probs = None
    if config.grid_check:
        if omega_t is None:
            raise ConfigError("grid_check needs the rotation parameters, not a direct weak value")
        grid_probs = grid_class_distribution(
            qubit, sel, g0, omega_t, omega_k_t, config.eta, spectrum.orders,
            delta=config.delta, n_points=config.n_points,
        )

    rows = []
    base = a_w.p_s0 * spectrum.probabilities
    for i, n in enumerate(spectrum.orders):
        shift = 1.0 - exact.probs[i] / base[i] if base[i] > 0 else 0.0
        row = {
            "n": int(n),
            "P_n_first_order": float(first.probs[i]),
            "P_n_exact": float(exact.probs[i]),
            "relative_shift": float(shift),
        }
        if grid_probs is not None:
            row["P_n_grid"] = float(grid_probs[i])
        rows.append(row)

    result = PipelineResult(
        rows=rows,
        a_w=a_w,
        omega_t=omega_t,
        g0=g0,
        omega_k_t=omega_k_t,
        p_s_first_order=first.p_s,
        p_s_exact=exact.p_s,
        flags=flags,
    )
    if config.trials > 0:
        noise = NoiseModel(
            n_atoms=config.n_atoms,
            xi_s_sd=config.xi_s,
            xi_d_sd=config.xi_d,
            dark_rate=config.dark_rate,
            seed=config.seed,
            shot_noise=config.shot_noise,
        )
        records = simulate_counts(exact, noise, config.class_list(), config.trials)
        result.counts = records
        result.estimate = recover_g0(records, a_w, OMEGA_K_SIM, t, spectrum, model="exact")
    return result
