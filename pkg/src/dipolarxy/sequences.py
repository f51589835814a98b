"""Pulse sequences: declarative specs and their execution.

Conventions shared by every sequence here:
  - the readout observable is the signed center-spin coherence 2<S_y^c>;
  - prep pulses rotate |0> toward +y via a pi/2 rotation about +x, so
    Ramsey/echo/CPMG/WAHUHA/spin-lock runners expect an ALREADY prepared
    state (the caller applies the prep, usually prepare_initial);
  - the DTC runner is the exception: its prep angle phi is a sequence
    parameter, so it takes the unrotated z-basis product state.

Stroboscopic traces (CPMG, WAHUHA, DTC) are evaluated incrementally at
block boundaries.  Because the first m blocks of a k-block run are exactly
the m-block sequence, the incremental values are bit-identical to running
each prefix separately; there is no mid-unitary peeking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    Propagator,
    apply_ideal_pulse,
    expect_site,
    finite_pulse_propagator,
    state_all_zero,
)
from .errors import ConfigError, SequenceError

PULSE_MODES = ("ideal", "finite")


def _check_times(**kwargs) -> None:
    for name, value in kwargs.items():
        if value < 0:
            raise SequenceError(f"{name} must be >= 0, got {value}")


def _check_mode(mode: str) -> None:
    if mode not in PULSE_MODES:
        raise SequenceError(f"pulse mode must be one of {PULSE_MODES}, got {mode!r}")


@dataclass(frozen=True)
class Ramsey:
    tau: float

    def __post_init__(self) -> None:
        _check_times(tau=self.tau)


@dataclass(frozen=True)
class SpinEcho:
    tau: float

    def __post_init__(self) -> None:
        _check_times(tau=self.tau)


@dataclass(frozen=True)
class EpsCpmg:
    """k repetitions of [free tau/2 -> (pi+epsilon)_y -> free tau/2].

    In finite mode the pulse lasts t_p, making the block period tau + t_p.
    """

    tau: float
    epsilon: float
    k: int = 1
    t_p: float = 0.0
    mode: str = "ideal"

    def __post_init__(self) -> None:
        _check_times(tau=self.tau, t_p=self.t_p)
        _check_mode(self.mode)
        if self.k < 1:
            raise SequenceError("k must be >= 1")
        if abs(self.epsilon) > math.pi:
            raise SequenceError("|epsilon| must be <= pi")

    @property
    def period(self) -> float:
        return self.tau + (self.t_p if self.mode == "finite" else 0.0)


@dataclass(frozen=True)
class WahuhaEcho:
    """WAHUHA-echo base block of four pi/2 and two pi pulses.

    Ideal-pulse period is 6 tau with the toggling frame spending tau along
    each of z, y, x, -x, -y, -z; the resulting zeroth-order average
    Hamiltonian is (2/3) H_Heis.  In finite mode every edge-to-edge gap is
    tau - t_p (pi pulses last 2 t_p), stretching the period to 6 tau + 2 t_p
    while keeping adjacent pi/2-pulse centers tau apart.
    """

    tau: float
    k: int = 1
    t_p: float = 0.0
    mode: str = "ideal"

    def __post_init__(self) -> None:
        _check_times(tau=self.tau, t_p=self.t_p)
        _check_mode(self.mode)
        if self.k < 1:
            raise SequenceError("k must be >= 1")
        if self.mode == "finite" and self.tau <= self.t_p:
            raise SequenceError("finite-pulse WAHUHA needs tau > t_p")

    @property
    def period(self) -> float:
        if self.mode == "finite":
            return 6.0 * self.tau + 2.0 * self.t_p
        return 6.0 * self.tau


# pulse list fixed by requiring frames z -> y -> x -> -x -> -y -> -z and
# H0 = (2/3) H_Heis; angles are for apply_ideal_pulse's exp(+i angle n.S)
WAHUHA_PULSES = (
    ("x", -math.pi / 2),
    ("y", +math.pi / 2),
    ("y", +math.pi),
    ("y", -math.pi / 2),
    ("x", -math.pi / 2),
    ("y", -math.pi),
)


@dataclass(frozen=True)
class SpinLock:
    """Continuous drive omega_y * sum_i S_y^i held for t_total."""

    omega_y: float
    t_total: float

    def __post_init__(self) -> None:
        _check_times(t_total=self.t_total)


@dataclass(frozen=True)
class DtcFloquet:
    """Prep by phi about x, then k cycles of [y spin-lock for tau -> (pi+epsilon)_x]."""

    tau: float
    epsilon: float
    k: int
    phi: float = math.pi / 2
    omega_y: float = 2.0 * math.pi * 10.0

    def __post_init__(self) -> None:
        _check_times(tau=self.tau)
        if self.k < 1:
            raise SequenceError("k must be >= 1")
        if abs(self.epsilon) > math.pi:
            raise SequenceError("|epsilon| must be <= pi")
        if not 0.0 <= self.phi <= math.pi / 2:
            raise SequenceError("phi must be in [0, pi/2]")


SEQUENCE_TYPES = (Ramsey, SpinEcho, EpsCpmg, WahuhaEcho, SpinLock, DtcFloquet)


@dataclass(frozen=True)
class CoherenceTrace:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if times.shape != values.shape or times.ndim != 1:
            raise SequenceError("times and values must be matching 1-d arrays")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise SequenceError("times must be strictly increasing")
        if np.any(np.abs(values) > 1.0 + 1e-6):
            raise SequenceError("coherence values outside [-1, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


def prepare_initial(
    rng: np.random.Generator, n_spins: int, phi: float, eta_pol: float
) -> np.ndarray:
    """Random product state: each spin |0> with probability eta_pol, then
    a global rotation by phi about x (phi = pi/2 puts |0> along +y)."""
    if not 0.5 < eta_pol <= 1.0:
        raise ConfigError("eta_pol must be in (0.5, 1]")
    if not 0.0 <= phi <= math.pi / 2:
        raise ConfigError("phi must be in [0, pi/2]")
    flips = rng.random(n_spins) >= eta_pol
    psi = state_all_zero(n_spins)
    if flips.any():
        idx = 0
        for i, f in enumerate(flips):
            if f:
                idx |= 1 << (n_spins - 1 - i)
        psi = np.zeros_like(psi)
        psi[idx] = 1.0
    if phi != 0.0:
        psi = apply_ideal_pulse(psi, n_spins, "x", phi)
    return psi


def center_coherence(psi: np.ndarray, n_spins: int, center: int = 0) -> float:
    """Signed coherence 2 <S_y> of the readout spin."""
    return 2.0 * expect_site(psi, n_spins, center, "y")


def run_ramsey(state0: np.ndarray, prop: Propagator, tau: float,
               n_spins: int, center: int = 0) -> float:
    return center_coherence(prop.evolve(state0, tau), n_spins, center)


def run_spin_echo(state0: np.ndarray, prop: Propagator, tau: float,
                  n_spins: int, center: int = 0) -> float:
    psi = prop.evolve(state0, tau / 2.0)
    psi = apply_ideal_pulse(psi, n_spins, "y", math.pi)
    psi = prop.evolve(psi, tau / 2.0)
    return center_coherence(psi, n_spins, center)


def run_eps_cpmg(state0: np.ndarray, prop: Propagator, spec: EpsCpmg,
                 n_spins: int, center: int = 0, *,
                 h_total: np.ndarray | None = None,
                 rabi: float | None = None) -> CoherenceTrace:
    """Stroboscopic coherence after each of the k blocks.

    Finite mode needs the bare Hamiltonian (h_total) to run the drive
    alongside it; rabi defaults to the angle/t_p ratio implied by the spec.
    """
    angle = math.pi + spec.epsilon
    if spec.mode == "finite":
        if spec.t_p <= 0:
            raise SequenceError("finite mode needs t_p > 0")
        if h_total is None:
            raise SequenceError("finite mode needs the bare Hamiltonian")
        pulse_rabi = rabi if rabi is not None else abs(angle) / spec.t_p
        pulse_prop, duration = finite_pulse_propagator(
            h_total, n_spins, "y", angle, pulse_rabi
        )
    psi = state0
    times = np.empty(spec.k)
    values = np.empty(spec.k)
    for m in range(spec.k):
        psi = prop.evolve(psi, spec.tau / 2.0)
        if spec.mode == "finite":
            psi = pulse_prop.evolve(psi, duration)
        else:
            psi = apply_ideal_pulse(psi, n_spins, "y", angle)
        psi = prop.evolve(psi, spec.tau / 2.0)
        times[m] = (m + 1) * spec.period
        values[m] = center_coherence(psi, n_spins, center)
    return CoherenceTrace(times, values)


def run_wahuha_echo(state0: np.ndarray, prop: Propagator, spec: WahuhaEcho,
                    n_spins: int, center: int = 0, *,
                    h_total: np.ndarray | None = None,
                    rabi: float | None = None) -> CoherenceTrace:
    """Stroboscopic coherence after each 6-tau WAHUHA-echo block."""
    if spec.mode == "finite":
        if spec.t_p <= 0:
            raise SequenceError("finite mode needs t_p > 0")
        if h_total is None:
            raise SequenceError("finite mode needs the bare Hamiltonian")
        gap = spec.tau - spec.t_p
        edge = gap / 2.0
        pulse_props = []
        for axis, angle in WAHUHA_PULSES:
            pulse_rabi = rabi if rabi is not None else (math.pi / 2) / spec.t_p
            pulse_props.append(
                finite_pulse_propagator(h_total, n_spins, axis, angle, pulse_rabi)
            )
    else:
        gap = spec.tau
        edge = spec.tau / 2.0
    psi = state0
    times = np.empty(spec.k)
    values = np.empty(spec.k)
    for m in range(spec.k):
        psi = prop.evolve(psi, edge)
        for p_idx, (axis, angle) in enumerate(WAHUHA_PULSES):
            if spec.mode == "finite":
                pp, dur = pulse_props[p_idx]
                psi = pp.evolve(psi, dur)
            else:
                psi = apply_ideal_pulse(psi, n_spins, axis, angle)
            if p_idx < len(WAHUHA_PULSES) - 1:
                psi = prop.evolve(psi, gap)
        psi = prop.evolve(psi, edge)
        times[m] = (m + 1) * spec.period
        values[m] = center_coherence(psi, n_spins, center)
    return CoherenceTrace(times, values)


def run_spin_lock(state0: np.ndarray, h_total: np.ndarray, spec: SpinLock,
                  sample_times, n_spins: int, center: int = 0) -> CoherenceTrace:
    """Coherence under H + omega_y * S_y_tot at the requested times."""
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if np.any(sample_times < 0) or np.any(sample_times > spec.t_total + 1e-12):
        raise SequenceError("sample times must lie in [0, t_total]")
    if spec.omega_y == 0.0:
        prop = Propagator(h_total)
    else:
        prop = Propagator.with_y_drive(h_total, spec.omega_y, n_spins)
    values = [
        center_coherence(prop.evolve(state0, t), n_spins, center)
        for t in sample_times
    ]
    return CoherenceTrace(sample_times, np.asarray(values))


@dataclass(frozen=True)
class AnalyzerFit:
    c_amp: float
    c_offset: float
    coherence: float
    residual: float


def analyzer_population(psi: np.ndarray, n_spins: int, theta: float,
                        center: int = 0) -> float:
    """|1>-population of the readout spin after a pi/2 analyzer at phase theta.

    The analyzer rotates about the axis (cos theta, sin theta, 0); theta = 0
    is the +x analyzer of the DTC readout.
    """
    axis = (math.cos(theta), math.sin(theta), 0.0)
    rotated = apply_ideal_pulse(psi, n_spins, axis, math.pi / 2)
    return 0.5 - expect_site(rotated, n_spins, center, "z")


def emulate_analyzer_sweep(psi: np.ndarray, n_spins: int, theta_grid,
                           center: int = 0) -> AnalyzerFit:
    """Fit C(theta) = C_amp cos(theta + theta0) + C_offset to the analyzer signal.

    The free phase makes the fit insensitive to where the transverse Bloch
    component points; C_amp is reported at the optimal analyzer phase, so
    coherence = C_amp / C_offset = 2 |<S_perp>| for pure states.
    """
    theta_grid = np.asarray(theta_grid, dtype=np.float64)
    if theta_grid.size < 8:
        raise SequenceError("analyzer sweep needs >= 8 phase points")
    if theta_grid.max() - theta_grid.min() < 1.5 * math.pi:
        raise SequenceError("analyzer phases must span [0, 2 pi)")
    sig = np.array([analyzer_population(psi, n_spins, t, center) for t in theta_grid])
    basis = np.column_stack(
        [np.ones_like(theta_grid), np.cos(theta_grid), np.sin(theta_grid)]
    )
    coef, *_ = np.linalg.lstsq(basis, sig, rcond=None)
    offset, b, c = coef
    amp = math.hypot(b, c)
    residual = float(np.sqrt(np.mean((basis @ coef - sig) ** 2)))
    if offset <= 1e-9:
        raise SequenceError("degenerate analyzer fit: zero offset")
    return AnalyzerFit(
        c_amp=float(amp),
        c_offset=float(offset),
        coherence=float(amp / offset),
        residual=residual,
    )
