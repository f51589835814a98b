"""Discrete-time-crystal protocol and subharmonic spectral analysis.

One Floquet cycle = continuous y spin-lock for tau, then a near-pi kick
about x.  The readout spin's signed polarization after each kick alternates
at half the drive frequency inside the DTC phase; the DFT of that series
measures the nu = 1/2 subharmonic weight, and the phase diagram maps it
over (tau, epsilon).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Propagator, apply_ideal_pulse, expect_site
from .ensemble import EnsembleSpec, _initial_branches, _realize_terms, substream
from .errors import ConfigError, DipolarXYError, FitError
from .sequences import DtcFloquet

__all__ = [
    "PolarizationSeries",
    "Spectrum",
    "PhaseDiagram",
    "run_dtc_floquet",
    "dtc_series",
    "dft_spectrum",
    "subharmonic_intensity",
    "build_phase_diagram",
    "boundary_slope",
    "in_phase_fraction",
]

DEFAULT_THRESHOLD = 0.4


@dataclass(frozen=True)
class PolarizationSeries:
    """Signed stroboscopic polarization of the readout spin, k = 1..K.

    `signed` keeps the oscillation sign (the contrast formula's numerator
    C+ - C- before its absolute value); `contrast` is its magnitude.
    """

    signed: np.ndarray
    tau: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "signed",
                           np.asarray(self.signed, dtype=np.float64))
        if self.signed.ndim != 1 or self.signed.size < 1:
            raise ConfigError("polarization series must be a non-empty 1-D array")
        if np.max(np.abs(self.signed)) > 1.0 + 1e-6:
            raise ConfigError("|P(k)| exceeds 1")
        if self.tau < 0:
            raise ConfigError("base period must be >= 0")

    @property
    def contrast(self) -> np.ndarray:
        return np.abs(self.signed)

    @property
    def k_cycles(self) -> int:
        return self.signed.size


@dataclass(frozen=True)
class Spectrum:
    nu: np.ndarray
    intensity: np.ndarray          # |S(nu)|^2

    def __post_init__(self) -> None:
        object.__setattr__(self, "nu", np.asarray(self.nu, dtype=np.float64))
        object.__setattr__(self, "intensity",
                           np.asarray(self.intensity, dtype=np.float64))
        if self.nu.shape != self.intensity.shape:
            raise ConfigError("nu and intensity grids must match")


def run_dtc_floquet(state0: np.ndarray, h_total: np.ndarray, spec: DtcFloquet,
                    n_spins: int, center: int = 0) -> PolarizationSeries:
    """Signed readout polarization after each of the k Floquet cycles.

    state0 is the unrotated product state; the phi prep rotation is part of
    the protocol and applied here.  One eigendecomposition of the locked
    Hamiltonian serves all cycles; the kicks are ideal x rotations.
    """
    psi = state0
    if spec.phi != 0.0:
        psi = apply_ideal_pulse(psi, n_spins, "x", spec.phi)
    lock = None
    if spec.tau > 0.0:
        lock = Propagator.with_y_drive(h_total, spec.omega_y, n_spins)
    kick = math.pi + spec.epsilon
    signed = np.empty(spec.k)
    for m in range(spec.k):
        if lock is not None:
            psi = lock.evolve(psi, spec.tau)
        psi = apply_ideal_pulse(psi, n_spins, "x", kick)
        signed[m] = 2.0 * expect_site(psi, n_spins, center, "y")
    return PolarizationSeries(signed, spec.tau)


def dtc_series(spec: EnsembleSpec, seq: DtcFloquet, *,
               seed_prefix: tuple = ()) -> PolarizationSeries:
    """Ensemble-mean signed polarization series.

    The mean is taken over realizations before any spectral analysis;
    realization r draws its streams from (master_seed, *seed_prefix, r).
    """
    acc = np.zeros(seq.k)
    for r in range(spec.n_realizations):
        terms = _realize_terms(spec, r, seed_prefix)
        rng = substream(spec.master_seed, *seed_prefix, r, "init")
        for weight, psi0 in _initial_branches(spec, rng, phi=0.0):
            series = run_dtc_floquet(psi0, terms.h_total, seq, spec.N)
            acc += weight * series.signed
    return PolarizationSeries(acc / spec.n_realizations, seq.tau)


def dft_spectrum(series: PolarizationSeries, nu_grid=None,
                 mode: str = "contrast") -> Spectrum:
    """S(nu) = (1/K) sum_k x_k exp(-i 2 pi nu k), intensities |S|^2.

    Normalized so a perfect +1/-1 alternation carries |S(1/2)|^2 = 1.
    mode picks the input series: "signed" keeps the oscillation sign (any
    subharmonic analysis needs this; the magnitude of a perfect alternation
    is constant and puts all weight at nu = 0), "contrast" uses |P(k)|.
    """
    if mode not in ("signed", "contrast"):
        raise ConfigError("mode must be 'signed' or 'contrast'")
    x = series.signed if mode == "signed" else series.contrast
    k_cycles = x.size
    if k_cycles < 4:
        raise ConfigError("spectral analysis needs at least 4 cycles")
    if nu_grid is None:
        nu = np.arange(k_cycles) / k_cycles
    else:
        nu = np.asarray(nu_grid, dtype=np.float64)
        if nu.ndim != 1 or nu.size == 0:
            raise ConfigError("nu grid must be a non-empty 1-D array")
        if np.any(nu < 0) or np.any(nu >= 1):
            raise ConfigError("nu grid must lie in [0, 1)")
    k = np.arange(1, k_cycles + 1)
    s = np.exp(-2j * np.pi * np.outer(nu, k)) @ x / k_cycles
    return Spectrum(nu, np.abs(s) ** 2)


def subharmonic_intensity(spectrum: Spectrum) -> float:
    """|S(1/2)|^2; the grid must contain nu = 1/2 exactly."""
    hits = np.nonzero(np.abs(spectrum.nu - 0.5) < 1e-12)[0]
    if hits.size == 0:
        raise ConfigError("frequency grid does not contain nu = 1/2")
    return float(spectrum.intensity[hits[0]])


# ---------------------------------------------------------------------------
# phase diagram over (tau, epsilon)


@dataclass(frozen=True)
class PhaseDiagram:
    tau_grid: np.ndarray
    eps_grid: np.ndarray
    intensity: np.ndarray           # shape (n_tau, n_eps)
    threshold: float
    boundary_tau: np.ndarray        # rows that start inside the phase
    boundary_eps: np.ndarray        # interpolated eps* per boundary row
    reentrant: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    def __post_init__(self) -> None:
        if self.intensity.shape != (self.tau_grid.size, self.eps_grid.size):
            raise ConfigError("intensity matrix shape must be (n_tau, n_eps)")


def _dtc_point(args) -> tuple[int, int, float]:
    spec, i_tau, i_eps, tau, eps, k_cycles, phi, omega_y = args
    seq = DtcFloquet(tau=tau, epsilon=eps, k=k_cycles, phi=phi, omega_y=omega_y)
    try:
        series = dtc_series(spec, seq, seed_prefix=("dtc", i_tau, i_eps))
    except DipolarXYError as exc:
        raise exc.__class__(
            f"phase-diagram cell (tau={tau}, eps={eps}): {exc}") from exc
    return i_tau, i_eps, subharmonic_intensity(dft_spectrum(series, mode="signed"))


def _extract_boundary(tau_grid, eps_grid, intensity, threshold):
    """First outward crossing below threshold on the eps >= 0 half-grid.

    Rows already below threshold at the smallest |eps| carry no boundary
    point.  eps* interpolates linearly between the bracketing grid points;
    rows climbing back above threshold further out keep the innermost
    crossing and are flagged re-entrant.
    """
    half = np.nonzero(eps_grid >= 0)[0]
    order = half[np.argsort(eps_grid[half])]
    b_tau, b_eps, reent = [], [], []
    for i, tau in enumerate(tau_grid):
        row = intensity[i, order]
        eps = eps_grid[order]
        if row.size == 0 or row[0] < threshold:
            continue
        below = np.nonzero(row < threshold)[0]
        if below.size == 0:
            continue
        j = below[0]
        frac = (threshold - row[j - 1]) / (row[j] - row[j - 1])
        b_tau.append(tau)
        b_eps.append(eps[j - 1] + frac * (eps[j] - eps[j - 1]))
        reent.append(bool(np.any(row[j:] >= threshold)))
    return (np.asarray(b_tau), np.asarray(b_eps),
            np.asarray(reent, dtype=bool))


def build_phase_diagram(spec: EnsembleSpec, tau_grid, eps_grid,
                        k_cycles: int = 60, phi: float = math.pi / 2,
                        omega_y: float = 2.0 * math.pi * 10.0, *,
                        threshold: float = DEFAULT_THRESHOLD,
                        workers: int = 1) -> PhaseDiagram:
    """Subharmonic intensity |S(1/2)|^2 over a (tau, epsilon) grid.

    Every cell runs its own ensemble with seeds derived from
    (master_seed, tau index, eps index, realization), so the diagram is
    independent of evaluation order and worker count.
    """
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    eps_grid = np.asarray(eps_grid, dtype=np.float64)
    if tau_grid.size == 0 or eps_grid.size == 0:
        raise ConfigError("tau and epsilon grids must be non-empty")
    if k_cycles < 8:
        raise ConfigError("phase diagrams need k_cycles >= 8")
    if not 0 < threshold:
        raise ConfigError("threshold must be positive")
    jobs = [(spec, i, j, float(t), float(e), k_cycles, phi, omega_y)
            for i, t in enumerate(tau_grid) for j, e in enumerate(eps_grid)]
    intensity = np.empty((tau_grid.size, eps_grid.size))
    if workers <= 1:
        for job in jobs:
            i, j, val = _dtc_point(job)
            intensity[i, j] = val
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, j, val in pool.map(_dtc_point, jobs, chunksize=1):
                intensity[i, j] = val
    b_tau, b_eps, reent = _extract_boundary(tau_grid, eps_grid,
                                            intensity, threshold)
    return PhaseDiagram(tau_grid, eps_grid, intensity, threshold,
                        b_tau, b_eps, reent)


def boundary_slope(diagram: PhaseDiagram) -> float:
    """Least-squares slope of eps*(tau) along the extracted boundary."""
    if diagram.boundary_tau.size < 3:
        raise FitError("boundary slope needs at least 3 boundary points")
    a = np.column_stack([np.ones_like(diagram.boundary_tau),
                         diagram.boundary_tau])
    coef, *_ = np.linalg.lstsq(a, diagram.boundary_eps, rcond=None)
    return float(coef[1])


def in_phase_fraction(diagram: PhaseDiagram) -> float:
    """Fraction of grid cells at or above the subharmonic threshold."""
    return float(np.mean(diagram.intensity >= diagram.threshold))
