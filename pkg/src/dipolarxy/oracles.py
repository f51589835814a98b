"""Closed-form cross-checks for small systems.

These are the analytic results the simulation is tested against: the
two-spin echo polarization, the perturbative three-spin line spectrum, the
strongest-pair freeze model, and the expected first-order correction of
the quarter-turn CPMG sequence.  Everything here is cheap and exact enough
to serve as an oracle; none of it is used by the Monte Carlo hot path.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FitError

RATIO_VALIDITY_WARN = 0.4


def two_spin_echo_polarization(j: float, delta: float, tau) -> np.ndarray | float:
    """Echo polarization of one spin of a detuned pair.

    P(tau) = Delta^2/(Delta^2+J^2)
             + J^2/(Delta^2+J^2) * cos(sqrt(Delta^2+J^2) tau / 2)
    and P = 1 identically when both J and Delta vanish.
    """
    tau = np.asarray(tau, dtype=np.float64)
    q2 = j * j + delta * delta
    if q2 == 0.0:
        out = np.ones_like(tau)
        return float(out) if out.ndim == 0 else out
    frac = (j * j) / q2
    out = (1.0 - frac) + frac * np.cos(0.5 * math.sqrt(q2) * tau)
    return float(out) if out.ndim == 0 else out


def _fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def two_spin_ensemble_average(
    tau_grid,
    j_fwhm: float,
    delta_fwhm: float,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte Carlo average of the pair echo over Gaussian J and Delta.

    Both widths are FWHM of Gaussians (this cross-check's distributions;
    the many-spin ensembles use Lorentzian on-site disorder instead).
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    js = rng.normal(0.0, _fwhm_to_sigma(j_fwhm), n_samples)
    ds = rng.normal(0.0, _fwhm_to_sigma(delta_fwhm), n_samples)
    acc = np.zeros_like(tau_grid)
    for j, d in zip(js, ds):
        acc += two_spin_echo_polarization(j, d, tau_grid)
    return acc / n_samples


def early_decay_rate(j_samples) -> float:
    """Quadratic early-decay rate <J^2>/4 implied by pair physics.

    With the fit model P = A (1 - s/2 tau^2) this is the expected s; it is
    disorder-independent because the echo removes the detuning at second
    order.
    """
    j_samples = np.asarray(j_samples, dtype=np.float64)
    if j_samples.size == 0:
        raise ConfigError("need at least one coupling sample")
    return float(np.mean(j_samples**2) / 4.0)


def early_fit_window(j_scale: float) -> float:
    """Upper edge of the early-time fit window, min(1 us, 0.3/J-bar)."""
    if j_scale <= 0:
        return 1.0
    return min(1.0, 0.3 / j_scale)


def fit_early_quadratic(times, values, j_scale: float = 0.0,
                        window: float | None = None) -> tuple[float, float]:
    """Least-squares (s, A) of A(1 - s/2 tau^2) on the early window."""
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if window is None:
        window = early_fit_window(j_scale)
    mask = times <= window + 1e-12
    if int(mask.sum()) < 3:
        raise FitError(
            f"early-time fit needs >= 3 points inside tau <= {window:g}"
        )
    t = times[mask]
    v = values[mask]
    # v = A - (A s / 2) t^2; linear in (A, A*s/2)
    basis = np.column_stack([np.ones_like(t), -0.5 * t * t])
    coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
    amplitude, slope_times_a = coef
    if amplitude <= 0:
        raise FitError("early-time fit found non-positive amplitude")
    return float(slope_times_a / amplitude), float(amplitude)


@dataclass(frozen=True)
class ThreeSpinParams:
    """Chain J0 (readout pair), J1 (readout-to-third), J2 (partner-to-third)."""

    j0: float
    j1: float
    j2: float

    def __post_init__(self) -> None:
        if self.j0 == 0.0:
            raise ConfigError("three-spin oracle needs J0 != 0")
        if max(abs(self.j1), abs(self.j2)) / abs(self.j0) > RATIO_VALIDITY_WARN:
            warnings.warn(
                "three-spin perturbative expansion is outside its validity "
                f"range (|J1|,|J2| > {RATIO_VALIDITY_WARN}|J0|)",
                stacklevel=2,
            )

    @property
    def ratios(self) -> tuple[float, float]:
        return self.j1 / self.j0, self.j2 / self.j0


@dataclass(frozen=True)
class PerturbativeTerms:
    """DC offset, slow beat and the five fast lines of the pair echo
    perturbed by a third spin; amplitudes sum to 1 at tau = 0."""

    dc: float
    slow_amplitude: float
    slow_frequency: float
    lines: tuple[tuple[float, float], ...]

    def evaluate(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=np.float64)
        out = np.full_like(tau, self.dc)
        out += self.slow_amplitude * np.cos(self.slow_frequency * tau)
        for amp, freq in self.lines:
            out += amp * np.cos(freq * tau)
        return out


def three_spin_terms(params: ThreeSpinParams) -> PerturbativeTerms:
    """Second-order perturbative spectrum of the echo polarization."""
    j0 = params.j0
    r1, r2 = params.ratios
    dc = 0.5 * r2 + 0.5 * (3 * r1 * r1 + r2 * r2 + 4 * r1 * r2)
    slow_amp = -0.5 * (r2 - r2 * (r1 + r2))
    slow_freq = abs(r1 * r2 * j0)
    lines = (
        (0.5 * r1 * (r1 - r2),
         abs(j0) * (1.0 + 0.5 * (r1 * r1 + r2 * r2))),
        (0.5 * (1.0 - 0.5 * (r1 + r2)
                - 0.25 * (13 * r1 * r1 + 7 * r2 * r2 + 12 * r1 * r2)),
         abs(j0) * (0.5 + 0.25 * (r1 * r1 + r2 * r2 + 6 * r1 * r2))),
        (0.5 * (1.0 + 0.5 * (r1 + r2)
                - 0.25 * (r1 * r1 + 3 * r2 * r2 + 4 * r1 * r2)),
         abs(j0) * (0.5 + 0.25 * (r1 + r2) ** 2)),
        (0.5 * (0.5 * (r1 - r2) + 0.75 * (r2 * r2 - r1 * r1)),
         abs(j0) * (0.5 + 0.25 * (r1 * r1 + r2 * r2 - 6 * r1 * r2))),
        (0.5 * (0.5 * (r2 - r1) + 0.25 * (r1 * r1 - r2 * r2)),
         abs(j0) * (0.5 + 0.25 * (r1 - r2) ** 2)),
    )
    return PerturbativeTerms(
        dc=dc, slow_amplitude=slow_amp, slow_frequency=slow_freq, lines=lines
    )


def three_spin_perturbative(params: ThreeSpinParams, tau) -> np.ndarray:
    return three_spin_terms(params).evaluate(tau)


def _three_spin_system(params: ThreeSpinParams):
    from .hamiltonian import CouplingMatrix, DisorderField, build_xy_hamiltonian

    j = np.array([
        [0.0, params.j0, params.j1],
        [params.j0, 0.0, params.j2],
        [params.j1, params.j2, 0.0],
    ])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_xy_hamiltonian(
            CouplingMatrix(j=j), DisorderField(deltas=np.zeros(3), w=0.0)
        )


def three_spin_exact_trace(params: ThreeSpinParams, tau_grid) -> np.ndarray:
    """Echo polarization of the readout spin from the full 8-dim dynamics."""
    from .dynamics import Propagator, apply_ideal_pulse, state_all_zero
    from .sequences import run_spin_echo

    terms = _three_spin_system(params)
    prop = Propagator(terms.h_total)
    psi0 = apply_ideal_pulse(state_all_zero(3), 3, "x", math.pi / 2)
    return np.array([
        run_spin_echo(psi0, prop, float(t), 3, center=0) for t in tau_grid
    ])


def three_spin_slow_peak(params: ThreeSpinParams,
                         band_fraction: float = 0.25) -> float:
    """Dominant Bohr frequency of the simulated signal below band_fraction*|J0|.

    Exact spectroscopy: the signal is a finite sum of cosines at level
    differences E_a - E_b, so the low-frequency peak location comes from the
    eigendecomposition directly, with no finite-window DFT bias.
    """
    from .dynamics import apply_ideal_pulse, state_all_zero
    from .aht import _site_ops

    terms = _three_spin_system(params)
    evals, evecs = np.linalg.eigh(terms.h_total)
    psi0 = apply_ideal_pulse(state_all_zero(3), 3, "x", math.pi / 2)
    amps = evecs.conj().T @ psi0
    _, sy, _ = _site_ops(3)
    obs = evecs.conj().T @ sy[0] @ evecs
    weights: dict[float, float] = {}
    n = evals.size
    for a in range(n):
        for b in range(n):
            freq = evals[a] - evals[b]
            if freq <= 1e-12:
                continue
            w = 2.0 * abs(np.conj(amps[a]) * obs[a, b] * amps[b])
            if w < 1e-15:
                continue
            for known in weights:
                if abs(known - freq) < 1e-9:
                    weights[known] += w
                    break
            else:
                weights[freq] = w
    band = band_fraction * abs(params.j0)
    in_band = {f: w for f, w in weights.items() if f < band}
    if not in_band:
        raise FitError("no spectral weight below the slow-frequency band")
    return max(in_band, key=in_band.get)


def extract_j_max(jmat: np.ndarray, scope: str = "global",
                  center: int = 0) -> float:
    """Strongest coupling magnitude: over all pairs, or the center row only."""
    jmat = np.asarray(jmat, dtype=np.float64)
    if scope == "global":
        iu = np.triu_indices(jmat.shape[0], k=1)
        vals = np.abs(jmat[iu])
    elif scope == "center":
        vals = np.abs(np.delete(jmat[center], center))
    else:
        raise ConfigError(f"unknown j_max scope {scope!r}")
    if vals.size == 0:
        raise ConfigError("need at least two spins for a pairwise coupling")
    return float(vals.max())


def model_i_trace(j_max_samples, tau_grid) -> np.ndarray:
    """Strongest-pair freeze: mean of cos(J_max tau / 2) over realizations."""
    j_max_samples = np.asarray(j_max_samples, dtype=np.float64)
    if j_max_samples.size == 0:
        raise ConfigError("need at least one realization")
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    return np.cos(0.5 * np.outer(tau_grid, j_max_samples)).mean(axis=1)


def cpmg_disorder_correction(jmat: np.ndarray, deltas: np.ndarray,
                             tau: float) -> np.ndarray:
    """Expected first-order average Hamiltonian of the quarter-turn CPMG
    sequence (eps = -pi/2, ideal pulses):

      -(tau/4) [ sum_i Delta_i^2 S_y^i
                 + sum_{i != j} Delta_i J_ij (2 S_z^i S_y^j - S_y^i S_z^j) ]

    The overall sign holds for this package's exp(+i angle n.S) pulse
    convention and flips with the opposite convention.
    """
    from .aht import _site_ops

    jmat = np.asarray(jmat, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    n = deltas.size
    sx, sy, sz = _site_ops(n)
    dim = 1 << n
    term = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(n):
        if deltas[i] != 0.0:
            term += deltas[i] ** 2 * sy[i]
    for i in range(n):
        for j in range(n):
            if i == j or jmat[i, j] == 0.0 or deltas[i] == 0.0:
                continue
            term += deltas[i] * jmat[i, j] * (2.0 * (sz[i] @ sy[j]) - sy[i] @ sz[j])
    return -(tau / 4.0) * term
