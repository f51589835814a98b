"""Seeded Monte Carlo ensembles over ion positions and on-site disorder.

Each realization draws a spin configuration and a detuning vector from
generators derived deterministically from (master_seed, realization index,
stream label), so results are independent of worker count and completion
order.  Aggregation stores per-realization traces by index and reduces in
fixed order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .constants import DEFAULT_DISORDER_FWHM
from .dynamics import Propagator, apply_ideal_pulse, state_all_zero
from .errors import ConfigError, DipolarXYError, FitError, SimulationError
from .hamiltonian import (
    MAX_SPINS,
    build_xy_hamiltonian,
    coupling_matrix,
    sample_disorder,
)
from .lattice import DensitySpec, sample_configuration
from .oracles import early_fit_window, extract_j_max, fit_early_quadratic
from .sequences import (
    PULSE_MODES,
    EpsCpmg,
    Ramsey,
    SpinEcho,
    SpinLock,
    WahuhaEcho,
    center_coherence,
    run_eps_cpmg,
    run_ramsey,
    run_spin_echo,
    run_spin_lock,
    run_wahuha_echo,
)

__all__ = [
    "EnsembleSpec",
    "TraceStats",
    "FitResult",
    "derive_seed",
    "substream",
    "run_ensemble",
    "model_i_stats",
    "fit_decay",
    "rescale_by_polarization",
    "calibrate_concentration",
]


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit seed from a master seed plus int/str stream labels.

    blake2b rather than Python hash(): must agree across processes and
    interpreter runs.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master_seed).to_bytes(8, "little"))
    for p in parts:
        if isinstance(p, str):
            h.update(b"s" + p.encode("utf-8") + b"\x00")
        else:
            h.update(b"i" + int(p).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def substream(master_seed: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *parts))


@dataclass(frozen=True)
class EnsembleSpec:
    """Ensemble parameters; field names mirror the config file keys."""

    n_s: float                      # concentration, ppm
    n_realizations: int = 500
    master_seed: int = 0
    N: int = 9                      # spins per realization
    W: float = DEFAULT_DISORDER_FWHM
    eta_pol: float = 1.0
    pulse_mode: str = "ideal"
    t_p: float = 0.0

    def __post_init__(self) -> None:
        DensitySpec(self.n_s)       # range check lives there
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be >= 1")
        if not 2 <= self.N <= MAX_SPINS:
            raise ConfigError(f"N must be in [2, {MAX_SPINS}]")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.W < 0:
            raise ConfigError("W must be >= 0")
        if not 0.5 < self.eta_pol <= 1.0:
            raise ConfigError("eta_pol must be in (0.5, 1]")
        if self.pulse_mode not in PULSE_MODES:
            raise ConfigError(f"pulse_mode must be one of {PULSE_MODES}")
        if self.t_p < 0:
            raise ConfigError("t_p must be >= 0")

    @property
    def density(self) -> DensitySpec:
        return DensitySpec(self.n_s)


@dataclass(frozen=True)
class TraceStats:
    """Ensemble mean and standard error of the readout-spin coherence."""

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_realizations: int
    values: np.ndarray | None = dataclasses.field(default=None, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", np.asarray(self.times, dtype=np.float64))
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=np.float64))
        if not (self.times.shape == self.mean.shape == self.stderr.shape):
            raise ConfigError("times/mean/stderr must share one shape")


@dataclass(frozen=True)
class FitResult:
    model: str
    t_1e: float
    beta: float
    amplitude: float
    residual: float


def _reduce(times: np.ndarray, values: np.ndarray,
            keep_values: bool) -> TraceStats:
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n >= 2:
        stderr = values.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        stderr = np.full_like(mean, np.nan)
    return TraceStats(times, mean, stderr, n,
                      values if keep_values else None)


# ---------------------------------------------------------------------------
# per-realization pipeline


def _basis_state(n_spins: int, flips: np.ndarray) -> np.ndarray:
    # spin i lives on bit (n_spins - 1 - i); bit set = |1> = S_z = -1/2
    idx = 0
    for i, f in enumerate(flips):
        if f:
            idx |= 1 << (n_spins - 1 - i)
    psi = np.zeros(2**n_spins, dtype=np.complex128)
    psi[idx] = 1.0
    return psi


def _initial_branches(spec: EnsembleSpec, rng: np.random.Generator,
                      phi: float = math.pi / 2):
    """Weighted initial states for one realization, rotated by phi about x.

    eta_pol < 1: the bath spins flip by Bernoulli draw, but the readout
    spin's flip is averaged exactly (weights eta, 1 - eta).  Same estimand
    as flipping it randomly, much lower variance, and the bath draw
    consumes the stream exactly like a full Bernoulli vector would.
    """
    n = spec.N

    def rot(psi):
        return apply_ideal_pulse(psi, n, "x", phi) if phi != 0.0 else psi

    if spec.eta_pol >= 1.0:
        return [(1.0, rot(state_all_zero(n)))]
    u = rng.random(n)
    flips = u >= spec.eta_pol
    branches = []
    for center_flip, weight in ((False, spec.eta_pol), (True, 1.0 - spec.eta_pol)):
        f = flips.copy()
        f[0] = center_flip
        branches.append((weight, rot(_basis_state(n, f))))
    return branches


def _realize_terms(spec: EnsembleSpec, r: int, prefix: tuple = ()):
    cfg = sample_configuration(
        substream(spec.master_seed, *prefix, r, "pos"), spec.density, spec.N)
    couplings = coupling_matrix(cfg.positions)
    disorder = sample_disorder(
        substream(spec.master_seed, *prefix, r, "dis"), spec.W, spec.N)
    return build_xy_hamiltonian(couplings, disorder)


def _sequence_times(sequence, time_grid) -> np.ndarray:
    if isinstance(sequence, (Ramsey, SpinEcho)) or sequence in (Ramsey, SpinEcho):
        if time_grid is None:
            raise ConfigError("Ramsey/spin-echo ensembles need an explicit tau grid")
        grid = np.asarray(time_grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size < 1:
            raise ConfigError("time grid must be a non-empty 1-D array")
        if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
            raise ConfigError("time grid must be non-negative and strictly increasing")
        return grid
    if isinstance(sequence, (EpsCpmg, WahuhaEcho)):
        if time_grid is not None:
            raise ConfigError("stroboscopic sequences fix their own time grid; "
                              "pass time_grid=None")
        return np.arange(1, sequence.k + 1) * sequence.period
    if isinstance(sequence, SpinLock):
        if time_grid is None:
            raise ConfigError("spin-lock ensembles need explicit sample times")
        grid = np.asarray(time_grid, dtype=np.float64)
        if np.any(grid < 0) or np.any(grid > sequence.t_total) \
                or np.any(np.diff(grid) <= 0):
            raise ConfigError("spin-lock sample times must be increasing "
                              "within [0, t_total]")
        return grid
    raise ConfigError(f"unsupported sequence for ensembles: {sequence!r}")


def _branch_trace(psi0: np.ndarray, terms, prop, sequence,
                  times: np.ndarray) -> np.ndarray:
    n = terms.n_spins
    if isinstance(sequence, Ramsey) or sequence is Ramsey:
        return np.array([run_ramsey(psi0, prop, t, n) for t in times])
    if isinstance(sequence, SpinEcho) or sequence is SpinEcho:
        return np.array([run_spin_echo(psi0, prop, t, n) for t in times])
    if isinstance(sequence, EpsCpmg):
        return run_eps_cpmg(psi0, prop, sequence, n,
                            h_total=terms.h_total).values
    if isinstance(sequence, WahuhaEcho):
        return run_wahuha_echo(psi0, prop, sequence, n,
                               h_total=terms.h_total).values
    if isinstance(sequence, SpinLock):
        return run_spin_lock(psi0, terms.h_total, sequence, times, n).values
    raise ConfigError(f"unsupported sequence for ensembles: {sequence!r}")


def _realization_trace(spec: EnsembleSpec, sequence, times: np.ndarray,
                       r: int) -> np.ndarray:
    terms = _realize_terms(spec, r)
    branches = _initial_branches(spec, substream(spec.master_seed, r, "init"))
    needs_prop = not isinstance(sequence, SpinLock)
    prop = Propagator(terms.h_total) if needs_prop else None
    out = np.zeros(times.shape)
    for weight, psi0 in branches:
        out += weight * _branch_trace(psi0, terms, prop, sequence, times)
    return out


def _worker(args) -> tuple[int, np.ndarray]:
    spec, sequence, times, r = args
    try:
        return r, _realization_trace(spec, sequence, times, r)
    except DipolarXYError as exc:
        raise exc.__class__(f"realization {r}: {exc}") from exc


def run_ensemble(spec: EnsembleSpec, sequence, time_grid=None, *,
                 workers: int = 1, keep_values: bool = False) -> TraceStats:
    """Ensemble-averaged readout-spin coherence trace.

    Ramsey/SpinEcho sweep tau over time_grid (any tau on the instance is
    ignored); EpsCpmg/WahuhaEcho run their own stroboscopic grid and
    require time_grid=None; SpinLock samples the drive at time_grid.
    """
    times = _sequence_times(sequence, time_grid)
    rs = range(spec.n_realizations)
    values = np.empty((spec.n_realizations, times.size))
    if workers <= 1:
        for r in rs:
            values[r] = _worker((spec, sequence, times, r))[1]
    else:
        jobs = [(spec, sequence, times, r) for r in rs]
        chunk = max(1, len(jobs) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for r, trace in pool.map(_worker, jobs, chunksize=chunk):
                values[r] = trace
    return _reduce(times, values, keep_values)


# ---------------------------------------------------------------------------
# pair model (Model I): strongest-partner echo without the rest of the bath


def model_i_samples(spec: EnsembleSpec, scope: str = "center") -> np.ndarray:
    """Strongest coupling per realization, same position stream as the
    full ensembles so the comparison is paired."""
    out = np.empty(spec.n_realizations)
    for r in range(spec.n_realizations):
        cfg = sample_configuration(substream(spec.master_seed, r, "pos"),
                                   spec.density, spec.N)
        out[r] = extract_j_max(coupling_matrix(cfg.positions).j, scope=scope)
    return out


def model_i_stats(spec: EnsembleSpec, tau_grid, scope: str = "center",
                  keep_values: bool = False) -> TraceStats:
    """Disorder-free pair approximation: P_r(tau) = cos(J_max,r tau / 2)."""
    times = np.asarray(tau_grid, dtype=np.float64)
    j = model_i_samples(spec, scope=scope)
    values = np.cos(0.5 * np.outer(j, times))
    return _reduce(times, values, keep_values)


# ---------------------------------------------------------------------------
# fits and calibration


def _decay_model(t, a, t1e, beta):
    return a * np.exp(-((t / t1e) ** beta))


def fit_decay(trace: TraceStats, model: str = "exponential") -> FitResult:
    """Least-squares A exp(-(t/T)^beta); beta pinned to 1 for 'exponential'.

    T is directly the 1/e time of the fitted curve.
    """
    if model not in ("exponential", "stretched"):
        raise ConfigError("fit model must be 'exponential' or 'stretched'")
    t = np.asarray(trace.times, dtype=np.float64)
    v = np.asarray(trace.mean, dtype=np.float64)
    if t.size < 4:
        raise FitError("decay fit needs at least 4 points")
    if v[0] <= 0:
        raise FitError("decay fit needs a positive initial value")
    head = v[: max(2, t.size // 4)].mean()
    tail = v[-max(2, t.size // 4):].mean()
    if tail >= head:
        raise FitError(f"trace does not decay (head {head:.4f} <= tail {tail:.4f})")
    below = np.nonzero(v < v[0] / math.e)[0]
    t1e0 = t[below[0]] if below.size else t[-1]
    t1e0 = max(t1e0, 1e-6)
    try:
        if model == "exponential":
            popt, _ = curve_fit(lambda tt, a, t1e: _decay_model(tt, a, t1e, 1.0),
                                t, v, p0=[v[0], t1e0],
                                bounds=([0.0, 1e-9], [2.0, np.inf]), maxfev=20000)
            a, t1e, beta = popt[0], popt[1], 1.0
        else:
            popt, _ = curve_fit(_decay_model, t, v, p0=[v[0], t1e0, 1.0],
                                bounds=([0.0, 1e-9, 0.05], [2.0, np.inf, 3.0]),
                                maxfev=20000)
            a, t1e, beta = popt
    except RuntimeError as exc:
        raise FitError(f"decay fit did not converge: {exc}") from exc
    resid = float(np.sqrt(np.mean((v - _decay_model(t, a, t1e, beta)) ** 2)))
    return FitResult(model, float(t1e), float(beta), float(a), resid)


def rescale_by_polarization(trace: TraceStats, eta_pol: float) -> TraceStats:
    """Divide the trace by the initial contrast 2 eta_pol - 1."""
    if eta_pol <= 0.5:
        raise ConfigError("eta_pol <= 0.5 gives zero or negative contrast")
    scale = 1.0 / (2.0 * eta_pol - 1.0)
    return TraceStats(trace.times, trace.mean * scale, trace.stderr * scale,
                      trace.n_realizations,
                      None if trace.values is None else trace.values * scale)


def early_slope(spec: EnsembleSpec, *, n_points: int = 9,
                workers: int = 1) -> float:
    """Quadratic-in-tau decay coefficient of a short-time spin-echo ensemble."""
    j_scale = spec.density.mean_coupling()
    window = early_fit_window(j_scale)
    grid = np.linspace(window / n_points, window, n_points)
    stats = run_ensemble(spec, SpinEcho(tau=window), grid, workers=workers)
    s, _ = fit_early_quadratic(stats.times, stats.mean, j_scale=j_scale)
    return s


def calibrate_concentration(target_early_slope: float, search_range,
                            base_spec: EnsembleSpec | None = None, *,
                            rel_tol: float = 0.03, max_iter: int = 24,
                            workers: int = 1) -> float:
    """Concentration whose short-time spin-echo slope matches the target.

    Geometric bisection: the slope scales as n_s^2, so log-space splits
    converge in a handful of ensemble evaluations.  Each evaluation is
    seeded identically, making the objective deterministic.
    """
    if target_early_slope <= 0:
        raise ConfigError("target early slope must be > 0")
    lo, hi = float(search_range[0]), float(search_range[1])
    if not 0 < lo < hi:
        raise ConfigError("search range must satisfy 0 < lo < hi")
    if base_spec is None:
        base_spec = EnsembleSpec(n_s=lo, n_realizations=200, N=8, master_seed=20)

    def slope_at(ppm: float) -> float:
        return early_slope(dataclasses.replace(base_spec, n_s=ppm),
                           workers=workers)

    s_lo, s_hi = slope_at(lo), slope_at(hi)
    if not s_lo <= target_early_slope <= s_hi:
        raise SimulationError(
            f"calibration range exhausted: target slope {target_early_slope:.4g} "
            f"outside [{s_lo:.4g}, {s_hi:.4g}] for n_s in [{lo}, {hi}] ppm")
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi)
        s_mid = slope_at(mid)
        if abs(s_mid - target_early_slope) <= rel_tol * target_early_slope:
            return mid
        if s_mid < target_early_slope:
            lo = mid
        else:
            hi = mid
    raise SimulationError(
        f"calibration did not converge within {max_iter} bisection steps")
