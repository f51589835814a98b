"""Numerical laboratory for disordered dipolar XY spin ensembles.

Exact-diagonalization dynamics of randomly positioned spins-1/2 with
dipolar spin-exchange couplings and Lorentzian on-site disorder, the pulse
sequences used to probe them (Ramsey, spin echo, epsilon-CPMG, WAHUHA echo,
spin locking, Floquet DTC), average-Hamiltonian analysis of those
sequences, and seeded Monte Carlo ensembles with CLI front end.

Internal units: time in microseconds, energies/frequencies in rad/us,
lengths in nm.  Configuration files use ordinary MHz; the conversion
happens at that boundary only.
"""

__version__ = "0.1.0"

from .constants import CONSTANTS, DEFAULT_DISORDER_FWHM, TWO_PI
from .dtc import (
    PhaseDiagram,
    PolarizationSeries,
    Spectrum,
    boundary_slope,
    build_phase_diagram,
    dft_spectrum,
    dtc_series,
    run_dtc_floquet,
    subharmonic_intensity,
)
from .dynamics import (
    Propagator,
    apply_ideal_pulse,
    expect_site,
    finite_pulse_propagator,
)
from .ensemble import (
    EnsembleSpec,
    FitResult,
    TraceStats,
    calibrate_concentration,
    derive_seed,
    fit_decay,
    model_i_stats,
    rescale_by_polarization,
    run_ensemble,
)
from .errors import (
    ConfigError,
    DipolarXYError,
    FitError,
    GeometryError,
    HamiltonianError,
    OracleFailure,
    SequenceError,
    SimulationError,
)
from .hamiltonian import (
    CouplingMatrix,
    DisorderField,
    HamiltonianTerms,
    build_xxz_hamiltonian,
    build_xy_hamiltonian,
    coupling_matrix,
    sample_disorder,
)
from .aht import (
    AhtResult,
    average_hamiltonian,
    decompose_weights,
    exact_period_unitary,
    toggling_frames,
)
from .lattice import (
    CrystalLattice,
    DensitySpec,
    SpinConfiguration,
    sample_configuration,
)
from .oracles import (
    ThreeSpinParams,
    three_spin_exact_trace,
    three_spin_perturbative,
    two_spin_echo_polarization,
)
from .sequences import (
    DtcFloquet,
    EpsCpmg,
    Ramsey,
    SpinEcho,
    SpinLock,
    WahuhaEcho,
    emulate_analyzer_sweep,
    prepare_initial,
)

__all__ = [
    "__version__",
    "CONSTANTS", "DEFAULT_DISORDER_FWHM", "TWO_PI",
    "PhaseDiagram", "PolarizationSeries", "Spectrum", "boundary_slope",
    "build_phase_diagram", "dft_spectrum", "dtc_series", "run_dtc_floquet",
    "subharmonic_intensity",
    "Propagator", "apply_ideal_pulse", "expect_site",
    "finite_pulse_propagator",
    "EnsembleSpec", "FitResult", "TraceStats", "calibrate_concentration",
    "derive_seed", "fit_decay", "model_i_stats", "rescale_by_polarization",
    "run_ensemble",
    "ConfigError", "DipolarXYError", "FitError", "GeometryError",
    "HamiltonianError", "OracleFailure", "SequenceError", "SimulationError",
    "CouplingMatrix", "DisorderField", "HamiltonianTerms",
    "build_xxz_hamiltonian", "build_xy_hamiltonian", "coupling_matrix",
    "sample_disorder",
    "AhtResult", "average_hamiltonian", "decompose_weights",
    "exact_period_unitary", "toggling_frames",
    "CrystalLattice", "DensitySpec", "SpinConfiguration",
    "sample_configuration",
    "ThreeSpinParams", "three_spin_exact_trace", "three_spin_perturbative",
    "two_spin_echo_polarization",
    "DtcFloquet", "EpsCpmg", "Ramsey", "SpinEcho", "SpinLock", "WahuhaEcho",
    "emulate_analyzer_sweep", "prepare_initial",
]
