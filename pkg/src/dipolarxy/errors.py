"""Exception hierarchy.

Every error raised on a contract violation derives from DipolarXYError so
callers (and the CLI) can map failures onto exit codes without string
matching.
"""


class DipolarXYError(Exception):
    """Base class for all package errors."""


class ConfigError(DipolarXYError):
    """Invalid or unparsable run configuration (CLI exit code 2)."""


class GeometryError(DipolarXYError):
    """Lattice or sampling-region problem (empty region, too few sites)."""


class HamiltonianError(DipolarXYError):
    """Ill-formed couplings, disorder, or operator inputs."""


class SequenceError(DipolarXYError):
    """Infeasible pulse-sequence parameters (timing, angles, modes)."""


class SimulationError(DipolarXYError):
    """Runtime failure inside a simulation (CLI exit code 3)."""


class FitError(DipolarXYError):
    """Curve fit could not be performed or did not converge."""


class OracleFailure(DipolarXYError):
    """An analytic cross-check did not pass (CLI exit code 4)."""
