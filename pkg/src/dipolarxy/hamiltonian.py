"""Spin Hamiltonians of the disordered dipolar XY ensemble.

The rotating-frame Hamiltonian is

    H = sum_i Delta_i S_z^i
      + sum_{i<j} J_ij (S_x^i S_x^j + S_y^i S_y^j)

with Lorentzian-distributed on-site detunings Delta_i and dipolar couplings

    J_ij = -(prefactor / 2) * (3 z_ij^2 - 1) / r_ij^3,

where z_ij is the |cosine| of the angle between the pair separation and the
crystal c axis and r_ij the distance in nm.  The flip-flop form keeps only
the excitation-conserving part of the dipole-dipole interaction; the
counter-rotating part is suppressed by the qubit splitting and is provided
only as a diagnostic term for the validation test of that approximation.

A magnetic field applied along the transverse direction admixes an Ising
component, turning the interaction into an XXZ form

    H_int = (1 - alpha^2 / 2) H_exchange + 2 alpha^2 H_ising_z

with the small dimensionless admixture alpha = g_par * mu_B * B / omega.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import CONSTANTS, MaterialConstants
from .errors import HamiltonianError
from .kernels import exchange_dense, ising_dense, onsite_dense

MAX_SPINS = 14          # dense-matrix capacity guard, dim = 2**14
DISORDER_CUTOFF = 20.0  # redraw Lorentzian samples with |Delta| > 20 W


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetric pair-coupling matrix with zero diagonal, rad/us."""

    j: np.ndarray

    def __post_init__(self) -> None:
        j = np.asarray(self.j, dtype=np.float64)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise HamiltonianError("coupling matrix must be square")
        if not np.allclose(j, j.T, atol=1e-12):
            raise HamiltonianError("coupling matrix must be symmetric")
        if np.any(np.diag(j) != 0.0):
            raise HamiltonianError("self-coupling must be zero")
        object.__setattr__(self, "j", j)

    @property
    def n_spins(self) -> int:
        return self.j.shape[0]


@dataclass(frozen=True)
class DisorderField:
    """On-site detunings Delta_i (rad/us) drawn from a Lorentzian of FWHM w."""

    deltas: np.ndarray
    w: float = 0.0

    def __post_init__(self) -> None:
        deltas = np.asarray(self.deltas, dtype=np.float64)
        if deltas.ndim != 1:
            raise HamiltonianError("disorder field must be a 1d array")
        if self.w < 0:
            raise HamiltonianError("disorder FWHM must be >= 0")
        object.__setattr__(self, "deltas", deltas)

    @property
    def n_spins(self) -> int:
        return self.deltas.shape[0]


@dataclass(frozen=True)
class XxzControl:
    """Transverse-field control of the interaction anisotropy.

    alpha is dimensionless and must stay small for the perturbative XXZ
    form to be meaningful; above 0.1 a warning is emitted, above 0.3 the
    construction is refused.
    """

    alpha: float
    omega: float = CONSTANTS.qubit_splitting

    def __post_init__(self) -> None:
        if self.omega <= 0:
            raise HamiltonianError("qubit splitting must be positive")
        if abs(self.alpha) > 0.3:
            raise HamiltonianError(
                f"field admixture alpha = {self.alpha:.3f} outside validity (|alpha| <= 0.3)"
            )
        if abs(self.alpha) > 0.1:
            warnings.warn(
                f"alpha = {self.alpha:.3f} is large; XXZ form is second order in alpha",
                stacklevel=2,
            )

    @classmethod
    def from_field(
        cls,
        b_mt: float,
        omega: float = CONSTANTS.qubit_splitting,
        constants: MaterialConstants = CONSTANTS,
    ) -> "XxzControl":
        """Build from a transverse magnetic field in mT."""
        alpha = constants.g_parallel * constants.mu_b_rad_us_per_mt * b_mt / omega
        return cls(alpha=alpha, omega=omega)


@dataclass(frozen=True)
class HamiltonianTerms:
    """Dense real parts of the rotating-frame Hamiltonian."""

    n_spins: int
    h_dis: np.ndarray
    h_exchange: np.ndarray
    h_ising_z: np.ndarray
    h_total: np.ndarray
    couplings: CouplingMatrix = field(repr=False, default=None)  # type: ignore[assignment]
    disorder: DisorderField = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def dim(self) -> int:
        return 1 << self.n_spins


def _check_size(n: int) -> None:
    if n < 1:
        raise HamiltonianError("need at least one spin")
    if n > MAX_SPINS:
        raise HamiltonianError(
            f"{n} spins exceeds the dense-matrix capacity of {MAX_SPINS}"
        )


def pairwise_coupling(
    r_i: np.ndarray, r_j: np.ndarray, constants: MaterialConstants = CONSTANTS
) -> float:
    """Dipolar XY coupling between two ions at positions in nm.

    The c axis is the z coordinate.  Raises for coincident positions.
    """
    d = np.asarray(r_j, dtype=float) - np.asarray(r_i, dtype=float)
    r = float(np.sqrt(d @ d))
    if r == 0.0:
        raise HamiltonianError("coincident ion positions")
    z = abs(d[2]) / r
    return -0.5 * constants.j_prefactor_nm3 * (3.0 * z * z - 1.0) / r**3


def coupling_matrix(
    positions: np.ndarray, constants: MaterialConstants = CONSTANTS
) -> CouplingMatrix:
    """All pairwise dipolar couplings for an N x 3 position array (nm)."""
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise HamiltonianError("positions must be an (N, 3) array")
    n = pos.shape[0]
    _check_size(n)
    d = pos[None, :, :] - pos[:, None, :]
    r2 = np.einsum("ijk,ijk->ij", d, d)
    np.fill_diagonal(r2, 1.0)  # placeholder, diagonal zeroed below
    if np.any(r2 <= 0.0):
        raise HamiltonianError("coincident ion positions")
    r = np.sqrt(r2)
    z2 = (d[:, :, 2] / r) ** 2
    j = -0.5 * constants.j_prefactor_nm3 * (3.0 * z2 - 1.0) / r**3
    np.fill_diagonal(j, 0.0)
    return CouplingMatrix(j=j)


def sample_disorder(rng: np.random.Generator, w: float, n: int) -> DisorderField:
    """Draw n Lorentzian detunings of FWHM w, redrawing beyond 20 W.

    The truncation keeps the rare extreme tails of the Cauchy distribution
    from dominating individual realizations; the retained distribution is
    renormalized implicitly by the redraw.
    """
    if w < 0:
        raise HamiltonianError("disorder FWHM must be >= 0")
    if n < 1:
        raise HamiltonianError("need at least one spin")
    if w == 0.0:
        return DisorderField(deltas=np.zeros(n), w=0.0)
    deltas = np.empty(n)
    bound = DISORDER_CUTOFF * w
    remaining = np.arange(n)
    while remaining.size:
        u = rng.random(remaining.size)
        vals = 0.5 * w * np.tan(np.pi * (u - 0.5))
        good = np.abs(vals) <= bound
        deltas[remaining[good]] = vals[good]
        remaining = remaining[~good]
    return DisorderField(deltas=deltas, w=w)


def _validated_pair(
    couplings: CouplingMatrix, disorder: DisorderField
) -> tuple[CouplingMatrix, DisorderField]:
    if not isinstance(couplings, CouplingMatrix):
        couplings = CouplingMatrix(j=np.asarray(couplings))
    if not isinstance(disorder, DisorderField):
        disorder = DisorderField(deltas=np.asarray(disorder))
    if couplings.n_spins != disorder.n_spins:
        raise HamiltonianError(
            f"coupling matrix is for {couplings.n_spins} spins, "
            f"disorder for {disorder.n_spins}"
        )
    _check_size(couplings.n_spins)
    return couplings, disorder


def build_xy_hamiltonian(
    couplings: CouplingMatrix, disorder: DisorderField
) -> HamiltonianTerms:
    """Disorder + flip-flop exchange, all parts dense real float64."""
    couplings, disorder = _validated_pair(couplings, disorder)
    n = couplings.n_spins
    h_dis = onsite_dense(disorder.deltas, "z")
    h_ex = exchange_dense(couplings.j)
    h_iz = ising_dense(couplings.j, "z")
    return HamiltonianTerms(
        n_spins=n,
        h_dis=h_dis,
        h_exchange=h_ex,
        h_ising_z=h_iz,
        h_total=h_dis + h_ex,
        couplings=couplings,
        disorder=disorder,
    )


def build_xxz_hamiltonian(
    couplings: CouplingMatrix, disorder: DisorderField, control: XxzControl
) -> HamiltonianTerms:
    """Field-tuned XXZ interaction; the disorder part is unchanged."""
    couplings, disorder = _validated_pair(couplings, disorder)
    n = couplings.n_spins
    a2 = control.alpha**2
    h_dis = onsite_dense(disorder.deltas, "z")
    h_ex = exchange_dense(couplings.j)
    h_iz = ising_dense(couplings.j, "z")
    h_total = h_dis + (1.0 - 0.5 * a2) * h_ex + 2.0 * a2 * h_iz
    return HamiltonianTerms(
        n_spins=n,
        h_dis=h_dis,
        h_exchange=h_ex,
        h_ising_z=h_iz,
        h_total=h_total,
        couplings=couplings,
        disorder=disorder,
    )


def counter_rotating_term(couplings: CouplingMatrix) -> np.ndarray:
    """Non-excitation-conserving dipolar part, sum J_ij (SxSx - SySy).

    Diagnostic only: adding this to the lab-frame Hamiltonian (with the
    qubit splitting as an explicit sum_i omega S_z^i term) lets a test
    verify that its effect is suppressed as (J / omega)^2, which is why the
    production Hamiltonian drops it.
    """
    if not isinstance(couplings, CouplingMatrix):
        couplings = CouplingMatrix(j=np.asarray(couplings))
    return ising_dense(couplings.j, "x") - ising_dense(couplings.j, "y")


def aux_exchange_element(j: float, constants: MaterialConstants = CONSTANTS) -> float:
    """Flip-flop element between ground and auxiliary doublets.

    The transverse g factor replaces the longitudinal one on one leg of the
    virtual process, scaling the element by -(1/4)(g_perp / g_par)^2.
    """
    ratio = constants.g_perp / constants.g_parallel
    return -0.25 * ratio * ratio * j


def aux_flip_flop_rate_ratio(constants: MaterialConstants = CONSTANTS) -> float:
    """Rate suppression (g_perp / g_par)^4 of aux-manifold flip-flops."""
    return (constants.g_perp / constants.g_parallel) ** 4
