"""State evolution, pulses, and expectation values.

States are complex vectors over the computational basis; spin i maps to bit
(n - 1 - i) of the basis index and bit value 0 means m_z = +1/2 (state |0>).

A rotation by `angle` about unit axis n acts as exp(+i * angle * (n . S_tot)),
so a pi/2 rotation about +x takes |00...0> to a state with <S_y> = +1/2 per
spin.  Finite-duration pulses reproduce that limit with a drive term
-sign(angle) * rabi * (n . S_tot) held for |angle| / rabi.

The interaction Hamiltonians here are real symmetric, so propagators use the
real eigensolver and keep the eigenvector matrix real; applying it to complex
states goes through two real matvecs, which is substantially faster than
promoting everything to complex.  A y-axis drive on top of a real Hamiltonian
that conserves nothing but still commutes with global z rotations is handled
by conjugating an x-axis drive with the diagonal rotation
G = exp(-i (pi/2) S_z_tot).
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import HamiltonianError, SequenceError
from .kernels import onsite_dense, total_sz_values

AXIS_VECTORS = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
    "-x": np.array([-1.0, 0.0, 0.0]),
    "-y": np.array([0.0, -1.0, 0.0]),
    "-z": np.array([0.0, 0.0, -1.0]),
}

SIGMA = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128),
}


def axis_vector(axis) -> np.ndarray:
    if isinstance(axis, str):
        try:
            return AXIS_VECTORS[axis]
        except KeyError:
            raise SequenceError(f"unknown axis label {axis!r}") from None
    v = np.asarray(axis, dtype=np.float64)
    if v.shape != (3,):
        raise SequenceError("axis must be a label or a 3-vector")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise SequenceError("axis vector must be nonzero")
    return v / norm


def state_all_zero(n_spins: int) -> np.ndarray:
    psi = np.zeros(2**n_spins, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def product_state(singles) -> np.ndarray:
    """Tensor product of per-spin 2-vectors, spin 0 most significant."""
    psi = np.asarray(singles[0], dtype=np.complex128)
    for s in singles[1:]:
        psi = np.kron(psi, np.asarray(s, dtype=np.complex128))
    return psi


def _real_matvec(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    # two real GEMVs beat one complex-promoted GEMV
    if np.iscomplexobj(x):
        return m @ x.real + 1j * (m @ x.imag)
    return m @ x


class Propagator:
    """Eigendecomposition of a Hamiltonian, reused for many evolution times."""

    def __init__(self, h: np.ndarray, *, assume_real: bool | None = None):
        h = np.asarray(h)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise HamiltonianError("propagator needs a square matrix")
        if assume_real is None:
            assume_real = not np.iscomplexobj(h) or not np.any(h.imag)
        if assume_real:
            hr = np.ascontiguousarray(h.real, dtype=np.float64)
            self.eigvals, self.eigvecs = scipy.linalg.eigh(hr, driver="evd")
            self.real = True
        else:
            self.eigvals, self.eigvecs = scipy.linalg.eigh(
                np.ascontiguousarray(h, dtype=np.complex128)
            )
            self.real = False
        self._gphase: np.ndarray | None = None

    @classmethod
    def with_y_drive(cls, h_real: np.ndarray, coeff: float, n_spins: int):
        """Propagator for h_real + coeff * S_y_tot.

        Requires h_real to commute with global z rotations (true for the
        disorder + XY interaction terms); then the y drive is an x drive
        conjugated by the diagonal G = exp(-i (pi/2) S_z_tot).
        """
        hx = np.asarray(h_real).real + coeff * onsite_dense(
            np.ones(n_spins), "x"
        ).real
        prop = cls(hx, assume_real=True)
        m = total_sz_values(n_spins)
        prop._gphase = np.exp(-0.5j * np.pi * m)
        return prop

    @property
    def dim(self) -> int:
        return self.eigvecs.shape[0]

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        """exp(-i H t) applied to psi."""
        if self._gphase is not None:
            psi = np.conj(self._gphase) * psi
        if self.real:
            amp = _real_matvec(self.eigvecs.T, psi)
            amp = amp * np.exp(-1j * self.eigvals * t)
            out = _real_matvec(self.eigvecs, amp)
        else:
            amp = self.eigvecs.conj().T @ psi
            amp = amp * np.exp(-1j * self.eigvals * t)
            out = self.eigvecs @ amp
        if self._gphase is not None:
            out = self._gphase * out
        return out

    def unitary(self, t: float) -> np.ndarray:
        """Dense exp(-i H t); for small-system checks."""
        ph = np.exp(-1j * self.eigvals * t)
        if self.real:
            u = (self.eigvecs * ph[None, :]) @ self.eigvecs.T
        else:
            u = (self.eigvecs * ph[None, :]) @ self.eigvecs.conj().T
        if self._gphase is not None:
            u = self._gphase[:, None] * u * np.conj(self._gphase)[None, :]
        return u


def single_spin_rotation(axis, angle: float) -> np.ndarray:
    """2x2 unitary exp(+i * angle * (n . sigma) / 2)."""
    n = axis_vector(axis)
    ns = n[0] * SIGMA["x"] + n[1] * SIGMA["y"] + n[2] * SIGMA["z"]
    return np.cos(angle / 2.0) * np.eye(2) + 1j * np.sin(angle / 2.0) * ns


def apply_ideal_pulse(
    psi: np.ndarray, n_spins: int, axis, angle: float, spins=None
) -> np.ndarray:
    """Instantaneous rotation exp(+i * angle * (n . S)) on the given spins.

    `spins` defaults to all spins (a global pulse).
    """
    u = single_spin_rotation(axis, angle)
    targets = range(n_spins) if spins is None else spins
    psi_t = psi.reshape((2,) * n_spins)
    for i in targets:
        psi_t = np.moveaxis(np.tensordot(u, psi_t, axes=([1], [i])), 0, i)
    return np.ascontiguousarray(psi_t.reshape(-1))


def finite_pulse_propagator(
    h: np.ndarray, n_spins: int, axis, angle: float, rabi: float
) -> tuple[Propagator, float]:
    """Propagator and duration for a finite-strength rotation pulse.

    The drive -sign(angle) * rabi * (n . S_tot) runs alongside h for
    |angle| / rabi, approaching apply_ideal_pulse as rabi grows.
    """
    if rabi <= 0:
        raise SequenceError("rabi frequency must be positive")
    n = axis_vector(axis)
    duration = abs(angle) / rabi
    sign = 1.0 if angle >= 0 else -1.0
    if abs(n[1]) == 1.0 and not np.iscomplexobj(h):
        prop = Propagator.with_y_drive(h, -sign * rabi * n[1], n_spins)
        return prop, duration
    drive = np.zeros_like(np.asarray(h, dtype=np.complex128))
    ones = np.ones(n_spins)
    for comp, ax in zip(n, ("x", "y", "z")):
        if comp != 0.0:
            drive = drive + comp * onsite_dense(ones, ax)
    hp = np.asarray(h, dtype=np.complex128) + (-sign * rabi) * drive
    if not np.any(hp.imag):
        return Propagator(hp.real, assume_real=True), duration
    return Propagator(hp), duration


def reduced_density_1(psi: np.ndarray, n_spins: int, site: int) -> np.ndarray:
    """2x2 reduced density matrix of one spin."""
    psi_t = np.moveaxis(psi.reshape((2,) * n_spins), site, 0)
    m = psi_t.reshape(2, -1)
    return m @ m.conj().T


def expect_site(psi: np.ndarray, n_spins: int, site: int, axis: str) -> float:
    """<S_axis> for one spin."""
    rho = reduced_density_1(psi, n_spins, site)
    return float(np.real(np.trace(rho @ SIGMA[axis])) / 2.0)


def expect_total(psi: np.ndarray, n_spins: int, axis: str) -> float:
    """<sum_i S_axis^i>."""
    return sum(expect_site(psi, n_spins, i, axis) for i in range(n_spins))


def transverse_expectation(psi: np.ndarray, n_spins: int, site: int) -> complex:
    """<S_x> + i <S_y> for one spin."""
    rho = reduced_density_1(psi, n_spins, site)
    # <S_x> + i <S_y> = rho_10 with these operator conventions
    return complex(rho[1, 0])


def transverse_magnitude(psi: np.ndarray, n_spins: int, site: int) -> float:
    return abs(transverse_expectation(psi, n_spins, site))
