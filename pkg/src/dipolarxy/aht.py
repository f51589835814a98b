"""Average-Hamiltonian diagnostics for the pulse sequences.

The toggling frame tracks where the pulses carry the z axis: after the
first m pulses the onsite term points along v_m and the Ising part of the
XY interaction acts along v_m, while the Heisenberg part is untouched.
H~_m = sum_i Delta_i (v_m . S_i) + H_Heis - H_Ising(v_m), which equals the
literal conjugation Q_m^dag H Q_m by the accumulated pulse unitary.

Magnus expansion over one period T with segments (v_m, d_m):
  H0 = (1/T) sum_m d_m H~_m
  H1 = -(i / 2T) sum_{m>n} d_m d_n [H~_m, H~_n]
so exp(-i (H0 + H1) T) matches the exact period unitary to O(T^3).  The
sign of H1 follows this package's rotation convention exp(+i theta n.S)
for pulses; the opposite convention flips it.

Everything here is dense and intended for small diagnostic systems
(n <= 10 or so), not for the Monte Carlo hot path.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import HamiltonianError, SequenceError
from .hamiltonian import HamiltonianTerms
from .kernels import heisenberg_dense, ising_dense, onsite_dense
from .dynamics import AXIS_VECTORS, single_spin_rotation
from .sequences import (
    EpsCpmg,
    Ramsey,
    SpinEcho,
    SpinLock,
    WahuhaEcho,
    WAHUHA_PULSES,
)

MAX_FRAME_SEARCH = 1024
SPIN_LOCK_FRAMES = 24


@dataclass(frozen=True)
class FrameSegment:
    axis: np.ndarray
    duration: float


@functools.lru_cache(maxsize=4)
def _site_ops(n_spins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense single-site operators, shape (n_spins, 2^n, 2^n) per axis."""
    sx = 0.5 * np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    sz = 0.5 * np.array([[1, 0], [0, -1]], dtype=np.complex128)
    eye = np.eye(2, dtype=np.complex128)
    out = []
    for op in (sx, sy, sz):
        per_site = []
        for i in range(n_spins):
            full = np.array([[1.0 + 0j]])
            for j in range(n_spins):
                full = np.kron(full, op if j == i else eye)
            per_site.append(full)
        out.append(np.stack(per_site))
    return tuple(out)


def onsite_axis_dense(coeffs: np.ndarray, axis) -> np.ndarray:
    """sum_i coeffs[i] * (axis . S_i) for an arbitrary unit vector axis."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    v = np.asarray(axis, dtype=np.float64)
    sx, sy, sz = _site_ops(coeffs.size)
    return np.einsum("i,iab->ab", coeffs * v[0], sx) \
        + np.einsum("i,iab->ab", coeffs * v[1], sy) \
        + np.einsum("i,iab->ab", coeffs * v[2], sz)


def ising_axis_dense(jmat: np.ndarray, axis) -> np.ndarray:
    """sum_{i<j} J_ij (axis . S_i)(axis . S_j) for an arbitrary axis."""
    jmat = np.asarray(jmat, dtype=np.float64)
    n = jmat.shape[0]
    v = np.asarray(axis, dtype=np.float64)
    sx, sy, sz = _site_ops(n)
    site = v[0] * sx + v[1] * sy + v[2] * sz
    dim = site.shape[-1]
    h = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(n):
        for j in range(i + 1, n):
            if jmat[i, j] != 0.0:
                h += jmat[i, j] * (site[i] @ site[j])
    return h


def global_rotation_dense(n_spins: int, axis, angle: float) -> np.ndarray:
    """Dense exp(+i angle (axis . S_total)) as a kron power of the 2x2 rotation."""
    u2 = single_spin_rotation(axis, angle)
    full = np.array([[1.0 + 0j]])
    for _ in range(n_spins):
        full = np.kron(full, u2)
    return full


def _rotate_about_y(vec: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = vec
    return np.array([c * x + s * z, y, -s * x + c * z])


def _rotation_matrix(axis, angle: float) -> np.ndarray:
    """Right-handed rotation by angle about the named or vector axis.

    A pulse exp(+i angle n.S) conjugates operators as (R a).S with exactly
    this matrix.
    """
    n = np.asarray(AXIS_VECTORS[axis] if isinstance(axis, str) else axis,
                   dtype=np.float64)
    c, s = math.cos(angle), math.sin(angle)
    k = np.array([
        [0.0, -n[2], n[1]],
        [n[2], 0.0, -n[0]],
        [-n[1], n[0], 0.0],
    ])
    return c * np.eye(3) + s * k + (1.0 - c) * np.outer(n, n)


def _cpmg_cycle_length(epsilon: float) -> int:
    theta = math.pi + epsilon
    for n in range(1, MAX_FRAME_SEARCH + 1):
        wrapped = math.remainder(n * theta, 2.0 * math.pi)
        if abs(wrapped) < 1e-9:
            return n
    raise SequenceError(
        "sequence is not periodic: pulse angle never closes the toggling frame"
    )


def toggling_frames(sequence) -> list[FrameSegment]:
    """Frame axis and duration for each free-evolution segment of one period.

    Only ideal-pulse sequences have delta-pulse toggling frames; the
    spin-lock drive is discretized into SPIN_LOCK_FRAMES equal slices of
    one drive period (midpoint sampling, exact for the averages used here).
    """
    zhat = np.array([0.0, 0.0, 1.0])
    if isinstance(sequence, (EpsCpmg, WahuhaEcho)) and sequence.mode != "ideal":
        raise SequenceError("finite-pulse sequences have no ideal toggling frame")
    if isinstance(sequence, Ramsey):
        return [FrameSegment(zhat, sequence.tau)]
    if isinstance(sequence, SpinEcho):
        return [
            FrameSegment(zhat, sequence.tau / 2.0),
            FrameSegment(-zhat, sequence.tau / 2.0),
        ]
    if isinstance(sequence, EpsCpmg):
        theta = math.pi + sequence.epsilon
        n = _cpmg_cycle_length(sequence.epsilon)
        segs = [FrameSegment(zhat, sequence.tau / 2.0)]
        for m in range(1, n):
            segs.append(FrameSegment(_rotate_about_y(zhat, m * theta), sequence.tau))
        segs.append(FrameSegment(zhat, sequence.tau / 2.0))
        return segs
    if isinstance(sequence, WahuhaEcho):
        tau = sequence.tau
        # v_m = R_1 R_2 ... R_m z: the earliest pulse sits outermost in the
        # conjugation, so accumulate by right-multiplication
        acc = np.eye(3)
        vecs = [zhat]
        for axis, angle in WAHUHA_PULSES:
            acc = acc @ _rotation_matrix(axis, angle)
            vecs.append(acc @ zhat)
        durations = [tau / 2.0] + [tau] * 5 + [tau / 2.0]
        return [FrameSegment(v, d) for v, d in zip(vecs, durations)]
    if isinstance(sequence, SpinLock):
        if sequence.omega_y == 0.0:
            return [FrameSegment(zhat, sequence.t_total)]
        period = 2.0 * math.pi / abs(sequence.omega_y)
        dt = period / SPIN_LOCK_FRAMES
        segs = []
        for m in range(SPIN_LOCK_FRAMES):
            t_mid = (m + 0.5) * dt
            th = sequence.omega_y * t_mid
            segs.append(
                FrameSegment(np.array([-math.sin(th), 0.0, math.cos(th)]), dt)
            )
        return segs
    raise SequenceError(
        f"no toggling-frame representation for {type(sequence).__name__}"
    )


@dataclass(frozen=True)
class AhtResult:
    h0: np.ndarray
    h1: np.ndarray
    period: float


def _frame_hamiltonian(terms: HamiltonianTerms, axis: np.ndarray) -> np.ndarray:
    jmat = terms.couplings.j
    h = heisenberg_dense(jmat).astype(np.complex128)
    h -= ising_axis_dense(jmat, axis)
    if terms.disorder is not None and np.any(terms.disorder.deltas != 0.0):
        h += onsite_axis_dense(terms.disorder.deltas, axis)
    return h


def average_hamiltonian(sequence, terms: HamiltonianTerms,
                        max_order: int = 1) -> AhtResult:
    """Zeroth- and first-order average Hamiltonian over one sequence period."""
    if max_order not in (0, 1):
        raise SequenceError("max_order must be 0 or 1")
    segs = toggling_frames(sequence)
    total = sum(s.duration for s in segs)
    if total <= 0.0:
        raise SequenceError("sequence period must be positive")
    frames = [_frame_hamiltonian(terms, s.axis) for s in segs]
    durations = [s.duration for s in segs]
    h0 = sum(d * f for d, f in zip(durations, frames)) / total
    n = terms.n_spins
    if isinstance(sequence, SpinLock) and sequence.omega_y != 0.0:
        h0 = h0 + onsite_axis_dense(
            np.full(n, sequence.omega_y), (0.0, 1.0, 0.0)
        )
    h1 = np.zeros_like(h0)
    if max_order >= 1:
        # sum_{m>k} d_m d_k [H_m, H_k] = sum_m d_m [H_m, P_m] with the
        # prefix P_m = sum_{k<m} d_k H_k; linear in segment count
        acc = np.zeros_like(h0)
        prefix = np.zeros_like(h0)
        for m in range(len(frames)):
            if m > 0:
                acc += durations[m] * (frames[m] @ prefix - prefix @ frames[m])
            prefix += durations[m] * frames[m]
        h1 = (-1j / (2.0 * total)) * acc
    return AhtResult(h0=h0, h1=h1, period=total)


WEIGHT_KEYS = (
    "heis",
    "onsite_x",
    "onsite_y",
    "onsite_z",
    "ising_x",
    "ising_y",
    "ising_z",
)


def _weight_basis(jmat: np.ndarray, n_spins: int) -> list[np.ndarray]:
    ones = np.ones(n_spins)
    ops = [heisenberg_dense(jmat).astype(np.complex128)]
    for axis in ("x", "y", "z"):
        ops.append(onsite_dense(ones, axis).astype(np.complex128))
    for axis in ("x", "y", "z"):
        ops.append(ising_dense(jmat, axis).astype(np.complex128))
    return ops


def decompose_weights(h0: np.ndarray, jmat: np.ndarray,
                      tol: float = 1e-9) -> tuple[dict, float]:
    """Least-squares weights of h0 on {Heis, uniform onsite, Ising} built
    from the given couplings.  The family is rank-deficient (the three
    Ising terms sum to Heisenberg), so the minimum-norm solution is
    gauge-fixed to the sparsest representative; ties prefer the form with
    the larger Heisenberg weight.  Returns (weights, frobenius residual).
    """
    jmat = np.asarray(jmat, dtype=np.float64)
    if not np.any(jmat != 0.0):
        raise HamiltonianError("degenerate operator family: all couplings vanish")
    n = jmat.shape[0]
    ops = _weight_basis(jmat, n)
    flat = np.stack([op.ravel() for op in ops])
    gram = np.real(flat @ flat.conj().T)
    target = np.real(flat.conj() @ h0.ravel())
    w = np.linalg.pinv(gram, rcond=1e-12) @ target
    # null direction: Heis - Ising_x - Ising_y - Ising_z = 0
    u = np.array([1.0, 0, 0, 0, -1.0, -1.0, -1.0])
    scale = max(1.0, float(np.max(np.abs(w))))
    best = None
    candidates = [0.0, -w[0], w[4], w[5], w[6]]
    for t in candidates:
        cand = w + t * u
        zeros = int(np.sum(np.abs(cand) < tol * scale))
        key = (-zeros, -abs(cand[0]), float(np.linalg.norm(cand)))
        if best is None or key < best[0]:
            best = (key, cand)
    w = best[1]
    w[np.abs(w) < tol * scale] = 0.0
    recon = np.tensordot(w, flat, axes=(0, 0)).reshape(h0.shape)
    residual = float(np.linalg.norm(h0 - recon))
    return dict(zip(WEIGHT_KEYS, w.tolist())), residual


def exact_period_unitary(sequence, terms: HamiltonianTerms) -> np.ndarray:
    """Dense unitary for one full (ideal-pulse) AHT period of the sequence."""
    from .dynamics import Propagator

    n = terms.n_spins
    h = terms.h_total
    prop = Propagator(h)
    dim = h.shape[0]

    def free(u, t):
        return prop.unitary(t) @ u if t > 0 else u

    u = np.eye(dim, dtype=np.complex128)
    if isinstance(sequence, Ramsey):
        return free(u, sequence.tau)
    if isinstance(sequence, SpinEcho):
        u = free(u, sequence.tau / 2.0)
        u = global_rotation_dense(n, "y", math.pi) @ u
        return free(u, sequence.tau / 2.0)
    if isinstance(sequence, EpsCpmg):
        if sequence.mode != "ideal":
            raise SequenceError("exact period unitary needs ideal pulses")
        n_blocks = _cpmg_cycle_length(sequence.epsilon)
        pulse = global_rotation_dense(n, "y", math.pi + sequence.epsilon)
        for _ in range(n_blocks):
            u = free(u, sequence.tau / 2.0)
            u = pulse @ u
            u = free(u, sequence.tau / 2.0)
        return u
    if isinstance(sequence, WahuhaEcho):
        if sequence.mode != "ideal":
            raise SequenceError("exact period unitary needs ideal pulses")
        u = free(u, sequence.tau / 2.0)
        for idx, (axis, angle) in enumerate(WAHUHA_PULSES):
            u = global_rotation_dense(n, axis, angle) @ u
            if idx < len(WAHUHA_PULSES) - 1:
                u = free(u, sequence.tau)
        return free(u, sequence.tau / 2.0)
    raise SequenceError(
        f"no pulsed period unitary for {type(sequence).__name__}"
    )
