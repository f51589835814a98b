"""Dense operator construction in the computational basis.

Basis convention (fixed package-wide): spin i is tensor factor i, so spin 0
is the most significant bit of the basis index.  Bit value 0 means |0> with
S_z = +1/2, bit value 1 means |1> with S_z = -1/2.  For a basis index b the
bit of spin i is (b >> (n - 1 - i)) & 1.

Matrix element bookkeeping for spin-1/2 operators (hbar = 1):
  * S_x S_x + S_y S_y between i and j is a flip-flop: it connects b with
    b XOR (mask_i | mask_j) with element 1/2 when the two bits differ.
  * S_x S_x alone connects the same pair of states for every b with
    element 1/4; S_y S_y contributes +1/4 when the bits differ and -1/4
    when they are equal (the two factors i/2, -i/2 multiply).
  * single-spin S_y has element +i/2 on a 0 -> 1 flip and -i/2 on 1 -> 0.

Everything except the on-site S_y field is real, which downstream code
exploits: free-evolution Hamiltonians stay float64 and eigendecompose on
the much faster real-symmetric LAPACK path.

These fills are the per-realization hot loop of the Monte Carlo layer, so
they are compiled with numba when available.  Setting the environment
variable DIPOLARXY_DISABLE_NUMBA=1 selects the pure-numpy fallbacks, which
implement identical arithmetic (tests assert exact agreement).
`benchmarks/bench_kernels.py` times the two paths side by side.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("DIPOLARXY_DISABLE_NUMBA", "0") == "1"

try:  # pragma: no cover - environment dependent
    if _DISABLED:
        raise ImportError("numba disabled by DIPOLARXY_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        """No-op decorator when numba is unavailable or disabled."""

        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numba kernels (also valid plain-python definitions for the fallback path)


@njit(cache=True)
def _exchange_fill(out, jmat, n):
    dim = 1 << n
    for b in range(dim):
        for i in range(n):
            bi = (b >> (n - 1 - i)) & 1
            for j in range(i + 1, n):
                jij = jmat[i, j]
                if jij == 0.0:
                    continue
                bj = (b >> (n - 1 - j)) & 1
                if bi != bj:
                    bp = b ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
                    out[bp, b] += 0.5 * jij


@njit(cache=True)
def _ising_z_fill(out, jmat, n):
    dim = 1 << n
    for b in range(dim):
        acc = 0.0
        for i in range(n):
            szi = 0.5 if ((b >> (n - 1 - i)) & 1) == 0 else -0.5
            for j in range(i + 1, n):
                jij = jmat[i, j]
                if jij == 0.0:
                    continue
                szj = 0.5 if ((b >> (n - 1 - j)) & 1) == 0 else -0.5
                acc += jij * szi * szj
        out[b, b] += acc


@njit(cache=True)
def _ising_x_fill(out, jmat, n):
    dim = 1 << n
    for b in range(dim):
        for i in range(n):
            for j in range(i + 1, n):
                jij = jmat[i, j]
                if jij == 0.0:
                    continue
                bp = b ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
                out[bp, b] += 0.25 * jij


@njit(cache=True)
def _ising_y_fill(out, jmat, n):
    dim = 1 << n
    for b in range(dim):
        for i in range(n):
            bi = (b >> (n - 1 - i)) & 1
            for j in range(i + 1, n):
                jij = jmat[i, j]
                if jij == 0.0:
                    continue
                bj = (b >> (n - 1 - j)) & 1
                bp = b ^ ((1 << (n - 1 - i)) | (1 << (n - 1 - j)))
                sign = 1.0 if bi != bj else -1.0
                out[bp, b] += 0.25 * sign * jij


@njit(cache=True)
def _onsite_z_fill(out, h, n):
    dim = 1 << n
    for b in range(dim):
        acc = 0.0
        for i in range(n):
            sz = 0.5 if ((b >> (n - 1 - i)) & 1) == 0 else -0.5
            acc += h[i] * sz
        out[b, b] += acc


@njit(cache=True)
def _onsite_x_fill(out, h, n):
    dim = 1 << n
    for b in range(dim):
        for i in range(n):
            if h[i] == 0.0:
                continue
            bp = b ^ (1 << (n - 1 - i))
            out[bp, b] += 0.5 * h[i]


@njit(cache=True)
def _onsite_y_fill(out, h, n):
    # complex128 out; element +i h/2 on 0->1, -i h/2 on 1->0
    dim = 1 << n
    for b in range(dim):
        for i in range(n):
            if h[i] == 0.0:
                continue
            bi = (b >> (n - 1 - i)) & 1
            bp = b ^ (1 << (n - 1 - i))
            if bi == 0:
                out[bp, b] += 0.5j * h[i]
            else:
                out[bp, b] += -0.5j * h[i]


# ---------------------------------------------------------------------------
# vectorized numpy fallbacks (identical arithmetic, same accumulation order
# per matrix element so results agree bit for bit with the kernels)


def _exchange_numpy(jmat, n):
    dim = 1 << n
    out = np.zeros((dim, dim))
    b = np.arange(dim)
    for i in range(n):
        bi = (b >> (n - 1 - i)) & 1
        for j in range(i + 1, n):
            jij = jmat[i, j]
            if jij == 0.0:
                continue
            bj = (b >> (n - 1 - j)) & 1
            sel = b[bi != bj]
            flip = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            out[sel ^ flip, sel] += 0.5 * jij
    return out


def _ising_z_numpy(jmat, n):
    dim = 1 << n
    b = np.arange(dim)
    diag = np.zeros(dim)
    for i in range(n):
        szi = 0.5 - ((b >> (n - 1 - i)) & 1)
        for j in range(i + 1, n):
            jij = jmat[i, j]
            if jij == 0.0:
                continue
            szj = 0.5 - ((b >> (n - 1 - j)) & 1)
            diag += jij * szi * szj
    return np.diag(diag)


def _ising_x_numpy(jmat, n):
    dim = 1 << n
    out = np.zeros((dim, dim))
    b = np.arange(dim)
    for i in range(n):
        for j in range(i + 1, n):
            jij = jmat[i, j]
            if jij == 0.0:
                continue
            flip = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            out[b ^ flip, b] += 0.25 * jij
    return out


def _ising_y_numpy(jmat, n):
    dim = 1 << n
    out = np.zeros((dim, dim))
    b = np.arange(dim)
    for i in range(n):
        bi = (b >> (n - 1 - i)) & 1
        for j in range(i + 1, n):
            jij = jmat[i, j]
            if jij == 0.0:
                continue
            bj = (b >> (n - 1 - j)) & 1
            flip = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            sign = np.where(bi != bj, 1.0, -1.0)
            out[b ^ flip, b] += 0.25 * sign * jij
    return out


def _onsite_z_numpy(h, n):
    dim = 1 << n
    b = np.arange(dim)
    diag = np.zeros(dim)
    for i in range(n):
        diag += h[i] * (0.5 - ((b >> (n - 1 - i)) & 1))
    return np.diag(diag)


def _onsite_x_numpy(h, n):
    dim = 1 << n
    out = np.zeros((dim, dim))
    b = np.arange(dim)
    for i in range(n):
        if h[i] == 0.0:
            continue
        out[b ^ (1 << (n - 1 - i)), b] += 0.5 * h[i]
    return out


def _onsite_y_numpy(h, n):
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=np.complex128)
    b = np.arange(dim)
    for i in range(n):
        if h[i] == 0.0:
            continue
        bi = (b >> (n - 1 - i)) & 1
        coeff = np.where(bi == 0, 0.5j * h[i], -0.5j * h[i])
        out[b ^ (1 << (n - 1 - i)), b] += coeff
    return out


# ---------------------------------------------------------------------------
# public dispatchers


def _as_coupling_array(jmat) -> np.ndarray:
    jmat = np.ascontiguousarray(np.asarray(jmat, dtype=np.float64))
    if jmat.ndim != 2 or jmat.shape[0] != jmat.shape[1]:
        raise ValueError("coupling matrix must be square")
    return jmat


def _as_field_array(h) -> np.ndarray:
    h = np.ascontiguousarray(np.asarray(h, dtype=np.float64))
    if h.ndim != 1:
        raise ValueError("field must be a 1d array")
    return h


def exchange_dense(jmat) -> np.ndarray:
    """sum_{i<j} J_ij (S_x S_x + S_y S_y), real dense matrix."""
    jmat = _as_coupling_array(jmat)
    n = jmat.shape[0]
    if HAVE_NUMBA:
        out = np.zeros((1 << n, 1 << n))
        _exchange_fill(out, jmat, n)
        return out
    return _exchange_numpy(jmat, n)


def ising_dense(jmat, axis: str) -> np.ndarray:
    """sum_{i<j} J_ij S_mu S_mu for mu = axis in {x, y, z}, real dense."""
    jmat = _as_coupling_array(jmat)
    n = jmat.shape[0]
    if axis == "z":
        if HAVE_NUMBA:
            out = np.zeros((1 << n, 1 << n))
            _ising_z_fill(out, jmat, n)
            return out
        return _ising_z_numpy(jmat, n)
    if axis == "x":
        if HAVE_NUMBA:
            out = np.zeros((1 << n, 1 << n))
            _ising_x_fill(out, jmat, n)
            return out
        return _ising_x_numpy(jmat, n)
    if axis == "y":
        if HAVE_NUMBA:
            out = np.zeros((1 << n, 1 << n))
            _ising_y_fill(out, jmat, n)
            return out
        return _ising_y_numpy(jmat, n)
    raise ValueError(f"unknown axis {axis!r}")


def onsite_dense(h, axis: str) -> np.ndarray:
    """sum_i h_i S_mu^i.  Real for x and z, complex for y."""
    h = _as_field_array(h)
    n = h.shape[0]
    if axis == "z":
        if HAVE_NUMBA:
            out = np.zeros((1 << n, 1 << n))
            _onsite_z_fill(out, h, n)
            return out
        return _onsite_z_numpy(h, n)
    if axis == "x":
        if HAVE_NUMBA:
            out = np.zeros((1 << n, 1 << n))
            _onsite_x_fill(out, h, n)
            return out
        return _onsite_x_numpy(h, n)
    if axis == "y":
        if HAVE_NUMBA:
            out = np.zeros((1 << n, 1 << n), dtype=np.complex128)
            _onsite_y_fill(out, h, n)
            return out
        return _onsite_y_numpy(h, n)
    raise ValueError(f"unknown axis {axis!r}")


def heisenberg_dense(jmat) -> np.ndarray:
    """sum_{i<j} J_ij S_i . S_j, real dense matrix."""
    return exchange_dense(jmat) + ising_dense(jmat, "z")


def total_sz_values(n: int) -> np.ndarray:
    """Total-S_z eigenvalue of every basis state, shape (2**n,)."""
    b = np.arange(1 << n)
    acc = np.zeros(1 << n)
    for i in range(n):
        acc += 0.5 - ((b >> (n - 1 - i)) & 1)
    return acc
