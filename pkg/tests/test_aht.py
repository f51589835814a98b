"""Toggling frames, average Hamiltonians, and Magnus convergence."""

import math

import numpy as np
import pytest
import scipy.linalg

from dipolarxy.aht import (
    AhtResult,
    SPIN_LOCK_FRAMES,
    average_hamiltonian,
    decompose_weights,
    exact_period_unitary,
    global_rotation_dense,
    ising_axis_dense,
    onsite_axis_dense,
    toggling_frames,
)
from dipolarxy.dynamics import apply_ideal_pulse
from dipolarxy.errors import HamiltonianError, SequenceError
from dipolarxy.hamiltonian import build_xy_hamiltonian
from dipolarxy.kernels import heisenberg_dense, ising_dense, onsite_dense
from dipolarxy.oracles import cpmg_disorder_correction
from dipolarxy.sequences import (
    DtcFloquet,
    EpsCpmg,
    Ramsey,
    SpinEcho,
    SpinLock,
    WahuhaEcho,
)

TWO_PI = 2 * math.pi


def random_terms(seed, n, with_disorder=True):
    rng = np.random.default_rng(seed)
    j = rng.normal(scale=1.5, size=(n, n))
    j = j + j.T
    np.fill_diagonal(j, 0.0)
    deltas = rng.normal(scale=2.0, size=n) if with_disorder else np.zeros(n)
    return build_xy_hamiltonian(j, deltas)


def segments_summary(segs):
    return [(np.round(s.axis, 9), s.duration) for s in segs]


def test_axis_operators_match_kron():
    rng = np.random.default_rng(1)
    n = 3
    coeffs = rng.normal(size=n)
    j = rng.normal(size=(n, n))
    j = j + j.T
    np.fill_diagonal(j, 0.0)
    for axis in ([0, 0, 1.0], [1.0, 0, 0], [0.6, -0.8, 0.0],
                 [0.36, 0.48, 0.8]):
        v = np.asarray(axis)
        ref_on = v[0] * onsite_dense(coeffs, "x") \
            + v[1] * onsite_dense(coeffs, "y") \
            + v[2] * onsite_dense(coeffs, "z")
        np.testing.assert_allclose(
            onsite_axis_dense(coeffs, v), ref_on, atol=1e-12)
    for axis, name in (([1.0, 0, 0], "x"), ([0, 1.0, 0], "y"),
                       ([0, 0, 1.0], "z")):
        np.testing.assert_allclose(
            ising_axis_dense(j, axis), ising_dense(j, name), atol=1e-12)
    # generic axis: conjugating Ising_z by the rotation that takes z to v
    v = np.array([0.36, 0.48, 0.8])
    perp = np.cross([0.0, 0.0, 1.0], v)
    angle = math.asin(np.linalg.norm(perp))
    u = global_rotation_dense(n, perp / np.linalg.norm(perp), -angle)
    ref = u @ ising_dense(j, "z").astype(complex) @ u.conj().T
    np.testing.assert_allclose(ising_axis_dense(j, v), ref, atol=1e-10)


def test_global_rotation_matches_pulse():
    rng = np.random.default_rng(2)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    u = global_rotation_dense(3, "y", 0.77)
    np.testing.assert_allclose(
        u @ psi, apply_ideal_pulse(psi, 3, "y", 0.77), atol=1e-12)


def test_frames_echo_and_cpmg():
    segs = toggling_frames(SpinEcho(tau=1.0))
    assert len(segs) == 2
    np.testing.assert_allclose(segs[0].axis, [0, 0, 1])
    np.testing.assert_allclose(segs[1].axis, [0, 0, -1])
    # the time-averaged frame axis vanishes: static onsite terms cancel
    acc = sum(s.axis * s.duration for s in segs)
    np.testing.assert_allclose(acc, 0.0, atol=1e-12)

    segs = toggling_frames(EpsCpmg(tau=0.4, epsilon=-math.pi / 2, k=1))
    # pi/2 net rotation per block closes after 4 blocks: z, x, -z, -x
    assert len(segs) == 5
    np.testing.assert_allclose(segs[1].axis, [1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(segs[2].axis, [0, 0, -1], atol=1e-12)
    np.testing.assert_allclose(segs[3].axis, [-1, 0, 0], atol=1e-12)
    assert sum(s.duration for s in segs) == pytest.approx(4 * 0.4)
    acc = sum(s.axis * s.duration for s in segs)
    np.testing.assert_allclose(acc, 0.0, atol=1e-12)


def test_frames_wahuha_order():
    tau = 0.3
    segs = toggling_frames(WahuhaEcho(tau=tau))
    assert len(segs) == 7
    expected = ([0, 0, 1], [0, 1, 0], [1, 0, 0], [-1, 0, 0],
                [0, -1, 0], [0, 0, -1], [0, 0, 1])
    for seg, ref in zip(segs, expected):
        np.testing.assert_allclose(seg.axis, ref, atol=1e-12)
    assert segs[0].duration == pytest.approx(tau / 2)
    assert segs[-1].duration == pytest.approx(tau / 2)
    assert sum(s.duration for s in segs) == pytest.approx(6 * tau)
    acc = sum(s.axis * s.duration for s in segs)
    np.testing.assert_allclose(acc, 0.0, atol=1e-12)


def test_frames_rejected_cases():
    with pytest.raises(SequenceError):
        toggling_frames(EpsCpmg(tau=0.1, epsilon=0.0, t_p=0.01, mode="finite"))
    with pytest.raises(SequenceError):
        toggling_frames(DtcFloquet(tau=0.1, epsilon=0.0, k=5))
    # irrational pulse angle never closes the frame
    with pytest.raises(SequenceError):
        toggling_frames(EpsCpmg(tau=0.1, epsilon=1.0, k=1))


def test_ramsey_average_is_bare_hamiltonian():
    terms = random_terms(3, 3)
    res = average_hamiltonian(Ramsey(tau=0.7), terms)
    np.testing.assert_allclose(res.h0, terms.h_total, atol=1e-12)
    np.testing.assert_allclose(res.h1, 0.0, atol=1e-12)
    assert res.period == pytest.approx(0.7)


def test_h0_identities():
    terms = random_terms(5, 3)
    j = terms.couplings.j

    # echo and symmetric CPMG: disorder averages away entirely
    res = average_hamiltonian(SpinEcho(tau=0.6), terms)
    w, resid = decompose_weights(res.h0, j)
    assert resid < 1e-9
    assert w["heis"] == pytest.approx(1.0) and w["ising_z"] == pytest.approx(-1.0)
    assert all(w[f"onsite_{a}"] == 0.0 for a in "xyz")

    # epsilon = -pi/2: half Ising_y plus half Heisenberg
    res = average_hamiltonian(EpsCpmg(tau=0.4, epsilon=-math.pi / 2), terms)
    w, resid = decompose_weights(res.h0, j)
    assert resid < 1e-9
    assert w["heis"] == pytest.approx(0.5) and w["ising_y"] == pytest.approx(0.5)
    assert all(abs(w[k]) < 1e-12 for k in w if k not in ("heis", "ising_y"))

    # epsilon = 0 CPMG is the echo Hamiltonian
    res0 = average_hamiltonian(EpsCpmg(tau=0.4, epsilon=0.0), terms)
    w, resid = decompose_weights(res0.h0, j)
    assert resid < 1e-9
    assert w["heis"] == pytest.approx(1.0) and w["ising_z"] == pytest.approx(-1.0)
    # symmetric placement: first order vanishes identically
    assert np.linalg.norm(res0.h1) < 1e-8 * np.linalg.norm(res0.h0)

    # WAHUHA echo: isotropic (2/3) Heisenberg
    res = average_hamiltonian(WahuhaEcho(tau=0.2), terms)
    w, resid = decompose_weights(res.h0, j)
    assert resid < 1e-9
    assert w["heis"] == pytest.approx(2.0 / 3.0)
    assert all(abs(w[k]) < 1e-12 for k in w if k != "heis")


def test_h0_spin_lock():
    terms = random_terms(6, 3)
    omega = TWO_PI * 10.0
    seq = SpinLock(omega_y=omega, t_total=5.0)
    segs = toggling_frames(seq)
    assert len(segs) == SPIN_LOCK_FRAMES
    res = average_hamiltonian(seq, terms)
    w, resid = decompose_weights(res.h0, terms.couplings.j)
    assert resid < 1e-7 * omega
    assert w["onsite_y"] == pytest.approx(omega)
    assert w["heis"] == pytest.approx(0.5)
    assert w["ising_y"] == pytest.approx(0.5)
    assert w["onsite_x"] == 0.0 and w["onsite_z"] == 0.0


def test_h1_matches_disorder_correction():
    terms = random_terms(7, 3)
    tau = 0.8
    res = average_hamiltonian(EpsCpmg(tau=tau, epsilon=-math.pi / 2), terms)
    ref = cpmg_disorder_correction(terms.couplings.j, terms.disorder.deltas, tau)
    assert np.linalg.norm(res.h1 - ref) < 1e-8 * np.linalg.norm(ref)


def test_magnus_convergence_orders():
    # over one period T: exp(-i H0 T) misses by O(T^2) while
    # exp(-i (H0 + H1) T) misses by O(T^3); halving tau divides the period
    # error by about 4 and 8 respectively.  Even spin count: the 2 pi of
    # accumulated pulse rotation contributes (-1)^n, see the spinor test.
    terms = random_terms(8, 4)
    errs0, errs1 = [], []
    for tau in (0.1, 0.05, 0.025):
        seq = EpsCpmg(tau=tau, epsilon=-math.pi / 2)
        u_exact = exact_period_unitary(seq, terms)
        res = average_hamiltonian(seq, terms)
        u0 = scipy.linalg.expm(-1j * res.h0 * res.period)
        u1 = scipy.linalg.expm(-1j * (res.h0 + res.h1) * res.period)
        errs0.append(np.linalg.norm(u_exact - u0, 2))
        errs1.append(np.linalg.norm(u_exact - u1, 2))
    assert errs0[0] / errs0[1] == pytest.approx(4.0, rel=0.35)
    assert errs0[1] / errs0[2] == pytest.approx(4.0, rel=0.35)
    assert errs1[0] / errs1[1] > 7.0
    assert errs1[1] / errs1[2] > 7.0


def test_period_unitary_spinor_sign():
    # the four (pi + eps) pulses of one eps = -pi/2 cycle add up to a 2 pi
    # rotation, which is -1 per spin-1/2: with an odd spin count the exact
    # period unitary is minus the Magnus exponential
    terms = random_terms(8, 3)
    seq = EpsCpmg(tau=0.02, epsilon=-math.pi / 2)
    u_exact = exact_period_unitary(seq, terms)
    res = average_hamiltonian(seq, terms)
    u0 = scipy.linalg.expm(-1j * res.h0 * res.period)
    assert np.linalg.norm(u_exact + u0, 2) < 0.02
    assert np.linalg.norm(u_exact - u0, 2) > 1.9


def test_exact_period_unitary_against_expm():
    terms = random_terms(9, 3)
    h = terms.h_total.astype(complex)
    tau = 0.5

    u_free = scipy.linalg.expm(-1j * h * tau / 2)
    ref = u_free @ global_rotation_dense(3, "y", math.pi) @ u_free
    np.testing.assert_allclose(
        exact_period_unitary(SpinEcho(tau=tau), terms), ref, atol=1e-10)

    pulse = global_rotation_dense(3, "y", math.pi + 0.0)
    block = u_free @ pulse @ u_free
    np.testing.assert_allclose(
        exact_period_unitary(EpsCpmg(tau=tau, epsilon=0.0), terms),
        block @ block, atol=1e-10)

    with pytest.raises(SequenceError):
        exact_period_unitary(SpinLock(omega_y=1.0, t_total=1.0), terms)


def test_decompose_weights_crafted():
    terms = random_terms(10, 3, with_disorder=False)
    j = terms.couplings.j
    h0 = 0.3 * heisenberg_dense(j) + 0.7 * ising_dense(j, "x") \
        + 1.2 * onsite_dense(np.ones(3), "y")
    w, resid = decompose_weights(h0.astype(complex), j)
    assert resid < 1e-9
    assert w["heis"] == pytest.approx(0.3)
    assert w["ising_x"] == pytest.approx(0.7)
    assert w["onsite_y"] == pytest.approx(1.2)
    # rank deficiency: the sum of the three Ising terms is reported as
    # Heisenberg, the sparsest gauge
    h_sum = sum(ising_dense(j, a) for a in "xyz")
    w, resid = decompose_weights(h_sum.astype(complex), j)
    assert resid < 1e-9
    assert w["heis"] == pytest.approx(1.0)
    assert w["ising_x"] == w["ising_y"] == w["ising_z"] == 0.0


def test_decompose_weights_degenerate():
    with pytest.raises(HamiltonianError):
        decompose_weights(np.zeros((8, 8), dtype=complex), np.zeros((3, 3)))


def test_average_hamiltonian_order_flag():
    terms = random_terms(11, 2)
    res = average_hamiltonian(SpinEcho(tau=0.5), terms, max_order=0)
    assert isinstance(res, AhtResult)
    np.testing.assert_array_equal(res.h1, 0.0)
    with pytest.raises(SequenceError):
        average_hamiltonian(SpinEcho(tau=0.5), terms, max_order=2)
