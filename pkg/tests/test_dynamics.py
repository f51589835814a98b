"""Propagators, pulses, and expectation values against scipy.expm oracles."""

from functools import reduce

import numpy as np
import pytest
import scipy.linalg

from dipolarxy.dynamics import (
    Propagator,
    apply_ideal_pulse,
    axis_vector,
    expect_site,
    expect_total,
    finite_pulse_propagator,
    product_state,
    reduced_density_1,
    single_spin_rotation,
    state_all_zero,
    transverse_expectation,
    transverse_magnitude,
)
from dipolarxy.errors import HamiltonianError, SequenceError
from dipolarxy.hamiltonian import build_xy_hamiltonian

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
HALF = {"x": SX, "y": SY, "z": SZ}


def site_op(n, i, op):
    return reduce(np.kron, [op if k == i else np.eye(2) for k in range(n)])


def total_op(n, axis):
    return sum(site_op(n, i, HALF[axis]) for i in range(n))


def random_xy_terms(rng, n):
    j = rng.normal(size=(n, n))
    j = j + j.T
    np.fill_diagonal(j, 0.0)
    return build_xy_hamiltonian(j, rng.normal(size=n))


def random_state(rng, n):
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return psi / np.linalg.norm(psi)


def test_state_all_zero():
    psi = state_all_zero(3)
    assert psi[0] == 1.0 and np.linalg.norm(psi) == 1.0
    for i in range(3):
        assert expect_site(psi, 3, i, "z") == pytest.approx(0.5)


def test_product_state_ordering():
    # spin 0 is the most significant bit
    psi = product_state([[1, 0], [0, 1]])
    assert psi[1] == 1.0
    assert expect_site(psi, 2, 0, "z") == pytest.approx(0.5)
    assert expect_site(psi, 2, 1, "z") == pytest.approx(-0.5)


def test_pulse_sign_convention():
    # pi/2 about +x maps |0...0> onto +y
    psi = apply_ideal_pulse(state_all_zero(2), 2, "x", np.pi / 2)
    for i in range(2):
        assert expect_site(psi, 2, i, "y") == pytest.approx(0.5)
        assert expect_site(psi, 2, i, "z") == pytest.approx(0.0, abs=1e-12)
    assert transverse_expectation(psi, 2, 0) == pytest.approx(0.5j)
    assert transverse_magnitude(psi, 2, 0) == pytest.approx(0.5)


def test_single_spin_rotation_properties():
    u = single_spin_rotation("y", 0.73)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(
        single_spin_rotation([0, 2.0, 0], 0.73), u, atol=1e-14)
    np.testing.assert_allclose(
        single_spin_rotation("x", 2 * np.pi), -np.eye(2), atol=1e-14)


def test_apply_ideal_pulse_matches_expm():
    rng = np.random.default_rng(6)
    n = 3
    psi = random_state(rng, n)
    for axis in ("x", "y", "z", "-y", [1.0, 1.0, 0.5]):
        for angle in (np.pi / 2, -np.pi, 0.37):
            nv = axis_vector(axis)
            gen = sum(c * total_op(n, ax)
                      for c, ax in zip(nv, ("x", "y", "z")))
            ref = scipy.linalg.expm(1j * angle * gen) @ psi
            got = apply_ideal_pulse(psi, n, axis, angle)
            np.testing.assert_allclose(got, ref, atol=1e-12)


def test_apply_ideal_pulse_subset():
    rng = np.random.default_rng(7)
    psi = random_state(rng, 3)
    got = apply_ideal_pulse(psi, 3, "x", np.pi / 2, spins=[1])
    gen = site_op(3, 1, SX)
    ref = scipy.linalg.expm(1j * (np.pi / 2) * gen) @ psi
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_propagator_matches_expm_real():
    rng = np.random.default_rng(8)
    terms = random_xy_terms(rng, 3)
    prop = Propagator(terms.h_total)
    assert prop.dim == 8
    psi = random_state(rng, 3)
    for t in (0.0, 0.4, 2.7):
        ref = scipy.linalg.expm(-1j * terms.h_total * t) @ psi
        np.testing.assert_allclose(prop.evolve(psi, t), ref, atol=1e-10)
        u = prop.unitary(t)
        np.testing.assert_allclose(u @ psi, ref, atol=1e-10)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(8), atol=1e-10)


def test_propagator_matches_expm_complex():
    rng = np.random.default_rng(9)
    terms = random_xy_terms(rng, 2)
    h = terms.h_total + 0.8 * total_op(2, "y")
    prop = Propagator(h)
    assert not prop.real
    psi = random_state(rng, 2)
    ref = scipy.linalg.expm(-1j * h * 1.3) @ psi
    np.testing.assert_allclose(prop.evolve(psi, 1.3), ref, atol=1e-10)
    np.testing.assert_allclose(prop.unitary(1.3) @ psi, ref, atol=1e-10)


def test_propagator_with_y_drive():
    # valid because the XY Hamiltonian commutes with global z rotations
    rng = np.random.default_rng(10)
    n = 3
    terms = random_xy_terms(rng, n)
    coeff = 1.7
    prop = Propagator.with_y_drive(terms.h_total, coeff, n)
    h_ref = terms.h_total + coeff * total_op(n, "y")
    psi = random_state(rng, n)
    for t in (0.5, 1.9):
        ref = scipy.linalg.expm(-1j * h_ref * t) @ psi
        np.testing.assert_allclose(prop.evolve(psi, t), ref, atol=1e-10)
        np.testing.assert_allclose(prop.unitary(t) @ psi, ref, atol=1e-10)


def test_propagator_rejects_nonsquare():
    with pytest.raises(HamiltonianError):
        Propagator(np.zeros((2, 3)))


def test_finite_pulse_free_limit():
    # with no Hamiltonian the finite pulse is exactly the ideal rotation
    psi = random_state(np.random.default_rng(11), 2)
    for axis in ("x", "y"):
        prop, dur = finite_pulse_propagator(
            np.zeros((4, 4)), 2, axis, np.pi / 2, rabi=3.0)
        got = prop.evolve(psi, dur)
        ref = apply_ideal_pulse(psi, 2, axis, np.pi / 2)
        np.testing.assert_allclose(got, ref, atol=1e-10)


def test_finite_pulse_converges_to_ideal():
    rng = np.random.default_rng(12)
    terms = random_xy_terms(rng, 3)
    psi = random_state(rng, 3)
    ref = apply_ideal_pulse(psi, 3, "y", np.pi)
    errs = []
    for rabi in (20.0, 200.0, 2000.0):
        prop, dur = finite_pulse_propagator(terms.h_total, 3, "y", np.pi, rabi)
        errs.append(np.linalg.norm(prop.evolve(psi, dur) - ref))
        # Duhamel bound: the deviation cannot exceed ||H|| * duration
        assert errs[-1] <= np.linalg.norm(terms.h_total, 2) * dur * 1.01
    assert errs[0] > errs[1] > errs[2]
    # error shrinks like 1/rabi
    assert errs[0] / errs[1] == pytest.approx(10.0, rel=0.3)


def test_finite_pulse_negative_angle_and_generic_axis():
    rng = np.random.default_rng(13)
    terms = random_xy_terms(rng, 2)
    psi = random_state(rng, 2)
    for axis, angle in (("x", -np.pi / 2), ([1, 1, 0], 0.9), ("y", -np.pi)):
        prop, dur = finite_pulse_propagator(
            terms.h_total, 2, axis, angle, rabi=40.0)
        nv = axis_vector(axis)
        sign = 1.0 if angle >= 0 else -1.0
        gen = sum(c * total_op(2, ax) for c, ax in zip(nv, ("x", "y", "z")))
        h_ref = terms.h_total - sign * 40.0 * gen
        ref = scipy.linalg.expm(-1j * h_ref * dur) @ psi
        np.testing.assert_allclose(prop.evolve(psi, dur), ref, atol=1e-10)


def test_finite_pulse_rejects_bad_rabi():
    with pytest.raises(SequenceError):
        finite_pulse_propagator(np.zeros((4, 4)), 2, "x", np.pi, rabi=0.0)


def test_axis_vector_errors():
    np.testing.assert_allclose(axis_vector("-y"), [0, -1, 0])
    np.testing.assert_allclose(axis_vector([0, 0, 5.0]), [0, 0, 1.0])
    with pytest.raises(SequenceError):
        axis_vector("q")
    with pytest.raises(SequenceError):
        axis_vector([0.0, 0.0, 0.0])
    with pytest.raises(SequenceError):
        axis_vector([1.0, 2.0])


def test_reduced_density_and_totals():
    rng = np.random.default_rng(14)
    psi = random_state(rng, 3)
    for site in range(3):
        rho = reduced_density_1(psi, 3, site)
        assert np.trace(rho).real == pytest.approx(1.0)
        np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)
        for axis in ("x", "y", "z"):
            ref = np.real(psi.conj() @ (site_op(3, site, HALF[axis]) @ psi))
            assert expect_site(psi, 3, site, axis) == pytest.approx(ref)
    for axis in ("x", "y", "z"):
        ref = np.real(psi.conj() @ (total_op(3, axis) @ psi))
        assert expect_total(psi, 3, axis) == pytest.approx(ref)
