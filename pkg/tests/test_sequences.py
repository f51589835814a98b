"""Pulse-sequence execution semantics and limits."""

import math

import numpy as np
import pytest

from dipolarxy.dynamics import Propagator, apply_ideal_pulse, state_all_zero
from dipolarxy.errors import ConfigError, SequenceError
from dipolarxy.hamiltonian import build_xy_hamiltonian, coupling_matrix, sample_disorder
from dipolarxy.lattice import DensitySpec, sample_configuration
from dipolarxy.sequences import (
    CoherenceTrace,
    DtcFloquet,
    EpsCpmg,
    Ramsey,
    SpinEcho,
    SpinLock,
    WahuhaEcho,
    WAHUHA_PULSES,
    analyzer_population,
    center_coherence,
    emulate_analyzer_sweep,
    prepare_initial,
    run_eps_cpmg,
    run_ramsey,
    run_spin_echo,
    run_spin_lock,
    run_wahuha_echo,
)


def dressed_system(seed, n, ppm=46.0, w=0.0):
    rng = np.random.default_rng(seed)
    cfg = sample_configuration(rng, DensitySpec(ppm), n)
    cm = coupling_matrix(cfg.positions)
    dis = sample_disorder(rng, w, n)
    terms = build_xy_hamiltonian(cm, dis)
    return terms, Propagator(terms.h_total)


def test_prepare_initial_full_polarization():
    psi = prepare_initial(np.random.default_rng(0), 4, math.pi / 2, 1.0)
    assert center_coherence(psi, 4) == pytest.approx(1.0)
    # eta_pol = 1 consumes the flip draws but flips nothing
    ref = apply_ideal_pulse(state_all_zero(4), 4, "x", math.pi / 2)
    np.testing.assert_allclose(psi, ref, atol=1e-14)


def test_prepare_initial_flips():
    # seeded draw with known flips: spin i flips iff u_i >= eta
    rng = np.random.default_rng(5)
    u = np.random.default_rng(5).random(6)
    psi = prepare_initial(rng, 6, 0.0, 0.8)
    idx = sum(1 << (6 - 1 - i) for i, f in enumerate(u >= 0.8) if f)
    assert psi[idx] == 1.0 and np.linalg.norm(psi) == 1.0


def test_prepare_initial_validation():
    rng = np.random.default_rng(0)
    for eta in (0.5, 0.0, 1.2):
        with pytest.raises(ConfigError):
            prepare_initial(rng, 3, math.pi / 2, eta)
    for phi in (-0.1, math.pi):
        with pytest.raises(ConfigError):
            prepare_initial(rng, 3, phi, 1.0)


def test_echo_refocuses_pure_disorder():
    # J = 0: the pi pulse cancels static detunings at any tau
    n = 4
    dis = sample_disorder(np.random.default_rng(3), 2 * math.pi * 0.65, n)
    terms = build_xy_hamiltonian(np.zeros((n, n)), dis)
    prop = Propagator(terms.h_total)
    psi0 = prepare_initial(np.random.default_rng(1), n, math.pi / 2, 1.0)
    for tau in (0.0, 0.7, 5.0):
        assert run_spin_echo(psi0, prop, tau, n) == pytest.approx(1.0)


def test_ramsey_precession():
    # J = 0: the readout spin precesses at its own detuning only
    n = 3
    deltas = np.array([1.3, -0.4, 2.2])
    terms = build_xy_hamiltonian(np.zeros((n, n)), deltas)
    prop = Propagator(terms.h_total)
    psi0 = prepare_initial(np.random.default_rng(1), n, math.pi / 2, 1.0)
    for tau in (0.0, 0.3, 1.9):
        assert run_ramsey(psi0, prop, tau, n) == pytest.approx(
            math.cos(deltas[0] * tau), abs=1e-12)


def test_eps_cpmg_prefix_property():
    # the k-block trace must equal each shorter run bit for bit
    terms, prop = dressed_system(11, 4, w=2 * math.pi * 0.65)
    psi0 = prepare_initial(np.random.default_rng(2), 4, math.pi / 2, 1.0)
    full = run_eps_cpmg(psi0, prop, EpsCpmg(tau=0.3, epsilon=0.2, k=5), 4)
    for m in (1, 3, 5):
        part = run_eps_cpmg(psi0, prop, EpsCpmg(tau=0.3, epsilon=0.2, k=m), 4)
        assert part.values[-1] == full.values[m - 1]
        assert part.times[-1] == pytest.approx(m * 0.3)


def test_eps_cpmg_zero_eps_single_block_is_echo():
    terms, prop = dressed_system(12, 4, w=2 * math.pi * 0.65)
    psi0 = prepare_initial(np.random.default_rng(2), 4, math.pi / 2, 1.0)
    tr = run_eps_cpmg(psi0, prop, EpsCpmg(tau=0.8, epsilon=0.0, k=1), 4)
    assert tr.values[0] == run_spin_echo(psi0, prop, 0.8, 4)


def test_eps_cpmg_finite_pulse_limit():
    terms, prop = dressed_system(13, 3, w=2 * math.pi * 0.3)
    psi0 = prepare_initial(np.random.default_rng(2), 3, math.pi / 2, 1.0)
    ideal = run_eps_cpmg(psi0, prop, EpsCpmg(tau=0.4, epsilon=0.1, k=3), 3)
    spec = EpsCpmg(tau=0.4, epsilon=0.1, k=3, t_p=1e-5, mode="finite")
    fin = run_eps_cpmg(psi0, prop, spec, 3, h_total=terms.h_total)
    np.testing.assert_allclose(fin.values, ideal.values, atol=1e-3)
    # finite blocks are longer by t_p
    np.testing.assert_allclose(fin.times - ideal.times,
                               1e-5 * np.arange(1, 4), atol=1e-12)
    with pytest.raises(SequenceError):
        run_eps_cpmg(psi0, prop, spec, 3)  # missing bare Hamiltonian


def test_wahuha_cancels_exchange_as_tau_shrinks():
    # at fixed total time 4.8 us, shorter cycles refocus the dipolar
    # interaction better; a bare echo over the same time does not
    terms, prop = dressed_system(21, 5)
    psi0 = prepare_initial(np.random.default_rng(1), 5, math.pi / 2, 1.0)
    echo = run_spin_echo(psi0, prop, 4.8, 5)
    w_02 = run_wahuha_echo(psi0, prop, WahuhaEcho(tau=0.2, k=4), 5).values[-1]
    w_01 = run_wahuha_echo(psi0, prop, WahuhaEcho(tau=0.1, k=8), 5).values[-1]
    assert w_01 > w_02 > echo
    assert w_01 > 0.9
    # tau -> 0 limit is exact refocusing
    w_tiny = run_wahuha_echo(psi0, prop, WahuhaEcho(tau=1e-4, k=2), 5)
    np.testing.assert_allclose(w_tiny.values, 1.0, atol=1e-4)


def test_wahuha_finite_pulse_limit():
    terms, prop = dressed_system(22, 3)
    psi0 = prepare_initial(np.random.default_rng(1), 3, math.pi / 2, 1.0)
    ideal = run_wahuha_echo(psi0, prop, WahuhaEcho(tau=0.2, k=2), 3)
    spec = WahuhaEcho(tau=0.2, k=2, t_p=1e-5, mode="finite")
    fin = run_wahuha_echo(psi0, prop, spec, 3, h_total=terms.h_total)
    np.testing.assert_allclose(fin.values, ideal.values, atol=1e-3)


def test_wahuha_pulse_table_shape():
    assert len(WAHUHA_PULSES) == 6
    angles = [a for _, a in WAHUHA_PULSES]
    # net rotation per cycle is identity: four pi/2 and two opposite pi
    assert sum(abs(a) for a in angles) == pytest.approx(4 * math.pi)


def test_spin_lock_holds_y_polarization():
    terms, prop = dressed_system(21, 5)
    psi0 = prepare_initial(np.random.default_rng(1), 5, math.pi / 2, 1.0)
    ts = np.linspace(0.0, 3.0, 7)
    locked = run_spin_lock(
        psi0, terms.h_total, SpinLock(omega_y=2 * math.pi * 10, t_total=3.0),
        ts, 5)
    assert locked.values.min() > 0.99
    free = run_spin_lock(
        psi0, terms.h_total, SpinLock(omega_y=0.0, t_total=3.0), ts, 5)
    assert free.values.min() < 0.5
    # omega_y = 0 is plain free evolution
    assert free.values[3] == pytest.approx(
        center_coherence(prop.evolve(psi0, ts[3]), 5), abs=1e-12)


def test_spin_lock_time_bounds():
    terms, _ = dressed_system(23, 2)
    psi0 = prepare_initial(np.random.default_rng(1), 2, math.pi / 2, 1.0)
    with pytest.raises(SequenceError):
        run_spin_lock(psi0, terms.h_total,
                      SpinLock(omega_y=1.0, t_total=1.0), [0.5, 1.5], 2)


def test_analyzer_sweep_reads_transverse_magnitude():
    n = 3
    for phi in (math.pi / 2, 0.9, 0.3):
        psi = apply_ideal_pulse(state_all_zero(n), n, "x", phi)
        grid = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        fit = emulate_analyzer_sweep(psi, n, grid)
        assert fit.coherence == pytest.approx(math.sin(phi), abs=1e-9)
        assert fit.c_offset == pytest.approx(0.5, abs=1e-9)
        assert fit.residual < 1e-9
    # +y state: the theta = 0 analyzer maps +y to the |1> pole
    psi_y = apply_ideal_pulse(state_all_zero(n), n, "x", math.pi / 2)
    assert analyzer_population(psi_y, n, 0.0) == pytest.approx(1.0)


def test_analyzer_sweep_validation():
    psi = apply_ideal_pulse(state_all_zero(2), 2, "x", math.pi / 2)
    with pytest.raises(SequenceError):
        emulate_analyzer_sweep(psi, 2, np.linspace(0, 2 * math.pi, 5))
    with pytest.raises(SequenceError):
        emulate_analyzer_sweep(psi, 2, np.linspace(0, 1.0, 12))


def test_sequence_spec_validation():
    with pytest.raises(SequenceError):
        Ramsey(tau=-1.0)
    with pytest.raises(SequenceError):
        SpinEcho(tau=-0.1)
    with pytest.raises(SequenceError):
        EpsCpmg(tau=1.0, epsilon=0.0, k=0)
    with pytest.raises(SequenceError):
        EpsCpmg(tau=1.0, epsilon=3.5)
    with pytest.raises(SequenceError):
        EpsCpmg(tau=1.0, epsilon=0.0, mode="square")
    with pytest.raises(SequenceError):
        WahuhaEcho(tau=0.1, t_p=0.2, mode="finite")
    with pytest.raises(SequenceError):
        SpinLock(omega_y=1.0, t_total=-1.0)
    with pytest.raises(SequenceError):
        DtcFloquet(tau=0.3, epsilon=0.0, k=10, phi=2.0)
    with pytest.raises(SequenceError):
        DtcFloquet(tau=0.3, epsilon=0.0, k=0)
    # periods
    assert EpsCpmg(tau=0.3, epsilon=0.1, k=2).period == pytest.approx(0.3)
    assert EpsCpmg(tau=0.3, epsilon=0.1, t_p=0.01,
                   mode="finite").period == pytest.approx(0.31)
    assert WahuhaEcho(tau=0.2).period == pytest.approx(1.2)
    assert WahuhaEcho(tau=0.2, t_p=0.01,
                      mode="finite").period == pytest.approx(1.22)


def test_coherence_trace_validation():
    with pytest.raises(SequenceError):
        CoherenceTrace([0.0, 1.0], [0.5])
    with pytest.raises(SequenceError):
        CoherenceTrace([1.0, 0.5], [0.1, 0.2])
    with pytest.raises(SequenceError):
        CoherenceTrace([0.0, 1.0], [0.0, 1.5])
