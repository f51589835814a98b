"""Command-line front end.

Subcommands: simulate, sweep, dtc-phase, oracle, calibrate.
Exit codes: 0 success, 2 config error, 3 simulation error, 4 oracle failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import warnings

import numpy as np

from .config import (
    PRESETS,
    build_runconfig,
    merge_config,
    parse_config,
    tomllib,
)
from .dtc import (
    DtcFloquet,
    build_phase_diagram,
    dft_spectrum,
    dtc_series,
    subharmonic_intensity,
)
from .ensemble import (
    EnsembleSpec,
    calibrate_concentration,
    fit_decay,
    run_ensemble,
)
from .errors import (
    ConfigError,
    DipolarXYError,
    FitError,
    OracleFailure,
)
from .records import (
    build_record,
    fit_payload,
    trace_payload,
    write_boundary_csv,
    write_json_record,
    write_phase_csv,
    write_sweep_csv,
    write_trace_csv,
)
from .sequences import EpsCpmg, Ramsey, SpinEcho, SpinLock, WahuhaEcho

ORACLE_CHECKS = ("two-spin", "three-spin", "aht", "convergence")

SWEEP_PARAMS = ("epsilon", "tau", "phi", "eta_pol", "ppm")


def _load_config(args) -> "RunConfig":
    data: dict = {}
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; available: "
                + ", ".join(sorted(PRESETS)))
        data = PRESETS[args.preset]
    if args.config is not None:
        try:
            with open(args.config, "rb") as fh:
                file_data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(
                f"config syntax error in {args.config}: {exc}") from exc
        data = merge_config(data, file_data)
    if not data:
        raise ConfigError("give --config and/or --preset")
    overlay: dict = {}
    if args.seed is not None:
        overlay.setdefault("ensemble", {})["master_seed"] = args.seed
    if args.out is not None:
        overlay.setdefault("output", {})["dir"] = args.out
    if overlay:
        data = merge_config(data, overlay)
    return build_runconfig(data)


def _out_path(cfg, suffix: str) -> str:
    os.makedirs(cfg.output.dir, exist_ok=True)
    return os.path.join(cfg.output.dir, f"{cfg.output.prefix}-{suffix}")


def _trace_grid(cfg):
    seq = cfg.sequence
    if isinstance(seq, (EpsCpmg, WahuhaEcho)):
        return None
    grid = cfg.analysis.sample_times()
    if grid is None:
        raise ConfigError(
            "[analysis] needs time_grid or tau_max/n_tau for this sequence")
    return grid


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if isinstance(cfg.sequence, DtcFloquet):
        raise ConfigError("simulate handles coherence sequences; "
                          "use dtc-phase for DTC runs")
    stats = run_ensemble(cfg.ensemble, cfg.sequence, _trace_grid(cfg),
                         workers=args.workers)
    fits = {}
    if cfg.analysis.fit_model != "none":
        try:
            fits["decay"] = fit_payload(fit_decay(stats, cfg.analysis.fit_model))
        except FitError as exc:
            fits["decay_error"] = str(exc)
    csv_path = _out_path(cfg, "trace.csv")
    write_trace_csv(csv_path, stats)
    json_path = _out_path(cfg, "record.json")
    write_json_record(json_path,
                      build_record(cfg, "trace", trace_payload(stats), fits))
    print(csv_path)
    print(json_path)
    return 0


def _sweep_apply(cfg, param: str, value: float):
    """One (spec, sequence) pair with the swept parameter replaced."""
    spec, seq = cfg.ensemble, cfg.sequence
    if param == "eta_pol":
        return dataclasses.replace(spec, eta_pol=value), seq
    if param == "ppm":
        return dataclasses.replace(spec, n_s=value), seq
    if param == "epsilon":
        if not isinstance(seq, (EpsCpmg, DtcFloquet)):
            raise ConfigError("epsilon sweep needs an eps-cpmg or dtc sequence")
        return spec, dataclasses.replace(seq, epsilon=value)
    if param == "tau":
        if isinstance(seq, (Ramsey, SpinEcho)):
            raise ConfigError("tau is the trace axis for ramsey/spin-echo; "
                              "use simulate with a time grid")
        if isinstance(seq, SpinLock):
            return spec, dataclasses.replace(seq, t_total=value)
        return spec, dataclasses.replace(seq, tau=value)
    if param == "phi":
        if not isinstance(seq, DtcFloquet):
            raise ConfigError("phi sweep needs a dtc sequence")
        return spec, dataclasses.replace(seq, phi=value)
    raise ConfigError(f"unknown sweep parameter {param!r}")


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --grid: {exc}") from exc
    if not grid:
        raise ConfigError("--grid must list at least one value")
    rows = []
    for value in grid:
        spec, seq = _sweep_apply(cfg, args.param, value)
        if isinstance(seq, DtcFloquet):
            series = dtc_series(spec, seq)
            inten = subharmonic_intensity(
                dft_spectrum(series, mode=cfg.analysis.dft_mode))
            rows.append({"value": value, "mean": inten, "stderr": None,
                         "fit": None})
            continue
        time_grid = None
        if isinstance(seq, (Ramsey, SpinEcho, SpinLock)):
            time_grid = cfg.analysis.sample_times()
            if time_grid is None:
                raise ConfigError("[analysis] needs a time grid for this sweep")
            if isinstance(seq, SpinLock):
                time_grid = [t for t in time_grid if t <= seq.t_total]
        stats = run_ensemble(spec, seq, time_grid, workers=args.workers)
        fit = None
        if cfg.analysis.fit_model != "none":
            try:
                fit = fit_decay(stats, cfg.analysis.fit_model)
            except FitError:
                fit = None
        rows.append({"value": value, "mean": float(stats.mean[-1]),
                     "stderr": float(stats.stderr[-1]), "fit": fit})
    csv_path = _out_path(cfg, f"sweep-{args.param}.csv")
    write_sweep_csv(csv_path, args.param, rows)
    payload = {
        "param": args.param,
        "grid": grid,
        "final_mean": [r["mean"] for r in rows],
        "final_stderr": [r["stderr"] for r in rows],
        "fits": [fit_payload(r["fit"]) if r["fit"] else None for r in rows],
    }
    json_path = _out_path(cfg, f"sweep-{args.param}-record.json")
    write_json_record(json_path, build_record(cfg, "sweep", payload))
    print(csv_path)
    print(json_path)
    return 0


def cmd_dtc_phase(args) -> int:
    cfg = _load_config(args)
    seq = cfg.sequence
    if not isinstance(seq, DtcFloquet):
        raise ConfigError("dtc-phase needs [sequence].kind = 'dtc'")
    if not cfg.analysis.tau_grid or not cfg.analysis.eps_grid_over_pi:
        raise ConfigError("dtc-phase needs [analysis].tau_grid and "
                          "[analysis].eps_grid_over_pi")
    eps_grid = [math.pi * e for e in cfg.analysis.eps_grid_over_pi]
    diagram = build_phase_diagram(
        cfg.ensemble, cfg.analysis.tau_grid, eps_grid,
        k_cycles=cfg.analysis.k_cycles, phi=seq.phi, omega_y=seq.omega_y,
        threshold=cfg.analysis.threshold, workers=args.workers)
    phase_path = _out_path(cfg, "phase.csv")
    bound_path = _out_path(cfg, "boundary.csv")
    write_phase_csv(phase_path, diagram)
    write_boundary_csv(bound_path, diagram)
    payload = {
        "tau_grid_us": [float(t) for t in diagram.tau_grid],
        "eps_grid_over_pi": [float(e / math.pi) for e in diagram.eps_grid],
        "intensity": [[float(v) for v in row] for row in diagram.intensity],
        "threshold": diagram.threshold,
        "boundary_tau_us": [float(t) for t in diagram.boundary_tau],
        "boundary_eps_over_pi": [float(e / math.pi)
                                 for e in diagram.boundary_eps],
        "reentrant_rows": [bool(b) for b in diagram.reentrant],
    }
    json_path = _out_path(cfg, "phase-record.json")
    write_json_record(json_path, build_record(cfg, "phase-diagram", payload))
    print(phase_path)
    print(bound_path)
    print(json_path)
    return 0


def cmd_calibrate(args) -> int:
    try:
        lo, hi = (float(v) for v in args.range.split(","))
    except ValueError as exc:
        raise ConfigError("--range must be 'lo,hi' in ppm") from exc
    base = None
    if args.config is not None or args.preset is not None:
        base = _load_config(args).ensemble
    ppm = calibrate_concentration(args.target_slope, (lo, hi), base,
                                  workers=args.workers)
    print(f"calibrated concentration: {ppm:.4f} ppm")
    return 0


# ---------------------------------------------------------------------------
# oracle suites


def _report(lines) -> int:
    failed = [name for name, ok, _ in lines if not ok]
    for name, ok, detail in lines:
        print(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}")
    if failed:
        raise OracleFailure("failed checks: " + ", ".join(failed))
    return 0


def _check_two_spin():
    from .dynamics import Propagator, apply_ideal_pulse, state_all_zero
    from .hamiltonian import CouplingMatrix, DisorderField, build_xy_hamiltonian
    from .oracles import two_spin_echo_polarization
    from .sequences import run_spin_echo

    rng = np.random.default_rng(12)
    worst = 0.0
    psi0 = apply_ideal_pulse(state_all_zero(2), 2, "x", math.pi / 2)
    for _ in range(100):
        j = rng.uniform(-2, 2) * 2 * math.pi
        delta = rng.uniform(-3, 3) * 2 * math.pi
        tau = rng.uniform(0.05, 8.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            terms = build_xy_hamiltonian(
                CouplingMatrix(j=np.array([[0.0, j], [j, 0.0]])),
                DisorderField(deltas=np.array([delta, 0.0]), w=0.0))
        got = run_spin_echo(psi0, Propagator(terms.h_total), tau, 2)
        worst = max(worst, abs(got - two_spin_echo_polarization(j, delta, tau)))
    return [("two-spin echo closed form, 100 random (J, Delta, tau)",
             worst < 1e-10, f"max deviation {worst:.3e} (bound 1e-10)")]


def _check_three_spin():
    from .oracles import (
        ThreeSpinParams,
        fit_early_quadratic,
        three_spin_exact_trace,
        three_spin_perturbative,
        three_spin_slow_peak,
    )

    j0 = 2 * math.pi * 0.3
    lines = []
    for (r1, r2), dev_bound, peak_bound in (
            ((0.05, 0.05), 0.01, 0.02), ((0.10, 0.10), 0.05, 0.04)):
        p = ThreeSpinParams(j0=j0, j1=r1 * j0, j2=r2 * j0)
        grid = np.linspace(0.0, 20 / j0, 400)
        exact = three_spin_exact_trace(p, grid)
        pert = three_spin_perturbative(p, grid)
        lines.append((
            f"perturbative vs exact at ratios ({r1}, {r2})",
            abs(exact[0] - 1.0) < 1e-12
            and np.max(np.abs(exact - pert)) < dev_bound,
            f"P(0) = {exact[0]:.5f}, max deviation "
            f"{np.max(np.abs(exact - pert)):.4f} (bound {dev_bound})"))
        f_exact = three_spin_slow_peak(p)
        f_pred = abs(p.j1 * p.j2 / p.j0)
        rel = abs(f_exact - f_pred) / f_pred
        lines.append((
            f"slow Bohr line near J1 J2 / J0 at ratios ({r1}, {r2})",
            rel < peak_bound,
            f"relative offset {rel:.4f} (bound {peak_bound})"))
    p = ThreeSpinParams(j0=j0, j1=0.2 * j0, j2=0.15 * j0)
    grid = np.linspace(0.02, 0.6 / j0, 12)
    s, _ = fit_early_quadratic(grid, three_spin_exact_trace(p, grid),
                               j_scale=j0)
    pred = (p.j0**2 + p.j1**2) / 4
    lines.append(("early slope (J0^2 + J1^2)/4 with J1 = 0.2 J0",
                  abs(s / pred - 1) < 0.05,
                  f"slope {s:.4f} vs {pred:.4f} ({abs(s / pred - 1):.2%})"))
    return lines


def _check_aht():
    from .aht import average_hamiltonian
    from .hamiltonian import (
        CouplingMatrix,
        DisorderField,
        build_xy_hamiltonian,
    )
    from .kernels import heisenberg_dense, ising_dense, onsite_dense
    from .oracles import cpmg_disorder_correction
    from .sequences import EpsCpmg, SpinLock, WahuhaEcho

    rng = np.random.default_rng(5)
    n = 3
    j = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    j[iu] = rng.normal(0, 1.5, iu[0].size)
    j = j + j.T
    deltas = rng.normal(0, 2.0, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        terms = build_xy_hamiltonian(CouplingMatrix(j=j),
                                     DisorderField(deltas=deltas, w=1.0))
    heis = heisenberg_dense(j)
    scale = np.linalg.norm(terms.h_total)

    def rel(a, b):
        return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)

    lines = []
    res = average_hamiltonian(EpsCpmg(tau=0.8, epsilon=-math.pi / 2), terms)
    want = 0.5 * ising_dense(j, "y") + 0.5 * heis
    lines.append(("eps = -pi/2 CPMG: H0 = 1/2 Ising_y + 1/2 Heisenberg",
                  rel(res.h0, want) < 1e-10, f"relative {rel(res.h0, want):.2e}"))
    h1_want = cpmg_disorder_correction(j, deltas, 0.8)
    r1 = rel(res.h1, h1_want)
    lines.append(("eps = -pi/2 CPMG: H1 matches the first-order expression",
                  r1 < 1e-8, f"relative {r1:.2e} (bound 1e-8)"))
    res = average_hamiltonian(EpsCpmg(tau=0.8, epsilon=0.0), terms)
    want = heis - ising_dense(j, "z")
    lines.append(("eps = 0 CPMG: H0 = Heisenberg - Ising_z",
                  rel(res.h0, want) < 1e-10, f"relative {rel(res.h0, want):.2e}"))
    lines.append(("eps = 0 CPMG: H1 = 0",
                  np.linalg.norm(res.h1) < 1e-8 * scale,
                  f"|H1| = {np.linalg.norm(res.h1):.2e} (bound 1e-8 |H|)"))
    res = average_hamiltonian(WahuhaEcho(tau=0.4), terms)
    lines.append(("WAHUHA echo: H0 = 2/3 Heisenberg",
                  rel(res.h0, (2.0 / 3.0) * heis) < 1e-10,
                  f"relative {rel(res.h0, (2.0 / 3.0) * heis):.2e}"))
    omega = 2 * math.pi * 10.0
    res = average_hamiltonian(SpinLock(omega_y=omega, t_total=4.0), terms)
    want = (omega * onsite_dense(np.ones(n), "y")
            + 0.5 * ising_dense(j, "y") + 0.5 * heis)
    lines.append(("spin lock: H0 = Omega_y Sy + 1/2 Ising_y + 1/2 Heisenberg",
                  rel(res.h0, want) < 1e-10, f"relative {rel(res.h0, want):.2e}"))
    return lines


def _check_convergence(workers: int = 1):
    # Independent ensembles per N (the boxes scale with N, so there is no
    # common-random-number pairing); 1000 realizations keeps the noise floor
    # of the pairwise comparison below the 0.05 bound.
    grid = np.linspace(0.0, 4.0, 17)
    means = {}
    for n in (2, 4, 6, 8, 9, 10):
        spec = EnsembleSpec(n_s=46.0, n_realizations=1000, master_seed=17, N=n)
        means[n] = run_ensemble(spec, SpinEcho(tau=1.0), grid,
                                workers=workers).mean
    lines = []
    for a, b in ((8, 9), (8, 10), (9, 10)):
        dev = float(np.max(np.abs(means[a] - means[b])))
        lines.append((f"N = {a} vs N = {b} pointwise", dev < 0.05,
                      f"max |diff| {dev:.4f} (bound 0.05)"))
    for n in (4, 6):
        dev = float(np.max(np.abs(means[n] - means[10])))
        lines.append((f"N = {n} vs N = 10 pointwise (informational)",
                      True, f"max |diff| {dev:.4f}"))
    dev = float(np.max(np.abs(means[2] - means[10])))
    lines.append(("N = 2 visibly deviates from N = 10", dev > 0.1,
                  f"max |diff| {dev:.4f} (must exceed 0.1)"))
    return lines


def cmd_oracle(args) -> int:
    if args.check == "two-spin":
        return _report(_check_two_spin())
    if args.check == "three-spin":
        return _report(_check_three_spin())
    if args.check == "aht":
        return _report(_check_aht())
    return _report(_check_convergence(args.workers))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dipolarxy",
        description="Monte Carlo simulator for disordered dipolar XY "
                    "spin ensembles")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", help="output directory (overrides [output].dir)")
    common.add_argument("--seed", type=int,
                        help="master seed (overrides [ensemble].master_seed)")
    common.add_argument("--workers", type=int, default=1,
                        help="process pool size (default 1)")
    common.add_argument("--preset", choices=sorted(PRESETS),
                        help="named parameter profile as the config base")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="run one ensemble and write trace CSV + record")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common],
                       help="re-run the ensemble over a parameter grid")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--grid", required=True,
                   help="comma-separated values (radians / us / ppm / fraction)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dtc-phase", parents=[common],
                       help="subharmonic phase diagram over (tau, epsilon)")
    p.set_defaults(func=cmd_dtc_phase)

    p = sub.add_parser("oracle", parents=[common],
                       help="run an analytic cross-check suite")
    p.add_argument("check", choices=ORACLE_CHECKS)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("calibrate", parents=[common],
                       help="find the concentration matching an early slope")
    p.add_argument("--target-slope", type=float, required=True,
                   dest="target_slope",
                   help="early quadratic decay coefficient, 1/us^2")
    p.add_argument("--range", required=True, help="search range 'lo,hi' in ppm")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return 4
    except DipolarXYError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
