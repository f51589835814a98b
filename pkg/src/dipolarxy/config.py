"""Run configuration: strict TOML parsing, human units, canonical form.

Unit convention at this boundary (and only here): frequencies are entered
in MHz as ordinary frequencies and multiplied by 2 pi internally, times
are microseconds, angles are radians with *_over_pi alternates accepted
exclusively.  The canonical (normalized) form keeps human units, so
serialize(parse(x)) is stable under further round trips.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:          # 3.10 fallback
    import tomli as tomllib

from .constants import TWO_PI
from .ensemble import EnsembleSpec
from .errors import ConfigError, DipolarXYError
from .sequences import DtcFloquet, EpsCpmg, Ramsey, SpinEcho, SpinLock, WahuhaEcho

__all__ = [
    "RunConfig",
    "AnalysisSpec",
    "OutputSpec",
    "PRESETS",
    "parse_config",
    "build_runconfig",
    "merge_config",
    "serialize_config",
    "config_hash",
]

BLOCKS = ("ensemble", "sequence", "analysis", "output")

SEQUENCE_KINDS = ("ramsey", "spin-echo", "eps-cpmg", "wahuha", "spin-lock", "dtc")

FIT_MODELS = ("none", "exponential", "stretched")

# The two calibrated operating points as complete runnable profiles.
PRESETS: dict[str, dict] = {
    "small-J": {
        "ensemble": {"n_s": 25.0, "W": 0.65, "N": 9},
        "sequence": {"kind": "spin-echo"},
        "analysis": {"tau_max": 6.0, "n_tau": 30, "fit_model": "exponential"},
        "output": {"prefix": "small-J"},
    },
    "large-J": {
        "ensemble": {"n_s": 46.0, "W": 0.65, "N": 9},
        "sequence": {"kind": "spin-echo"},
        "analysis": {"tau_max": 6.0, "n_tau": 30, "fit_model": "exponential"},
        "output": {"prefix": "large-J"},
    },
}


@dataclass(frozen=True)
class AnalysisSpec:
    fit_model: str = "none"
    threshold: float = 0.4
    dft_mode: str = "signed"
    k_cycles: int = 60
    time_grid: tuple = ()
    tau_max: float = 0.0
    n_tau: int = 0
    tau_grid: tuple = ()             # dtc-phase, us
    eps_grid_over_pi: tuple = ()     # dtc-phase

    def sample_times(self):
        """Explicit grid wins; otherwise linspace off tau_max/n_tau."""
        if self.time_grid:
            return list(self.time_grid)
        if self.tau_max > 0 and self.n_tau > 0:
            step = self.tau_max / self.n_tau
            return [step * (i + 1) for i in range(self.n_tau)]
        return None


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "."
    prefix: str = "run"


@dataclass(frozen=True)
class RunConfig:
    ensemble: EnsembleSpec
    sequence: object
    analysis: AnalysisSpec
    output: OutputSpec
    normalized: dict = field(repr=False)


class _Block:
    """Destructive key reader so leftovers can be rejected by name."""

    def __init__(self, name: str, data: dict):
        if not isinstance(data, dict):
            raise ConfigError(f"[{name}] must be a table")
        self.name = name
        self.data = dict(data)

    def take(self, key, default=None, *, required=False, conv=None):
        if key not in self.data:
            if required:
                raise ConfigError(f"missing key [{self.name}].{key}")
            return default
        val = self.data.pop(key)
        if conv is not None:
            try:
                val = conv(val)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for [{self.name}].{key}: {exc}") from exc
        return val

    def angle(self, key, default=None, *, required=False):
        """Radians, with an exclusive <key>_over_pi alternate."""
        alt = f"{key}_over_pi"
        if key in self.data and alt in self.data:
            raise ConfigError(
                f"[{self.name}] gives both {key} and {alt}; pick one")
        if alt in self.data:
            return math.pi * self.take(alt, conv=float)
        if key in self.data:
            return self.take(key, conv=float)
        if required:
            raise ConfigError(f"missing key [{self.name}].{key}")
        return default

    def finish(self) -> None:
        if self.data:
            k = sorted(self.data)[0]
            raise ConfigError(f"unknown key [{self.name}].{k}")


def _float_list(val):
    if not isinstance(val, (list, tuple)) or not val:
        raise ValueError("expected a non-empty array of numbers")
    return tuple(float(v) for v in val)


def merge_config(base: dict, overlay: dict) -> dict:
    """Block-level merge: overlay keys win inside each block."""
    out = {k: dict(v) for k, v in base.items()}
    for name, block in overlay.items():
        if not isinstance(block, dict):
            raise ConfigError(f"[{name}] must be a table")
        out.setdefault(name, {})
        out[name].update(block)
    return out


def _build_sequence(block: _Block, ens: EnsembleSpec):
    kind = block.take("kind", required=True)
    if kind not in SEQUENCE_KINDS:
        raise ConfigError(f"[sequence].kind must be one of {SEQUENCE_KINDS}")
    norm: dict = {"kind": kind}
    try:
        if kind == "ramsey":
            seq = Ramsey(tau=0.0)
        elif kind == "spin-echo":
            seq = SpinEcho(tau=0.0)
        elif kind == "eps-cpmg":
            tau = block.take("tau", required=True, conv=float)
            eps = block.angle("epsilon", required=True)
            k = block.take("k", 1, conv=int)
            seq = EpsCpmg(tau=tau, epsilon=eps, k=k,
                          t_p=ens.t_p, mode=ens.pulse_mode)
            norm.update(tau=tau, epsilon_over_pi=eps / math.pi, k=k)
        elif kind == "wahuha":
            tau = block.take("tau", required=True, conv=float)
            k = block.take("k", 1, conv=int)
            seq = WahuhaEcho(tau=tau, k=k, t_p=ens.t_p, mode=ens.pulse_mode)
            norm.update(tau=tau, k=k)
        elif kind == "spin-lock":
            omega = block.take("omega_y", 10.0, conv=float)
            t_total = block.take("t_total", required=True, conv=float)
            seq = SpinLock(omega_y=TWO_PI * omega, t_total=t_total)
            norm.update(omega_y=omega, t_total=t_total)
        else:  # dtc
            tau = block.take("tau", required=True, conv=float)
            eps = block.angle("epsilon", required=True)
            k = block.take("k", 60, conv=int)
            phi = block.angle("phi", math.pi / 2)
            omega = block.take("omega_y", 10.0, conv=float)
            seq = DtcFloquet(tau=tau, epsilon=eps, k=k, phi=phi,
                             omega_y=TWO_PI * omega)
            norm.update(tau=tau, epsilon_over_pi=eps / math.pi, k=k,
                        phi_over_pi=phi / math.pi, omega_y=omega)
    except DipolarXYError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[sequence] {exc}") from exc
    block.finish()
    return seq, norm


def build_runconfig(data: dict) -> RunConfig:
    unknown = sorted(set(data) - set(BLOCKS))
    if unknown:
        raise ConfigError(f"unknown config block [{unknown[0]}]")
    if "sequence" not in data or not data["sequence"]:
        raise ConfigError("config needs a non-empty [sequence] block")

    ens_b = _Block("ensemble", data.get("ensemble", {}))
    w_mhz = ens_b.take("W", 0.65, conv=float)
    ens_kwargs = dict(
        n_s=ens_b.take("n_s", required=True, conv=float),
        n_realizations=ens_b.take("n_realizations", 500, conv=int),
        master_seed=ens_b.take("master_seed", 0, conv=int),
        N=ens_b.take("N", 9, conv=int),
        W=TWO_PI * w_mhz,
        eta_pol=ens_b.take("eta_pol", 1.0, conv=float),
        pulse_mode=ens_b.take("pulse_mode", "ideal"),
        t_p=ens_b.take("t_p", 0.0, conv=float),
    )
    ens_b.finish()
    try:
        ens = EnsembleSpec(**ens_kwargs)
    except DipolarXYError as exc:
        if isinstance(exc, ConfigError):
            raise ConfigError(f"[ensemble] {exc}") from exc
        raise ConfigError(f"[ensemble] {exc}") from exc

    seq, seq_norm = _build_sequence(_Block("sequence", data["sequence"]), ens)

    ana_b = _Block("analysis", data.get("analysis", {}))
    fit_model = ana_b.take("fit_model", "none")
    if fit_model not in FIT_MODELS:
        raise ConfigError(f"[analysis].fit_model must be one of {FIT_MODELS}")
    dft_mode = ana_b.take("dft_mode", "signed")
    if dft_mode not in ("signed", "contrast"):
        raise ConfigError("[analysis].dft_mode must be 'signed' or 'contrast'")
    time_grid = ana_b.take("time_grid", (), conv=_float_list)
    tau_max = ana_b.take("tau_max", 0.0, conv=float)
    n_tau = ana_b.take("n_tau", 0, conv=int)
    if time_grid and tau_max:
        raise ConfigError("[analysis] gives both time_grid and tau_max; pick one")
    if tau_max < 0 or n_tau < 0:
        raise ConfigError("[analysis] tau_max and n_tau must be >= 0")
    if bool(tau_max > 0) != bool(n_tau > 0):
        raise ConfigError("[analysis] tau_max and n_tau go together")
    threshold = ana_b.take("threshold", 0.4, conv=float)
    if not 0 < threshold:
        raise ConfigError("[analysis].threshold must be positive")
    k_cycles = ana_b.take("k_cycles", 60, conv=int)
    ana = AnalysisSpec(
        fit_model=fit_model,
        threshold=threshold,
        dft_mode=dft_mode,
        k_cycles=k_cycles,
        time_grid=time_grid,
        tau_max=tau_max,
        n_tau=n_tau,
        tau_grid=ana_b.take("tau_grid", (), conv=_float_list),
        eps_grid_over_pi=ana_b.take("eps_grid_over_pi", (), conv=_float_list),
    )
    ana_b.finish()

    out_b = _Block("output", data.get("output", {}))
    out = OutputSpec(dir=str(out_b.take("dir", ".")),
                     prefix=str(out_b.take("prefix", "run")))
    out_b.finish()

    normalized = {
        "ensemble": {
            "N": ens.N, "W": w_mhz, "eta_pol": ens.eta_pol,
            "master_seed": ens.master_seed,
            "n_realizations": ens.n_realizations, "n_s": ens.n_s,
            "pulse_mode": ens.pulse_mode, "t_p": ens.t_p,
        },
        "sequence": seq_norm,
        "analysis": {
            "dft_mode": ana.dft_mode, "fit_model": ana.fit_model,
            "k_cycles": ana.k_cycles, "threshold": ana.threshold,
            **({"time_grid": list(ana.time_grid)} if ana.time_grid else {}),
            **({"tau_max": ana.tau_max, "n_tau": ana.n_tau}
               if ana.tau_max else {}),
            **({"tau_grid": list(ana.tau_grid)} if ana.tau_grid else {}),
            **({"eps_grid_over_pi": list(ana.eps_grid_over_pi)}
               if ana.eps_grid_over_pi else {}),
        },
        "output": {"dir": out.dir, "prefix": out.prefix},
    }
    return RunConfig(ens, seq, ana, out, normalized)


def parse_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error in {path}: {exc}") from exc
    return build_runconfig(data)


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value {v!r}")


def serialize_config(cfg: RunConfig) -> str:
    """Canonical TOML: fixed block order, sorted keys, repr precision."""
    lines = []
    for name in BLOCKS:
        block = cfg.normalized.get(name, {})
        lines.append(f"[{name}]")
        for key in sorted(block):
            lines.append(f"{key} = {_toml_scalar(block[key])}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()
