"""Flat key-value experiment configuration.

Keys use dotted section prefixes (``scenario.ts = 0.01``); '#' starts a
comment.  The parsed configuration is validated eagerly so a bad file
fails before any pipeline stage runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib.resources import files as _pkg_files
from pathlib import Path

from loadsysid.errors import ConfigError
from loadsysid.motor import MotorSpec
from loadsysid.sim import ExternalNoise, NoiseWindow, Scenario

IDENT_CHANNELS = ("torque", "emf-wrong")


@dataclass
class ExperimentConfig:
    case_path: str
    case_text: str
    scenario: Scenario
    analysis_window: tuple
    motor: MotorSpec
    band_hz: tuple = (0.0, 10.0)
    segment: int = 64
    info_segment: int = 32
    pe_order_max: int = 60
    pad_factor: int = 4
    ident_channel: str = "torque"
    ident_init: str = "perturbed:30"
    ident_bounds_scale: float = 10.0
    ident_restarts: int = 2
    ident_burn_in: int = 50
    ident_q: float = 0.002
    ident_rm: float = 1e-8
    ident_free: tuple = ("X", "Xp", "Td0p", "Tj", "s0")
    ident_maxiter: int = 300
    seed: int = 1
    out_dir: str = "out"
    raw: dict = field(default_factory=dict)


def _parse_kv(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = val
    return values


def _get(values, key, cast, default=None, required=False):
    if key not in values:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return cast(values[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {values[key]!r} ({exc})") from exc


def resolve_case(name_or_path, base_dir=None):
    """Bundled case name or a path to a case file."""
    bundled = _pkg_files("loadsysid.cases")
    candidate = bundled.joinpath(f"{name_or_path}.case")
    if candidate.is_file():
        return str(candidate), candidate.read_text()
    path = Path(name_or_path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    if not path.is_file():
        raise ConfigError(f"case file not found: {name_or_path}")
    return str(path), path.read_text()


def load_config(text, base_dir=None, seed_override=None):
    values = _parse_kv(text)
    seed = seed_override if seed_override is not None else _get(
        values, "seed", int, 1)

    case_path, case_text = resolve_case(
        _get(values, "case", str, "wscc9"), base_dir)

    duration = _get(values, "scenario.duration", float, 20.0)
    ts = _get(values, "scenario.ts", float, 0.01)
    dt = _get(values, "scenario.dt_integration", float, 0.0005)

    internal = None
    if _get(values, "scenario.internal.variance", float, 0.0) > 0:
        hold = _get(values, "scenario.internal.hold", float, None)
        internal = NoiseWindow(
            variance=_get(values, "scenario.internal.variance", float),
            start=_get(values, "scenario.internal.start", float, 0.0),
            end=_get(values, "scenario.internal.end", float, duration),
            seed=seed,
            hold_dt=hold,
        )
    external = None
    if _get(values, "scenario.external.variance", float, 0.0) > 0:
        external = ExternalNoise(
            variance=_get(values, "scenario.external.variance", float),
            start=_get(values, "scenario.external.start", float, 0.0),
            end=_get(values, "scenario.external.end", float, duration),
            seed=seed + _get(values, "scenario.external.seed_offset", int, 1000),
            hold_dt=_get(values, "scenario.external.hold", float, None),
            bus=_get(values, "scenario.external.bus", int, required=True),
            direction_deg=_get(values, "scenario.external.direction_deg",
                               float, 0.0),
        )
    mvar = tuple(
        _get(values, f"scenario.measurement.{c}", float, 0.0)
        for c in ("v", "theta", "p", "q")
    )
    scenario = Scenario(
        duration=duration,
        dt_integration=dt,
        dt_sample=ts,
        internal=internal,
        external=external,
        measurement_variance=mvar,
        measurement_seed=seed + _get(
            values, "scenario.measurement.seed_offset", int, 500),
    )
    band = (
        _get(values, "diagnostics.band_low_hz", float, 0.0),
        _get(values, "diagnostics.band_high_hz", float, 10.0),
    )
    if band[1] > 0.5 / ts + 1e-12:
        raise ConfigError(
            f"diagnostic band edge {band[1]} Hz exceeds the Nyquist "
            f"frequency {0.5 / ts} Hz"
        )
    motor = MotorSpec(
        X=_get(values, "motor.X", float, required=True),
        Xp=_get(values, "motor.Xp", float, required=True),
        Td0p=_get(values, "motor.Td0p", float, required=True),
        Tj=_get(values, "motor.Tj", float, required=True),
        s0=_get(values, "motor.s0", float, None),
    )
    window = (
        _get(values, "analysis.start", float,
             internal.start if internal else 0.0),
        _get(values, "analysis.end", float, duration),
    )
    channel = _get(values, "ident.channel", str, "torque")
    if channel not in IDENT_CHANNELS:
        raise ConfigError(
            f"ident.channel must be one of {IDENT_CHANNELS}, got {channel!r}"
        )
    init_mode = _get(values, "ident.init", str, "perturbed:30")
    if init_mode != "truth" and not init_mode.startswith(("perturbed:",
                                                          "explicit:")):
        raise ConfigError(f"bad ident.init mode {init_mode!r}")
    free = tuple(
        s.strip() for s in _get(values, "ident.free", str,
                                "X,Xp,Td0p,Tj,s0").split(",") if s.strip()
    )
    cfg = ExperimentConfig(
        case_path=case_path,
        case_text=case_text,
        scenario=scenario,
        analysis_window=window,
        motor=motor,
        band_hz=band,
        segment=_get(values, "diagnostics.segment", int, 64),
        info_segment=_get(values, "diagnostics.info_segment", int, 32),
        pe_order_max=_get(values, "diagnostics.pe_order_max", int, 60),
        pad_factor=_get(values, "diagnostics.pad_factor", int, 4),
        ident_channel=channel,
        ident_init=init_mode,
        ident_bounds_scale=_get(values, "ident.bounds_scale", float, 10.0),
        ident_restarts=_get(values, "ident.restarts", int, 2),
        ident_burn_in=_get(values, "ident.burn_in", int, 50),
        ident_q=_get(values, "ident.q", float, 0.002),
        ident_rm=_get(values, "ident.rm", float, 1e-8),
        ident_free=free,
        ident_maxiter=_get(values, "ident.maxiter", int, 300),
        seed=seed,
        out_dir=_get(values, "out", str, "out"),
        raw=values,
    )
    return cfg


def load_config_file(path, seed_override=None):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return load_config(p.read_text(), base_dir=p.parent,
                       seed_override=seed_override)


def default_config_text():
    return _pkg_files("loadsysid.cases").joinpath("reference.cfg").read_text()
