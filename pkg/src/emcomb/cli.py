"""Command-line interface.

Subcommands: ``simulate`` (one pump condition -> trajectory, spectrum and
classification files), ``threshold`` (instability boundary over a detuning
grid), ``sweep`` (full regime map), ``classify`` (lattice-classify an
external tooth list, e.g. from measured spectra), ``analytic``
(Bessel-series comb table). Powers accept either absolute dBm or
``th+X``/``th-X`` relative to the computed threshold at that detuning, so
single commands reproduce the standard studies.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import (config_hash, effective_config_text, load_config,
                     resolve_params)
from .core import TWO_PI, get_preset, pump_from_dbm
from .combs import bessel_comb, classification_to_json, classify, default_tol_hz
from .dynamics import SettleCriteria, settle, write_binary, write_csv
from .errors import ConfigError, EmcombError, NumericalError
from .spectral import find_teeth, spectrum_of, teeth_from_json, teeth_to_json
from .stability import max_growth_rate, threshold_curve, threshold_power
from .sweep import SweepPlan, export_map, run_sweep

_DEFAULT_BRACKET = (-95.0, 10.0)


def _parse_range(text: str, *, count_mode: bool) -> list[float]:
    """'a:b:n' -> n values from a to b (count_mode) or stepped by n."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ConfigError(f"expected VALUE or START:STOP:{'COUNT' if count_mode else 'STEP'}, got {text!r}")
    a, b, c = (float(p) for p in parts)
    if count_mode:
        n = int(round(c))
        if n < 1:
            raise ConfigError(f"grid count must be >= 1 in {text!r}")
        return list(np.linspace(a, b, n))
    if c <= 0:
        raise ConfigError(f"grid step must be > 0 in {text!r}")
    n = int(math.floor((b - a) / c + 1e-9)) + 1
    return [a + k * c for k in range(max(n, 1))]


def _resolve_power(power_text: str, params, delta_rad: float,
                   attenuation_db: float) -> float:
    """Absolute dBm, or 'th+X'/'th-X' relative to the computed threshold."""
    text = power_text.strip().lower()
    if text.startswith("th"):
        rest = text[2:]
        offset = float(rest) if rest else 0.0
        th, _branch = threshold_power(params, delta_rad, _DEFAULT_BRACKET)
        return th + offset + attenuation_db
    return float(power_text)


def _cfg_get(cfg, section, key, cast, default):
    try:
        return cast(cfg[section][key])
    except (KeyError, TypeError):
        return default
    except ValueError as exc:
        raise ConfigError(f"bad [{section}] {key}: {exc}") from exc


def _write_header(fh, preset, params, extra=None):
    text = effective_config_text(preset, params, extra=extra)
    fh.write(f"# emcomb {__version__}\n")
    fh.write(f"# config_hash: {config_hash(text)}\n")
    for line in text.strip().splitlines():
        fh.write(f"# {line}\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_simulate(args, params, cfg):
    atten = _cfg_get(cfg, "pump", "attenuation_db", float, args.attenuation_db)
    delta_rad = float(args.detuning) * params.omega_m1
    p_dbm = _resolve_power(args.power, params, delta_rad, atten)
    pump = pump_from_dbm(params, delta_rad, p_dbm, attenuation_db=atten)

    budget = args.budget
    crit = SettleCriteria(max_horizon=budget)
    traj, report = settle(params, pump, criteria=crit, tol=args.tol)
    growth, dominant = max_growth_rate(params, pump)

    os.makedirs(args.out, exist_ok=True)
    write_csv(traj, os.path.join(args.out, "trajectory.csv"))
    write_binary(traj, os.path.join(args.out, "trajectory.bin"))

    regime = "SinglePeak"
    spacing = 0.0
    teeth = []
    if report.kind.value in ("LimitCycle", "Torus"):
        spec = spectrum_of(traj, params, pump)
        spec.to_csv(os.path.join(args.out, "spectrum.csv"))
        teeth = find_teeth(spec, margin_db=args.margin_db)
        teeth_to_json(teeth, os.path.join(args.out, "teeth.json"))
        tol_hz = args.tol_hz or default_tol_hz(spec.rbw, params.omega_m1)
        cls = classify(teeth, params.omega_m1, params.omega_m2, tol_hz,
                       args.kmax)
        classification_to_json(cls, os.path.join(args.out,
                                                 "classification.json"))
        regime = cls.regime.value
        spacing = cls.dominant_spacing

    summary = {
        "preset": args.preset,
        "detuning_over_omega_m1": args.detuning,
        "p_d_dbm": pump.p_d_dbm,
        "attractor": report.kind.value,
        "settle_time_s": report.settle_time,
        "max_growth_per_s": growth,
        "dominant_mode": dominant,
        "regime": regime,
        "dominant_spacing_hz": spacing,
        "n_teeth": len(teeth),
    }
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"simulate: {report.kind.value}, regime {regime}, "
          f"{len(teeth)} teeth, spacing {spacing:.6g} Hz -> {args.out}")
    return 0


def _cmd_threshold(args, params, cfg):
    detunings = _parse_range(args.detuning, count_mode=True)
    det_rad = [d * params.omega_m1 for d in detunings]
    curve = threshold_curve(params, det_rad, _DEFAULT_BRACKET,
                            mode=args.mode)
    out = args.out or "threshold.csv"
    with open(out, "w") as fh:
        _write_header(fh, args.preset, params)
        fh.write("delta_dc_hz,threshold_dbm,branch\n")
        for d, p, b in zip(curve.detunings, curve.threshold_dbm, curve.branch):
            fh.write(f"{d / TWO_PI:.10g},{p:.6f},{b}\n")
    print(f"threshold: {len(detunings)} points -> {out}")
    return 0


def _cmd_sweep(args, params, cfg):
    detunings = tuple(_parse_range(args.detuning, count_mode=True))
    powers = tuple(_parse_range(args.power, count_mode=False))
    plan = SweepPlan(
        preset=args.preset,
        detunings=detunings,
        powers_dbm=powers,
        budget_s=args.budget,
        tol=args.tol,
        margin_db=args.margin_db,
        kmax=args.kmax,
        tol_hz=args.tol_hz,
        parallelism=args.parallel,
        attenuation_db=args.attenuation_db,
    )
    result = run_sweep(plan, params)
    os.makedirs(args.out, exist_ok=True)
    export_map(result, os.path.join(args.out, "map.csv"), "csv", params)
    export_map(result, os.path.join(args.out, "map.json"), "json", params)
    n_err = sum(1 for p in result.points if p.error)
    print(f"sweep: {len(result.points)} points ({n_err} failed) -> {args.out}")
    return 0


def _cmd_classify(args, params, cfg):
    teeth = teeth_from_json(args.teeth)
    om1 = TWO_PI * args.fm1
    om2 = TWO_PI * args.fm2
    tol_hz = args.tol_hz or 1e-3 * args.fm1
    cls = classify(teeth, om1, om2, tol_hz, args.kmax)
    payload = classification_to_json(cls, args.out)
    if args.out:
        print(f"classify: {cls.regime.value} -> {args.out}")
    else:
        json.dump(payload, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")
    return 0


def _cmd_analytic(args, params, cfg):
    delta_rad = float(args.detuning) * params.omega_m1
    atten = args.attenuation_db
    p_dbm = _resolve_power(args.power, params, delta_rad, atten)
    pump = pump_from_dbm(params, delta_rad, p_dbm, attenuation_db=atten)
    om, _gam, g = params.mech(args.mode)
    if args.beta is not None:
        amp = args.beta * om / (2.0 * g)
    elif args.amp is not None:
        amp = args.amp
    else:
        raise ConfigError("analytic requires --beta or --amp")
    comb = bessel_comb(params, pump, amp, args.mode, kmax=args.kmax)
    lines = ["k,detuning_hz,abs_alpha,phase_rad"]
    for k in range(-comb.kmax, comb.kmax + 1):
        alpha = comb.amplitude(k)
        lines.append(f"{k},{k * comb.mech_freq:.10g},{abs(alpha):.10g},"
                     f"{np.angle(alpha):.10g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"analytic: beta={comb.modulation_index:.4g} -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--preset", default="desk-scale",
                     help="parameter preset (paper-device | desk-scale)")
    sub.add_argument("--config", default=None,
                     help="INI config file layered over the preset")
    sub.add_argument("--tol", type=float, default=1e-9,
                     help="integrator relative error per step")
    sub.add_argument("--attenuation-db", type=float, default=0.0,
                     dest="attenuation_db",
                     help="input line attenuation between source and cavity")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="emcomb",
        description="two-mode cavity electromechanics: combs, thresholds, maps")
    ap.add_argument("--version", action="version", version=__version__)
    subs = ap.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="settle one pump condition")
    _add_common(sim)
    sim.add_argument("--detuning", type=float, required=True,
                     help="pump detuning in units of omega_m1")
    sim.add_argument("--power", required=True,
                     help="pump power: dBm, or th+X / th-X vs threshold")
    sim.add_argument("--budget", type=float, default=None,
                     help="simulated settle horizon cap (s)")
    sim.add_argument("--margin-db", type=float, default=10.0, dest="margin_db")
    sim.add_argument("--kmax", type=int, default=6)
    sim.add_argument("--tol-hz", type=float, default=None, dest="tol_hz")
    sim.add_argument("--out", default="emcomb-out")
    sim.set_defaults(func=_cmd_simulate)

    th = subs.add_parser("threshold", help="instability boundary vs detuning")
    _add_common(th)
    th.add_argument("--detuning", required=True,
                    help="grid START:STOP:COUNT in units of omega_m1")
    th.add_argument("--mode", type=int, default=None, choices=(1, 2),
                    help="single-mode branch (default: full model)")
    th.add_argument("--out", default=None)
    th.set_defaults(func=_cmd_threshold)

    sw = subs.add_parser("sweep", help="(detuning x power) regime map")
    _add_common(sw)
    sw.add_argument("--detuning", required=True,
                    help="grid START:STOP:COUNT in units of omega_m1")
    sw.add_argument("--power", required=True,
                    help="grid START:STOP:STEP in dBm")
    sw.add_argument("--budget", type=float, default=None,
                    help="per-point simulated horizon cap (s)")
    sw.add_argument("--parallel", type=int, default=1)
    sw.add_argument("--margin-db", type=float, default=10.0, dest="margin_db")
    sw.add_argument("--kmax", type=int, default=6)
    sw.add_argument("--tol-hz", type=float, default=None, dest="tol_hz")
    sw.add_argument("--out", default="emcomb-sweep")
    sw.set_defaults(func=_cmd_sweep)

    cl = subs.add_parser("classify", help="lattice-classify a tooth list")
    _add_common(cl)
    cl.add_argument("--teeth", required=True, help="tooth-list JSON file")
    cl.add_argument("--fm1", type=float, required=True,
                    help="first mechanical frequency (Hz)")
    cl.add_argument("--fm2", type=float, required=True,
                    help="second mechanical frequency (Hz)")
    cl.add_argument("--tol-hz", type=float, default=None, dest="tol_hz")
    cl.add_argument("--kmax", type=int, default=6)
    cl.add_argument("--out", default=None)
    cl.set_defaults(func=_cmd_classify)

    an = subs.add_parser("analytic", help="Bessel-series comb table")
    _add_common(an)
    an.add_argument("--detuning", type=float, required=True,
                    help="pump detuning in units of omega_m1")
    an.add_argument("--power", required=True,
                    help="pump power: dBm, or th+X / th-X vs threshold")
    an.add_argument("--mode", type=int, default=1, choices=(1, 2))
    an.add_argument("--beta", type=float, default=None,
                    help="modulation index (sets the cycle amplitude)")
    an.add_argument("--amp", type=float, default=None,
                    help="mechanical cycle amplitude B directly")
    an.add_argument("--kmax", type=int, default=8)
    an.add_argument("--out", default=None)
    an.set_defaults(func=_cmd_analytic)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        params = resolve_params(args.preset, cfg)
        if "integration" in cfg and hasattr(args, "tol"):
            args.tol = _cfg_get(cfg, "integration", "tol", float, args.tol)
        return args.func(args, params, cfg)
    except ConfigError as exc:
        print(f"emcomb: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"emcomb: numerical failure: {exc}", file=sys.stderr)
        return 3
    except EmcombError as exc:
        print(f"emcomb: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
