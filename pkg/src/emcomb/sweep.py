"""Grid sweeps over (detuning x power): the simulated regime map.

Each grid point is an isolated, fully deterministic computation: linear
stability first (points with no growing eigenvalue are recorded as
SinglePeak without integration -- the fixed point is the attractor there,
and integrating to "confirm" a barely-stable point would only time out),
then settle + spectrum + classification for unstable points. Work is
distributed over a bounded thread pool; the compiled integrator releases
the GIL, results are collected by grid index, and output files are
byte-identical for any parallelism degree. Wall-clock times are kept in
memory for diagnostics but never exported (only the header carries a
timestamp), and per-point budgets are expressed in simulated time so a
slow machine cannot change the physics.
"""

from __future__ import annotations

import concurrent.futures
import datetime
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from .config import config_hash, effective_config_text
from .core import SystemParams, get_preset, pump_from_dbm
from .combs import classification_to_json, classify, default_tol_hz
from .dynamics import AttractorKind, SettleCriteria, settle
from .errors import BracketingError, ConfigError, NumericalError
from .spectral import find_teeth, spectrum_of
from .stability import max_growth_rate, threshold_curve

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SweepPlan:
    """What to compute: grids, budgets, classifier settings, parallelism.

    ``detunings`` are in units of omega_m1; ``powers_dbm`` at the source
    (``attenuation_db`` is subtracted before the cavity). ``budget_s``
    caps the per-point simulated settle horizon; None lets each point
    scale its budget from its own linear growth rate.
    """

    preset: str
    detunings: tuple
    powers_dbm: tuple
    budget_s: float | None = None
    tol: float = 1e-9
    margin_db: float = 10.0
    kmax: int = 6
    tol_hz: float | None = None
    parallelism: int = 1
    attenuation_db: float = 0.0

    def __post_init__(self):
        if len(self.detunings) == 0 or len(self.powers_dbm) == 0:
            raise ConfigError("sweep grids must be non-empty")
        if self.budget_s is not None and self.budget_s <= 0:
            raise ConfigError("budget_s must be positive")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")


@dataclass
class PointResult:
    delta_over_om1: float
    p_dbm: float
    regime: str
    dominant_spacing_hz: float
    max_growth_per_s: float
    branch: str
    attractor: str
    error: str = ""
    teeth: list = field(default_factory=list)
    wall_time_s: float = field(default=0.0, compare=False)


@dataclass
class SweepResult:
    plan: SweepPlan
    points: list
    overlay: dict  # {"detunings_over_om1", "mode1_dbm", "mode2_dbm", "branch"}


def _overlay(params: SystemParams, detunings, attenuation_db) -> dict:
    """Single-mode threshold branches over the plan's detuning grid."""
    om1 = params.omega_m1
    det_rad = np.asarray(detunings, dtype=float) * om1
    bracket = (-95.0, 20.0)
    curves = {}
    for mode in (1, 2):
        vals = []
        for d in det_rad:
            try:
                curve = threshold_curve(params, [d], bracket, mode=mode)
                vals.append(float(curve.threshold_dbm[0]) + attenuation_db)
            except (BracketingError, NumericalError):
                vals.append(float("nan"))
        curves[mode] = vals
    branch = []
    for m1, m2 in zip(curves[1], curves[2]):
        if np.isnan(m1) and np.isnan(m2):
            branch.append("")
        elif np.isnan(m2) or (not np.isnan(m1) and m1 <= m2):
            branch.append("mode1")
        else:
            branch.append("mode2")
    return {
        "detunings_over_om1": [float(d) for d in detunings],
        "mode1_dbm": curves[1],
        "mode2_dbm": curves[2],
        "branch": branch,
    }


def _run_point(params: SystemParams, plan: SweepPlan, delta_over_om1: float,
               p_dbm: float, branch: str) -> PointResult:
    t0 = time.perf_counter()
    om1 = params.omega_m1
    try:
        pump = pump_from_dbm(params, delta_over_om1 * om1, p_dbm,
                             attenuation_db=plan.attenuation_db)
        growth, _dom = max_growth_rate(params, pump)
        if growth <= 0.0:
            return PointResult(delta_over_om1, p_dbm, "SinglePeak", 0.0,
                               growth, branch, AttractorKind.FIXED_POINT.value,
                               wall_time_s=time.perf_counter() - t0)
        budget = 80.0 / growth
        if plan.budget_s is not None:
            budget = min(budget, plan.budget_s)
        traj, report = settle(params, pump,
                              criteria=SettleCriteria(max_horizon=budget),
                              tol=plan.tol)
        if report.kind is AttractorKind.FIXED_POINT:
            return PointResult(delta_over_om1, p_dbm, "SinglePeak", 0.0,
                               growth, branch, report.kind.value,
                               wall_time_s=time.perf_counter() - t0)
        if report.kind is AttractorKind.UNDECIDED:
            return PointResult(delta_over_om1, p_dbm, "none", 0.0, growth,
                               branch, report.kind.value,
                               wall_time_s=time.perf_counter() - t0)
        spec = spectrum_of(traj, params, pump)
        teeth = find_teeth(spec, margin_db=plan.margin_db)
        tol_hz = plan.tol_hz or default_tol_hz(spec.rbw, om1)
        cls = classify(teeth, om1, params.omega_m2, tol_hz, plan.kmax)
        payload = classification_to_json(cls)
        return PointResult(delta_over_om1, p_dbm, cls.regime.value,
                           cls.dominant_spacing, growth, branch,
                           report.kind.value, teeth=payload["teeth"],
                           wall_time_s=time.perf_counter() - t0)
    except NumericalError as exc:
        return PointResult(delta_over_om1, p_dbm, "none", 0.0, 0.0, branch,
                           "", error=f"{type(exc).__name__}: {exc}",
                           wall_time_s=time.perf_counter() - t0)


def run_sweep(plan: SweepPlan,
              params: SystemParams | None = None) -> SweepResult:
    """Execute the plan; every grid point yields exactly one record."""
    if params is None:
        params = get_preset(plan.preset).params
    overlay = _overlay(params, plan.detunings, plan.attenuation_db)

    tasks = [(i, j, d, p)
             for i, d in enumerate(plan.detunings)
             for j, p in enumerate(plan.powers_dbm)]
    results: dict[tuple[int, int], PointResult] = {}
    if plan.parallelism == 1:
        for i, j, d, p in tasks:
            results[(i, j)] = _run_point(params, plan, d, p,
                                         overlay["branch"][i])
    else:
        with concurrent.futures.ThreadPoolExecutor(
                max_workers=plan.parallelism) as pool:
            futs = {pool.submit(_run_point, params, plan, d, p,
                                overlay["branch"][i]): (i, j)
                    for i, j, d, p in tasks}
            for fut in concurrent.futures.as_completed(futs):
                results[futs[fut]] = fut.result()
    ordered = [results[(i, j)]
               for i in range(len(plan.detunings))
               for j in range(len(plan.powers_dbm))]
    return SweepResult(plan=plan, points=ordered, overlay=overlay)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _header(result: SweepResult, params: SystemParams) -> dict:
    cfg_text = effective_config_text(
        result.plan.preset, params,
        extra={
            "sweep.detunings": list(result.plan.detunings),
            "sweep.powers_dbm": list(result.plan.powers_dbm),
            "sweep.budget_s": result.plan.budget_s,
            "sweep.tol": result.plan.tol,
            "sweep.margin_db": result.plan.margin_db,
            "sweep.kmax": result.plan.kmax,
            "sweep.tol_hz": result.plan.tol_hz,
            "sweep.attenuation_db": result.plan.attenuation_db,
        })
    return {
        "format_version": FORMAT_VERSION,
        "preset": result.plan.preset,
        "code_version": __version__,
        "config_hash": config_hash(cfg_text),
        "timestamp": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
    }


_CSV_COLUMNS = ("delta_dc_over_omega_m1", "p_d_dbm", "regime",
                "dominant_spacing_hz", "max_growth_per_s", "attractor",
                "error")


def export_map(result: SweepResult, path: str, fmt: str,
               params: SystemParams | None = None) -> str:
    """Write the sweep map; CSV for plotting, JSON with full tooth lists.

    The header block (format version, preset, code version, config hash,
    timestamp) is comment-prefixed in CSV and a separate object in JSON;
    the data section depends only on the plan and parameters.
    """
    if params is None:
        params = get_preset(result.plan.preset).params
    header = _header(result, params)
    try:
        if fmt == "csv":
            with open(path, "w") as fh:
                for key, val in header.items():
                    fh.write(f"# {key}: {val}\n")
                fh.write(",".join(_CSV_COLUMNS) + "\n")
                for pt in result.points:
                    fh.write(
                        f"{pt.delta_over_om1:.12g},{pt.p_dbm:.12g},"
                        f"{pt.regime},{pt.dominant_spacing_hz:.12g},"
                        f"{pt.max_growth_per_s:.12g},{pt.attractor},"
                        f"{pt.error}\n")
        elif fmt == "json":
            points = []
            for pt in result.points:
                d = asdict(pt)
                d.pop("wall_time_s")
                points.append(d)
            payload = {
                "header": header,
                "plan": {
                    "preset": result.plan.preset,
                    "detunings": list(result.plan.detunings),
                    "powers_dbm": list(result.plan.powers_dbm),
                    "budget_s": result.plan.budget_s,
                    "tol": result.plan.tol,
                    "margin_db": result.plan.margin_db,
                    "kmax": result.plan.kmax,
                    "tol_hz": result.plan.tol_hz,
                    "parallelism": result.plan.parallelism,
                    "attenuation_db": result.plan.attenuation_db,
                },
                "overlay": result.overlay,
                "points": points,
            }
            with open(path, "w") as fh:
                json.dump(payload, fh, indent=1, sort_keys=True)
                fh.write("\n")
        else:
            raise ConfigError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return path


def import_map(path: str) -> SweepResult:
    """Re-read a JSON sweep map into an equal SweepResult (wall times aside)."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    plan_d = payload["plan"]
    plan = SweepPlan(
        preset=plan_d["preset"],
        detunings=tuple(plan_d["detunings"]),
        powers_dbm=tuple(plan_d["powers_dbm"]),
        budget_s=plan_d["budget_s"],
        tol=plan_d["tol"],
        margin_db=plan_d["margin_db"],
        kmax=plan_d["kmax"],
        tol_hz=plan_d["tol_hz"],
        parallelism=plan_d["parallelism"],
        attenuation_db=plan_d["attenuation_db"],
    )
    points = [PointResult(**d) for d in payload["points"]]
    return SweepResult(plan=plan, points=points, overlay=payload["overlay"])
