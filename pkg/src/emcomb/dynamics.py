"""Long-horizon integration and attractor detection.

Public entry points:

* :func:`integrate` -- adaptive run over a fixed horizon, returning a
  :class:`Trajectory` whose last stretch is resampled on an exactly uniform
  grid (>= 16 samples per mode-2 period, >= 200 mode-1 periods when the
  horizon allows) for spectral use.
* :func:`settle` -- windowed integration from a perturbed fixed point until
  the attractor is identified (fixed point, single-frequency limit cycle,
  two-frequency torus) or the horizon budget runs out.
* :func:`growth_rate_from_transient` -- log-envelope slope of a mechanical
  amplitude, the time-domain counterpart of the linear-stability growth
  rate.
* :func:`integrate_cavity_prescribed` -- cavity response to an imposed
  mechanical limit cycle (used to cross-check the analytic sideband comb).

All public units are SI (seconds at the interface); integration runs in
units of 1/omega_m1 internally. Everything is deterministic: perturbation
kicks are fixed, there is no stochastic seeding, and identical inputs give
bit-identical trajectories on one platform.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _stepper
from .core import SystemParams, PumpCondition, SystemState, static_fixed_points
from .errors import (ConfigError, DivergenceError, IllConditionedFitError,
                     IntegrationFailureError, ResamplingError)

TWO_PI = 2.0 * math.pi

#: hard step cap: 32 steps per mode-2 period, in units of 1/omega_m1
_STEP_CAP_FRACTION = 32.0


# ---------------------------------------------------------------------------
# trajectory container + export
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Sampled solution of the equations of motion.

    ``t`` is strictly increasing (seconds); ``states`` holds [a, b1, b2]
    per sample. The slice from ``tail_start`` on is the dense uniform tail:
    its times are t_end - k/tail_rate by construction, so the spacing is
    exactly 1/tail_rate.
    """

    t: np.ndarray
    states: np.ndarray
    tail_start: int
    tail_rate: float

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.states = np.asarray(self.states, dtype=np.complex128)
        if self.t.ndim != 1 or self.states.shape != (self.t.size, 3):
            raise ConfigError("trajectory arrays have inconsistent shapes")
        if self.t.size >= 2 and not np.all(np.diff(self.t) > 0):
            raise ConfigError("trajectory times must be strictly increasing")
        if not (0 <= self.tail_start < self.t.size):
            raise ConfigError("tail_start out of range")

    @property
    def a(self):
        return self.states[:, 0]

    @property
    def b1(self):
        return self.states[:, 1]

    @property
    def b2(self):
        return self.states[:, 2]

    @property
    def tail_t(self):
        return self.t[self.tail_start:]

    @property
    def tail_states(self):
        return self.states[self.tail_start:]

    @property
    def tail_duration(self):
        return (self.tail_states.shape[0] - 1) / self.tail_rate

    def require_tail(self, min_samples: int = 2):
        if self.t.size - self.tail_start < min_samples:
            raise ResamplingError(
                f"trajectory tail has fewer than {min_samples} samples")


def write_csv(traj: Trajectory, path: str) -> None:
    """Columns: t, Re a, Im a, Re b1, Im b1, Re b2, Im b2."""
    cols = np.column_stack([
        traj.t,
        traj.a.real, traj.a.imag,
        traj.b1.real, traj.b1.imag,
        traj.b2.real, traj.b2.imag,
    ])
    header = "t,re_a,im_a,re_b1,im_b1,re_b2,im_b2"
    np.savetxt(path, cols, delimiter=",", header=header, comments="")


_BIN_MAGIC = b"EMCTRAJ1"
_BIN_VERSION = 1


def write_binary(traj: Trajectory, path: str) -> None:
    """Compact binary trajectory.

    Header (little-endian): 8-byte magic ``EMCTRAJ1``, uint32 version,
    uint64 sample count, float64 tail sample rate (Hz), uint64 tail start
    index. Payload: float64 t[count], then complex128 states[count, 3].
    """
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<IQdQ", _BIN_VERSION, traj.t.size,
                             traj.tail_rate, traj.tail_start))
        fh.write(np.ascontiguousarray(traj.t).tobytes())
        fh.write(np.ascontiguousarray(traj.states).tobytes())


def read_binary(path: str) -> Trajectory:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _BIN_MAGIC:
            raise ConfigError(f"{path}: not a trajectory file (bad magic)")
        version, count, rate, tail_start = struct.unpack("<IQdQ", fh.read(28))
        if version != _BIN_VERSION:
            raise ConfigError(f"{path}: unsupported version {version}")
        t = np.frombuffer(fh.read(8 * count), dtype=np.float64).copy()
        states = np.frombuffer(fh.read(16 * 3 * count),
                               dtype=np.complex128).copy().reshape(count, 3)
    return Trajectory(t=t, states=states, tail_start=int(tail_start),
                      tail_rate=rate)


# ---------------------------------------------------------------------------
# attractor report
# ---------------------------------------------------------------------------

class AttractorKind(str, Enum):
    FIXED_POINT = "FixedPoint"
    LIMIT_CYCLE = "LimitCycle"
    TORUS = "Torus"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class AmplitudeStats:
    mean: float
    max: float
    osc_rms: float  # RMS deviation from the time-mean (oscillatory part)


@dataclass(frozen=True)
class AttractorReport:
    kind: AttractorKind
    settle_time: float
    amplitude_stats: dict
    growth_rate_estimate: float
    #: (t_end, d_b1, d_b2) per settle window; diagnostic trail of the
    #: mechanical deviations from the static solution
    window_history: tuple = ()


@dataclass(frozen=True)
class SettleCriteria:
    """Stopping rules for :func:`settle`.

    ``var_tol``: tail variance of |a| below var_tol*mean^2 counts as
    stationary. ``max_horizon``: simulated-time budget in seconds (None:
    240 / min(gamma1, gamma2)). ``kick``: relative perturbation applied to
    both mechanical amplitudes of the starting fixed point; fixed phase
    (along the static amplitude), no randomness.
    """

    var_tol: float = 1e-8
    max_horizon: float | None = None
    kick: float = 1e-3
    grow_tol: float = 0.1      # net log-change per window counted as a trend
    torus_ratio: float = 0.05  # second fundamental vs first, envelope spectrum
    dead_drop: float = 1e-4    # deviation collapsed this far below the kick
    saturation_growth: float = 30.0  # deviation grew this much over the kick


# ---------------------------------------------------------------------------
# low-level marching helpers
# ---------------------------------------------------------------------------

def _pack_params(params: SystemParams, pump: PumpCondition) -> np.ndarray:
    om1 = params.omega_m1
    return np.array([
        pump.delta_dc / om1,
        params.kappa / om1,
        params.kappa_e / om1,
        params.omega_m2 / om1,
        params.g1 / om1,
        params.g2 / om1,
        params.gamma1 / om1,
        params.gamma2 / om1,
        pump.s_in / math.sqrt(om1),
    ])


def _step_cap(params: SystemParams) -> float:
    return TWO_PI * params.omega_m1 / (_STEP_CAP_FRACTION * params.omega_m2)


def _march_si(params, pump, y0, t0_s, t_out_s, tol):
    """Run the compiled marcher over SI output times; raise on failure."""
    om1 = params.omega_m1
    p = _pack_params(params, pump)
    h_max = _step_cap(params)
    out, status, t_last, y_last, nacc, nrej = _stepper.march(
        y0, t0_s * om1, np.asarray(t_out_s) * om1, p,
        tol, tol, h_max, h_max / 8.0)
    if status == _stepper.STATUS_UNDERFLOW:
        raise IntegrationFailureError(
            f"step size underflow at t={t_last / om1:.6e} s",
            t_last=t_last / om1, state_last=y_last.copy())
    if status == _stepper.STATUS_NONFINITE:
        raise DivergenceError(
            f"state left the finite domain near t={t_last / om1:.6e} s",
            t_last=t_last / om1, state_last=y_last.copy())
    return out


def _check_tol(tol):
    if not (1e-12 <= tol <= 1e-3):
        raise ConfigError(f"tol must lie in [1e-12, 1e-3], got {tol}")


def _output_grids(params, horizon, transient_samples, tail_periods,
                  tail_rate_multiple):
    """(transient grid, tail grid, tail rate): tail times are exactly
    horizon - k/rate so the uniform spacing is structural."""
    f1 = params.omega_m1 / TWO_PI
    fs = tail_rate_multiple * f1
    dt = 1.0 / fs
    tail_dur = min(horizon, tail_periods / f1)
    n_tail = int(math.floor(tail_dur * fs * (1.0 + 1e-12)))
    n_tail = max(n_tail, 1)
    k = np.arange(n_tail + 1)
    t_tail = horizon - (n_tail - k) * dt
    if t_tail[0] < 0.0:
        t_tail = t_tail[t_tail >= 0.0]
    t0_tail = t_tail[0]
    if t0_tail > 0.0 and transient_samples > 0:
        t_tr = np.linspace(0.0, t0_tail, transient_samples, endpoint=False)
        t_tr = t_tr[t_tr < t0_tail * (1.0 - 1e-12)]
    else:
        t_tr = np.empty(0)
    return t_tr, t_tail, fs


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def integrate(params: SystemParams, pump: PumpCondition,
              initial: SystemState, horizon: float, tol: float = 1e-9, *,
              transient_samples: int = 2048, tail_periods: float = 640.0,
              tail_rate_multiple: float = 64.0) -> Trajectory:
    """Integrate the equations of motion over ``horizon`` seconds.

    Local error per step is held at ``tol`` (relative, with an equal
    absolute floor in amplitude units). The returned trajectory carries
    ``transient_samples`` coarse samples followed by a dense uniform tail
    at ``tail_rate_multiple`` samples per mode-1 period covering
    ``tail_periods`` mode-1 periods (clipped to the horizon).
    """
    if horizon <= 0.0:
        raise ConfigError("horizon must be > 0")
    _check_tol(tol)
    t_tr, t_tail, fs = _output_grids(params, horizon, transient_samples,
                                     tail_periods, tail_rate_multiple)
    t_out = np.concatenate([t_tr, t_tail])
    out = _march_si(params, pump, initial.to_array(), 0.0, t_out, tol)
    return Trajectory(t=t_out, states=out, tail_start=t_tr.size, tail_rate=fs)


def integrate_cavity_prescribed(params: SystemParams, pump: PumpCondition,
                                b_amp: float, mode_j: int, horizon: float,
                                tol: float = 1e-9, *,
                                a0: complex = 0.0,
                                transient_samples: int = 512,
                                tail_periods: float = 640.0,
                                tail_rate_multiple: float = 64.0) -> Trajectory:
    """Cavity response to an imposed mechanical cycle b_j(t) = B e^{-i om_j t}.

    Mechanical back-action is frozen; the other mode is held at zero. The
    returned trajectory stores the prescribed mechanical motion alongside
    the integrated cavity amplitude so downstream spectral tools see a
    complete state.
    """
    if horizon <= 0.0:
        raise ConfigError("horizon must be > 0")
    _check_tol(tol)
    om, _gam, g = params.mech(mode_j)
    om1 = params.omega_m1
    t_tr, t_tail, fs = _output_grids(params, horizon, transient_samples,
                                     tail_periods, tail_rate_multiple)
    t_out = np.concatenate([t_tr, t_tail])
    out_a, status, t_last, a_last, _na, _nr = _stepper.march_prescribed(
        complex(a0), 0.0, t_out * om1,
        pump.delta_dc / om1, params.kappa / om1, params.kappa_e / om1,
        pump.s_in / math.sqrt(om1), g / om1, om / om1, b_amp,
        tol, tol, _step_cap(params), _step_cap(params) / 8.0)
    if status == _stepper.STATUS_UNDERFLOW:
        raise IntegrationFailureError(
            f"step size underflow at t={t_last / om1:.6e} s",
            t_last=t_last / om1, state_last=a_last)
    if status == _stepper.STATUS_NONFINITE:
        raise DivergenceError(
            f"cavity amplitude diverged near t={t_last / om1:.6e} s",
            t_last=t_last / om1, state_last=a_last)
    states = np.zeros((t_out.size, 3), dtype=np.complex128)
    states[:, 0] = out_a
    states[:, mode_j] = b_amp * np.exp(-1j * om * t_out)
    return Trajectory(t=t_out, states=states, tail_start=t_tr.size,
                      tail_rate=fs)


def _amp_stats(z: np.ndarray) -> AmplitudeStats:
    mag = np.abs(z)
    dev = z - z.mean()
    return AmplitudeStats(mean=float(mag.mean()), max=float(mag.max()),
                          osc_rms=float(np.sqrt(np.mean(np.abs(dev) ** 2))))


def _refine_peak(mag, i):
    """3-point quadratic refinement of a spectral peak position (bins)."""
    if 0 < i < mag.size - 1:
        y0, y1, y2 = mag[i - 1], mag[i], mag[i + 1]
        denom = y0 - 2.0 * y1 + y2
        if denom != 0.0:
            return i + 0.5 * (y0 - y2) / denom
    return float(i)


def _envelope_verdict(env: np.ndarray, torus_ratio: float):
    """LimitCycle / Torus / Undecided from the spectrum of |a|(t).

    A single fundamental (all strong lines at integer multiples of the
    lowest strong line) is a limit cycle; a second incommensurate line
    above ``torus_ratio`` of the strongest marks a torus; a broadband
    spectrum with no clean line structure stays undecided.
    """
    e = env - env.mean()
    n = e.size
    w = np.hanning(n)
    mag = np.abs(np.fft.rfft(e * w))
    if mag.size < 8:
        return AttractorKind.UNDECIDED
    mag[:2] = 0.0  # DC and its leakage
    pmax = mag.max()
    if pmax <= 0.0:
        return AttractorKind.UNDECIDED
    if np.median(mag) > 0.02 * pmax:
        return AttractorKind.UNDECIDED  # dense/broadband spectrum
    thresh = torus_ratio * pmax
    peaks = []
    for i in range(2, mag.size - 1):
        if mag[i] >= thresh and mag[i] > mag[i - 1] and mag[i] >= mag[i + 1]:
            peaks.append(_refine_peak(mag, i))
    if not peaks:
        return AttractorKind.UNDECIDED
    f0 = peaks[0]
    tol_bins = 3.0
    for fk in peaks:
        ratio = fk / f0
        if abs(ratio - round(ratio)) * f0 > max(tol_bins, 0.02 * f0):
            return AttractorKind.TORUS
    return AttractorKind.LIMIT_CYCLE


def settle(params: SystemParams, pump: PumpCondition,
           initial: SystemState | None = None,
           criteria: SettleCriteria | None = None,
           tol: float = 1e-9) -> tuple[Trajectory, AttractorReport]:
    """Integrate in doubling windows until the attractor is identified.

    Starting point: the lowest-photon-number fixed point with both
    mechanical amplitudes kicked by ``criteria.kick`` relative, fixed
    phase (deterministic excitation standing in for the thermal seeding of
    a real device). Per window, the RMS deviation of each mechanical mode
    from its static value is tracked; a mode is growing/decaying/flat by
    the net log-change across the window, dead once the deviation has
    collapsed well below the kick, and saturated once it has grown well
    above the kick and flattened. Fixed point: |a| variance stationary and
    every mode decaying or dead. Cycle/torus: |a| oscillating with every
    mode saturated or dead, discriminated by the envelope spectrum.
    Anything still trending at the horizon budget is Undecided.
    """
    crit = criteria or SettleCriteria()
    if crit.var_tol <= 0 or crit.kick < 0:
        raise ConfigError("settle criteria must be positive")
    _check_tol(tol)

    fps = static_fixed_points(params, pump)
    fp = fps[0]
    b_fp = np.array([fp.b1, fp.b2], dtype=np.complex128)
    if initial is None:
        y = fp.to_array()
        y[1] *= (1.0 + crit.kick)
        y[2] *= (1.0 + crit.kick)
    else:
        y = initial.to_array()
    d0 = np.abs(np.array([y[1], y[2]]) - b_fp)

    f1 = params.omega_m1 / TWO_PI
    t1 = 1.0 / f1
    gamma_floor = min(params.gamma1, params.gamma2)
    if crit.max_horizon is not None:
        budget = crit.max_horizon
    elif gamma_floor > 0:
        budget = 240.0 / gamma_floor
    else:
        budget = 2e4 * t1
    tail_periods = 640.0
    rate_mult = 64.0
    fs = rate_mult * f1
    tail_min = tail_periods * t1  # full spectral tail in every window

    window = max(128.0 * t1, 2.0 / params.gamma1 if params.gamma1 > 0 else 0.0,
                 tail_min)

    coarse_t: list[np.ndarray] = []
    coarse_s: list[np.ndarray] = []
    d_history: list[tuple[float, float, float]] = []  # (t_end, d1, d2)
    t_now = 0.0
    kind = AttractorKind.UNDECIDED
    settle_time = budget
    tail_t = tail_s = None

    while t_now < budget * (1.0 - 1e-12):
        # never let a budget-clipped window shrink the spectral tail; a
        # final overrun of at most one tail length is accepted instead
        w = max(min(window, budget - t_now), tail_min)
        t_end = t_now + w
        tail_dur = min(w, tail_min)
        n_tail = max(int(math.floor(tail_dur * fs)), 4)
        kk = np.arange(n_tail + 1)
        t_tail = t_end - (n_tail - kk) / fs
        t0_tail = t_tail[0]
        if t0_tail > t_now * (1 + 1e-12):
            t_tr = np.linspace(t_now, t0_tail, 256, endpoint=False)
            t_tr = t_tr[t_tr > t_now] if coarse_t else t_tr
        else:
            t_tr = np.empty(0)
        t_out = np.concatenate([t_tr, t_tail])
        out = _march_si(params, pump, y, t_now, t_out, tol)
        y = out[-1].copy()

        coarse_t.append(t_tr)
        coarse_s.append(out[:t_tr.size])
        tail_t, tail_s = t_tail, out[t_tr.size:]
        t_now = t_end

        # window diagnostics on the dense tail
        a_tail = tail_s[:, 0]
        amag = np.abs(a_tail)
        amean = amag.mean()
        var_ok = amag.var() < crit.var_tol * max(amean * amean, 1e-300)

        half = tail_s.shape[0] // 2
        trends = np.zeros(2)
        d_now = np.zeros(2)
        for j in (0, 1):
            dev = tail_s[:, j + 1] - b_fp[j]
            d1 = math.sqrt(float(np.mean(np.abs(dev[:half]) ** 2))) if half else 0.0
            d2 = math.sqrt(float(np.mean(np.abs(dev[half:]) ** 2)))
            d_now[j] = math.sqrt(float(np.mean(np.abs(dev) ** 2)))
            if d1 > 0 and d2 > 0:
                trends[j] = 2.0 * math.log(d2 / d1)
        d_history.append((t_end, d_now[0], d_now[1]))

        dead = [d_now[j] <= max(crit.dead_drop * d0[j], 1e-12 * (1.0 + abs(b_fp[j])))
                for j in (0, 1)]
        growing = [not dead[j] and trends[j] > crit.grow_tol for j in (0, 1)]
        decaying = [not dead[j] and trends[j] < -crit.grow_tol for j in (0, 1)]
        flat = [not dead[j] and not growing[j] and not decaying[j]
                for j in (0, 1)]
        saturated = [flat[j] and d0[j] > 0
                     and d_now[j] > crit.saturation_growth * d0[j]
                     for j in (0, 1)]

        if var_ok and all(dead[j] or decaying[j] for j in (0, 1)):
            kind = AttractorKind.FIXED_POINT
            settle_time = t_end
            break
        if not var_ok and all(dead[j] or saturated[j] for j in (0, 1)):
            kind = _envelope_verdict(amag, crit.torus_ratio)
            settle_time = t_end
            break
        window = min(2.0 * window, budget)

    t_all = np.concatenate(coarse_t + [tail_t])
    s_all = np.concatenate(coarse_s + [tail_s])
    traj = Trajectory(t=t_all, states=s_all,
                      tail_start=t_all.size - tail_t.size, tail_rate=fs)

    stats = {
        "a": _amp_stats(traj.tail_states[:, 0]),
        "b1": _amp_stats(traj.tail_states[:, 1]),
        "b2": _amp_stats(traj.tail_states[:, 2]),
    }
    rate_est = _estimate_growth_rate(d_history, d0)
    report = AttractorReport(kind=kind, settle_time=settle_time,
                             amplitude_stats=stats,
                             growth_rate_estimate=rate_est,
                             window_history=tuple(d_history))
    return traj, report


def _estimate_growth_rate(d_history, d0) -> float:
    """Log-slope of the fastest-moving mechanical deviation across windows.

    Saturated windows are masked out so the estimate reflects the linear
    transient, not the plateau.
    """
    if len(d_history) < 2:
        return 0.0
    best = 0.0
    t = np.array([h[0] for h in d_history])
    for j in (0, 1):
        d = np.array([h[1 + j] for h in d_history])
        mask = d > (1e-12 + 1e-6 * d0[j])
        if mask.sum() < 2:
            continue
        pre_sat = mask & (d < 0.2 * d[mask].max())
        if pre_sat.sum() >= 2:
            mask = pre_sat
        slope = np.polyfit(t[mask], np.log(d[mask]), 1)[0]
        if abs(slope) > abs(best):
            best = slope
    return float(best)


def growth_rate_from_transient(traj: Trajectory, oscillator, *,
                               t_skip: float | None = None,
                               fit_tol: float = 0.3) -> float:
    """Least-squares slope of log|b_j(t)| over the early transient (1/s).

    Positive means the mode is being pumped above its loss. The trajectory
    must start near a fixed point with a small perturbation and end before
    saturation; a window whose log-envelope departs from a straight line
    by more than ``fit_tol`` (RMS, natural-log units) raises
    :class:`IllConditionedFitError`.
    """
    idx = {"b1": 1, 1: 1, "b2": 2, 2: 2}.get(oscillator)
    if idx is None:
        raise ConfigError(f"oscillator must be 'b1' or 'b2', got {oscillator!r}")
    if t_skip is None:
        t_skip = traj.t[0] + 0.05 * (traj.t[-1] - traj.t[0])
    mask = traj.t >= t_skip
    env = np.abs(traj.states[mask, idx])
    t = traj.t[mask]
    good = env > 0
    if good.sum() < 4:
        raise IllConditionedFitError("too few usable envelope samples")
    t, env = t[good], env[good]
    logenv = np.log(env)
    slope, intercept = np.polyfit(t, logenv, 1)
    resid = logenv - (slope * t + intercept)
    rms = float(np.sqrt(np.mean(resid ** 2)))
    if rms > fit_tol:
        raise IllConditionedFitError(
            f"envelope is not exponential within tolerance "
            f"(residual rms {rms:.3f} > {fit_tol})")
    return float(slope)
