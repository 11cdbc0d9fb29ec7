"""Linear stability of the stationary solutions.

The 6x6 real Jacobian of the equations of motion in the basis
(Re a, Im a, Re b1, Im b1, Re b2, Im b2) is assembled analytically about a
fixed point. Its spectrum decides whether a mechanical limit cycle
self-starts: the pump condition where the largest eigenvalue real part
crosses zero is the comb-formation threshold. A standard resolved-sideband
anti-damping formula is provided as an independent cross-check of the
Jacobian route, and a bisection locates the threshold power as a function
of detuning (the two V-shaped boundary branches, one per mechanical mode).

Stability is always evaluated at the lowest-photon-number fixed point,
the branch adiabatically connected to zero drive, matching an
increasing-power measurement protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (SystemParams, PumpCondition, SystemState, TWO_PI,
                   effective_detuning, eom_rhs, pump_from_dbm,
                   static_fixed_points, with_overrides)
from .errors import (BracketingError, ConfigError, NotAFixedPointError,
                     RootFindingError)

CAVITY = "cavity"
MODE1 = "mode1"
MODE2 = "mode2"


@dataclass(frozen=True)
class StabilityReport:
    fixed_point: SystemState
    eigenvalues: np.ndarray     # six complex values, 1/s
    max_growth: float           # largest real part, 1/s
    dominant_mode: str          # cavity / mode1 / mode2 by eigenvector weight


@dataclass
class ThresholdCurve:
    """Instability onset power vs detuning.

    ``branch[i]`` names the mechanical mode that destabilizes first at
    ``detunings[i]``. Minima of the two branches sit near the respective
    blue-sideband resonances delta = omega_m1 and delta = omega_m2.
    """

    detunings: np.ndarray       # rad/s
    threshold_dbm: np.ndarray
    branch: list

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("delta_dc_hz,threshold_dbm,branch\n")
            for d, p, b in zip(self.detunings, self.threshold_dbm, self.branch):
                fh.write(f"{d / TWO_PI:.10g},{p:.6f},{b}\n")


def fixed_point_residual(params: SystemParams, pump: PumpCondition,
                         fp: SystemState) -> float:
    """Dimensionless stationarity defect of a candidate fixed point."""
    f = eom_rhs(fp, params, pump).to_array()
    y = fp.to_array()
    scale = params.omega_m1 * (np.abs(y) + 1.0)
    return float(np.max(np.abs(f) / scale))


def jacobian(params: SystemParams, pump: PumpCondition,
             fp: SystemState, residual_tol: float = 1e-9) -> np.ndarray:
    """Analytic Jacobian (1/s) about ``fp`` in the 6-real-component basis."""
    if fixed_point_residual(params, pump, fp) > residual_tol:
        raise NotAFixedPointError(
            "state is not stationary within tolerance; refusing to linearize")
    x1, x2 = fp.a.real, fp.a.imag
    x3, x5 = fp.b1.real, fp.b2.real
    g1, g2 = params.g1, params.g2
    om1, om2 = params.omega_m1, params.omega_m2
    phi = pump.delta_dc - 2.0 * (g1 * x3 + g2 * x5)
    hk = 0.5 * params.kappa
    hg1, hg2 = 0.5 * params.gamma1, 0.5 * params.gamma2
    return np.array([
        [-hk, -phi, 2 * g1 * x2, 0.0, 2 * g2 * x2, 0.0],
        [phi, -hk, -2 * g1 * x1, 0.0, -2 * g2 * x1, 0.0],
        [0.0, 0.0, -hg1, om1, 0.0, 0.0],
        [-2 * g1 * x1, -2 * g1 * x2, -om1, -hg1, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -hg2, om2],
        [-2 * g2 * x1, -2 * g2 * x2, 0.0, 0.0, -om2, -hg2],
    ])


_WEIGHT_SLICES = {CAVITY: slice(0, 2), MODE1: slice(2, 4), MODE2: slice(4, 6)}


def analyze(params: SystemParams, pump: PumpCondition) -> StabilityReport:
    """Eigen-analysis at the lowest-photon-number fixed point."""
    fp = static_fixed_points(params, pump)[0]
    jac = jacobian(params, pump, fp)
    vals, vecs = np.linalg.eig(jac)
    imax = int(np.argmax(vals.real))
    v = vecs[:, imax]
    weights = {name: float(np.sum(np.abs(v[sl]) ** 2))
               for name, sl in _WEIGHT_SLICES.items()}
    dominant = max(weights, key=weights.get)
    order = np.argsort(vals.real)[::-1]
    return StabilityReport(fixed_point=fp, eigenvalues=vals[order],
                           max_growth=float(vals.real.max()),
                           dominant_mode=dominant)


def max_growth_rate(params: SystemParams,
                    pump: PumpCondition) -> tuple[float, str]:
    """Largest Jacobian eigenvalue real part (1/s) and its dominant mode."""
    rep = analyze(params, pump)
    return rep.max_growth, rep.dominant_mode


def sideband_gain(params: SystemParams, pump: PumpCondition,
                  mode_j: int) -> float:
    """Weak-coupling anti-damping rate Gamma_opt,j (1/s), signed.

    Gamma = g^2 * nbar * kappa * [((kappa/2)^2 + (dbar + om)^2)^-1
                                  - ((kappa/2)^2 + (dbar - om)^2)^-1]

    with nbar the photon number of the lowest fixed point and dbar the
    static-shift-corrected detuning. Negative values anti-damp the mode
    (blue side); the effective damping gamma_j + Gamma crosses zero at the
    weak-coupling threshold, an independent check on the Jacobian route.
    """
    om, _gam, g = params.mech(mode_j)
    fp = static_fixed_points(params, pump)[0]
    nbar = fp.photon_number
    dbar = effective_detuning(params, pump, nbar)
    hk2 = 0.25 * params.kappa * params.kappa
    lor_plus = 1.0 / (hk2 + (dbar + om) ** 2)
    lor_minus = 1.0 / (hk2 + (dbar - om) ** 2)
    return g * g * nbar * params.kappa * (lor_plus - lor_minus)


def effective_damping(params: SystemParams, pump: PumpCondition,
                      mode_j: int) -> float:
    """gamma_j + Gamma_opt,j; zero crossing marks the onset of self-oscillation."""
    _om, gam, _g = params.mech(mode_j)
    return gam + sideband_gain(params, pump, mode_j)


def threshold_power(params: SystemParams, delta_dc: float,
                    bracket_dbm: tuple[float, float], *,
                    growth_tol: float | None = None,
                    max_iter: int = 80) -> tuple[float, str]:
    """Bisect the pump power (dBm) where the fixed point loses stability.

    Requires max_growth < 0 at ``bracket_dbm[0]`` and > 0 at
    ``bracket_dbm[1]``. Terminates when |max_growth| < growth_tol
    (default 1e-3 * gamma1, reached in well under 40 steps over a 60 dB
    bracket). Returns the crossing power and the destabilizing branch.
    """
    lo, hi = bracket_dbm
    if not lo < hi:
        raise ConfigError("bracket_dbm must satisfy lo < hi")
    if growth_tol is None:
        growth_tol = 1e-3 * params.gamma1

    g_lo, _ = max_growth_rate(params, pump_from_dbm(params, delta_dc, lo))
    g_hi, dom_hi = max_growth_rate(params, pump_from_dbm(params, delta_dc, hi))
    if not (g_lo < 0.0 < g_hi):
        raise BracketingError(
            f"bracket does not straddle the instability: growth({lo} dBm)="
            f"{g_lo:.3e}, growth({hi} dBm)={g_hi:.3e} at delta="
            f"{delta_dc / TWO_PI:.4g} Hz")

    branch = dom_hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g_mid, dom_mid = max_growth_rate(
            params, pump_from_dbm(params, delta_dc, mid))
        if abs(g_mid) < growth_tol:
            return mid, dom_mid if dom_mid != CAVITY else branch
        if g_mid > 0.0:
            hi, branch = mid, dom_mid
        else:
            lo = mid
    raise RootFindingError(
        f"threshold bisection did not converge below |growth| < "
        f"{growth_tol:.3e} 1/s (possible discontinuous branch)")


def single_mode_params(params: SystemParams, mode_j: int) -> SystemParams:
    """Copy of params with the other mode's coupling switched off."""
    if mode_j == 1:
        return with_overrides(params, g2=0.0)
    if mode_j == 2:
        return with_overrides(params, g1=0.0)
    raise ConfigError(f"mechanical mode index must be 1 or 2, got {mode_j}")


def threshold_curve(params: SystemParams, detunings, bracket_dbm, *,
                    mode: int | None = None,
                    growth_tol: float | None = None) -> ThresholdCurve:
    """Threshold power over a detuning grid.

    ``mode=None`` uses the full two-mode model and labels each point with
    the destabilizing branch; ``mode=1`` or ``2`` computes the
    single-mechanical-mode boundary (the other coupling switched off),
    giving the two overlay branches of the stability map.
    """
    p = params if mode is None else single_mode_params(params, mode)
    detunings = np.asarray(detunings, dtype=float)
    th = np.empty(detunings.size)
    branch = []
    for i, d in enumerate(detunings):
        dbm, br = threshold_power(p, float(d), bracket_dbm,
                                  growth_tol=growth_tol)
        th[i] = dbm
        branch.append(br if mode is None else f"mode{mode}")
    return ThresholdCurve(detunings=detunings, threshold_dbm=th, branch=branch)
