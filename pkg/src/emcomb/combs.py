"""Comb taxonomy: lattice assignment, regime classification, analytic comb.

Above threshold the output spectrum is a set of teeth whose offsets from
the pump live on the two-dimensional integer lattice
k1*omega_m1 + k2*omega_m2. Single-mode combs populate one axis of the
lattice; hybrid spectra mix both, including sum/difference sidebands whose
mixing order is the smaller |k| when both indices are nonzero. The fitter
assigns each tooth its lattice point by brute force over a bounded index
box with deterministic tie-breaking, and refuses to guess when two lattice
points fit within tolerance (near-commensurate mode frequencies).

For a prescribed single-mode mechanical cycle the cavity field is exactly
a Bessel-weighted sideband series; :func:`bessel_comb` evaluates it as an
independent cross-check of the simulated spectra.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import jv

from .core import SystemParams, PumpCondition, TWO_PI
from .dynamics import AttractorKind, AttractorReport
from .errors import (AmbiguousLatticeError, ConfigError,
                     IndeterminateOutcomeError, TruncationError)
from .spectral import Tooth


class Regime(str, Enum):
    SINGLE_PEAK = "SinglePeak"
    COMB1 = "Comb1"
    COMB2 = "Comb2"
    HYBRID = "Hybrid"


@dataclass(frozen=True)
class LatticeAssignment:
    """Integer-lattice coordinates of one tooth.

    ``order`` is the mixing order: min(|k1|, |k2|) when both indices are
    nonzero, else 0 (a pure single-mode tooth or the carrier).
    """

    tooth: Tooth
    k1: int
    k2: int
    residual: float  # Hz, signed: detuning - (k1*f1 + k2*f2)

    @property
    def order(self) -> int:
        if self.k1 != 0 and self.k2 != 0:
            return min(abs(self.k1), abs(self.k2))
        return 0


@dataclass(frozen=True)
class CombClassification:
    regime: Regime
    assignments: list
    dominant_spacing: float         # Hz, measured from the populated sublattice
    mixing_orders_present: frozenset
    n_unassigned: int = 0


def default_tol_hz(rbw: float, omega_m1: float) -> float:
    """Resolution-limited lattice tolerance: max(3*rbw, 1e-3 * f_m1)."""
    return max(3.0 * rbw, 1e-3 * omega_m1 / TWO_PI)


def min_lattice_gap(omega_m1: float, omega_m2: float, kmax: int) -> float:
    """Smallest nonzero |k1*f1 + k2*f2| over index differences (Hz)."""
    f1, f2 = omega_m1 / TWO_PI, omega_m2 / TWO_PI
    span = 2 * kmax
    k1 = np.arange(-span, span + 1)
    k2 = np.arange(-span, span + 1)
    vals = np.abs(k1[:, None] * f1 + k2[None, :] * f2)
    vals[span, span] = np.inf  # (0, 0)
    return float(vals.min())


def lattice_fit(teeth: list[Tooth], omega_m1: float, omega_m2: float,
                tol_hz: float, kmax: int = 6) -> list[LatticeAssignment]:
    """Assign each tooth the (k1, k2) minimizing its lattice residual.

    Search box (k1, k2) in [-kmax, kmax]^2; ties break toward smaller
    |k1|+|k2|, then smaller |k2| (mode-1 sublattices are denser), then
    lexicographically. Teeth whose best residual exceeds ``tol_hz`` are
    left out of the result. If two distinct lattice points fit one tooth
    within ``tol_hz`` the mode frequencies are effectively commensurate
    over the box and an :class:`AmbiguousLatticeError` is raised instead
    of guessing.
    """
    if tol_hz <= 0 or kmax < 1:
        raise ConfigError("tol_hz must be > 0 and kmax >= 1")
    f1, f2 = omega_m1 / TWO_PI, omega_m2 / TWO_PI
    ks = np.arange(-kmax, kmax + 1)
    k1g, k2g = np.meshgrid(ks, ks, indexing="ij")
    k1f, k2f = k1g.ravel(), k2g.ravel()
    lattice = k1f * f1 + k2f * f2

    out = []
    for tooth in teeth:
        resid = tooth.detuning_from_pump - lattice
        aresid = np.abs(resid)
        within = np.nonzero(aresid <= tol_hz)[0]
        if within.size == 0:
            continue
        if within.size > 1:
            gap = min_lattice_gap(omega_m1, omega_m2, kmax)
            cands = ", ".join(f"({k1f[i]},{k2f[i]})" for i in within[:4])
            raise AmbiguousLatticeError(
                f"tooth at detuning {tooth.detuning_from_pump:.6g} Hz fits "
                f"{within.size} lattice points within {tol_hz:.3g} Hz "
                f"[{cands}...]; mode frequencies are near-commensurate over "
                f"the box (min lattice gap {gap:.3g} Hz)")
        best = int(min(
            range(lattice.size),
            key=lambda i: (aresid[i], abs(k1f[i]) + abs(k2f[i]),
                           abs(k2f[i]), k1f[i], k2f[i])))
        out.append(LatticeAssignment(tooth=tooth, k1=int(k1f[best]),
                                     k2=int(k2f[best]),
                                     residual=float(resid[best])))
    return out


def _sublattice_spacing(assignments, axis: int, nominal: float) -> float:
    """Least-squares tooth spacing of one single-mode sublattice (Hz)."""
    ks, ds = [], []
    for asg in assignments:
        k_axis = asg.k1 if axis == 1 else asg.k2
        k_other = asg.k2 if axis == 1 else asg.k1
        if k_other == 0 and k_axis != 0:
            ks.append(k_axis)
            ds.append(asg.tooth.detuning_from_pump)
    if not ks:
        return nominal
    ks = np.asarray(ks, dtype=float)
    ds = np.asarray(ds)
    return float(np.sum(ks * ds) / np.sum(ks * ks))


def classify(teeth: list[Tooth], omega_m1: float, omega_m2: float,
             tol_hz: float, kmax: int = 6) -> CombClassification:
    """Sort a tooth list into SinglePeak / Comb1 / Comb2 / Hybrid.

    Comb-j means every assigned tooth lies on the mode-j axis of the
    lattice with at least two distinct indices; Hybrid means mixed-index
    teeth exist or both single-mode sublattices coexist. The dominant
    spacing is measured from the most populated single-mode sublattice by
    a least-squares fit through the carrier.
    """
    assignments = lattice_fit(teeth, omega_m1, omega_m2, tol_hz, kmax)
    n_unassigned = len(teeth) - len(assignments)
    orders = frozenset(a.order for a in assignments)

    if len(teeth) <= 1:
        return CombClassification(Regime.SINGLE_PEAK, assignments,
                                  0.0, orders, n_unassigned)

    has_mixed = any(a.k1 != 0 and a.k2 != 0 for a in assignments)
    only1 = [a for a in assignments if a.k1 != 0 and a.k2 == 0]
    only2 = [a for a in assignments if a.k2 != 0 and a.k1 == 0]
    f1, f2 = omega_m1 / TWO_PI, omega_m2 / TWO_PI

    if has_mixed or (only1 and only2):
        regime = Regime.HYBRID
    elif only1 and len({a.k1 for a in assignments}) >= 2:
        regime = Regime.COMB1
    elif only2 and len({a.k2 for a in assignments}) >= 2:
        regime = Regime.COMB2
    else:
        regime = Regime.SINGLE_PEAK

    if regime is Regime.COMB1:
        spacing = _sublattice_spacing(assignments, 1, f1)
    elif regime is Regime.COMB2:
        spacing = _sublattice_spacing(assignments, 2, f2)
    elif regime is Regime.HYBRID:
        if len(only1) >= len(only2):
            spacing = _sublattice_spacing(assignments, 1, f1)
        else:
            spacing = _sublattice_spacing(assignments, 2, f2)
    else:
        spacing = 0.0
    return CombClassification(regime, assignments, spacing, orders,
                              n_unassigned)


def classification_to_json(cls: CombClassification, path_or_none=None):
    """Export {regime, dominant_spacing_hz, teeth: [...]} (returns the dict)."""
    payload = {
        "regime": cls.regime.value,
        "dominant_spacing_hz": cls.dominant_spacing,
        "mixing_orders_present": sorted(cls.mixing_orders_present),
        "n_unassigned": cls.n_unassigned,
        "teeth": [
            {"freq_hz": a.tooth.freq, "power_dbm": a.tooth.power_dbm,
             "k1": a.k1, "k2": a.k2, "order": a.order,
             "residual_hz": a.residual}
            for a in cls.assignments
        ],
    }
    if path_or_none is not None:
        with open(path_or_none, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    return payload


# ---------------------------------------------------------------------------
# analytic single-mode comb
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BesselComb:
    """Cavity sideband amplitudes for a prescribed mechanical cycle.

    ``teeth[k + kmax]`` is the complex amplitude alpha_k of the component
    at detuning +k*mech_freq from the pump, for the cycle
    b(t) = B exp(-i*omega_m*t). ``modulation_index`` is
    beta = 2*g*B/omega_m.
    """

    modulation_index: float
    kmax: int
    teeth: np.ndarray
    mech_freq: float  # Hz

    def amplitude(self, k: int) -> complex:
        if abs(k) > self.kmax:
            raise ConfigError(f"tooth index {k} outside |k| <= {self.kmax}")
        return complex(self.teeth[k + self.kmax])


def bessel_comb(params: SystemParams, pump: PumpCondition, mech_amplitude:
                float, mech_mode: int, *, kmax: int = 8,
                delta_corrected: float | None = None,
                tail_tol: float = 1e-10) -> BesselComb:
    """Exact cavity response to b_j(t) = B e^{-i omega_mj t}.

    Writing the phase-modulated cavity field as a Bessel series gives

        alpha_k = sqrt(kappa_e) * S_in *
                  sum_n J_{n+k}(beta) J_n(beta) / (kappa/2 - i*(dtil - n*om))

    with beta = 2*g_j*B/omega_mj and dtil the (static-shift-corrected)
    detuning; for the pure prescribed cycle there is no static mechanical
    offset, so dtil defaults to the drive detuning itself. The sum is
    truncated where the Bessel tail falls below ``tail_tol`` relative; if
    that cannot be reached a :class:`TruncationError` reports the needed
    order.
    """
    om, _gam, g = params.mech(mech_mode)
    if mech_amplitude < 0:
        raise ConfigError("mech_amplitude must be >= 0")
    beta = 2.0 * g * mech_amplitude / om
    dtil = pump.delta_dc if delta_corrected is None else delta_corrected

    # Bessel tail: |J_n(beta)| decays superexponentially once n > beta.
    n_cap = 600
    n_need = int(math.ceil(abs(beta) + 12.0 + 2.0 * abs(beta) ** (1 / 3)))
    nmax = kmax + max(n_need, 20)
    if nmax > n_cap:
        raise TruncationError(
            f"modulation index beta={beta:.3g} needs series order {nmax} > "
            f"{n_cap}", required_order=nmax)
    n = np.arange(-nmax, nmax + 1)
    jn = jv(n, beta)
    tail = max(abs(jn[0]), abs(jn[-1]))
    if tail > tail_tol * max(np.max(np.abs(jn)), 1e-300):
        raise TruncationError(
            f"Bessel tail {tail:.3e} exceeds {tail_tol} of the peak at order "
            f"{nmax}", required_order=2 * nmax)

    denom = 0.5 * params.kappa - 1j * (dtil - n * om)
    cn = jn / denom
    drive = math.sqrt(params.kappa_e) * pump.s_in
    teeth = np.empty(2 * kmax + 1, dtype=np.complex128)
    for k in range(-kmax, kmax + 1):
        # alpha_k = drive * sum_n J_{n+k} J_n / denom_n; shift the J array
        shifted = np.zeros_like(jn)
        if k >= 0:
            shifted[: jn.size - k] = jn[k:]
        else:
            shifted[-k:] = jn[: jn.size + k]
        teeth[k + kmax] = drive * np.sum(shifted * cn)
    return BesselComb(modulation_index=beta, kmax=kmax, teeth=teeth,
                      mech_freq=om / TWO_PI)


# ---------------------------------------------------------------------------
# mode competition
# ---------------------------------------------------------------------------

MODE1_WINS = "mode1_wins"
MODE2_WINS = "mode2_wins"
COEXIST = "coexist"


def competition_outcome(params: SystemParams, pump: PumpCondition,
                        settle_report: AttractorReport,
                        classification: CombClassification, *,
                        suppression: float = 0.01) -> str:
    """Which mechanical mode won the gain competition above threshold.

    Mode j wins when the other mode's saturated oscillation amplitude
    (RMS deviation from its static value) is below ``suppression`` of the
    winner's and the spectrum classifies as the matching single-mode comb;
    anything else coexists.
    """
    if settle_report.kind is AttractorKind.UNDECIDED:
        raise IndeterminateOutcomeError(
            "attractor undecided; competition outcome is indeterminate")
    d1 = settle_report.amplitude_stats["b1"].osc_rms
    d2 = settle_report.amplitude_stats["b2"].osc_rms
    if d1 > 0 and d2 < suppression * d1 and classification.regime is Regime.COMB1:
        return MODE1_WINS
    if d2 > 0 and d1 < suppression * d2 and classification.regime is Regime.COMB2:
        return MODE2_WINS
    return COEXIST
