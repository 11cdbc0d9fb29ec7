"""From trajectories to the measured observable: reflected-field spectra.

The reflected field follows the input-output relation
S_out(t) = S_in - sqrt(kappa_e) * a(t) in the rotating frame (photon-flux
units). Its Welch power spectral density is reported in dBm/Hz against the
absolute signal frequency, using hbar*omega_d*|S_out|^2 as the
flux-to-watt conversion; the pump sits at the reference frequency and
comb teeth appear as narrow lines that a median-floor peak detector turns
into a tooth list.

No heterodyne chain is simulated: spectra come straight from the complex
rotating-frame baseband, and the optional carrier subtraction plays the
role of the reflected-pump cancellation in a real measurement chain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar
from scipy.ndimage import median_filter
from scipy.signal import get_window, welch

from .core import SystemParams, PumpCondition, TWO_PI
from .dynamics import Trajectory
from .errors import ConfigError, InsufficientDataError

_DB_FLOOR_W_PER_HZ = 1e-40  # keeps log10 finite on numerically empty bins


@dataclass
class Spectrum:
    """One-sided PSD of the output field on an absolute frequency grid.

    ``freqs`` (Hz) is uniform; ``psd`` is in dBm/Hz; ``rbw`` is the
    resolution bandwidth (bin spacing times the window's equivalent noise
    bandwidth); ``ref`` (Hz) is the pump frequency the grid is centered on.
    """

    freqs: np.ndarray
    psd: np.ndarray
    rbw: float
    ref: float

    def __post_init__(self):
        if self.freqs.shape != self.psd.shape:
            raise ConfigError("freqs/psd shape mismatch")

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("freq_hz,psd_dbm_per_hz\n")
            for f, p in zip(self.freqs, self.psd):
                fh.write(f"{f:.10g},{p:.6f}\n")


@dataclass(frozen=True)
class Tooth:
    """One comb line: absolute frequency, integrated power, pump offset."""

    freq: float                 # Hz
    power_dbm: float            # integrated over +-2 rbw around the peak
    detuning_from_pump: float   # Hz, equals freq - ref exactly


def teeth_to_json(teeth: list[Tooth], path: str) -> None:
    records = [{"freq_hz": th.freq, "power_dbm": th.power_dbm,
                "detuning_hz": th.detuning_from_pump} for th in teeth]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=1)
        fh.write("\n")


def teeth_from_json(path: str) -> list[Tooth]:
    with open(path) as fh:
        records = json.load(fh)
    out = []
    for r in records:
        freq = float(r["freq_hz"])
        det = float(r.get("detuning_hz", 0.0))
        out.append(Tooth(freq=freq, power_dbm=float(r.get("power_dbm", 0.0)),
                         detuning_from_pump=det))
    return out


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def output_field(traj: Trajectory, params: SystemParams,
                 pump: PumpCondition, *,
                 subtract_carrier: bool = False) -> np.ndarray:
    """Reflected flux amplitude S_out on the trajectory's dense tail.

    With ``subtract_carrier`` the time-mean is removed, emulating a
    cancelled reflected pump so weak sidebands are not masked by the
    carrier in the spectrum.
    """
    traj.require_tail()
    a_tail = traj.tail_states[:, 0]
    s_out = pump.s_in - math.sqrt(params.kappa_e) * a_tail
    if subtract_carrier:
        s_out = s_out - s_out.mean()
    return s_out


def psd(series: np.ndarray, sample_rate: float, omega_d: float, *,
        window: str = "hann", segments: int = 4) -> Spectrum:
    """Welch PSD of a complex baseband flux series, in dBm/Hz.

    The series is split into ``segments`` half-overlapping windowed
    segments (each must come out >= 4096 samples long); density
    normalization is Parseval-consistent, so integrating a tooth over its
    main lobe recovers hbar*omega_d*A^2 watts for a tone of flux
    amplitude A. Baseband frequencies are mapped to absolute ones via the
    pump frequency omega_d.
    """
    if window != "hann":
        raise ConfigError("only the hann window is supported")
    series = np.asarray(series)
    if segments < 1:
        raise ConfigError("segments must be >= 1")
    n = series.size
    nperseg = int(2 * n // (segments + 1))
    if nperseg < 4096 or n < 4 * 4096:
        raise InsufficientDataError(
            f"series of {n} samples cannot supply {segments} half-overlapping "
            f"segments of >= 4096 samples")
    w = get_window("hann", nperseg)
    freqs_bb, pxx = welch(series, fs=sample_rate, window=w,
                          noverlap=nperseg // 2, detrend=False,
                          return_onesided=False, scaling="density")
    freqs_bb = np.fft.fftshift(freqs_bb)
    pxx = np.fft.fftshift(pxx)
    watts = hbar * omega_d * pxx
    psd_dbm = 10.0 * np.log10(np.maximum(watts, _DB_FLOOR_W_PER_HZ) / 1e-3)
    df = sample_rate / nperseg
    enbw = sample_rate * np.sum(w ** 2) / np.sum(w) ** 2
    ref = omega_d / TWO_PI
    return Spectrum(freqs=ref + freqs_bb, psd=psd_dbm, rbw=float(enbw), ref=ref)


def spectrum_of(traj: Trajectory, params: SystemParams, pump: PumpCondition,
                *, subtract_carrier: bool = False,
                segments: int = 4) -> Spectrum:
    """Convenience pipeline: output field of the tail -> Welch PSD."""
    s_out = output_field(traj, params, pump,
                         subtract_carrier=subtract_carrier)
    return psd(s_out, traj.tail_rate, pump.omega_d, segments=segments)


def find_teeth(spec: Spectrum, margin_db: float = 6.0, *,
               floor_kernel_bins: int = 101) -> list[Tooth]:
    """Detect comb teeth: local maxima above a median-filtered noise floor.

    Peak frequencies are refined by 3-point quadratic interpolation
    (sub-bin); tooth power integrates the PSD within +-2 rbw of the peak.
    Returned sorted by frequency. An empty list is a valid result.
    """
    if margin_db < 6.0:
        raise ConfigError("margin_db must be >= 6")
    p_db = spec.psd
    n = p_db.size
    kernel = min(floor_kernel_bins, (n // 4) * 2 + 1)
    kernel = max(kernel, 3)
    floor_db = median_filter(p_db, size=kernel, mode="nearest")

    df = spec.bin_width
    half_bins = max(1, int(round(2.0 * spec.rbw / df)))
    watts = 10.0 ** (p_db / 10.0) * 1e-3

    teeth = []
    for i in range(1, n - 1):
        if p_db[i] < floor_db[i] + margin_db:
            continue
        if not (p_db[i] > p_db[i - 1] and p_db[i] >= p_db[i + 1]):
            continue
        # quadratic refinement on the dB values
        y0, y1, y2 = p_db[i - 1], p_db[i], p_db[i + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0.0 else 0.0
        shift = min(max(shift, -0.5), 0.5)
        freq = spec.freqs[0] + (i + shift) * df
        lo = max(0, i - half_bins)
        hi = min(n, i + half_bins + 1)
        power_w = float(np.sum(watts[lo:hi]) * df)
        teeth.append(Tooth(freq=freq,
                           power_dbm=10.0 * math.log10(power_w / 1e-3),
                           detuning_from_pump=freq - spec.ref))
    teeth.sort(key=lambda th: th.freq)
    return teeth
