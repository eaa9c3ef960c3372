"""Waveform measurements: PAPR statistics, per-subband MSE, PSD, ACLR, mask.

PAPR is taken per sample against the whole-signal mean power, and the
reported "PAPR at probability p" is read off the per-sample survival
curve; an optional pooling window turns the curve into block maxima for
diagnostic use, but reported figures use the raw per-sample statistics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .ofdm import ComplexSignal, ResourceGrid, ofdm_demodulate
from .scenario import DerivedDims, ScenarioSpec


def _as_samples(signal: ComplexSignal | np.ndarray) -> np.ndarray:
    if isinstance(signal, ComplexSignal):
        return signal.samples
    return np.asarray(signal)


def papr_per_sample(signal: ComplexSignal | np.ndarray) -> np.ndarray:
    """Instantaneous-to-mean power ratio for every sample (linear)."""
    x = _as_samples(signal)
    p = np.abs(x) ** 2
    mean = p.mean()
    if mean == 0:
        raise ValueError("signal has zero power")
    return p / mean


@dataclass
class CcdfCurve:
    """Empirical survival curve of block-peak PAPR.

    ``thresholds_db`` ascends and ``probabilities`` is non-increasing;
    entry i is the fraction of blocks whose peak exceeds threshold i.
    """

    thresholds_db: np.ndarray
    probabilities: np.ndarray
    sample_count: int
    window: int


def ccdf(papr_linear: np.ndarray, window: int = 1) -> CcdfCurve:
    """Survival curve of a per-sample PAPR sequence pooled into block maxima.

    ``window=1`` is the raw per-sample curve; larger windows take one peak
    per ``window`` consecutive samples (a trailing partial block is
    dropped).
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    ratios = np.asarray(papr_linear, dtype=np.float64)
    if ratios.ndim != 1 or ratios.size == 0:
        raise ValueError("need a non-empty 1-D PAPR sequence")
    if window > 1:
        n = ratios.size // window
        if n == 0:
            raise ValueError("signal shorter than one window")
        ratios = ratios[: n * window].reshape(n, window).max(axis=1)
    pooled = np.sort(ratios)
    n = pooled.size
    thresholds_db = 10.0 * np.log10(np.maximum(pooled, 1e-300))
    probabilities = (n - 1.0 - np.arange(n)) / n
    return CcdfCurve(thresholds_db=thresholds_db, probabilities=probabilities,
                     sample_count=n, window=window)


def papr_at_probability(curve: CcdfCurve, p: float) -> float:
    """Smallest threshold whose exceedance probability is at most ``p``.

    Interpolates linearly in probability between the two bracketing curve
    points; saturates at the curve extremes.
    """
    if not 0 < p < 1:
        raise ValueError("probability must be in (0, 1)")
    probs = curve.probabilities
    th = curve.thresholds_db
    idx = int(np.searchsorted(-probs, -p, side="left"))
    if idx == 0:
        return float(th[0])
    if idx >= probs.size:
        return float(th[-1])
    p_hi, p_lo = probs[idx - 1], probs[idx]
    if p_hi == p_lo:
        return float(th[idx])
    frac = (p_hi - p) / (p_hi - p_lo)
    return float(th[idx - 1] + frac * (th[idx] - th[idx - 1]))


def mse_per_bwp(signal: ComplexSignal, dims: DerivedDims,
                grids: list[ResourceGrid],
                timing_offset: int | None = None) -> list[float]:
    """Demodulation error power per subband, in dB relative to signal.

    A single complex gain per subband is fitted by least squares before
    comparing, so flat scaling and rotation do not count as error.  The
    default receiver timing is the middle of the cyclic prefix, which
    keeps the analysis window clear of symbol-edge shaping.
    """
    out = []
    for m, grid in enumerate(grids):
        bd = dims.bwps[m]
        timing = -bd.l_cp_os // 2 if timing_offset is None else timing_offset
        rx = ofdm_demodulate(signal, dims, m, timing_offset=timing)
        x = grid.values.reshape(-1)
        y = rx.values.reshape(-1)
        denom = np.vdot(x, x)
        if denom == 0:
            raise ValueError("reference grid has zero power")
        g = np.vdot(x, y) / denom
        err = y - g * x
        ref_power = np.abs(g) ** 2 * denom.real
        mse = np.abs(err) ** 2
        out.append(float(10.0 * np.log10(max(mse.sum() / ref_power, 1e-300))))
    return out


@dataclass
class PsdEstimate:
    """Welch spectrum of a complex baseband signal, DC-centered.

    ``density`` is linear power per Hz; ``psd_db`` is power per resolution
    bandwidth relative to the signal's total power.
    """

    freq_hz: np.ndarray
    density: np.ndarray
    psd_db: np.ndarray
    rbw_hz: float
    total_power: float


def psd_welch(signal: ComplexSignal, rbw_hz: float = 30e3) -> PsdEstimate:
    """Hann-windowed, 50 %-overlap averaged periodogram.

    The segment length is the power of two whose bin spacing is nearest
    the requested resolution bandwidth.
    """
    x = signal.samples
    fs = signal.sample_rate_hz
    if rbw_hz <= 0 or rbw_hz >= fs:
        raise ValueError("resolution bandwidth must be in (0, sample rate)")
    nperseg = 2 ** int(round(np.log2(fs / rbw_hz)))
    nperseg = min(nperseg, x.size)
    freq, density = sp_signal.welch(x, fs=fs, window="hann", nperseg=nperseg,
                                    noverlap=nperseg // 2, detrend=False,
                                    return_onesided=False, scaling="density")
    freq = np.fft.fftshift(freq)
    density = np.fft.fftshift(density)
    total = float(np.mean(np.abs(x) ** 2))
    rel = density * rbw_hz / max(total, 1e-300)
    psd_db = 10.0 * np.log10(np.maximum(rel, 1e-300))
    return PsdEstimate(freq_hz=freq, density=density, psd_db=psd_db,
                       rbw_hz=rbw_hz, total_power=total)


def _band_power(psd: PsdEstimate, lo: float, hi: float) -> float:
    mask = (psd.freq_hz >= lo) & (psd.freq_hz < hi)
    if not mask.any():
        raise ValueError("no spectrum bins inside the requested band")
    df = float(psd.freq_hz[1] - psd.freq_hz[0])
    return float(psd.density[mask].sum() * df)


def aclr(psd: PsdEstimate, channel_bw_hz: float,
         measurement_bw_hz: float) -> dict[str, float]:
    """Adjacent-channel leakage ratio at plus/minus one channel spacing.

    Integrates the spectrum over the measurement bandwidth centered on DC
    and on each adjacent-channel center; positive dB means the wanted
    channel is that much stronger than the neighbor.
    """
    half = measurement_bw_hz / 2
    main = _band_power(psd, -half, half)
    out = {}
    for name, off in (("lower", -channel_bw_hz), ("upper", channel_bw_hz)):
        adj = _band_power(psd, off - half, off + half)
        out[name] = float(10.0 * np.log10(main / max(adj, 1e-300)))
    return out


def load_mask(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Read an emission mask CSV of (frequency offset Hz, limit dB/RBW).

    Offsets are magnitudes from the channel center; the mask is applied
    symmetrically.  Comment lines starting with ``#`` and a header row are
    both tolerated.
    """
    offs, limits = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                off, lim = float(row[0]), float(row[1])
            except ValueError:
                continue
            offs.append(off)
            limits.append(lim)
    if len(offs) < 2:
        raise ValueError(f"mask file {path!r} needs at least two points")
    order = np.argsort(offs)
    return np.asarray(offs)[order], np.asarray(limits)[order]


def mask_margin(psd: PsdEstimate, mask_path: str) -> float:
    """Worst-case clearance under the emission mask, in dB.

    Positive means every measured point in the mask's frequency span sits
    below its limit.
    """
    offs, limits = load_mask(mask_path)
    absf = np.abs(psd.freq_hz)
    in_span = (absf >= offs[0]) & (absf <= offs[-1])
    if not in_span.any():
        return float("inf")
    limit_here = np.interp(absf[in_span], offs, limits)
    return float(np.min(limit_here - psd.psd_db[in_span]))


@dataclass
class MetricsReport:
    """One scenario run's headline measurements, JSON-friendly."""

    papr_at_p_db: float
    ccdf_probability: float
    ccdf_window: int
    mse_db: list[float]
    aclr_db: dict[str, float]
    mask_margin_db: float | None
    iterations_histogram: list[int]

    def to_dict(self) -> dict:
        margin = self.mask_margin_db
        if margin is not None and not np.isfinite(margin):
            margin = "inf" if margin > 0 else "-inf"
        return {
            "papr_at_p_db": self.papr_at_p_db,
            "ccdf_probability": self.ccdf_probability,
            "ccdf_window": self.ccdf_window,
            "mse_db": list(self.mse_db),
            "aclr_db": dict(self.aclr_db),
            "mask_margin_db": margin,
            "iterations_histogram": list(self.iterations_histogram),
        }


def measure_all(signal: ComplexSignal, spec: ScenarioSpec, dims: DerivedDims,
                grids: list[ResourceGrid],
                iterations: np.ndarray | None = None,
                artifacts: dict | None = None) -> MetricsReport:
    """Full measurement pass over one generated waveform.

    When ``artifacts`` is a dict, the intermediate CCDF curve and PSD
    estimate are stored in it under ``"ccdf"`` and ``"psd"``.
    """
    curve = ccdf(papr_per_sample(signal))
    papr_db = papr_at_probability(curve, spec.measure.ccdf_probability)
    mse = mse_per_bwp(signal, dims, grids)
    psd = psd_welch(signal, spec.measure.psd_rbw_hz)
    aclr_db = aclr(psd, spec.channel_bw_hz, spec.measure.aclr_measurement_bw_hz)
    margin = None
    if spec.measure.mask_file:
        margin = mask_margin(psd, spec.measure.mask_file)
    hist: list[int] = []
    if iterations is not None and np.size(iterations):
        hist = np.bincount(np.atleast_1d(np.asarray(iterations,
                                                    dtype=np.int64))).tolist()
    if artifacts is not None:
        artifacts["ccdf"] = curve
        artifacts["psd"] = psd
    return MetricsReport(papr_at_p_db=papr_db,
                         ccdf_probability=spec.measure.ccdf_probability,
                         ccdf_window=curve.window, mse_db=mse,
                         aclr_db=aclr_db, mask_margin_db=margin,
                         iterations_histogram=hist)
