"""CP-OFDM primitives: transforms, QAM mapping, grids, modulation.

Conventions used throughout the package:

* the forward DFT is unnormalized and the inverse carries the 1/L factor
  (numpy convention), so ``dft(idft(x)) == x``;
* frequency-domain vectors are in natural DFT order, DC at bin 0; signed
  subcarrier indexes are folded with ``k mod L``;
* a resource-grid column holds the active subcarriers of one OFDM symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .scenario import BwpDims, DerivedDims


@dataclass
class ComplexSignal:
    """A complex baseband sample stream tagged with its sampling rate."""

    samples: np.ndarray
    sample_rate_hz: float

    def __len__(self) -> int:
        return int(self.samples.size)

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def require_finite(self) -> None:
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ValueError("signal contains non-finite samples")


@dataclass
class ResourceGrid:
    """Frequency-domain payload of one BWP.

    ``values`` has shape (num_subcarriers, num_symbols): one column per OFDM
    symbol, one row per active subcarrier in ascending index order.
    ``is_reference`` marks the unmodified payload used as the receiver
    reference (PAPR processing produces modified copies).
    """

    bwp_index: int
    values: np.ndarray
    is_reference: bool = True

    @property
    def num_symbols(self) -> int:
        return int(self.values.shape[1])


def dft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized forward DFT."""
    return np.fft.fft(x, axis=axis)


def idft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Inverse DFT carrying the 1/L normalization."""
    return np.fft.ifft(x, axis=axis)


# Gray-coded square QAM with unit mean power, bits grouped I/Q-alternating.
_QAM_BITS = {"QPSK": 2, "16QAM": 4, "64QAM": 6, "256QAM": 8}
_QAM_NORM = {"QPSK": 2.0, "16QAM": 10.0, "64QAM": 42.0, "256QAM": 170.0}


def bits_per_symbol(modulation: str) -> int:
    if modulation not in _QAM_BITS:
        raise ValueError(f"unsupported modulation {modulation!r}")
    return _QAM_BITS[modulation]


def _gray_axis(bits: np.ndarray) -> np.ndarray:
    """Map per-axis bit columns to odd integer amplitudes, Gray-coded.

    ``bits`` has shape (n, m) with the axis' bits MSB first; the resulting
    levels follow the nested Gray construction where each extra bit selects
    the inner/outer half of the constellation axis.
    """
    m = bits.shape[1]
    amp = np.ones(bits.shape[0])
    for j in range(m - 1, 0, -1):
        amp = (2 ** (m - j)) - (1 - 2 * bits[:, j]) * amp
    return (1 - 2 * bits[:, 0]) * amp


def qam_map(bits: np.ndarray, modulation: str) -> np.ndarray:
    """Map a flat bit array onto unit-power Gray-coded square QAM symbols."""
    nbits = bits_per_symbol(modulation)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % nbits:
        raise ValueError(f"bit count {bits.size} not a multiple of {nbits}")
    if bits.size == 0:
        return np.zeros(0, dtype=np.complex128)
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    groups = bits.reshape(-1, nbits)
    i_axis = _gray_axis(groups[:, 0::2])
    q_axis = _gray_axis(groups[:, 1::2])
    return (i_axis + 1j * q_axis) / np.sqrt(_QAM_NORM[modulation])


def generate_grid(dims: DerivedDims, bwp_index: int, seed: int) -> ResourceGrid:
    """Draw a reproducible random payload grid for one BWP.

    Payload bits come from a counter-based generator keyed by
    (seed, bwp, symbol), so any symbol's data is identical no matter in
    which order or batch the grid is produced.
    """
    bd = dims.bwps[bwp_index]
    nbits = bits_per_symbol(bd.modulation)
    k = bd.num_subcarriers
    cols = np.empty((k, bd.num_symbols), dtype=np.complex128)
    for s in range(bd.num_symbols):
        key = np.array([seed & 0xFFFFFFFFFFFFFFFF,
                        ((bwp_index & 0xFFFFFFFF) << 32) | (s & 0xFFFFFFFF)],
                       dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        bits = rng.integers(0, 2, size=k * nbits)
        cols[:, s] = qam_map(bits, bd.modulation)
    return ResourceGrid(bwp_index=bwp_index, values=cols, is_reference=True)


def _transform_dims(bd: BwpDims, oversampled: bool) -> tuple[int, int]:
    if oversampled:
        return bd.l_ofdm_os, bd.l_cp_os
    return bd.l_ofdm, bd.l_cp


def _active_rows(bd: BwpDims, l: int, at_baseband: bool) -> np.ndarray:
    idx = bd.active_base if at_baseband else bd.active_indices
    if idx[0] < -(l // 2) or idx[-1] >= l // 2:
        raise ValueError("active subcarrier index outside the transform range")
    return np.mod(idx, l)


def subband_carrier(bd: BwpDims, l: int, start: int, length: int, *,
                    conjugate: bool = False) -> np.ndarray:
    """Continuous upconversion carrier for a BWP, sampled at absolute index.

    ``exp(2j*pi*center*(start+n)/l)`` for ``n`` in ``[0, length)``, where
    ``center`` is the snapped center in the BWP's own subcarrier units and
    ``l`` the matching transform size.  The carrier runs continuously over
    the whole stream — it does not reset at symbol boundaries — which is
    what a mixing upconverter (or the filter bank's bin mapping with its
    per-block phase rotation) produces.
    """
    sign = -1.0 if conjugate else 1.0
    n = start + np.arange(length)
    return np.exp(sign * 2j * np.pi * bd.center_scs * n / l)


def grid_to_spectrum(grid: ResourceGrid, dims: DerivedDims, *,
                     oversampled: bool = True,
                     at_baseband: bool = False) -> np.ndarray:
    """Zero-padded length-L transform input per symbol, shape (L, S)."""
    bd = dims.bwps[grid.bwp_index]
    l, _ = _transform_dims(bd, oversampled)
    x_f = np.zeros((l, grid.num_symbols), dtype=np.complex128)
    x_f[_active_rows(bd, l, at_baseband), :] = grid.values
    return x_f


def ofdm_modulate(grid: ResourceGrid, dims: DerivedDims, *,
                  oversampled: bool = True,
                  at_baseband: bool = False) -> ComplexSignal:
    """Synthesize the CP-OFDM sample stream of one BWP.

    The symbol bodies are synthesized around DC and the last ``l_cp`` body
    samples are prepended as the cyclic prefix (every symbol uses the same
    CP length).  Unless ``at_baseband`` is requested, the assembled stream
    is then upconverted to the BWP's in-carrier position by one carrier
    that runs continuously across symbol boundaries.
    """
    bd = dims.bwps[grid.bwp_index]
    l, l_cp = _transform_dims(bd, oversampled)
    body = idft(grid_to_spectrum(grid, dims, oversampled=oversampled,
                                 at_baseband=True), axis=0)
    sym = np.concatenate([body[l - l_cp:, :], body], axis=0)
    flat = sym.T.reshape(-1)
    if not at_baseband:
        flat = flat * subband_carrier(bd, l, 0, flat.size)
    rate = dims.fs_oversampled_hz if oversampled else dims.fs_nominal_hz
    return ComplexSignal(samples=flat, sample_rate_hz=rate)


def ofdm_demodulate(signal: ComplexSignal, dims: DerivedDims, bwp_index: int,
                    timing_offset: int = 0, *,
                    oversampled: bool = True,
                    at_baseband: bool = False) -> ResourceGrid:
    """Recover a BWP's grid from a composite stream.

    Per symbol, an L-sample window is taken at
    ``symbol_start + l_cp + timing_offset``, downconverted by the BWP's
    continuous carrier (unless the stream was synthesized ``at_baseband``)
    and transformed; the known phase ramp caused by a window start inside
    the CP is compensated, so any ``timing_offset`` in [-l_cp, 0] recovers
    an ISI-free symbol exactly.
    """
    bd = dims.bwps[bwp_index]
    l, l_cp = _transform_dims(bd, oversampled)
    stride = l + l_cp
    if not -l_cp <= timing_offset <= 0:
        raise ValueError("timing_offset must lie in [-l_cp, 0]")
    n_sym = bd.num_symbols
    if len(signal) < n_sym * stride:
        raise ValueError("signal too short for the symbol count")
    start = l_cp + timing_offset
    windows = np.empty((l, n_sym), dtype=np.complex128)
    for s in range(n_sym):
        windows[:, s] = signal.samples[s * stride + start: s * stride + start + l]
    if not at_baseband:
        # The conjugate carrier over window s factors into a per-sample ramp
        # (shared by all windows) times a per-window scalar at its start.
        ramp = subband_carrier(bd, l, 0, l, conjugate=True)
        starts = start + stride * np.arange(n_sym)
        phase = np.exp(-2j * np.pi * bd.center_scs * starts / l)
        windows = windows * ramp[:, None] * phase[None, :]
    spec = dft(windows, axis=0)
    idx = bd.active_base
    values = spec[np.mod(idx, l), :]
    if timing_offset:
        values = values * np.exp(-2j * np.pi * idx * timing_offset / l)[:, None]
    return ResourceGrid(bwp_index=bwp_index, values=values, is_reference=False)


def write_waveform(signal: ComplexSignal, path: str) -> None:
    """Dump samples as interleaved little-endian float64 I/Q plus a sidecar."""
    signal.samples.astype("<c16").tofile(path)
    sidecar = {
        "format": "interleaved float64 complex little-endian",
        "sample_rate_hz": signal.sample_rate_hz,
        "num_samples": len(signal),
    }
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_waveform(path: str) -> ComplexSignal:
    """Load a waveform written by :func:`write_waveform`."""
    with open(path + ".json", "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    samples = np.fromfile(path, dtype="<c16")
    if samples.size != sidecar["num_samples"]:
        raise ValueError("waveform file length does not match its sidecar")
    return ComplexSignal(samples=samples.astype(np.complex128),
                         sample_rate_hz=float(sidecar["sample_rate_hz"]))
