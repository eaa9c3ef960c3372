"""Windowed overlap-add (WOLA) symbol shaping and multi-BWP aggregation.

Each CP-OFDM symbol is cyclically extended beyond its CP+body stride and
shaped with a raised-cosine window whose ramps overlap the neighbouring
symbols' ramps exactly; overlapping ramp weights sum to one, so the flat
part of every symbol is transmitted untouched while symbol transitions are
smoothed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ofdm import (ComplexSignal, ResourceGrid, grid_to_spectrum, idft,
                   subband_carrier)
from .scenario import BwpDims, DerivedDims


@dataclass
class WolaParams:
    """Windowing geometry for one BWP at one sampling rate."""

    l_ofdm: int
    l_cp: int
    l_ext: int   # total cyclic extension beyond the CP-OFDM stride, even

    @property
    def stride(self) -> int:
        return self.l_ofdm + self.l_cp

    @property
    def window_len(self) -> int:
        return self.stride + self.l_ext

    @property
    def ramp_len(self) -> int:
        return self.l_ext

    @classmethod
    def from_dims(cls, bd: BwpDims, extension_factor: float) -> "WolaParams":
        # Extension floored to the nearest even sample count so it splits
        # into equal half-extensions on each side of the symbol.
        l_ext = 2 * int(extension_factor * bd.l_cp_os / 2)
        return cls(l_ofdm=bd.l_ofdm_os, l_cp=bd.l_cp_os, l_ext=l_ext)

    def validate(self) -> None:
        if self.l_ext < 0 or self.l_ext % 2:
            raise ValueError("l_ext must be even and non-negative")
        if self.l_ext > self.l_cp:
            raise ValueError("l_ext longer than the CP leaves no clean receiver window")


def rc_ramp(n: int) -> np.ndarray:
    """Rising raised-cosine ramp sampled at half-sample offsets.

    ``w[i] = 0.5*(1 - cos(pi*(i+0.5)/n))``; the upper half is stored as
    ``1 - w[mirror]`` so amplitude complementarity ``w[n-1-i] == 1 - w[i]``
    holds bit-exactly (an odd-length ramp's midpoint is exactly 0.5).
    """
    if n == 0:
        return np.zeros(0)
    w = np.empty(n)
    half = n // 2
    i = np.arange(half)
    w[:half] = 0.5 * (1.0 - np.cos(np.pi * (i + 0.5) / n))
    if n % 2:
        w[half] = 0.5
    w[n - half:] = 1.0 - w[:half][::-1]
    return w


def build_rc_window(params: WolaParams) -> np.ndarray:
    """Full symbol window: RC ramp up, flat top, mirrored RC ramp down."""
    params.validate()
    w = np.ones(params.window_len)
    n = params.ramp_len
    if n:
        up = rc_ramp(n)
        w[:n] = up
        w[-n:] = up[::-1]
    return w


def wola_symbol(body: np.ndarray, params: WolaParams) -> np.ndarray:
    """Cyclically extend and window one symbol body (or a (L, S) batch).

    The extension places ``l_cp + l_ext/2`` tail samples of the body in
    front (CP plus half the extra extension) and ``l_ext/2`` head samples
    behind, then multiplies by the RC window.
    """
    body = np.asarray(body)
    if body.shape[0] != params.l_ofdm:
        raise ValueError("body length does not match the transform size")
    half = params.l_ext // 2
    ext = np.concatenate([body[params.l_ofdm - params.l_cp - half:],
                          body, body[:half]], axis=0)
    w = build_rc_window(params)
    return ext * (w[:, None] if body.ndim == 2 else w)


def wola_assemble(bodies: np.ndarray, params: WolaParams) -> np.ndarray:
    """Overlap-add a (L, S) batch of symbol bodies into one sample stream.

    Windowed symbols are placed at the CP-OFDM stride; the half-extension
    lead-in of the first symbol (which would sit before time zero) is
    dropped so sample 0 is the nominal start of symbol 0 in every BWP and
    multi-BWP aggregation stays time aligned.  Output length is
    ``S*stride + l_ext/2``.
    """
    if bodies.ndim != 2:
        raise ValueError("expected a (transform, symbols) array")
    windowed = wola_symbol(bodies, params)
    n_sym = bodies.shape[1]
    half = params.l_ext // 2
    buf = np.zeros(n_sym * params.stride + params.l_ext, dtype=np.complex128)
    for s in range(n_sym):
        buf[s * params.stride: s * params.stride + params.window_len] += windowed[:, s]
    return buf[half:]


def modulate_wola(grid: ResourceGrid, dims: DerivedDims,
                  extension_factor: float) -> ComplexSignal:
    """WOLA-shaped oversampled waveform of one BWP.

    Shaping happens at baseband and the assembled stream is upconverted by
    the BWP's continuous carrier afterwards; since windowing is pointwise
    and the cyclic extensions of neighbouring symbols overlap at identical
    absolute times, this equals upconverting each extended symbol first.
    """
    bd = dims.bwps[grid.bwp_index]
    params = WolaParams.from_dims(bd, extension_factor)
    bodies = idft(grid_to_spectrum(grid, dims, oversampled=True,
                                   at_baseband=True), axis=0)
    flat = wola_assemble(bodies, params)
    flat *= subband_carrier(bd, bd.l_ofdm_os, 0, flat.size)
    return ComplexSignal(samples=flat, sample_rate_hz=dims.fs_oversampled_hz)


def aggregate(signals: list[ComplexSignal]) -> ComplexSignal:
    """Element-wise sum of per-BWP streams, zero-padded to equal length."""
    if not signals:
        raise ValueError("nothing to aggregate")
    rates = {s.sample_rate_hz for s in signals}
    if len(rates) != 1:
        raise ValueError("cannot aggregate signals with different sample rates")
    n = max(len(s) for s in signals)
    out = np.zeros(n, dtype=np.complex128)
    for s in signals:
        out[:len(s)] += s.samples
    return ComplexSignal(samples=out, sample_rate_hz=rates.pop())
