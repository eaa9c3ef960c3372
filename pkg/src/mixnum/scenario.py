"""Scenario configuration: load, validate and derive simulation dimensions.

A scenario describes a single carrier split into one or more bandwidth parts
(BWPs), each with its own subcarrier spacing, allocation size, modulation and
center-frequency offset.  All frequency fields carry a ``_hz`` suffix and all
power-like fields a ``_db`` suffix.  ``derive_dims`` turns a validated scenario
into the concrete transform sizes, CP lengths, symbol counts and subcarrier
index maps used by every other module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Reference subcarrier spacing anchoring the common frequency grid.  Centers
# are bookkept in bins of this spacing regardless of per-BWP numerology.
REFERENCE_SCS_HZ = 15e3

SUPPORTED_SCS_HZ = (15e3, 30e3, 60e3, 120e3)
SUPPORTED_MODULATIONS = ("QPSK", "16QAM", "64QAM", "256QAM")

METHOD_NONE = "NONE"
METHOD_I_ICEF = "I_ICEF"
METHOD_E_ICEF_WOLA = "E_ICEF_WOLA"
METHOD_FC_F_OFDM = "FC_F_OFDM"
METHOD_FC_ICEF = "FC_ICEF"
METHODS = (
    METHOD_NONE,
    METHOD_I_ICEF,
    METHOD_E_ICEF_WOLA,
    METHOD_FC_F_OFDM,
    METHOD_FC_ICEF,
)

# Methods whose waveform is built through the fast-convolution filter bank.
FC_METHODS = (METHOD_FC_F_OFDM, METHOD_FC_ICEF)

# CP length of the reference 2048-point transform (normal CP, constant for
# every symbol; no extended first symbol).
_CP_SAMPLES_PER_2048 = 144


class ScenarioError(ValueError):
    """Raised for malformed or physically inconsistent scenario input."""


@dataclass
class BwpSpec:
    """One bandwidth part of the carrier."""

    scs_hz: float
    num_prbs: int
    modulation: str
    center_offset_hz: float

    @property
    def num_subcarriers(self) -> int:
        return 12 * self.num_prbs

    @property
    def occupied_bw_hz(self) -> float:
        return self.num_subcarriers * self.scs_hz


@dataclass
class FcConfig:
    """Fast-convolution filter-bank parameters."""

    n_nom: int = 2048
    bin_spacing_hz: float = 15e3
    overlap_factor: float = 0.5
    transition_bins: int = 12
    transition_shape: str = "raised_cosine"


@dataclass
class MeasureConfig:
    """Measurement-suite settings."""

    psd_rbw_hz: float = 30e3
    aclr_measurement_bw_hz: float = 18e6
    ccdf_probability: float = 1e-3
    mask_file: str | None = None


@dataclass
class ScenarioSpec:
    """Validated top-level scenario."""

    channel_bw_hz: float
    bwps: list[BwpSpec]
    nominal_transform: int = 2048
    oversampling: int = 4
    duration_symbols_base: int = 512
    papr_target_db: float = 5.0
    max_iterations: int = 20
    stop_epsilon_db: float = 0.01
    method: str = METHOD_NONE
    seed: int = 1
    wola_extension_factor: float = 0.7
    fc: FcConfig = field(default_factory=FcConfig)
    measure: MeasureConfig = field(default_factory=MeasureConfig)

    def to_dict(self) -> dict:
        """Canonical plain-dict form (used for digests and report echoes)."""
        return {
            "channel_bw_hz": self.channel_bw_hz,
            "nominal_transform": self.nominal_transform,
            "oversampling": self.oversampling,
            "duration_symbols_base": self.duration_symbols_base,
            "papr_target_db": self.papr_target_db,
            "max_iterations": self.max_iterations,
            "stop_epsilon_db": self.stop_epsilon_db,
            "method": self.method,
            "seed": self.seed,
            "wola_extension_factor": self.wola_extension_factor,
            "bwps": [
                {
                    "scs_hz": b.scs_hz,
                    "num_prbs": b.num_prbs,
                    "modulation": b.modulation,
                    "center_offset_hz": b.center_offset_hz,
                }
                for b in self.bwps
            ],
            "fc": {
                "n_nom": self.fc.n_nom,
                "bin_spacing_hz": self.fc.bin_spacing_hz,
                "overlap_factor": self.fc.overlap_factor,
                "transition_bins": self.fc.transition_bins,
                "transition_shape": self.fc.transition_shape,
            },
            "measure": {
                "psd_rbw_hz": self.measure.psd_rbw_hz,
                "aclr_measurement_bw_hz": self.measure.aclr_measurement_bw_hz,
                "ccdf_probability": self.measure.ccdf_probability,
                "mask_file": self.measure.mask_file,
            },
        }


@dataclass
class BwpDims:
    """Derived per-BWP dimensions.

    ``l_ofdm``/``l_cp`` are at the nominal rate, ``l_ofdm_os``/``l_cp_os`` at
    the oversampled rate.  ``active_base`` holds the signed subcarrier indices
    of the allocation centered on DC in the BWP's own grid;
    ``active_indices`` adds the snapped center so the allocation sits at its
    in-carrier position.  ``center_bin`` is the snapped center in bins of the
    reference 15 kHz grid.
    """

    scs_hz: float
    modulation: str
    l_ofdm: int
    l_cp: int
    l_ofdm_os: int
    l_cp_os: int
    num_symbols: int
    center_hz: float
    center_bin: int
    center_scs: int
    active_base: np.ndarray
    active_indices: np.ndarray

    @property
    def stride(self) -> int:
        return self.l_ofdm + self.l_cp

    @property
    def stride_os(self) -> int:
        return self.l_ofdm_os + self.l_cp_os

    @property
    def num_subcarriers(self) -> int:
        return int(self.active_base.size)


@dataclass
class FcDims:
    """Derived fast-convolution block geometry (shared by all subbands)."""

    transform_len: int      # forward transform size per block
    inverse_len: int        # inverse transform size per block
    overlap_len: int        # overlapping samples between consecutive blocks
    step_len: int           # non-overlapping hop between block starts
    keep_len: int           # output samples kept per block (overlap-save)
    interpolation: int      # inverse_len / transform_len
    head_pad: int           # zeros prepended before the first block
    transition_bins: int
    bin_spacing_hz: float = 0.0


@dataclass
class DerivedDims:
    """All concrete sizes derived from a scenario."""

    fs_nominal_hz: float
    fs_oversampled_hz: float
    oversampling: int
    channel_bw_hz: float
    bwps: list[BwpDims]
    fc: FcDims | None

    @property
    def num_bwps(self) -> int:
        return len(self.bwps)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioError(msg)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def default_scenario_dict() -> dict:
    """Built-in two-numerology 20 MHz mixed carrier.

    A 15 kHz QPSK allocation in the lower half of the channel next to a
    60 kHz 64-QAM allocation in the upper half; every other field takes
    the scenario defaults.  Used when no scenario file is supplied and by
    the self-test battery.
    """
    return {
        "channel_bw_hz": 20e6,
        "bwps": [
            {"scs_hz": 15e3, "num_prbs": 52, "modulation": "QPSK",
             "center_offset_hz": -4.98e6},
            {"scs_hz": 60e3, "num_prbs": 11, "modulation": "64QAM",
             "center_offset_hz": 4.98e6},
        ],
    }


def load_scenario(path: str) -> ScenarioSpec:
    """Load and validate a scenario from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> ScenarioSpec:
    """Build a validated ScenarioSpec from a plain dict, filling defaults."""
    _require(isinstance(raw, dict), "scenario root must be a JSON object")
    unknown = set(raw) - {
        "channel_bw_hz", "nominal_transform", "oversampling",
        "duration_symbols_base", "papr_target_db", "max_iterations",
        "stop_epsilon_db", "method", "seed", "wola_extension_factor",
        "bwps", "fc", "measure",
    }
    _require(not unknown, f"unknown scenario fields: {sorted(unknown)}")
    _require("channel_bw_hz" in raw, "channel_bw_hz is required")
    _require("bwps" in raw and raw["bwps"], "at least one BWP is required")

    bwps = []
    for i, b in enumerate(raw["bwps"]):
        for key in ("scs_hz", "num_prbs", "modulation", "center_offset_hz"):
            _require(key in b, f"bwps[{i}] missing field {key}")
        bwps.append(BwpSpec(
            scs_hz=float(b["scs_hz"]),
            num_prbs=int(b["num_prbs"]),
            modulation=str(b["modulation"]),
            center_offset_hz=float(b["center_offset_hz"]),
        ))

    fc_raw = raw.get("fc", {})
    fc = FcConfig(
        n_nom=int(fc_raw.get("n_nom", 2048)),
        bin_spacing_hz=float(fc_raw.get("bin_spacing_hz", 15e3)),
        overlap_factor=float(fc_raw.get("overlap_factor", 0.5)),
        transition_bins=int(fc_raw.get("transition_bins", 12)),
        transition_shape=str(fc_raw.get("transition_shape", "raised_cosine")),
    )
    ms_raw = raw.get("measure", {})
    measure = MeasureConfig(
        psd_rbw_hz=float(ms_raw.get("psd_rbw_hz", 30e3)),
        aclr_measurement_bw_hz=float(ms_raw.get("aclr_measurement_bw_hz", 18e6)),
        ccdf_probability=float(ms_raw.get("ccdf_probability", 1e-3)),
        mask_file=ms_raw.get("mask_file"),
    )

    spec = ScenarioSpec(
        channel_bw_hz=float(raw["channel_bw_hz"]),
        bwps=bwps,
        nominal_transform=int(raw.get("nominal_transform", 2048)),
        oversampling=int(raw.get("oversampling", 4)),
        duration_symbols_base=int(raw.get("duration_symbols_base", 512)),
        papr_target_db=float(raw.get("papr_target_db", 5.0)),
        max_iterations=int(raw.get("max_iterations", 20)),
        stop_epsilon_db=float(raw.get("stop_epsilon_db", 0.01)),
        method=str(raw.get("method", METHOD_NONE)),
        seed=int(raw.get("seed", 1)),
        wola_extension_factor=float(raw.get("wola_extension_factor", 0.7)),
        fc=fc,
        measure=measure,
    )
    validate_scenario(spec)
    return spec


def validate_scenario(spec: ScenarioSpec) -> None:
    """Raise ScenarioError on any constraint violation."""
    _require(spec.method in METHODS, f"unknown method {spec.method!r}")
    _require(spec.channel_bw_hz > 0, "channel_bw_hz must be positive")
    _require(_is_pow2(spec.nominal_transform), "nominal_transform must be a power of two")
    _require(spec.oversampling >= 1, "oversampling must be >= 1")
    _require(spec.duration_symbols_base >= 1, "duration_symbols_base must be >= 1")
    _require(spec.papr_target_db > 0, "papr_target_db must be positive")
    _require(spec.max_iterations >= 0, "max_iterations must be >= 0")
    _require(spec.stop_epsilon_db > 0, "stop_epsilon_db must be positive")
    _require(0.0 <= spec.wola_extension_factor <= 1.0,
             "wola_extension_factor must lie in [0, 1]")
    _require(spec.seed >= 0, "seed must be non-negative")

    fs_nominal = spec.nominal_transform * REFERENCE_SCS_HZ
    _require(spec.channel_bw_hz <= fs_nominal,
             "channel bandwidth exceeds the nominal sampling rate")

    for i, b in enumerate(spec.bwps):
        _require(b.scs_hz in SUPPORTED_SCS_HZ,
                 f"bwps[{i}]: unsupported scs_hz {b.scs_hz}")
        _require(b.num_prbs >= 1, f"bwps[{i}]: num_prbs must be >= 1")
        _require(b.modulation in SUPPORTED_MODULATIONS,
                 f"bwps[{i}]: unsupported modulation {b.modulation!r}")
        ratio = fs_nominal / b.scs_hz
        _require(abs(ratio - round(ratio)) < 1e-9 and _is_pow2(int(round(ratio))),
                 f"bwps[{i}]: scs_hz incompatible with nominal transform")

    if spec.method in FC_METHODS:
        fc = spec.fc
        _require(_is_pow2(fc.n_nom), "fc.n_nom must be a power of two")
        _require(0.0 < fc.overlap_factor < 1.0, "fc.overlap_factor must lie in (0, 1)")
        _require(fc.transition_bins >= 0, "fc.transition_bins must be >= 0")
        _require(fc.transition_shape == "raised_cosine",
                 f"unsupported fc.transition_shape {fc.transition_shape!r}")
        lm = fs_nominal / fc.bin_spacing_hz
        _require(abs(lm - round(lm)) < 1e-9 and _is_pow2(int(round(lm))),
                 "fc.bin_spacing_hz must divide the nominal rate into a power of two")

    _require(spec.measure.psd_rbw_hz > 0, "measure.psd_rbw_hz must be positive")
    _require(spec.measure.aclr_measurement_bw_hz > 0,
             "measure.aclr_measurement_bw_hz must be positive")
    _require(0 < spec.measure.ccdf_probability < 1,
             "measure.ccdf_probability must lie in (0, 1)")


def snap_center_hz(center_hz: float, scs_list: list[float]) -> float:
    """Snap a center offset to the nearest common multiple of all spacings.

    The snap grid is the least common multiple of the configured subcarrier
    spacings, so every snapped center lands on an exact bin of every BWP's
    grid (and of the reference grid, whose spacing divides all of them).
    """
    grid = 1
    for scs in scs_list:
        grid = math.lcm(grid, int(round(scs)))
    return round(center_hz / grid) * grid


def derive_dims(spec: ScenarioSpec) -> DerivedDims:
    """Compute every concrete dimension needed to build and measure waveforms.

    Pure arithmetic on the validated scenario: the result is fully
    deterministic.  Raises ScenarioError when the geometry does not close
    (BWP out of channel, overlapping allocations, non-integer symbol-count
    ratios, FC geometry mismatch).
    """
    validate_scenario(spec)
    n_ov = spec.oversampling
    fs_nominal = spec.nominal_transform * REFERENCE_SCS_HZ
    fs_os = n_ov * fs_nominal
    scs_list = [b.scs_hz for b in spec.bwps]
    scs_min = min(scs_list)

    bwp_dims: list[BwpDims] = []
    for i, b in enumerate(spec.bwps):
        l_ofdm = int(round(fs_nominal / b.scs_hz))
        l_cp = int(round(_CP_SAMPLES_PER_2048 * l_ofdm / 2048))
        center = snap_center_hz(b.center_offset_hz, scs_list)
        _require(b.occupied_bw_hz / 2 + abs(center) <= spec.channel_bw_hz / 2 + 1e-6,
                 f"bwps[{i}] does not fit inside the channel after snapping "
                 f"(center {center/1e6:.3f} MHz)")
        center_bin = center / REFERENCE_SCS_HZ
        _require(abs(center_bin - round(center_bin)) < 1e-9,
                 f"bwps[{i}]: snapped center not on the reference grid")
        center_scs = center / b.scs_hz
        _require(abs(center_scs - round(center_scs)) < 1e-9,
                 f"bwps[{i}]: snapped center not on the BWP grid")
        k = b.num_subcarriers
        active_base = np.arange(-(k // 2), k - k // 2, dtype=np.int64)
        active = active_base + int(round(center_scs))
        _require(active[0] >= -l_ofdm // 2 and active[-1] < l_ofdm // 2,
                 f"bwps[{i}]: active subcarriers outside the transform range")
        num_symbols = spec.duration_symbols_base * b.scs_hz / scs_min
        _require(abs(num_symbols - round(num_symbols)) < 1e-9,
                 f"bwps[{i}]: non-integer symbol count for equal duration")
        bwp_dims.append(BwpDims(
            scs_hz=b.scs_hz,
            modulation=b.modulation,
            l_ofdm=l_ofdm,
            l_cp=l_cp,
            l_ofdm_os=n_ov * l_ofdm,
            l_cp_os=n_ov * l_cp,
            num_symbols=int(round(num_symbols)),
            center_hz=center,
            center_bin=int(round(center_bin)),
            center_scs=int(round(center_scs)),
            active_base=active_base,
            active_indices=active,
        ))

    # All BWPs must span exactly the same duration in samples.
    durations = {d.num_symbols * d.stride_os for d in bwp_dims}
    _require(len(durations) == 1, "BWP symbol streams do not cover equal durations")

    # Allocations must be disjoint on the reference grid.
    seen: set[int] = set()
    for i, d in enumerate(bwp_dims):
        step = int(round(d.scs_hz / REFERENCE_SCS_HZ))
        proj = {int(idx) * step for idx in d.active_indices}
        _require(not (proj & seen), f"bwps[{i}] overlaps another BWP on the reference grid")
        seen |= proj

    fc_dims = None
    if spec.method in FC_METHODS:
        fc = spec.fc
        l_fc = int(round(fs_nominal / fc.bin_spacing_hz))
        n_fc = n_ov * fc.n_nom
        _require(n_fc % l_fc == 0, "fc inverse transform not a multiple of the forward size")
        _require(abs(n_fc * fc.bin_spacing_hz - fs_os) < 1e-6,
                 "fc inverse transform does not reproduce the oversampled rate")
        overlap = fc.overlap_factor * l_fc
        _require(abs(overlap - round(overlap)) < 1e-9 and int(round(overlap)) % 2 == 0,
                 "fc.overlap_factor must give an even whole-sample overlap")
        overlap = int(round(overlap))
        step = l_fc - overlap
        interp = n_fc // l_fc
        for i, d in enumerate(bwp_dims):
            step_bins = d.scs_hz / fc.bin_spacing_hz
            _require(abs(step_bins - round(step_bins)) < 1e-9,
                     f"bwps[{i}]: scs not a multiple of the fc bin spacing")
            step_bins = int(round(step_bins))
            half = d.num_subcarriers // 2 * step_bins
            _require(half + fc.transition_bins <= l_fc // 2,
                     f"bwps[{i}]: passband plus transition overflows the fc transform")
            cb = d.center_hz / fc.bin_spacing_hz
            _require(abs(cb - round(cb)) < 1e-9,
                     f"bwps[{i}]: center not on the fc bin grid")
        fc_dims = FcDims(
            transform_len=l_fc,
            inverse_len=n_fc,
            overlap_len=overlap,
            step_len=step,
            keep_len=interp * step,
            interpolation=interp,
            head_pad=overlap // 2,
            transition_bins=fc.transition_bins,
            bin_spacing_hz=fc.bin_spacing_hz,
        )

    return DerivedDims(
        fs_nominal_hz=fs_nominal,
        fs_oversampled_hz=fs_os,
        oversampling=n_ov,
        channel_bw_hz=spec.channel_bw_hz,
        bwps=bwp_dims,
        fc=fc_dims,
    )
