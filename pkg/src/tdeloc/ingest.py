"""Measured room-impulse-response ingestion and full-rate ground truth.

The measured-data path mirrors the simulation path: isolate one acoustic
event per analysis window, estimate TOA/TDOA per channel and pair, and
localize. What simulation gets for free (true arrival times) is replaced
here by a full-rate no-interpolation reference: events are located on
match-filtered records at the native rate, and interpolation methods are
then judged at a decimated rate against that reference.

The reference is itself quantized to the native sample grid, so reported
errors bound the methods' agreement with a coarse truth rather than with
physical arrival times; outputs carry :data:`GROUND_TRUTH_NOTE` verbatim.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin

from .errors import (
    FormatError,
    GeometryMismatch,
    InsufficientPeaks,
    InvalidFactor,
    NoPeak,
)
from .interp import METHODS, InterpConfig
from .locate import (
    ArrayGeometry,
    center_toa,
    estimate_position,
    estimate_slowness,
    pair_difference_matrix,
    pair_indices,
)
from .signals import SampledSignal
from .tde import estimate_tdoa, estimate_toa, matched_filter, sliding_window

#: Caveat attached to every measured-data result table.
GROUND_TRUTH_NOTE = (
    "reference TOA/TDOA are quantized to the full-rate sample grid; "
    "interpret absolute errors with caution"
)

_PCM_SCALE = {
    np.dtype(np.int16): 2.0**15,
    np.dtype(np.int32): 2.0**31,
}


@dataclass(frozen=True)
class MeasurementSet:
    """Multichannel impulse responses tied to a sensor layout.

    Attributes
    ----------
    signals : tuple of SampledSignal
        One impulse response per sensor, equal lengths and rates.
    geometry : ArrayGeometry
        Sensor positions in meters, same order as the channels.
    source_label : str
        Dataset name of the excitation position.
    """

    signals: tuple
    geometry: ArrayGeometry
    source_label: str

    def __post_init__(self) -> None:
        if len(self.signals) != self.geometry.num_sensors:
            raise GeometryMismatch(
                f"{len(self.signals)} channels vs "
                f"{self.geometry.num_sensors} sensor positions"
            )
        lengths = {len(s) for s in self.signals}
        rates = {s.rate_hz for s in self.signals}
        if len(lengths) != 1 or len(rates) != 1:
            raise FormatError("channels must share one length and rate")

    @property
    def rate_hz(self) -> float:
        return self.signals[0].rate_hz

    @property
    def num_channels(self) -> int:
        return len(self.signals)


@dataclass(frozen=True)
class PeakList:
    """Event sample indices in time order with a guaranteed separation."""

    indices: tuple
    min_separation: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices)
        if idx.size == 0:
            raise ValueError("peak list must not be empty")
        gaps = np.diff(idx)
        if idx.size > 1 and gaps.min() < self.min_separation:
            raise ValueError("peaks closer than the minimum separation")


@dataclass(frozen=True)
class ReferenceEvent:
    """Full-rate no-interpolation estimates for one acoustic event."""

    center_index: int
    toas: np.ndarray
    tdoas: np.ndarray
    position: np.ndarray


@dataclass(frozen=True)
class GroundTruth:
    """Reference events plus the rate they were measured at."""

    events: tuple
    rate_hz: float
    note: str = GROUND_TRUTH_NOTE


@dataclass(frozen=True)
class MeasuredRow:
    """Errors of one method on one event, against the full-rate reference."""

    event: int
    method: str
    toa_errors: np.ndarray
    tdoa_errors: np.ndarray
    pos_error_m: float


def _normalize_pcm(data: np.ndarray) -> np.ndarray:
    if data.dtype in _PCM_SCALE:
        return data.astype(np.float64) / _PCM_SCALE[data.dtype]
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.dtype(np.float32), np.dtype(np.float64)):
        return data.astype(np.float64)
    raise FormatError(f"unsupported sample format {data.dtype}")


def _load_geometry(geometry_path) -> tuple:
    with open(geometry_path) as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as err:
            raise FormatError(f"geometry sidecar is not valid JSON: {err}")
    try:
        sensors = np.asarray(meta["sensors"], dtype=np.float64)
    except (KeyError, ValueError) as err:
        raise FormatError(f"geometry sidecar lacks usable 'sensors': {err}")
    if sensors.ndim != 2:
        raise FormatError("'sensors' must be a list of coordinate rows")
    # planar 3-D layouts drop the constant axis so localization runs in 2-D
    if sensors.shape[1] == 3 and np.ptp(sensors[:, 2]) == 0.0:
        sensors = sensors[:, :2]
    label = str(meta.get("source_label", Path(geometry_path).stem))
    rate = meta.get("rate_hz")
    return sensors, label, None if rate is None else float(rate)


def load_measurement(audio_path, geometry_path) -> MeasurementSet:
    """Read a multichannel RIR file and its geometry sidecar.

    The sidecar is JSON with ``sensors`` ([x, y] or [x, y, z] in meters, one
    row per channel), optional ``source_label``, and optional ``rate_hz``
    cross-checked against the audio header.

    Raises
    ------
    FormatError
        Empty or unreadable audio, bad sidecar, or rate mismatch.
    GeometryMismatch
        Channel count differs from the sensor count.
    """
    try:
        rate, data = wavfile.read(audio_path)
    except ValueError as err:
        raise FormatError(f"unreadable audio file: {err}")
    if data.size == 0:
        raise FormatError("audio file contains no samples")
    if data.ndim == 1:
        data = data[:, None]
    samples = _normalize_pcm(data)

    sensors, label, sidecar_rate = _load_geometry(geometry_path)
    if sidecar_rate is not None and sidecar_rate != rate:
        raise FormatError(
            f"sidecar rate {sidecar_rate} Hz does not match audio {rate} Hz"
        )
    if data.shape[1] != len(sensors):
        raise GeometryMismatch(
            f"{data.shape[1]} channels vs {len(sensors)} sensor positions"
        )
    signals = tuple(
        SampledSignal(samples[:, n], float(rate))
        for n in range(data.shape[1])
    )
    return MeasurementSet(signals, ArrayGeometry(sensors), label)


def estimate_matched_filter(
    rir: SampledSignal, direct_window_samples: int
) -> np.ndarray:
    """Extract the direct-path pulse as an energy-normalized kernel.

    The window is centered on the record's strongest absolute sample
    (clamped at the edges) and scaled to unit energy, so correlating with
    it compensates the measurement chain's pulse shape without changing
    the overall gain structure.

    Raises
    ------
    NoPeak
        If the record is identically zero.
    """
    if direct_window_samples < 1:
        raise ValueError("direct window must contain at least one sample")
    samples = rir.samples
    if not np.any(samples):
        raise NoPeak("record has no direct-path peak")
    peak = int(np.argmax(np.abs(samples)))
    w = int(direct_window_samples)
    lo = max(0, min(peak - w // 2, len(samples) - w))
    kernel = samples[lo : lo + w].astype(np.float64)
    return kernel / np.linalg.norm(kernel)


def compensate(rir: SampledSignal, kernel: np.ndarray) -> SampledSignal:
    """Matched-filter a record so events peak at their center samples.

    :func:`tdeloc.tde.matched_filter` peaks where a kernel-shaped event
    starts; shifting by half the kernel length re-centers the response so
    picked indices can seed centered analysis windows directly.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    raw = matched_filter(rir, SampledSignal(kernel, rir.rate_hz))
    half = len(kernel) // 2
    out = np.zeros_like(raw.samples)
    out[half:] = raw.samples[: len(out) - half]
    return SampledSignal(out, rir.rate_hz)


def pick_peaks(
    compensated: SampledSignal, count: int, min_separation: int
) -> PeakList:
    """Greedy amplitude-ordered peak selection with a separation guard.

    Candidates are visited from strongest to weakest absolute value (index
    order breaks ties, so the result does not depend on evaluation order);
    a candidate within ``min_separation`` of an accepted peak is dropped.

    Raises
    ------
    InsufficientPeaks
        Fewer than ``count`` separated nonzero peaks exist.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    if min_separation < 1:
        raise ValueError("min_separation must be at least 1")
    magnitude = np.abs(compensated.samples)
    order = np.argsort(-magnitude, kind="stable")
    chosen: list[int] = []
    for idx in order:
        if magnitude[idx] == 0.0:
            break
        if all(abs(int(idx) - c) >= min_separation for c in chosen):
            chosen.append(int(idx))
            if len(chosen) == count:
                break
    if len(chosen) < count:
        raise InsufficientPeaks(
            f"found {len(chosen)} separated peaks, needed {count}"
        )
    return PeakList(tuple(sorted(chosen)), min_separation)


def downsample(signal: SampledSignal, factor: int) -> SampledSignal:
    """Anti-aliased integer decimation with zero net group delay.

    A linear-phase low-pass at 0.9 of the target Nyquist runs over the
    record, its integer group delay is removed exactly, and every
    ``factor``-th sample is kept, so event times in seconds are preserved.

    Raises
    ------
    InvalidFactor
        Non-integer or sub-unit factor.
    """
    if factor < 1 or int(factor) != factor:
        raise InvalidFactor(f"decimation factor must be an integer >= 1, "
                            f"got {factor}")
    factor = int(factor)
    if factor == 1:
        return SampledSignal(signal.samples.copy(), signal.rate_hz)
    taps = 48 * factor + 1
    kernel = firwin(taps, 0.9 / factor, window=("kaiser", 8.6))
    delay = taps // 2
    filtered = np.convolve(signal.samples, kernel)[
        delay : delay + len(signal)
    ]
    return SampledSignal(filtered[::factor], signal.rate_hz / factor)


def _event_estimates(
    channels, center: int, window: int, icfg: InterpConfig, geometry, c: float
):
    """TOA per channel, TDOA per pair, and position for one event window."""
    frames = [sliding_window(s, center, window) for s in channels]
    toas = np.array([
        estimate_toa(frames[n], center, icfg, sensor=n).seconds
        for n in range(len(frames))
    ])
    pairs = pair_indices(len(frames))
    tdoas = np.array([
        estimate_tdoa(frames[m], frames[n], icfg, sensors=(m, n)).seconds
        for m, n in pairs
    ])
    slowness = estimate_slowness(pair_difference_matrix(geometry), tdoas)
    position = estimate_position(slowness, center_toa(toas), geometry, c)
    return toas, tdoas, position


def _compensated_events(mset: MeasurementSet, window: int, num_events: int):
    """Shared front half of the measured-data pipelines.

    One kernel is estimated from the strongest channel and applied to all
    of them: per-channel kernels would each center on their own sample
    grid, and the resulting sub-sample jitter would leak straight into
    every TDOA. Events are picked on the channel-summed magnitude so all
    channels agree on the analysis windows.
    """
    strongest = int(np.argmax([
        np.max(np.abs(s.samples)) for s in mset.signals
    ]))
    kernel = estimate_matched_filter(mset.signals[strongest], window)
    compensated = [compensate(s, kernel) for s in mset.signals]
    envelope = np.sum([np.abs(s.samples) for s in compensated], axis=0)
    coarse = pick_peaks(
        SampledSignal(envelope, mset.rate_hz), num_events, window
    )
    # the envelope argmax leans toward whichever side of the array the
    # wavefront reaches first; recentering on the mean of the per-channel
    # peaks keeps every channel's event inside the common window
    half = window // 2
    centers = []
    for c in coarse.indices:
        per_channel = []
        for s in compensated:
            lo = max(0, c - half)
            hi = min(len(s), c + half)
            segment = np.abs(s.samples[lo:hi])
            per_channel.append(lo + int(np.argmax(segment)))
        centers.append(int(round(np.mean(per_channel))))
    return compensated, PeakList(tuple(centers), coarse.min_separation)


def ground_truth_pipeline(
    mset: MeasurementSet, window_ms: float = 2.0, num_events: int = 4,
    c: float = 343.0,
) -> GroundTruth:
    """Locate acoustic events at the native rate without interpolation.

    The records are match-filtered against the direct-path kernel, events
    are picked on the channel-summed magnitude, and each event gets
    no-interpolation TOA/TDOA estimates and a localization that downstream
    evaluations treat as reference truth.
    """
    window = int(round(window_ms * 1e-3 * mset.rate_hz))
    compensated, peaks = _compensated_events(mset, window, num_events)
    icfg = InterpConfig("none")
    events = []
    for center in peaks.indices:
        toas, tdoas, position = _event_estimates(
            compensated, center, window, icfg, mset.geometry, c
        )
        events.append(ReferenceEvent(center, toas, tdoas, position))
    return GroundTruth(tuple(events), mset.rate_hz)


def evaluate_measurement(
    mset: MeasurementSet,
    factor: int = 6,
    methods: tuple = METHODS,
    interp_factor: int = 500,
    s_sinc: int = 3,
    s_ws: int = 13,
    window_ms: float = 2.0,
    num_events: int = 4,
    c: float = 343.0,
) -> tuple:
    """Judge interpolation methods at a decimated rate against full rate.

    The full-rate records are compensated once and yield the reference
    events; the same compensated records are then decimated by ``factor``
    (matched filtering commutes with the anti-aliased decimation, and
    reusing them keeps both rates on one time axis) and every method
    re-estimates each event inside a window of the same duration. Reported
    errors are absolute differences against the reference; positional
    error is in meters, not normalized, since measured reflector ranges
    vary per event.

    Returns
    -------
    (GroundTruth, tuple of MeasuredRow)
    """
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}")
    window_full = int(round(window_ms * 1e-3 * mset.rate_hz))
    compensated_full, peaks = _compensated_events(
        mset, window_full, num_events
    )
    icfg_none = InterpConfig("none")
    events = []
    for center in peaks.indices:
        toas, tdoas, position = _event_estimates(
            compensated_full, center, window_full, icfg_none,
            mset.geometry, c,
        )
        events.append(ReferenceEvent(center, toas, tdoas, position))
    reference = GroundTruth(tuple(events), mset.rate_hz)

    compensated = [downsample(s, factor) for s in compensated_full]
    window = int(round(window_ms * 1e-3 * compensated[0].rate_hz))
    rows = []
    for e, event in enumerate(reference.events):
        center = int(round(event.center_index / factor))
        for method in methods:
            s = {"sinc": s_sinc, "whittaker_shannon": s_ws}.get(method, 1)
            icfg = InterpConfig(method, s=s, factor=interp_factor)
            toas, tdoas, position = _event_estimates(
                compensated, center, window, icfg, mset.geometry, c
            )
            rows.append(
                MeasuredRow(
                    event=e,
                    method=method,
                    toa_errors=np.abs(toas - event.toas),
                    tdoa_errors=np.abs(tdoas - event.tdoas),
                    pos_error_m=float(
                        np.linalg.norm(position - event.position)
                    ),
                )
            )
    return reference, tuple(rows)
