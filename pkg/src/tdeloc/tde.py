"""Windowing, cross-correlation, and interpolated TOA/TDOA estimation.

The estimation chain assumes each analysis window isolates a single
reflection: a window is cut around a nominal arrival sample, the windowed
records (or their pairwise cross-correlations) are reduced to a
:class:`~tdeloc.interp.PeakNeighborhood`, and one of the sub-sample
refinement methods turns the discrete peak into a time estimate.

Sign conventions
----------------
``xcorr(a, b)`` peaks at the delay of ``b`` relative to ``a``, so
``estimate_tdoa(frame_m, frame_n)`` returns t_n - t_m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate
from scipy.signal.windows import hann

from .errors import EmptyKernel
from .interp import InterpConfig, PeakNeighborhood, refine_peak
from .signals import SampledSignal

#: Window shapes accepted by :func:`sliding_window`.
WINDOW_SHAPES = ("rectangular", "hann")

# direct correlation is exact; beyond this length the FFT path is used
_DIRECT_XCORR_MAX = 256


@dataclass(frozen=True, eq=False)
class Frame:
    """One windowed segment of a longer record.

    Attributes
    ----------
    values : numpy.ndarray
        The L windowed samples.
    rate_hz : float
        Sampling rate of the parent signal.
    start : int
        Index in the parent signal of ``values[0]`` (may be negative when
        the window ran past the start and was zero-padded).
    padded : bool
        True when any window sample fell outside the parent signal.
    """

    values: np.ndarray
    rate_hz: float
    start: int
    padded: bool = False

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or len(arr) == 0:
            raise ValueError("frame values must be a non-empty 1-D sequence")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class FrameSet:
    """Per-sensor frames cut from the same window position.

    Attributes
    ----------
    window_index : int
        Nominal arrival sample v the windows are centered on.
    length : int
        Window length L in samples.
    window_shape : str
        One of :data:`WINDOW_SHAPES`.
    frames : tuple of Frame
        One frame per sensor, all of length L at a common rate.
    """

    window_index: int
    length: int
    window_shape: str
    frames: tuple

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError("frame set needs at least one frame")
        rates = {f.rate_hz for f in self.frames}
        if len(rates) != 1:
            raise ValueError("frames must share one sampling rate")
        if any(len(f) != self.length for f in self.frames):
            raise ValueError("frames must all have the declared length")

    @classmethod
    def from_signals(cls, signals, v: int, length: int,
                     shape: str = "rectangular") -> "FrameSet":
        frames = tuple(sliding_window(s, v, length, shape) for s in signals)
        return cls(v, length, shape, frames)


def _window_taper(length: int, shape: str) -> np.ndarray:
    if shape == "rectangular":
        return np.ones(length)
    if shape == "hann":
        # periodic form: the taper is exactly 1 at index L/2, so a pulse at
        # the window center passes through unattenuated
        return hann(length, sym=False)
    raise ValueError(f"unknown window shape {shape!r}")


def sliding_window(h: SampledSignal, v: int, length: int,
                   shape: str = "rectangular") -> Frame:
    """Cut an L-sample window centered on sample v.

    The window covers parent samples [v - L//2, v + L - L//2); samples
    outside the record are zero and flag the frame as padded.

    Parameters
    ----------
    h : SampledSignal
        Parent record.
    v : int
        Center sample index.
    length : int
        Window length L >= 1.
    shape : str
        Taper applied after slicing, one of :data:`WINDOW_SHAPES`.
    """
    if length < 1:
        raise ValueError("window length must be >= 1")
    if v < 0:
        raise ValueError("window center must be >= 0")
    taper = _window_taper(length, shape)
    start = v - length // 2
    stop = start + length
    values = np.zeros(length)
    lo = max(start, 0)
    hi = min(stop, len(h))
    padded = lo > start or hi < stop
    if hi > lo:
        values[lo - start : hi - start] = h.samples[lo:hi]
    return Frame(values * taper, h.rate_hz, start, padded)


def matched_filter(measured: SampledSignal, kernel: SampledSignal) -> SampledSignal:
    """Correlate a record with a pulse template.

    Output sample k is sum_i measured[k + i] * kernel[i], so a kernel-shaped
    event starting at sample k peaks at k; the output has the same length
    and time axis as the input.

    Raises
    ------
    EmptyKernel
        If the kernel has no samples.
    ValueError
        If the kernel is longer than the record or the rates differ.
    """
    if len(kernel) == 0:
        raise EmptyKernel("matched filter kernel is empty")
    if len(kernel) > len(measured):
        raise ValueError("kernel must not be longer than the record")
    if kernel.rate_hz != measured.rate_hz:
        raise ValueError("kernel and record rates differ")
    full = correlate(measured.samples, kernel.samples, mode="full")
    k = len(kernel)
    return SampledSignal(full[k - 1 : k - 1 + len(measured)], measured.rate_hz)


def xcorr(a: Frame, b: Frame) -> PeakNeighborhood:
    """Full linear cross-correlation of two equal-length frames.

    The result covers lags [-(L-1), L-1] stored at indices [0, 2L-2]; the
    peak sits at lag (index - (L-1)) equal to the delay of ``b`` relative
    to ``a``. Short frames correlate directly (exact); long ones go through
    the FFT, which agrees to 1e-10 relative.
    """
    if len(a) != len(b):
        raise ValueError("frames must have equal lengths")
    if a.rate_hz != b.rate_hz:
        raise ValueError("frames must share one sampling rate")
    method = "direct" if len(a) <= _DIRECT_XCORR_MAX else "fft"
    r = correlate(b.values, a.values, mode="full", method=method)
    return PeakNeighborhood.from_values(r, a.rate_hz)


@dataclass(frozen=True)
class TdeEstimate:
    """One interpolated time estimate.

    Attributes
    ----------
    kind : str
        "toa" or "tdoa".
    sensors : tuple
        The sensor index (TOA) or ordered pair (m, n) (TDOA).
    seconds : float
        The estimate.
    method : str
        Interpolation method that produced it.
    """

    kind: str
    sensors: tuple
    seconds: float
    method: str


def estimate_toa(frame: Frame, v: int, cfg: InterpConfig, *,
                 sensor: int = 0) -> TdeEstimate:
    """Arrival time of the strongest event in a window.

    The refined peak position within the frame is mapped back to the parent
    time axis: t = (v - L//2 + refined) / f_s. With two events in one frame
    the stronger one wins (single-reflection windows are the caller's job).
    """
    values = frame.values
    n = PeakNeighborhood.from_values(values, frame.rate_hz)
    refined = refine_peak(n, cfg)
    t = (v - len(values) // 2 + refined) / frame.rate_hz
    return TdeEstimate("toa", (sensor,), float(t), cfg.method)


def estimate_tdoa(frame_m: Frame, frame_n: Frame, cfg: InterpConfig, *,
                  sensors: tuple = (0, 1)) -> TdeEstimate:
    """Time difference of arrival t_n - t_m between two windowed records.

    The cross-correlation peak lag is refined by the configured method;
    swapping the arguments negates the estimate up to twice the
    interpolation step.
    """
    n = xcorr(frame_m, frame_n)
    refined = refine_peak(n, cfg)
    lag = refined - (len(frame_m) - 1)
    return TdeEstimate("tdoa", tuple(sensors), float(lag / frame_m.rate_hz),
                       cfg.method)
