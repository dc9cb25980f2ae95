"""Synthetic image-source world and parameter sweep harness.

The bench scenario places K unit-amplitude image sources on a spiral of
known ranges around a small circular array: source k arrives at the array
center exactly at t_k = k L / f_s, so analysis windows of length L centered
at the integer samples k L each isolate one reflection per sensor. Records
are rendered by summing exactly sampled band-limited pulses, so every true
arrival time is known to machine precision and estimation error can be
attributed entirely to the methods under test.

Randomness policy
-----------------
Every random draw is derived from the scenario seed through a fixed-shape
seed tree: source angles use (seed, 0, k), sensor noise uses (seed, 1, n),
sweep cells use (seed, 2, cell). Results are therefore bit-identical no
matter how trials are scheduled across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import EmptySet, TdelocError
from .interp import METHODS, InterpConfig
from .locate import (
    ArrayGeometry,
    center_toa,
    estimate_position,
    estimate_slowness,
    localization_error,
    min_window_length,
    pair_difference_matrix,
    pair_indices,
)
from .signals import (
    BANDLIMIT_TAPS,
    SampledSignal,
    ThiranSpec,
    add_noise,
    apply_fractional_delay,
    bandlimit,
)
from .tde import estimate_tdoa, estimate_toa, sliding_window

#: Environment variable limiting sweep-cell worker threads.
THREADS_ENV = "TDELOC_NUM_THREADS"

#: Parameters run_sweep can vary, with their admissible ranges.
SWEEP_RANGES = {
    "rate_hz": (2000.0, 48000.0),
    "factor": (1, 200),
    "snr_db": (-10.0, 60.0),
    "window_ms": (1.0, 16.0),
    "s": (1, 1024),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Bench scenario parameters; defaults match the reference setup.

    Attributes
    ----------
    rate_hz : float
        Sampling rate f_s.
    c : float
        Speed of sound in m/s.
    snr_db : float
        Per-reflection SNR; ``math.inf`` disables noise.
    window_samples : int
        Analysis window length L.
    num_sources : int
        Number of image sources K.
    bandlimit_hz : float or None
        Pulse bandwidth B; None means critically sampled (B = f_s / 2).
    array_radius_m : float
        Circular array radius.
    num_sensors : int
        Sensors on the circle.
    interp_factor : int
        Interpolation factor i shared by the grid-search methods.
    s_sinc : int or None
        Neighborhood half-width for the sinc fit; None selects 1 when
        critically sampled and L for band-limited pulses.
    s_ws : int
        Neighborhood half-width for Whittaker-Shannon reconstruction.
    thiran_order : int
        Synthesis fidelity knob. The default 0 samples the band-limited
        pulse model exactly, so measured errors are estimation errors
        alone. Orders >= 1 realize fractional arrivals with an all-pass
        delay filter of that order instead; the filter's phase residual
        then acts as a synthesis dither that no estimator can recover,
        which is useful for studying robustness but puts a common error
        floor under every method.
    seed : int
        Root of the reproducibility seed tree.
    """

    rate_hz: float = 8000.0
    c: float = 343.0
    snr_db: float = 40.0
    window_samples: int = 32
    num_sources: int = 1000
    bandlimit_hz: float | None = None
    array_radius_m: float = 0.05
    num_sensors: int = 6
    interp_factor: int = 200
    s_sinc: int | None = None
    s_ws: int = 9
    thiran_order: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.rate_hz > 0 and self.c > 0 and self.array_radius_m > 0):
            raise ValueError("rate_hz, c, and array_radius_m must be positive")
        if self.num_sources < 1:
            raise ValueError("need at least one image source")
        if self.num_sensors < 3:
            raise ValueError("2-D localization needs at least 3 sensors")
        if self.interp_factor < 1 or int(self.interp_factor) != self.interp_factor:
            raise ValueError("interp_factor must be an integer >= 1")
        if self.s_ws < 1 or (self.s_sinc is not None and self.s_sinc < 1):
            raise ValueError("neighborhood half-widths must be >= 1")
        if self.thiran_order < 0:
            raise ValueError("thiran_order must be >= 0")
        if self.bandlimit_hz is not None and not (
            0.0 < self.bandlimit_hz <= self.rate_hz / 2.0
        ):
            raise ValueError("bandlimit_hz must be in (0, rate_hz / 2]")
        if self.seed < 0 or int(self.seed) != self.seed:
            raise ValueError("seed must be a non-negative integer")
        min_l = min_window_length(self.geometry(), self.rate_hz, self.c)
        if self.window_samples < min_l:
            raise ValueError(
                f"window of {self.window_samples} samples is shorter than the "
                f"array crossing time ({min_l} samples)"
            )

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.circular(self.num_sensors, self.array_radius_m)

    @property
    def effective_bandlimit_hz(self) -> float:
        if self.bandlimit_hz is None:
            return self.rate_hz / 2.0
        return self.bandlimit_hz

    @property
    def critically_sampled(self) -> bool:
        return self.effective_bandlimit_hz == self.rate_hz / 2.0

    def interp_config(self, method: str) -> InterpConfig:
        """Interpolation settings for one method under this scenario."""
        if method in ("sinc",):
            s = self.s_sinc
            if s is None:
                s = 1 if self.critically_sampled else self.window_samples
        elif method == "whittaker_shannon":
            s = self.s_ws
        else:
            s = 1
        return InterpConfig(method, s=s, factor=self.interp_factor)


@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sweep description.

    Attributes
    ----------
    parameter : str
        Key from :data:`SWEEP_RANGES`.
    values : tuple
        Grid values, evaluated in the given order.
    methods : tuple
        Interpolation method names to compare.
    num_sources : int
        Sources per sweep cell (desk-scale default; the full bench uses
        the ScenarioConfig value).
    """

    parameter: str
    values: tuple
    methods: tuple = ("none", "parabolic", "gaussian", "weighted_frequency",
                      "sinc", "whittaker_shannon")
    num_sources: int = 200

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_RANGES:
            raise ValueError(
                f"unknown sweep parameter {self.parameter!r}; "
                f"expected one of {sorted(SWEEP_RANGES)}"
            )
        if len(self.values) == 0:
            raise ValueError("sweep grid must not be empty")
        lo, hi = SWEEP_RANGES[self.parameter]
        for v in self.values:
            if not lo <= v <= hi:
                raise ValueError(
                    f"{self.parameter} value {v} outside [{lo}, {hi}]"
                )
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        if self.num_sources < 1:
            raise ValueError("need at least one source per cell")


class AggregateStats(NamedTuple):
    """Mean, lower-middle median, and population standard deviation."""

    mean: float
    median: float
    std: float


@dataclass(frozen=True, eq=False)
class TrialErrors:
    """Raw absolute errors from one scenario run for one method.

    Attributes
    ----------
    toa_errors : numpy.ndarray
        Shape (K, N), seconds; NaN marks a failed estimate.
    tdoa_errors : numpy.ndarray
        Shape (K, N(N-1)/2), seconds.
    pos_errors : numpy.ndarray
        Shape (K,), dimensionless normalized localization error.
    failures : int
        Count of estimator invocations that raised.
    """

    toa_errors: np.ndarray
    tdoa_errors: np.ndarray
    pos_errors: np.ndarray
    failures: int


@dataclass(frozen=True)
class ErrorRow:
    """Aggregated statistics for one (sweep value, method) cell."""

    value: float
    method: str
    num_sources: int
    failures: int
    toa: AggregateStats
    tdoa: AggregateStats
    pos: AggregateStats


@dataclass(frozen=True)
class ErrorTable:
    """Sweep output: one row per (value, method), in sweep order."""

    parameter: str
    rows: tuple


def aggregate(values) -> AggregateStats:
    """Mean, median, and standard deviation of a sample.

    The median of an even-sized sample is the lower middle value, so it is
    always an observed value. The standard deviation is the population form.

    Raises
    ------
    EmptySet
        If no values are given.
    """
    arr = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if len(arr) == 0:
        raise EmptySet("no values to aggregate")
    median = float(arr[(len(arr) - 1) // 2])
    return AggregateStats(float(np.mean(arr)), median, float(np.std(arr)))


def place_image_sources(cfg: ScenarioConfig) -> np.ndarray:
    """Positions x_k at ranges k c L / f_s in seeded random directions.

    Source k then reaches the array center exactly at t_k = k L / f_s.
    """
    r_c = cfg.geometry().center
    step = cfg.c * cfg.window_samples / cfg.rate_hz
    out = np.empty((cfg.num_sources, 2))
    for k in range(1, cfg.num_sources + 1):
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0, k)))
        theta = rng.uniform(0.0, 2.0 * np.pi)
        out[k - 1] = r_c + np.array([math.cos(theta), math.sin(theta)]) * k * step
    return out


def _render_record(arrivals_samples: np.ndarray, segments, rate_hz: float,
                   length: int, order: int, band_hz: float) -> np.ndarray:
    """Sum of unit pulses at fractional positions, one per analysis window.

    Each pulse is confined to its own window-aligned segment [lo, hi), so
    any window placed on the arrival grid sees exactly one wavefront and
    nothing of its neighbors' tails. Without the truncation, overlapping
    pulse tails put a bias floor of several tenths of a microsecond on
    every estimator and drown out the differences between them.

    With ``order`` >= 1, fractional arrival times are realized with the
    all-pass delay filter rather than by sampling shifted sinc kernels, so
    no interpolation method under test gets handed its own model as input.
    The impulse is delayed by exactly order + fraction and the short
    response is placed at the remaining integer offset. Order 0 instead
    samples amplitude 2B/fs sinc(2B/fs (kappa - d)) exactly.
    """
    record = np.zeros(length)
    width = 2.0 * band_hz / rate_hz
    nyquist = rate_hz / 2.0
    # margin so the band-limiting filter ramps up inside the local canvas
    pad = BANDLIMIT_TAPS // 2 + 1
    for d, (seg_lo, seg_hi) in zip(arrivals_samples, segments):
        lo = max(seg_lo, 0)
        hi = min(seg_hi, length)
        if hi <= lo:
            continue
        if order == 0:
            kappa = np.arange(lo, hi, dtype=np.float64)
            record[lo:hi] += width * np.sinc(width * (kappa - d))
            continue
        d_int = int(math.floor(d + 0.5))
        body = apply_fractional_delay(
            SampledSignal(np.ones(1), rate_hz),
            ThiranSpec(order + (d - d_int), order),
        ).samples
        local = np.zeros(len(body) + 2 * pad)
        local[pad : pad + len(body)] = body
        if band_hz < nyquist:
            local = bandlimit(SampledSignal(local, rate_hz), band_hz).samples
        start = d_int - order - pad
        p_lo = max(lo, start)
        p_hi = min(hi, start + len(local))
        if p_hi > p_lo:
            record[p_lo:p_hi] += local[p_lo - start : p_hi - start]
    return record


def true_arrival_times(cfg: ScenarioConfig, sources: np.ndarray) -> np.ndarray:
    """Per-source per-sensor arrival times, shape (K, N), seconds."""
    pos = cfg.geometry().positions
    diff = sources[:, None, :] - pos[None, :, :]
    return np.linalg.norm(diff, axis=2) / cfg.c


def synth_sensor_signals(cfg: ScenarioConfig, sources: np.ndarray):
    """Render each sensor's record of all K reflections plus noise.

    Every pulse has unit amplitude (reflections are deliberately not scaled
    with distance, keeping the per-reflection SNR constant). Fractional
    arrivals go through the Thiran delay filter, each pulse is band-limited
    with the linear-phase low-pass when B is below Nyquist and confined to
    its own analysis-window segment, and white noise is added last.
    """
    l_win = cfg.window_samples
    length = (cfg.num_sources + 1) * l_win
    # pulse k owns the analysis-window segment around its center arrival
    segments = [
        (k * l_win - l_win // 2, k * l_win + l_win - l_win // 2)
        for k in range(1, cfg.num_sources + 1)
    ]
    toas = true_arrival_times(cfg, sources)
    signals = []
    for n in range(cfg.num_sensors):
        record = _render_record(
            toas[:, n] * cfg.rate_hz, segments, cfg.rate_hz, length,
            cfg.thiran_order, cfg.effective_bandlimit_hz,
        )
        signal = SampledSignal(record, cfg.rate_hz)
        if math.isfinite(cfg.snr_db):
            noise_seed = int(
                np.random.SeedSequence((cfg.seed, 1, n)).generate_state(1)[0]
            )
            signal = add_noise(
                signal, cfg.snr_db, noise_seed,
                ref_window=cfg.window_samples,
            )
        signals.append(signal)
    return signals


def run_trial(cfg: ScenarioConfig, methods=("none",)) -> dict:
    """Estimate TOA, TDOA, and position for every source with every method.

    All methods see the same records and windows; only the sub-sample
    refinement differs. Estimator exceptions are recorded as NaN errors and
    counted, never raised.

    Returns
    -------
    dict
        Method name to :class:`TrialErrors`.
    """
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}")
    g = cfg.geometry()
    v_mat = pair_difference_matrix(g)
    pairs = pair_indices(cfg.num_sensors)
    sources = place_image_sources(cfg)
    signals = synth_sensor_signals(cfg, sources)
    toas = true_arrival_times(cfg, sources)
    k_total = cfg.num_sources
    n_sensors = cfg.num_sensors
    l_win = cfg.window_samples

    cfgs = {m: cfg.interp_config(m) for m in methods}
    toa_err = {m: np.full((k_total, n_sensors), np.nan) for m in methods}
    tdoa_err = {m: np.full((k_total, len(pairs)), np.nan) for m in methods}
    pos_err = {m: np.full(k_total, np.nan) for m in methods}
    failures = dict.fromkeys(methods, 0)

    for k in range(1, k_total + 1):
        v_k = k * l_win
        frames = [sliding_window(s, v_k, l_win) for s in signals]
        true_toa = toas[k - 1]
        true_tdoa = np.array([true_toa[n] - true_toa[m] for m, n in pairs])
        for method in methods:
            icfg = cfgs[method]
            est_toa = np.full(n_sensors, np.nan)
            est_tdoa = np.full(len(pairs), np.nan)
            for n in range(n_sensors):
                try:
                    est = estimate_toa(frames[n], v_k, icfg, sensor=n)
                    est_toa[n] = est.seconds
                except TdelocError:
                    failures[method] += 1
            for p, (m, n) in enumerate(pairs):
                try:
                    est = estimate_tdoa(frames[m], frames[n], icfg,
                                        sensors=(m, n))
                    est_tdoa[p] = est.seconds
                except TdelocError:
                    failures[method] += 1
            toa_err[method][k - 1] = np.abs(est_toa - true_toa)
            tdoa_err[method][k - 1] = np.abs(est_tdoa - true_tdoa)
            if np.all(np.isfinite(est_tdoa)) and np.all(np.isfinite(est_toa)):
                try:
                    s_hat = estimate_slowness(v_mat, est_tdoa)
                    x_hat = estimate_position(
                        s_hat, center_toa(est_toa), g, cfg.c
                    )
                    pos_err[method][k - 1] = localization_error(
                        x_hat, sources[k - 1], g.center
                    )
                except TdelocError:
                    failures[method] += 1
            else:
                failures[method] += 1

    return {
        m: TrialErrors(toa_err[m], tdoa_err[m], pos_err[m], failures[m])
        for m in methods
    }


def _apply_parameter(base: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    if parameter == "rate_hz":
        # hold the window duration and the relative bandwidth fixed, not
        # the sample count or the absolute cutoff
        ratio = float(value) / base.rate_hz
        samples = int(round(base.window_samples * ratio))
        band = None if base.bandlimit_hz is None else base.bandlimit_hz * ratio
        return replace(
            base, rate_hz=float(value), window_samples=samples, bandlimit_hz=band
        )
    if parameter == "factor":
        return replace(base, interp_factor=int(value))
    if parameter == "snr_db":
        return replace(base, snr_db=float(value))
    if parameter == "window_ms":
        samples = int(round(float(value) * base.rate_hz / 1000.0))
        return replace(base, window_samples=samples)
    # parameter == "s": both grid-search methods share the swept half-width
    return replace(base, s_sinc=int(value), s_ws=int(value))


def _finite(values: np.ndarray) -> np.ndarray:
    flat = np.asarray(values).ravel()
    return flat[np.isfinite(flat)]


def _cell_rows(base: ScenarioConfig, spec: SweepSpec, index: int) -> list:
    value = spec.values[index]
    seed = int(
        np.random.SeedSequence((base.seed, 2, index)).generate_state(1)[0]
    )
    cfg = _apply_parameter(base, spec.parameter, value)
    cfg = replace(cfg, num_sources=spec.num_sources, seed=seed)
    trial = run_trial(cfg, spec.methods)
    rows = []
    for method in spec.methods:
        errors = trial[method]
        rows.append(
            ErrorRow(
                value=float(value),
                method=method,
                num_sources=spec.num_sources,
                failures=errors.failures,
                toa=aggregate(_finite(errors.toa_errors)),
                tdoa=aggregate(_finite(errors.tdoa_errors)),
                pos=aggregate(_finite(errors.pos_errors)),
            )
        )
    return rows


def _worker_count(num_cells: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, min(int(env), num_cells))
    return max(1, min(os.cpu_count() or 1, num_cells))


def run_sweep(spec: SweepSpec, base: ScenarioConfig = ScenarioConfig()) -> ErrorTable:
    """Run one trial per grid value and aggregate into an error table.

    Cells run on a small thread pool (bounded by the TDELOC_NUM_THREADS
    environment variable); each has its own derived seed, so the table is
    identical however cells are scheduled.
    """
    indices = range(len(spec.values))
    workers = _worker_count(len(spec.values))
    if workers == 1:
        per_cell = [_cell_rows(base, spec, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_cell = list(pool.map(lambda i: _cell_rows(base, spec, i), indices))
    rows = [row for cell in per_cell for row in cell]
    return ErrorTable(spec.parameter, tuple(rows))
