"""Tests for measured-data ingestion against a synthetic fixture.

The fixture plants a direct path and three reflections with known
geometry at 48 kHz, so the analytic arrival times play the role the
simulation's closed-form truths play elsewhere.
"""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.io import wavfile

from tdeloc.errors import (
    FormatError,
    GeometryMismatch,
    InsufficientPeaks,
    InvalidFactor,
    NoPeak,
)
from tdeloc.ingest import (
    GROUND_TRUTH_NOTE,
    MeasurementSet,
    PeakList,
    compensate,
    downsample,
    estimate_matched_filter,
    evaluate_measurement,
    ground_truth_pipeline,
    load_measurement,
    pick_peaks,
)
from tdeloc.locate import ArrayGeometry, pair_indices
from tdeloc.signals import SampledSignal

RATE = 48000.0
C = 343.0
RADIUS = 0.2
NUM_CH = 8
# direct path plus three reflectors, direct strongest; ranges spaced so
# that event windows never overlap across the array's 56-sample crossing
SOURCES = np.array([
    [1.0, 0.1],
    [-2.1, 0.7],
    [2.4, 2.55],
    [-1.4, -4.7],
])
AMPLITUDES = (1.0, 0.6, 0.5, 0.4)
PULSE_WIDTH = 2.0 * 3000.0 / RATE  # 3 kHz band survives decimation to 8 kHz
PULSE_SUPPORT = 64  # tails cut outside any analysis window, so events
# stay isolated the way the pipeline's premise requires
LENGTH = 1024


def geometry():
    return ArrayGeometry.circular(NUM_CH, RADIUS)


def true_toas():
    diff = SOURCES[:, None, :] - geometry().positions[None, :, :]
    return np.linalg.norm(diff, axis=2) / C


def render_channels():
    toas = true_toas() * RATE
    channels = np.zeros((LENGTH, NUM_CH))
    for k, amp in enumerate(AMPLITUDES):
        for n in range(NUM_CH):
            center = int(round(toas[k, n]))
            lo = max(0, center - PULSE_SUPPORT)
            hi = min(LENGTH, center + PULSE_SUPPORT)
            grid = np.arange(lo, hi, dtype=np.float64)
            channels[lo:hi, n] += amp * np.sinc(
                PULSE_WIDTH * (grid - toas[k, n])
            )
    return channels


def fixture_set():
    channels = render_channels()
    signals = tuple(
        SampledSignal(channels[:, n], RATE) for n in range(NUM_CH)
    )
    return MeasurementSet(signals, geometry(), "FIX1")


def write_fixture(tmp_path, dtype=np.float32, sensors=None, rate_hz=None):
    channels = render_channels()
    if dtype == np.int16:
        data = np.round(channels / np.abs(channels).max() * 0.8 * 2**15)
        data = data.astype(np.int16)
    else:
        data = channels.astype(dtype)
    audio = tmp_path / "fixture.wav"
    wavfile.write(audio, int(RATE), data)
    if sensors is None:
        sensors = [[x, y, 0.0] for x, y in geometry().positions]
    meta = {"sensors": sensors, "source_label": "FIX1"}
    if rate_hz is not None:
        meta["rate_hz"] = rate_hz
    sidecar = tmp_path / "fixture.json"
    sidecar.write_text(json.dumps(meta))
    return audio, sidecar


class TestLoadMeasurement:
    def test_float_fixture_loads(self, tmp_path):
        mset = load_measurement(*write_fixture(tmp_path))
        assert mset.num_channels == NUM_CH
        assert mset.rate_hz == RATE
        assert mset.source_label == "FIX1"
        # constant z in the sidecar collapses to a 2-D layout
        assert mset.geometry.dimension == 2
        assert_allclose(mset.geometry.positions, geometry().positions)

    def test_pcm16_normalized_to_unit_range(self, tmp_path):
        mset = load_measurement(*write_fixture(tmp_path, dtype=np.int16))
        peak = max(np.abs(s.samples).max() for s in mset.signals)
        assert 0.7 < peak <= 1.0
        reference = load_measurement(*write_fixture(tmp_path))
        scale = peak / max(
            np.abs(s.samples).max() for s in reference.signals
        )
        assert_allclose(
            mset.signals[0].samples,
            reference.signals[0].samples * scale,
            atol=1e-4,
        )

    def test_sensor_count_mismatch(self, tmp_path):
        audio, _ = write_fixture(tmp_path)
        sidecar = tmp_path / "bad.json"
        sidecar.write_text(json.dumps({"sensors": [[0.0, 0.0], [1.0, 0.0]]}))
        with pytest.raises(GeometryMismatch):
            load_measurement(audio, sidecar)

    def test_sidecar_rate_mismatch(self, tmp_path):
        audio, sidecar = write_fixture(tmp_path, rate_hz=44100.0)
        with pytest.raises(FormatError, match="rate"):
            load_measurement(audio, sidecar)

    def test_matching_sidecar_rate_accepted(self, tmp_path):
        mset = load_measurement(*write_fixture(tmp_path, rate_hz=48000.0))
        assert mset.rate_hz == RATE

    def test_corrupt_sidecar(self, tmp_path):
        audio, sidecar = write_fixture(tmp_path)
        sidecar.write_text("{not json")
        with pytest.raises(FormatError, match="JSON"):
            load_measurement(audio, sidecar)

    def test_sidecar_without_sensors(self, tmp_path):
        audio, sidecar = write_fixture(tmp_path)
        sidecar.write_text(json.dumps({"source_label": "x"}))
        with pytest.raises(FormatError, match="sensors"):
            load_measurement(audio, sidecar)

    def test_empty_audio(self, tmp_path):
        audio = tmp_path / "empty.wav"
        wavfile.write(audio, int(RATE), np.zeros((0, 2), dtype=np.float32))
        _, sidecar = write_fixture(tmp_path)
        with pytest.raises(FormatError):
            load_measurement(audio, sidecar)

    def test_non_planar_sidecar_keeps_three_dimensions(self, tmp_path):
        sensors = [[x, y, 0.01 * n] for n, (x, y) in
                   enumerate(geometry().positions)]
        mset = load_measurement(*write_fixture(tmp_path, sensors=sensors))
        assert mset.geometry.dimension == 3


class TestMeasurementSet:
    def test_channel_count_must_match_geometry(self):
        signals = tuple(
            SampledSignal(np.ones(8), RATE) for _ in range(3)
        )
        with pytest.raises(GeometryMismatch):
            MeasurementSet(signals, geometry(), "x")

    def test_unequal_lengths_rejected(self):
        signals = tuple(
            SampledSignal(np.ones(8 + n), RATE) for n in range(NUM_CH)
        )
        with pytest.raises(FormatError):
            MeasurementSet(signals, geometry(), "x")


class TestEstimateMatchedFilter:
    def test_kernel_matches_planted_pulse(self):
        rir = fixture_set().signals[0].samples
        kernel = estimate_matched_filter(SampledSignal(rir, RATE), 96)
        peak = int(np.argmax(np.abs(rir)))
        segment = rir[peak - 48 : peak + 48]
        cosine = np.dot(kernel, segment) / (
            np.linalg.norm(kernel) * np.linalg.norm(segment)
        )
        assert cosine >= 0.999

    def test_kernel_has_unit_energy(self):
        kernel = estimate_matched_filter(fixture_set().signals[2], 96)
        assert_allclose(np.linalg.norm(kernel), 1.0)

    def test_zero_record_raises(self):
        with pytest.raises(NoPeak):
            estimate_matched_filter(SampledSignal(np.zeros(256), RATE), 96)

    def test_autocorrelation_peaks_at_zero_lag(self):
        kernel = estimate_matched_filter(fixture_set().signals[0], 96)
        auto = np.correlate(kernel, kernel, mode="full")
        assert int(np.argmax(auto)) == len(kernel) - 1


class TestCompensate:
    def test_event_peaks_at_its_center(self):
        kernel = estimate_matched_filter(fixture_set().signals[0], 96)
        record = np.zeros(512)
        record[300 - 48 : 300 + 48] = kernel
        comp = compensate(SampledSignal(record, RATE), kernel)
        assert int(np.argmax(np.abs(comp.samples))) == 300
        assert len(comp) == 512


class TestPickPeaks:
    def test_four_pulses_recovered(self):
        x = np.zeros(600)
        planted = (50, 200, 350, 500)
        for amp, idx in zip((1.0, 0.6, 0.8, 0.4), planted):
            x[idx] = amp
        peaks = pick_peaks(SampledSignal(x, RATE), 4, 96)
        assert peaks.indices == planted

    def test_close_pair_keeps_stronger(self):
        x = np.zeros(300)
        x[100] = 1.0
        x[140] = 0.9  # within min_separation of the stronger peak
        x[250] = 0.5
        peaks = pick_peaks(SampledSignal(x, RATE), 2, 96)
        assert peaks.indices == (100, 250)

    def test_negative_peaks_count(self):
        x = np.zeros(300)
        x[80] = -1.0
        x[220] = 0.4
        peaks = pick_peaks(SampledSignal(x, RATE), 2, 96)
        assert peaks.indices == (80, 220)

    def test_insufficient_peaks(self):
        x = np.zeros(600)
        x[[50, 200, 350]] = 1.0
        with pytest.raises(InsufficientPeaks):
            pick_peaks(SampledSignal(x, RATE), 5, 96)

    def test_zero_signal_has_no_peaks(self):
        with pytest.raises(InsufficientPeaks):
            pick_peaks(SampledSignal(np.zeros(100), RATE), 1, 10)

    def test_amplitude_tie_breaks_by_index(self):
        x = np.zeros(300)
        x[120] = 1.0
        x[130] = 1.0
        peaks = pick_peaks(SampledSignal(x, RATE), 1, 50)
        assert peaks.indices == (120,)

    def test_peak_list_validates_separation(self):
        with pytest.raises(ValueError):
            PeakList((10, 20), min_separation=50)
        with pytest.raises(ValueError):
            PeakList((), min_separation=1)


class TestDownsample:
    def test_factor_one_is_identity_copy(self):
        signal = fixture_set().signals[0]
        out = downsample(signal, 1)
        assert out.rate_hz == signal.rate_hz
        assert_array_equal(out.samples, signal.samples)
        assert out.samples is not signal.samples

    def test_invalid_factor(self):
        signal = fixture_set().signals[0]
        with pytest.raises(InvalidFactor):
            downsample(signal, 0)
        with pytest.raises(InvalidFactor):
            downsample(signal, 2.5)

    def test_rate_divides(self):
        out = downsample(fixture_set().signals[0], 6)
        assert out.rate_hz == 8000.0
        assert len(out) == int(np.ceil(LENGTH / 6))

    def test_pulse_time_preserved(self):
        # 2 kHz pulse at 10 ms must stay at 10 ms after 48k -> 8k
        grid = np.arange(4096, dtype=np.float64)
        width = 2.0 * 2000.0 / RATE
        x = np.sinc(width * (grid - 480.0))
        out = downsample(SampledSignal(x, RATE), 6)
        assert int(np.argmax(out.samples)) == 80

    def test_event_spacing_preserved(self):
        grid = np.arange(8192, dtype=np.float64)
        width = 2.0 * 2000.0 / RATE
        x = np.sinc(width * (grid - 1200.0)) + 0.8 * np.sinc(
            width * (grid - 4200.0)
        )
        out = downsample(SampledSignal(x, RATE), 6)
        mag = np.abs(out.samples)
        first = int(np.argmax(mag[:500]))
        second = 500 + int(np.argmax(mag[500:]))
        assert first == 200
        assert second == 700


class TestGroundTruthPipeline:
    def test_reference_structure(self):
        truth = ground_truth_pipeline(fixture_set())
        assert truth.rate_hz == RATE
        assert truth.note == GROUND_TRUTH_NOTE
        assert len(truth.events) == 4
        centers = [e.center_index for e in truth.events]
        assert centers == sorted(centers)

    def test_event_centers_near_mean_arrivals(self):
        truth = ground_truth_pipeline(fixture_set())
        expected = np.mean(true_toas(), axis=1) * RATE
        centers = np.array([e.center_index for e in truth.events])
        assert np.max(np.abs(centers - expected)) < 2.0

    def test_toas_recovered_within_one_sample(self):
        truth = ground_truth_pipeline(fixture_set())
        analytic = true_toas()
        for k, event in enumerate(truth.events):
            assert np.max(np.abs(event.toas - analytic[k])) <= 1.0 / RATE

    def test_tdoas_recovered_within_half_sample(self):
        truth = ground_truth_pipeline(fixture_set())
        analytic = true_toas()
        pairs = pair_indices(NUM_CH)
        for k, event in enumerate(truth.events):
            expect = np.array([
                analytic[k, n] - analytic[k, m] for m, n in pairs
            ])
            # half-sample rounding plus a window-truncation allowance
            assert np.max(np.abs(event.tdoas - expect)) <= 0.6 / RATE

    def test_positions_recovered(self):
        truth = ground_truth_pipeline(fixture_set())
        for k, event in enumerate(truth.events):
            assert np.linalg.norm(event.position - SOURCES[k]) < 0.06

    def test_deterministic(self):
        a = ground_truth_pipeline(fixture_set())
        b = ground_truth_pipeline(fixture_set())
        for ea, eb in zip(a.events, b.events):
            assert ea.center_index == eb.center_index
            assert_array_equal(ea.toas, eb.toas)
            assert_array_equal(ea.tdoas, eb.tdoas)
            assert_array_equal(ea.position, eb.position)


class TestEvaluateMeasurement:
    def test_row_layout(self):
        methods = ("none", "whittaker_shannon")
        reference, rows = evaluate_measurement(
            fixture_set(), methods=methods
        )
        assert len(rows) == 4 * len(methods)
        assert [(r.event, r.method) for r in rows[:2]] == [
            (0, "none"), (0, "whittaker_shannon"),
        ]
        for row in rows:
            assert row.toa_errors.shape == (NUM_CH,)
            assert row.tdoa_errors.shape == (NUM_CH * (NUM_CH - 1) // 2,)
            assert np.isfinite(row.pos_error_m)
            assert row.pos_error_m >= 0.0

    def test_interpolation_beats_rounding(self):
        methods = ("none", "sinc", "whittaker_shannon")
        _, rows = evaluate_measurement(fixture_set(), methods=methods)
        mean_tdoa = {
            m: np.mean([
                row.tdoa_errors.mean() for row in rows if row.method == m
            ])
            for m in methods
        }
        assert mean_tdoa["whittaker_shannon"] < mean_tdoa["none"]
        assert mean_tdoa["sinc"] < mean_tdoa["none"]

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            evaluate_measurement(fixture_set(), methods=("cubic",))
