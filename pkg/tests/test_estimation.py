import json
import random

import numpy as np
import pytest

from mimomc.errors import DomainError
from mimomc.estimation import (StackedData, matched_filter, music_spectrum, resolution_success,
                               sample_covariance, stack_and_reshape, estimate_from_pulses,
                               MatchedPulse)
from mimomc.scene import (SceneConfig, Target, doppler_vector, make_waveforms, receive_steering,
                          steering_matrix, transmit_steering)
from mimomc.synth import channel_matrix, synthesize_pulse

SCENE = SceneConfig(num_tx=20, num_rx=40, num_samples=128, num_pulses=5)


@pytest.fixture(scope="module")
def waveforms():
    return make_waveforms("gaussian", SCENE.num_tx, SCENE.num_samples, seed=4)


def _pulses(targets, waveforms, scene=SCENE):
    return [synthesize_pulse(scene, targets, waveforms, q) for q in range(1, scene.num_pulses + 1)]


def test_matched_filter_returns_channel(waveforms):
    targets = [Target(12.0, 300.0, 1 - 1j), Target(-7.0, 210.0, 0.5)]
    z = synthesize_pulse(SCENE, targets, waveforms, 3)
    y = matched_filter(z, waveforms)
    np.testing.assert_allclose(y.entries, channel_matrix(SCENE, targets, 3), atol=1e-10)
    assert y.pulse_index == 3


def test_matched_filter_single_broadside_target(waveforms):
    z = synthesize_pulse(SCENE, [Target(0.0, 0.0, 1.0)], waveforms, 1)
    np.testing.assert_allclose(matched_filter(z, waveforms).entries, np.ones((40, 20)), atol=1e-10)
    assert not np.any(matched_filter(np.zeros((40, 128)), waveforms).entries)
    with pytest.raises(DomainError):
        matched_filter(np.zeros((40, 64)), waveforms)


def test_stack_single_target_structure(waveforms):
    t = Target(17.0, 250.0, 0.3 + 2j)
    y = stack_and_reshape([matched_filter(z, waveforms) for z in _pulses([t], waveforms)],
                          5, 20, 40).entries
    f = np.kron(doppler_vector(t.speed, 5, SCENE.pri, SCENE.wavelength),
                transmit_steering(t.angle, 20, SCENE.tx_spacing, SCENE.wavelength))
    b = receive_steering(t.angle, 40, SCENE.rx_spacing, SCENE.wavelength)
    np.testing.assert_allclose(y, t.reflectivity * np.outer(f, b), atol=1e-10)
    assert np.linalg.matrix_rank(y, tol=1e-8 * np.linalg.norm(y, 2)) == 1


def test_stack_reconstruction_and_order(waveforms):
    targets = [Target(-25.0, 160.0, 1.0), Target(4.0, 390.0, -1j), Target(40.0, 300.0, 2.0)]
    matched = [matched_filter(z, waveforms) for z in _pulses(targets, waveforms)]
    y = stack_and_reshape(matched, 5, 20, 40)
    shuffled = stack_and_reshape(list(reversed(matched)), 5, 20, 40)
    np.testing.assert_array_equal(y.entries, shuffled.entries)
    angles = [t.angle for t in targets]
    a = steering_matrix(angles, 20, SCENE.tx_spacing, SCENE.wavelength)
    d = np.stack([doppler_vector(t.speed, 5, SCENE.pri, SCENE.wavelength) for t in targets], 1)
    f = np.concatenate([a * d[q] for q in range(5)], axis=0)
    sigma = np.diag([t.reflectivity for t in targets])
    b = steering_matrix(angles, 40, SCENE.rx_spacing, SCENE.wavelength)
    assert np.linalg.norm(y.entries - f @ sigma @ b.T) / np.linalg.norm(y.entries) <= 1e-10


def test_stack_single_pulse():
    p = MatchedPulse(np.arange(6.0).reshape(3, 2), 1)
    np.testing.assert_array_equal(stack_and_reshape([p], 1, 2, 3).entries, p.entries.T)


def test_stack_validation():
    p = MatchedPulse(np.zeros((3, 2)), 1)
    with pytest.raises(DomainError):
        stack_and_reshape([p, p], 2, 2, 3)
    with pytest.raises(DomainError):
        stack_and_reshape([MatchedPulse(np.zeros((2, 2)), 1)], 1, 2, 3)


def test_covariance_properties(waveforms):
    rng = np.random.default_rng(0)
    y = rng.standard_normal((10, 7)) + 1j * rng.standard_normal((10, 7))
    r = sample_covariance(StackedData(y, 2, 5, 7))
    assert np.linalg.norm(r - r.conj().T) <= 1e-12
    assert not np.any(sample_covariance(StackedData(np.zeros((10, 7)), 2, 5, 7)))
    targets = [Target(-30.0, 200.0, 1.0), Target(10.0, 350.0, 1j)]
    for k in (1, 2):
        matched = [matched_filter(z, waveforms) for z in _pulses(targets[:k], waveforms)]
        r = sample_covariance(stack_and_reshape(matched, 5, 20, 40))
        w = np.linalg.eigvalsh(r)
        assert np.sum(w > 1e-8 * np.trace(r).real) == k


def _cov(targets, waveforms):
    matched = [matched_filter(z, waveforms) for z in _pulses(targets, waveforms)]
    return sample_covariance(stack_and_reshape(matched, 5, 20, 40))


def test_music_two_targets_fine_grid(waveforms):
    targets = [Target(-10.0, 150.0, 1.0), Target(10.0, 400.0, 1.0)]
    grid = np.round(np.arange(-30, 30.0001, 0.01), 6)
    report = music_spectrum(_cov(targets, waveforms), 2, SCENE, grid, [150.0, 400.0])
    assert sorted(report.angles) == pytest.approx([-10.0, 10.0], abs=0.05)


def test_music_single_target_peak_at_truth(waveforms):
    t = Target(6.5, 275.0, 1.0)
    report = music_spectrum(_cov([t], waveforms), 1, SCENE)
    i, j = np.unravel_index(np.argmax(report.spectrum), report.spectrum.shape)
    assert report.angle_grid[j] == pytest.approx(6.5)
    assert report.speed_grid[i] == pytest.approx(275.0)
    assert report.peaks[0].angle == pytest.approx(6.5, abs=1e-6)
    assert report.peaks[0].speed == pytest.approx(275.0, abs=1e-4)


def test_music_off_grid_speeds_close_in_doppler(waveforms):
    # speeds 6 m/s apart between grid rows: angle and speed couple along a diagonal valley
    targets = [Target(-14.6478, 249.556, 0.7), Target(-16.767, 243.644, 1.4)]
    report = music_spectrum(_cov(targets, waveforms), 2, SCENE)
    assert sorted(report.angles) == pytest.approx([-16.767, -14.6478], abs=1e-5)
    assert sorted(p.speed for p in report.peaks) == pytest.approx([243.644, 249.556], abs=1e-2)


def test_music_scale_invariance(waveforms):
    cov = _cov([Target(-3.0, 200.0, 1.0), Target(22.0, 300.0, 1.0)], waveforms)
    grid = np.arange(-40, 40.0001, 0.1)
    a = music_spectrum(cov, 2, SCENE, grid, [200.0, 300.0])
    b = music_spectrum(7.5 * cov, 2, SCENE, grid, [200.0, 300.0])
    assert np.argmax(a.spectrum) == np.argmax(b.spectrum)
    assert a.angles == pytest.approx(b.angles, abs=1e-6)


def test_music_validation(waveforms):
    cov = np.eye(100)
    with pytest.raises(DomainError):
        music_spectrum(np.eye(10), 1, SCENE)
    with pytest.raises(DomainError):
        music_spectrum(cov, 100, SCENE)
    with pytest.raises(DomainError):
        music_spectrum(cov, 1, SCENE, [90.0])


def test_resolution_success_examples():
    assert resolution_success([5.0], [5.0], 1.0) == [True]
    assert resolution_success([5.09], [5.0], 1.0, 0.1) == [True]
    assert resolution_success([5.11], [5.0], 1.0, 0.1) == [False]
    assert resolution_success([3.0, -1.0], [-1.0, 3.0], 0.5) == [True, True]
    with pytest.raises(DomainError):
        resolution_success([1.0], [1.0, 2.0], 1.0)


def test_end_to_end_noise_free(waveforms):
    rnd = random.Random(3)
    for _ in range(5):
        k = rnd.randint(1, 3)
        angles = []
        while len(angles) < k:
            a = rnd.uniform(-60, 60)
            if all(abs(a - b) >= 2 for b in angles):
                angles.append(a)
        targets = [Target(a, rnd.uniform(150, 450), 1.0) for a in angles]
        report = estimate_from_pulses(_pulses(targets, waveforms), waveforms, SCENE, k)
        assert all(resolution_success(report.angles, angles, 0.5))


def test_report_outputs(tmp_path, waveforms):
    report = music_spectrum(_cov([Target(1.0, 300.0)], waveforms), 1, SCENE,
                            [0.0, 1.0, 2.0], [300.0])
    report.write_spectrum_csv(tmp_path / "s.csv")
    report.write_peaks_csv(tmp_path / "p.csv")
    report.write_json(tmp_path / "r.json")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "theta,speed,value"
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 4
    assert json.loads((tmp_path / "r.json").read_text())["assumed_k"] == 1
    assert report.doa_spectrum().shape == (3,)
