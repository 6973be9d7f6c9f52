"""Monte Carlo experiment drivers.

Seeding: every random stream is drawn from
``numpy.random.SeedSequence(spec.seed, spawn_key=key)`` where ``key`` is a
tuple of small integers (stream id, trial index, ...). Trials therefore do not
depend on execution order, and streams that should be shared between the
compared configurations (targets, noise, masks) use keys that omit the
waveform and the sampling fraction.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .completion import CompletionProblem, SolverOptions, choose_delta, complete, recovery_error_bound
from .errors import ConfigError
from .estimation import estimate_from_pulses, resolution_success
from .incoherence import (bound_quantile, empirical_ccdf, fit_mu_B, singular_vector_maxima,
                          strong_incoherence_mu, write_ccdf_csv)
from .sampling import Scheme, make_mask, observe
from .scene import SceneConfig, Target, WaveformKind, make_waveforms, random_targets
from .synth import PulseMatrix, add_noise, synthesize_pulse

# stream ids for seed derivation
STREAM_TARGETS, STREAM_WAVEFORM, STREAM_NOISE, STREAM_MASK = 1, 2, 3, 4

EXPERIMENTS = ("ccdf", "scaling", "relative-error", "resolution")
CCDF_CASES = {"I": (40, 128), "II": (1000, 128), "III": (40, 1024)}
DEFAULT_D_THETAS = (0.2, 0.3, 0.4, 0.5, 0.7, 1.0)


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit integer seed for the stream identified by ``key``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TargetDraw:
    count: int = 2
    angle_range: Tuple[float, float] = (-90.0, 90.0)
    speed_range: Tuple[float, float] = (150.0, 450.0)
    min_separation: float = 0.0
    speeds: Optional[Tuple[float, ...]] = None
    unit_amplitude: bool = False

    def draw(self, rng, min_separation=None) -> List[Target]:
        sep = self.min_separation if min_separation is None else min_separation
        return random_targets(rng, self.count, self.angle_range, self.speed_range, sep,
                              self.speeds, unit_amplitude=self.unit_amplitude)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str = "relative-error"
    scene: SceneConfig = field(default_factory=SceneConfig)
    targets: Optional[Tuple[Target, ...]] = None
    target_draw: TargetDraw = field(default_factory=TargetDraw)
    snr_db: float = 25.0
    fractions: Tuple[float, ...] = (0.3, 0.5)
    schemes: Tuple[Scheme, ...] = (Scheme.PER_ANTENNA,)
    waveforms: Tuple[WaveformKind, ...] = (WaveformKind.HADAMARD, WaveformKind.GAUSSIAN_ORTHOGONAL)
    trials: int = 50
    seed: int = 0
    out_dir: Optional[str] = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    threads: int = 1
    # ccdf / scaling
    k_values: Tuple[int, ...] = (2, 10)
    cases: Tuple[Tuple[str, int, int], ...] = tuple((k, *v) for k, v in CCDF_CASES.items())
    rx_sweep: Tuple[int, ...] = (40, 100, 400, 1000)
    sample_sweep: Tuple[int, ...] = (128, 256, 512, 1024)
    quantile: float = 0.99
    # resolution
    d_thetas: Tuple[float, ...] = DEFAULT_D_THETAS
    epsilon: float = 0.1
    angle_grid: Optional[Tuple[float, float, float]] = None
    speed_grid: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if any(not (0 < p <= 1) for p in self.fractions):
            raise ConfigError(f"fractions must lie in (0, 1], got {self.fractions}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        object.__setattr__(self, "schemes", tuple(Scheme.parse(s) for s in self.schemes))
        object.__setattr__(self, "waveforms", tuple(WaveformKind.parse(w) for w in self.waveforms))

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "scene":
                v = v.to_dict()
            elif f.name == "targets" and v is not None:
                v = [{"angle": t.angle, "speed": t.speed,
                      "reflectivity": [t.reflectivity.real, t.reflectivity.imag]} for t in v]
            elif f.name in ("target_draw", "solver"):
                v = asdict(v)
            elif f.name in ("schemes", "waveforms"):
                v = [x.value for x in v]
            elif f.name == "snr_db" and math.isinf(v):
                v = "inf"
            d[f.name] = v
        return json.loads(json.dumps(d))

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out_dir", None)
        d.pop("threads", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        kw = {}
        for key, value in data.items():
            if key == "scene":
                value = SceneConfig.from_dict(value)
            elif key == "targets" and value is not None:
                value = tuple(_target_from_json(t) for t in value)
            elif key == "target_draw":
                value = TargetDraw(**{k: tuple(v) if isinstance(v, list) else v
                                      for k, v in value.items()})
            elif key == "solver":
                value = SolverOptions(**value)
            elif key == "snr_db":
                value = math.inf if value in (None, "inf", "Infinity") else float(value)
            elif key == "cases":
                value = tuple(tuple(c) for c in value)
            elif isinstance(value, list):
                value = tuple(value)
            kw[key] = value
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _target_from_json(t) -> Target:
    refl = t.get("reflectivity", 1.0)
    if isinstance(refl, (list, tuple)):
        refl = complex(refl[0], refl[1])
    return Target(float(t["angle"]), float(t.get("speed", 0.0)), refl)


def default_spec(name: str, **overrides) -> ExperimentSpec:
    """Experiment defaults mirroring the published settings."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    if name in ("ccdf", "scaling"):
        base = ExperimentSpec(name=name, scene=SceneConfig(num_pulses=10), trials=300,
                              snr_db=math.inf)
        if name == "scaling":
            base = replace(base, k_values=(2,), waveforms=(WaveformKind.GAUSSIAN_ORTHOGONAL,))
    elif name == "relative-error":
        base = ExperimentSpec(name=name, trials=50,
                              fractions=(0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0))
    else:
        base = ExperimentSpec(name=name, trials=50, fractions=(0.3, 0.5),
                              target_draw=TargetDraw(2, (-20.0, 20.0), (150.0, 450.0), 0.0,
                                                     (150.0, 400.0), unit_amplitude=True))
    return replace(base, **overrides)


def load_spec(path, name: Optional[str] = None) -> ExperimentSpec:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read experiment config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    if name is not None:
        data.setdefault("name", name)
    exp = data.get("name", "relative-error")
    base = default_spec(exp).to_dict()
    base.update(data)
    return ExperimentSpec.from_dict(base)


@dataclass
class TrialRecord:
    experiment: str
    trial: int
    seed: int
    waveform: str = ""
    scheme: str = ""
    p: float = 1.0
    d_theta: float = 0.0
    rel_errors: List[float] = field(default_factory=list)
    m1: float = math.nan
    m2: float = math.nan
    mu1: float = math.nan
    mu2: float = math.nan
    truths: List[float] = field(default_factory=list)
    doa_estimates: List[float] = field(default_factory=list)
    success: Optional[bool] = None
    bound_ok: Optional[bool] = None
    converged: Optional[bool] = None
    wall_time: float = 0.0


# -- output helpers -------------------------------------------------------

def _out_dir(spec: ExperimentSpec) -> Optional[Path]:
    if spec.out_dir is None:
        return None
    path = Path(spec.out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")
    return path


def provenance(spec: ExperimentSpec) -> str:
    return f"mimomc {__version__} experiment={spec.name} seed={spec.seed} spec={spec.digest()}"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows, spec: ExperimentSpec) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(f"# {provenance(spec)}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"failed writing {path}: {exc}") from exc


_RECORD_COLUMNS = ["trial", "seed", "waveform", "scheme", "p", "d_theta", "rel_errors", "m1",
                   "m2", "mu1", "mu2", "truths", "doa_estimates", "success", "bound_ok",
                   "converged"]


def write_records(path: Path, records: Sequence[TrialRecord], spec: ExperimentSpec) -> None:
    # wall_time is left out so reruns produce identical files
    write_csv(path, _RECORD_COLUMNS,
              ([getattr(r, c) for c in _RECORD_COLUMNS] for r in records), spec)


def _write_plot_script(out: Path, name: str, body: str) -> None:
    script = ("# Standalone plot script; run from the experiment output directory.\n"
              "import csv\nimport matplotlib.pyplot as plt\n\n"
              "def read(path):\n"
              "    with open(path) as fh:\n"
              "        rows = [r for r in csv.reader(fh) if r and not r[0].startswith('#')]\n"
              "    return rows[0], rows[1:]\n\n" + body)
    (out / f"plot_{name}.py").write_text(script)


def _parallel_map(fn: Callable, args: Sequence, threads: int) -> list:
    if threads <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args))


# -- incoherence experiments ----------------------------------------------

def _diagnose_trial(args):
    spec, num_rx, num_samples, k, kind, trial, with_mu = args
    scene = spec.scene.replace(num_rx=num_rx, num_samples=num_samples)
    seed = derive_seed(spec.seed, STREAM_TARGETS, trial)
    t0 = time.perf_counter()
    targets = replace(spec.target_draw, count=k).draw(rng_for(spec.seed, STREAM_TARGETS, trial))
    s = make_waveforms(kind, scene.num_tx, num_samples,
                       rng=rng_for(spec.seed, STREAM_WAVEFORM, trial))
    z = synthesize_pulse(scene, targets, s, 1).entries
    m1, m2 = singular_vector_maxima(z, k)
    mu1 = mu2 = math.nan
    if with_mu:
        mu1, mu2, _ = strong_incoherence_mu(z, k)
    return TrialRecord("diagnose", trial, seed, kind.value, "", 1.0, 0.0, [], m1, m2, mu1, mu2,
                       [t.angle for t in targets], wall_time=time.perf_counter() - t0)


def collect_maxima(spec: ExperimentSpec, num_rx: int, num_samples: int, k: int, kind,
                   with_mu: bool = False) -> List[TrialRecord]:
    kind = WaveformKind.parse(kind)
    args = [(spec, num_rx, num_samples, k, kind, t, with_mu) for t in range(spec.trials)]
    return _parallel_map(_diagnose_trial, args, spec.threads)


CCDF_GRID = np.round(np.linspace(0.0, 1.0, 1001), 6)


def run_ccdf_experiment(spec: ExperimentSpec, with_mu: bool = True) -> dict:
    """m1/m2 samples and CCDF curves per (case, K, waveform)."""
    out = _out_dir(spec)
    results = {}
    for case, num_rx, num_samples in spec.cases:
        for k in spec.k_values:
            for kind in spec.waveforms:
                records = collect_maxima(spec, num_rx, num_samples, k, kind, with_mu)
                m1 = np.array([r.m1 for r in records])
                m2 = np.array([r.m2 for r in records])
                key = (case, k, kind.value)
                results[key] = {"m1": m1, "m2": m2, "records": records,
                                "ccdf_m1": empirical_ccdf(m1, CCDF_GRID),
                                "ccdf_m2": empirical_ccdf(m2, CCDF_GRID)}
                if out is not None:
                    tag = f"case{case}_K{k}_{kind.value}"
                    write_csv(out / f"samples_{tag}.csv", ["trial", "seed", "m1", "m2", "mu1", "mu2"],
                              ([r.trial, r.seed, r.m1, r.m2, r.mu1, r.mu2] for r in records), spec)
                    for which in ("m1", "m2"):
                        write_ccdf_csv(out / f"ccdf_{which}_{tag}.csv", CCDF_GRID,
                                       results[key][f"ccdf_{which}"], provenance(spec))
    if out is not None:
        _write_plot_script(out, "ccdf", (
            "import glob\n"
            "for which in ('m1', 'm2'):\n"
            "    plt.figure()\n"
            "    for path in sorted(glob.glob(f'ccdf_{which}_*.csv')):\n"
            "        _, rows = read(path)\n"
            "        plt.plot([float(r[0]) for r in rows], [float(r[1]) for r in rows],\n"
            "                 label=path[len(which) + 6:-4])\n"
            "    plt.xlabel(which); plt.ylabel('Pr(m > x)'); plt.legend(fontsize=6)\n"
            "    plt.savefig(f'ccdf_{which}.png', dpi=150)\n"))
    return results


def run_scaling_experiment(spec: ExperimentSpec) -> dict:
    """Quantile bounds of m1 over the receive-array sweep and of m2 over the
    sample-count sweep, with the fitted mu_B of each."""
    out = _out_dir(spec)
    kind = spec.waveforms[0]
    k = spec.k_values[0]
    base_rx, base_l = spec.scene.num_rx, spec.scene.num_samples
    m1_points, m2_points = [], []
    for num_rx in spec.rx_sweep:
        recs = collect_maxima(spec, num_rx, base_l, k, kind)
        m1_points.append((num_rx, bound_quantile([r.m1 for r in recs], spec.quantile)))
    for num_samples in spec.sample_sweep:
        recs = collect_maxima(spec, base_rx, num_samples, k, kind)
        m2_points.append((num_samples, bound_quantile([r.m2 for r in recs], spec.quantile)))
    mu_b1, res1 = fit_mu_B(m1_points)
    mu_b2, res2 = fit_mu_B(m2_points)
    result = {"waveform": kind.value, "k": k, "quantile": spec.quantile,
              "m1_points": m1_points, "m2_points": m2_points,
              "mu_B_m1": mu_b1, "mu_B_m1_residual": res1,
              "mu_B_m2": mu_b2, "mu_B_m2_residual": res2}
    if out is not None:
        rows = [("m1", n, m, math.sqrt(mu_b1 / n)) for n, m in m1_points]
        rows += [("m2", n, m, math.sqrt(mu_b2 / n)) for n, m in m2_points]
        write_csv(out / "scaling_points.csv", ["statistic", "n", "bound", "fit"], rows, spec)
        (out / "scaling_fit.json").write_text(json.dumps(
            {**result, "provenance": provenance(spec)}, indent=2))
        _write_plot_script(out, "scaling", (
            "_, rows = read('scaling_points.csv')\n"
            "fig, axes = plt.subplots(1, 2, figsize=(8, 3))\n"
            "for ax, which in zip(axes, ('m1', 'm2')):\n"
            "    sel = [r for r in rows if r[0] == which]\n"
            "    inv = [float(r[1]) ** -0.5 for r in sel]\n"
            "    ax.plot(inv, [float(r[2]) for r in sel], 'o', label='bound')\n"
            "    ax.plot(inv, [float(r[3]) for r in sel], '-', label='fit')\n"
            "    ax.set_xlabel('1/sqrt(n)'); ax.set_title(which); ax.legend()\n"
            "plt.tight_layout(); plt.savefig('scaling.png', dpi=150)\n"))
    return result


# -- completion / estimation experiments ---------------------------------

def _complete_pulse(spec, z: PulseMatrix, noisy: PulseMatrix, sigma, p, scheme, mask_seed):
    mask = make_mask(z.shape, p, scheme, mask_seed)
    obs = observe(noisy, mask)
    delta = choose_delta(sigma, obs.count)
    result = complete(CompletionProblem(obs, delta, spec.solver))
    err = np.linalg.norm(z.entries - result.estimate)
    rel = float(err / np.linalg.norm(z.entries))
    bound_ok = bool(err <= recovery_error_bound(obs.fraction, *z.shape, delta) + 1e-9 * np.linalg.norm(z.entries))
    return result, rel, bound_ok


def _trial_targets(spec, trial, *extra_key, min_separation=None):
    if spec.targets is not None:
        return list(spec.targets)
    rng = rng_for(spec.seed, STREAM_TARGETS, trial, *extra_key)
    return spec.target_draw.draw(rng, min_separation)


def _relative_error_trial(args):
    spec, trial = args
    scene = spec.scene
    records = []
    targets = _trial_targets(spec, trial)
    for w_idx, kind in enumerate(spec.waveforms):
        t0 = time.perf_counter()
        s = make_waveforms(kind, scene.num_tx, scene.num_samples,
                           rng=rng_for(spec.seed, STREAM_WAVEFORM, trial))
        z = synthesize_pulse(scene, targets, s, 1)
        noisy, sigma = add_noise(z, spec.snr_db, rng=rng_for(spec.seed, STREAM_NOISE, trial, 1))
        m1, m2 = singular_vector_maxima(z.entries, len(targets))
        for scheme in spec.schemes:
            for p in spec.fractions:
                t1 = time.perf_counter()
                result, rel, bound_ok = _complete_pulse(
                    spec, z, noisy, sigma, p, scheme, derive_seed(spec.seed, STREAM_MASK, trial, 1))
                records.append(TrialRecord(
                    "relative-error", trial, derive_seed(spec.seed, trial), kind.value,
                    scheme.value, p, 0.0, [rel], m1, m2, truths=[t.angle for t in targets],
                    bound_ok=bound_ok, converged=result.converged,
                    wall_time=time.perf_counter() - t1))
    return records


def run_relative_error_experiment(spec: ExperimentSpec) -> dict:
    """Mean relative recovery error of pulse 1 per (waveform, scheme, p)."""
    out = _out_dir(spec)
    per_trial = _parallel_map(_relative_error_trial, [(spec, t) for t in range(spec.trials)],
                              spec.threads)
    records = [r for recs in per_trial for r in recs]
    summary = {}
    for kind in spec.waveforms:
        for scheme in spec.schemes:
            for p in spec.fractions:
                sel = [r for r in records if r.waveform == kind.value and r.scheme == scheme.value
                       and r.p == p]
                errs = np.array([r.rel_errors[0] for r in sel])
                summary[(kind.value, scheme.value, p)] = {
                    "mean": float(errs.mean()), "std": float(errs.std()),
                    "converged": float(np.mean([r.converged for r in sel])),
                    "bound_violations": int(sum(not r.bound_ok for r in sel)),
                }
    inv_amp = 10 ** (-spec.snr_db / 20) if math.isfinite(spec.snr_db) else 0.0
    inv_pow = 10 ** (-spec.snr_db / 10) if math.isfinite(spec.snr_db) else 0.0
    if out is not None:
        write_records(out / "relative_error_trials.csv", records, spec)
        write_csv(out / "relative_error.csv",
                  ["waveform", "scheme", "p", "mean_rel_error", "std_rel_error", "trials",
                   "converged_fraction", "bound_violations", "inv_snr_amplitude", "inv_snr_power"],
                  ([w, sch, p, v["mean"], v["std"], spec.trials, v["converged"],
                    v["bound_violations"], inv_amp, inv_pow]
                   for (w, sch, p), v in summary.items()), spec)
        _write_plot_script(out, "relative_error", (
            "header, rows = read('relative_error.csv')\n"
            "for key in sorted({(r[0], r[1]) for r in rows}):\n"
            "    sel = [r for r in rows if (r[0], r[1]) == key]\n"
            "    plt.semilogy([float(r[2]) for r in sel], [float(r[3]) for r in sel], 'o-',\n"
            "                 label=' / '.join(key))\n"
            "plt.axhline(float(rows[0][8]), ls='--', c='k', label='1/SNR (amplitude)')\n"
            "plt.xlabel('p'); plt.ylabel('relative error'); plt.legend()\n"
            "plt.savefig('relative_error.png', dpi=150)\n"))
    return {"summary": summary, "records": records, "inv_snr_amplitude": inv_amp,
            "inv_snr_power": inv_pow}


def _grid(triple, default):
    if triple is None:
        return default
    start, stop, step = triple
    return np.round(np.arange(start, stop + step / 2, step), 10)


def _resolution_trial(args):
    from .estimation import DEFAULT_ANGLE_GRID, DEFAULT_SPEED_GRID

    spec, d_idx, trial = args
    scene = spec.scene
    d_theta = spec.d_thetas[d_idx]
    targets = _trial_targets(spec, trial, d_idx, min_separation=d_theta)
    truths = [t.angle for t in targets]
    angle_grid = _grid(spec.angle_grid, DEFAULT_ANGLE_GRID)
    speed_grid = _grid(spec.speed_grid, DEFAULT_SPEED_GRID)
    records = []
    for kind in spec.waveforms:
        s = make_waveforms(kind, scene.num_tx, scene.num_samples,
                           rng=rng_for(spec.seed, STREAM_WAVEFORM, trial, d_idx))
        clean, noisy = [], []
        for q in range(1, scene.num_pulses + 1):
            z = synthesize_pulse(scene, targets, s, q)
            x, sigma = add_noise(z, spec.snr_db, rng=rng_for(spec.seed, STREAM_NOISE, trial, d_idx, q))
            clean.append(z)
            noisy.append((x, sigma))
        for scheme in spec.schemes:
            for p in spec.fractions:
                t0 = time.perf_counter()
                recovered, rels, converged = [], [], True
                for z, (x, sigma) in zip(clean, noisy):
                    mseed = derive_seed(spec.seed, STREAM_MASK, trial, d_idx, z.pulse_index)
                    result, rel, _ = _complete_pulse(spec, z, x, sigma, p, scheme, mseed)
                    recovered.append(PulseMatrix(result.estimate, z.pulse_index, True))
                    rels.append(rel)
                    converged &= result.converged
                report = estimate_from_pulses(recovered, s, scene, len(targets), angle_grid,
                                              speed_grid)
                flags = resolution_success(report.angles, truths, d_theta, spec.epsilon)
                records.append(TrialRecord(
                    "resolution", trial, derive_seed(spec.seed, trial, d_idx), kind.value,
                    scheme.value, p, d_theta, rels, truths=truths, doa_estimates=report.angles,
                    success=all(flags), converged=converged,
                    wall_time=time.perf_counter() - t0))
    return records


def run_resolution_experiment(spec: ExperimentSpec) -> dict:
    """Probability of DOA resolution per (waveform, scheme, p, d_theta)."""
    out = _out_dir(spec)
    args = [(spec, d, t) for d in range(len(spec.d_thetas)) for t in range(spec.trials)]
    records = [r for recs in _parallel_map(_resolution_trial, args, spec.threads) for r in recs]
    probability = {}
    for kind in spec.waveforms:
        for scheme in spec.schemes:
            for p in spec.fractions:
                for d_theta in spec.d_thetas:
                    sel = [r.success for r in records if r.waveform == kind.value
                           and r.scheme == scheme.value and r.p == p and r.d_theta == d_theta]
                    probability[(kind.value, scheme.value, p, d_theta)] = float(np.mean(sel))
    if out is not None:
        write_records(out / "resolution_trials.csv", records, spec)
        write_csv(out / "resolution.csv",
                  ["waveform", "scheme", "p", "d_theta", "probability", "trials", "epsilon"],
                  ([w, sch, p, d, v, spec.trials, spec.epsilon]
                   for (w, sch, p, d), v in probability.items()), spec)
        _write_plot_script(out, "resolution", (
            "_, rows = read('resolution.csv')\n"
            "for key in sorted({(r[0], r[1], r[2]) for r in rows}):\n"
            "    sel = [r for r in rows if (r[0], r[1], r[2]) == key]\n"
            "    plt.plot([float(r[3]) for r in sel], [float(r[4]) for r in sel], 'o-',\n"
            "             label=f'{key[0]} p={key[2]}')\n"
            "plt.xlabel('d_theta (deg)'); plt.ylabel('probability of resolution')\n"
            "plt.legend(); plt.savefig('resolution.png', dpi=150)\n"))
    return {"probability": probability, "records": records}


RUNNERS = {
    "ccdf": run_ccdf_experiment,
    "scaling": run_scaling_experiment,
    "relative-error": run_relative_error_experiment,
    "resolution": run_resolution_experiment,
}
