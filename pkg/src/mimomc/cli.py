"""Command line entry point: ``mimomc <command> [options]``.

Exit status is 0 on success, 1 on configuration errors and 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .completion import CompletionProblem, choose_delta, complete
from .errors import ConfigError
from .estimation import estimate_from_pulses, resolution_success
from .harness import (EXPERIMENTS, RUNNERS, STREAM_MASK, STREAM_TARGETS, STREAM_WAVEFORM, default_spec,
                      derive_seed, load_spec, rng_for, write_csv)
from .incoherence import incoherence_report
from .sampling import Scheme, make_mask, observe
from .scene import WaveformKind, make_waveforms
from .synth import PulseMatrix, add_noise, pulse_seed, save_pulse, synthesize_pulse

log = logging.getLogger("mimomc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _common(p):
    p.add_argument("--config", help="JSON config mirroring ExperimentSpec")
    p.add_argument("--seed", type=int, help="base seed (u64)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--trials", type=int)
    p.add_argument("--p", type=_float_list, help="sampling fractions, comma separated")
    p.add_argument("--waveform", help="hadamard | gaussian_orthogonal")
    p.add_argument("--scheme", help="per_antenna | global_uniform")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="mimomc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("synth", "synthesize clean and noisy pulse matrices"),
                        ("complete", "sub-sample and recover pulse matrices"),
                        ("estimate", "recover pulses and run MUSIC"),
                        ("diagnose", "incoherence diagnostics of clean pulses")):
        _common(sub.add_parser(name, help=help_))
    exp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    exp.add_argument("name", choices=EXPERIMENTS)
    _common(exp)
    return parser


def _spec_from_args(args, name):
    spec = load_spec(args.config, name) if args.config else default_spec(name)
    changes = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be unsigned")
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.p is not None:
        changes["fractions"] = args.p
    if args.waveform is not None:
        changes["waveforms"] = tuple(WaveformKind.parse(w) for w in args.waveform.split(","))
    if args.scheme is not None:
        changes["schemes"] = tuple(Scheme.parse(s) for s in args.scheme.split(","))
    if args.threads is not None:
        changes["threads"] = args.threads
    return replace(spec, **changes)


def _single_run(spec):
    """Targets, waveforms, clean and noisy pulses for one scenario."""
    scene = spec.scene
    if spec.targets is not None:
        targets = list(spec.targets)
    else:
        targets = spec.target_draw.draw(rng_for(spec.seed, STREAM_TARGETS, 0))
    kind = spec.waveforms[0] if spec.waveforms else scene.waveform_kind
    s = make_waveforms(kind, scene.num_tx, scene.num_samples,
                       rng=rng_for(spec.seed, STREAM_WAVEFORM, 0))
    clean, noisy = [], []
    for q in range(1, scene.num_pulses + 1):
        z = synthesize_pulse(scene, targets, s, q)
        clean.append(z)
        noisy.append(add_noise(z, spec.snr_db, seed=pulse_seed(spec.seed, q)))
    return targets, s, clean, noisy


def _out(spec):
    out = Path(spec.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _targets_json(targets):
    return [{"angle": t.angle, "speed": t.speed,
             "reflectivity": [t.reflectivity.real, t.reflectivity.imag]} for t in targets]


def cmd_synth(spec):
    out = _out(spec)
    targets, s, clean, noisy = _single_run(spec)
    save_pulse(out / "waveforms.bin", PulseMatrix(s.entries, 0, False))
    for z, (x, _) in zip(clean, noisy):
        save_pulse(out / f"pulse_{z.pulse_index}_clean.bin", z)
        save_pulse(out / f"pulse_{z.pulse_index}_noisy.bin", x)
    (out / "synth.json").write_text(json.dumps({
        "targets": _targets_json(targets), "waveform": s.kind.value,
        "noise_sigma": [sigma for _, sigma in noisy], "scene": spec.scene.to_dict()}, indent=2))
    print(f"wrote {len(clean)} pulses to {out}")


def _recover(spec, out, clean, noisy, write=True):
    p, scheme = spec.fractions[0], spec.schemes[0]
    recovered, summary = [], []
    for z, (x, sigma) in zip(clean, noisy):
        mask = make_mask(z.shape, p, scheme, derive_seed(spec.seed, STREAM_MASK, 0, z.pulse_index))
        obs = observe(x, mask)
        delta = choose_delta(sigma, obs.count)
        res = complete(CompletionProblem(obs, delta, spec.solver))
        rel = float(np.linalg.norm(res.estimate - z.entries) / np.linalg.norm(z.entries))
        recovered.append(PulseMatrix(res.estimate, z.pulse_index, True))
        summary.append({"pulse": z.pulse_index, "p": p, "delta": delta, "residual": res.residual,
                        "nuclear_norm": res.nuclear_norm, "iterations": res.iterations,
                        "converged": res.converged, "relative_error": rel})
        if write:
            save_pulse(out / f"recovered_{z.pulse_index}.bin", recovered[-1])
            res.write_trace_csv(out / f"trace_{z.pulse_index}.csv")
        log.info("pulse %d: relative error %.4g after %d iterations", z.pulse_index, rel,
                 res.iterations)
    return recovered, summary


def cmd_complete(spec):
    out = _out(spec)
    _, _, clean, noisy = _single_run(spec)
    _, summary = _recover(spec, out, clean, noisy)
    (out / "completion.json").write_text(json.dumps(summary, indent=2))
    for row in summary:
        print(f"pulse {row['pulse']}: relative error {row['relative_error']:.4g} "
              f"(converged={row['converged']})")


def cmd_estimate(spec):
    out = _out(spec)
    targets, s, clean, noisy = _single_run(spec)
    if spec.fractions[0] < 1.0:
        pulses, _ = _recover(spec, out, clean, noisy, write=False)
    else:
        pulses = [x for x, _ in noisy]
    report = estimate_from_pulses(pulses, s, spec.scene, len(targets))
    truths = [t.angle for t in targets]
    report.truths = truths
    report.success = resolution_success(report.angles, truths, spec.d_thetas[-1], spec.epsilon)
    report.write_spectrum_csv(out / "spectrum.csv")
    report.write_peaks_csv(out / "peaks.csv")
    report.write_json(out / "report.json")
    for peak in report.peaks:
        print(f"peak: angle {peak.angle:.4f} deg, speed {peak.speed:.2f} m/s")


def cmd_diagnose(spec):
    out = _out(spec)
    targets, _, clean, _ = _single_run(spec)
    reports = [incoherence_report(z.entries, len(targets)) for z in clean]
    write_csv(out / "incoherence.csv", ["pulse", "rank_used", "m1", "m2", "mu1", "mu2", "mu"],
              ([z.pulse_index, r.rank_used, r.m1, r.m2, r.mu1, r.mu2, r.mu]
               for z, r in zip(clean, reports)), spec)
    for z, r in zip(clean, reports):
        print(f"pulse {z.pulse_index}: m1={r.m1:.4f} m2={r.m2:.4f} mu={r.mu:.3f}")


def cmd_experiment(spec):
    result = RUNNERS[spec.name](spec)
    if spec.name == "scaling":
        print(f"mu_B(m1) = {result['mu_B_m1']:.3f}, mu_B(m2) = {result['mu_B_m2']:.3f}")
    elif spec.name == "relative-error":
        for (w, sch, p), v in result["summary"].items():
            print(f"{w:20s} {sch:15s} p={p:.2f} mean relative error {v['mean']:.4g}")
    elif spec.name == "resolution":
        for (w, sch, p, d), v in result["probability"].items():
            print(f"{w:20s} {sch:15s} p={p:.2f} d_theta={d:.2f} P={v:.2f}")
    else:
        print(f"wrote CCDF curves for {len(result)} configurations")
    if spec.out_dir:
        print(f"outputs in {spec.out_dir}")


COMMANDS = {"synth": cmd_synth, "complete": cmd_complete, "estimate": cmd_estimate,
            "diagnose": cmd_diagnose, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        name = args.name if args.command == "experiment" else "resolution"
        spec = _spec_from_args(args, name)
        if args.command != "experiment" and not args.config:
            # single-run commands default to one noisy scenario at p = 0.5
            spec = replace(spec, fractions=args.p or (0.5,),
                           target_draw=replace(spec.target_draw, speeds=None,
                                               angle_range=(-60.0, 60.0), min_separation=2.0))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
