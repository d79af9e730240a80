"""Command-line interface: train policies, run scenarios, and export CSVs.

Subcommands mirror the library operations; every output is plain CSV or
structured text so external tools can plot them.  Exit code 0 on success,
nonzero with a stage diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .baselines import compute_prc_direct, find_limit_cycle, write_prc_csv
from .classifier import Classifier, identity_normalizer
from .closedloop import run_trials
from .integrate import NoiseSpec, simulate, write_trajectory_csv
from .models import get_model
from .scenarios import (
    ScenarioError,
    build_policy,
    list_scenarios,
    load_config,
    noise_sweep,
    run_scenario,
    save_config,
    scenario_config,
)
from .training import load_training_set, save_training_set
from .models import MODEL_BUILDERS


def _scenario_from_args(args) -> "ScenarioConfig":
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = scenario_config(args.scenario)
    overrides = {}
    for key, attr in (("n", "n"), ("dt", "dt"), ("probe_dt", "probe_dt"),
                      ("tau", "tau"), ("u1", "u1"), ("sigma", "sigma"),
                      ("seed", "train_seed"), ("trials", "trials"),
                      ("duration", "duration")):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            overrides[attr] = value
    if getattr(args, "model", None):
        overrides["model"] = args.model
    if getattr(args, "algorithm", None):
        overrides["algorithm"] = args.algorithm
    return replace(cfg, **overrides).validate()


def _add_common_options(sub):
    sub.add_argument("--scenario", default="duffing", help="built-in scenario name")
    sub.add_argument("--config", help="scenario config file (overrides --scenario)")
    sub.add_argument("--model", help="model identifier override")
    sub.add_argument("--algorithm", type=int, choices=(1, 2))
    sub.add_argument("--n", type=int, help="training sample count")
    sub.add_argument("--dt", type=float, help="integration step")
    sub.add_argument("--probe-dt", type=float, dest="probe_dt", help="training probe horizon")
    sub.add_argument("--tau", type=float, help="classifier bandwidth")
    sub.add_argument("--u1", type=float, help="control bound")
    sub.add_argument("--sigma", type=float, help="measurement noise level")
    sub.add_argument("--seed", type=int, help="training seed")
    sub.add_argument("--trials", type=int, help="Monte-Carlo trial count")
    sub.add_argument("--duration", type=float, help="closed-loop duration")
    sub.add_argument("--out", default=".", help="output directory")


def _cmd_train(args) -> int:
    cfg = _scenario_from_args(args)
    bundle = build_policy(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.name}_policy.txt"
    save_training_set(bundle.classifier.training_set, path)
    print(f"trained {bundle.training_set.n} samples -> {path}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = _scenario_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = get_model(cfg.model, **cfg.model_overrides)
    if args.policy:
        ts = load_training_set(args.policy)
        norm = ts.normalizer or identity_normalizer(ts.dimension)
        controller = Classifier(ts, args.tau or ts.tau_default or cfg.tau, norm).classify
        tag = "controlled"
    else:
        controller = lambda x: 0.0  # noqa: E731 - free-running reference
        tag = "uncontrolled"
    x0 = np.asarray(args.x0 if args.x0 else cfg.run_x0 or model.default_ic, dtype=float)
    noise = NoiseSpec(cfg.sigma, cfg.noise_seed) if cfg.sigma > 0 else None
    traj = simulate(model, x0, controller, cfg.duration, cfg.dt, noise=noise)
    path = out / f"{cfg.name}_{tag}.csv"
    write_trajectory_csv(traj, path)
    print(f"wrote {len(traj.times)} samples -> {path}")
    return 0


def _cmd_effectiveness(args) -> int:
    cfg = _scenario_from_args(args)
    if cfg.kind != "bistable":
        raise ScenarioError("effectiveness applies to target-ball scenarios")
    bundle = build_policy(cfg)
    from .training import UniformBoxSampler

    sampler = UniformBoxSampler(tuple(map(tuple, cfg.box)), seed=cfg.master_seed)
    noise = NoiseSpec(cfg.sigma, cfg.noise_seed) if cfg.sigma > 0 else None
    batch = run_trials(bundle.model, bundle.classifier, sampler, cfg.trials,
                       cfg.dt, cfg.duration, bundle.target, cfg.radius,
                       noise=noise, master_seed=cfg.master_seed,
                       metric_scale=bundle.metric_scale)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.name}_trials.csv"
    batch.write_csv(path)
    print(f"effectiveness = {batch.fraction:.4f} ({cfg.trials} trials) -> {path}")
    return 0


def _cmd_sweep_noise(args) -> int:
    cfg = _scenario_from_args(args)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    taus = [float(t) for t in args.taus.split(",")]
    result = noise_sweep(cfg, sigmas, taus, trials=args.trials or cfg.trials)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = out / f"{cfg.name}_sweep.csv"
    result.write_table_csv(table)
    rows = out / f"{cfg.name}_sweep_trials.csv"
    result.write_trials_csv(rows)
    print(f"wrote sweep table -> {table}")
    for i, s in enumerate(result.sigmas):
        cells = " ".join(f"{v * 100:6.1f}%" for v in result.fractions[i])
        print(f"sigma={s:g}: {cells}")
    return 0


def _cmd_prc(args) -> int:
    model = get_model(args.model)
    cycle = find_limit_cycle(model, dt=args.dt, n_phases=args.n_phases)
    prc = compute_prc_direct(model, cycle, impulse=args.eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.model}_prc.csv"
    write_prc_csv(prc, path)
    print(f"period = {cycle.period:.6g}; wrote {prc.phases.size} phases -> {path}")
    return 0


def _cmd_scenario(args) -> int:
    if args.action == "list":
        for name in list_scenarios():
            print(name)
        return 0
    target = args.target
    if target in list_scenarios():
        cfg = scenario_config(target)
    else:
        cfg = load_config(target)
    out = Path(args.out) / cfg.name
    report = run_scenario(cfg, out_dir=out)
    print(report.as_text(), end="")
    print(f"artifacts -> {out}")
    return 0


def _cmd_config(args) -> int:
    cfg = scenario_config(args.scenario)
    save_config(cfg, args.path)
    print(f"wrote {args.scenario} config -> {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banglearn",
        description="Learned bang-bang control of benchmark dynamical systems",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("train", help="generate and save a training set")
    _add_common_options(sub)
    sub.set_defaults(fn=_cmd_train)

    sub = subs.add_parser("simulate", help="integrate one trajectory to CSV")
    _add_common_options(sub)
    sub.add_argument("--policy", help="training-set file for closed-loop control")
    sub.add_argument("--x0", type=float, nargs="+", help="initial state")
    sub.set_defaults(fn=_cmd_simulate)

    sub = subs.add_parser("effectiveness", help="Monte-Carlo convergence fraction")
    _add_common_options(sub)
    sub.set_defaults(fn=_cmd_effectiveness)

    sub = subs.add_parser("sweep-noise", help="effectiveness over (sigma, tau) grid")
    _add_common_options(sub)
    sub.add_argument("--sigmas", default="0.2,0.3,0.4,0.5,0.6")
    sub.add_argument("--taus", default="0.1,0.4,0.8,1.2,1.6")
    sub.set_defaults(fn=_cmd_sweep_noise)

    sub = subs.add_parser("prc", help="phase response curve of an oscillator")
    sub.add_argument("--model", default="thalamic",
                     choices=sorted(MODEL_BUILDERS))
    sub.add_argument("--dt", type=float, default=None)
    sub.add_argument("--eps", type=float, default=1e-3)
    sub.add_argument("--n-phases", type=int, default=256, dest="n_phases")
    sub.add_argument("--out", default=".")
    sub.set_defaults(fn=_cmd_prc)

    sub = subs.add_parser("scenario", help="run or list built-in scenarios")
    sub.add_argument("action", choices=("run", "list"))
    sub.add_argument("target", nargs="?", help="scenario name or config file")
    sub.add_argument("--out", default="runs")
    sub.set_defaults(fn=_cmd_scenario)

    sub = subs.add_parser("write-config", help="dump a built-in scenario config")
    sub.add_argument("scenario", choices=list_scenarios())
    sub.add_argument("path")
    sub.set_defaults(fn=_cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
