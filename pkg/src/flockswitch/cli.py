"""Command-line front end.

Subcommands: check | simulate | ensemble | bounds | schedule. All outputs
carry the config hash and the seeds used, so every number can be
regenerated. Exit codes: 0 pass, 1 condition or assertion failure,
2 usage/config error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .analysis import BoundReport
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .kernels import DEFAULT_KERNEL
from .montecarlo import run_path, run_ensemble
from .switching import generate_schedule

SEED_ENV_VAR = "FLOCKSWITCH_SEED"


def _resolve_seed(args, cfg: ExperimentConfig) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if cfg.run.seed is not None:
        return cfg.run.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer: {env!r}") from exc
    return 0


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out) if args.out is not None else Path(cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def render_report(rep: BoundReport) -> str:
    lines = [f"[{'PASS' if rep.passed else 'FAIL' if rep.passed is not None else '----'}] {rep.name}"]
    for label, ok, margin in rep.conditions:
        lines.append(f"  {'ok  ' if ok else 'FAIL'} {label:<60} margin={margin:.6g}")
    for key, val in rep.values.items():
        if isinstance(val, float):
            lines.append(f"       {key:<24} = {val:.12g}")
        else:
            lines.append(f"       {key:<24} = {val}")
    for note in rep.notes:
        lines.append(f"       note: {note}")
    return "\n".join(lines)


def _check_reports(cfg: ExperimentConfig) -> list[BoundReport]:
    params = cfg.build_params()
    ens = cfg.build_ensemble()
    reports = [analysis.check_flocking_conditions(params)]

    # continuous-model analogue: one step is h time units, so the minimal
    # inter-switch gap is a = h and the dwell cap rescales to h*M
    reports.append(
        analysis.check_continuous_flocking_conditions(
            n_agents=params.n_agents,
            kappa=params.kappa,
            min_gap=cfg.h,
            dwell_cap=cfg.h * params.dwell_cap,
            probs=params.probs,
            tail_exponent=params.tail_exponent,
        )
    )

    rep = BoundReport(name="rooted_windows_bound_hypotheses", passed=True)
    weight_sum = sum((1.0 - p) ** params.window_base for p in params.probs)
    rep.conditions.append(
        ("sum_k (1-p_k)^n <= 1/2", weight_sum <= 0.5, 0.5 - weight_sum)
    )
    c_floor = max(
        (-1.0 / math.log(1.0 - p) for p in params.probs if p < 1.0), default=0.0
    )
    rep.conditions.append(
        ("c > -1/log(1-p_k) for all k", params.log_coeff > c_floor, params.log_coeff - c_floor)
    )
    rep.passed = all(ok for _, ok, _ in rep.conditions)
    if rep.passed:
        p1 = analysis.rooted_windows_lower_bound(params.window_base, params.log_coeff, ens)
        rep.values["p1"] = p1.value
    reports.append(rep)

    # the parameter conditions and the decay-power interval are related but
    # carry different constants; surface any disagreement instead of hiding it
    if reports[0].passed and 0.0 < params.hk < 1.0:
        try:
            if params.envelope_exponent <= 0:
                raise ValueError("divergent envelope exponent")
            analysis.default_delta(params)
        except ValueError as exc:
            reports[0].notes.append(
                f"conditions hold but no admissible decay power: {exc}"
            )

    proc = cfg.build_process()
    kind = cfg.dwelling.kind
    if kind in ("poisson", "geometric"):
        rep = BoundReport(name=f"dwell_tail_bound_hypotheses_{kind}", passed=True)
        try:
            if kind == "poisson":
                m_min = analysis.smallest_valid_m_poisson(
                    params.log_coeff, params.n_agents, proc.rate_max
                )
                bound = (
                    analysis.dwell_tail_bound_poisson(
                        params.window_base,
                        params.log_coeff,
                        params.dwell_cap,
                        params.n_agents,
                        proc.rate_max,
                    )
                    if params.dwell_cap >= m_min
                    else None
                )
            else:
                m_min = analysis.smallest_valid_m_geometric(
                    params.log_coeff, params.n_agents, proc.prob_min
                )
                bound = (
                    analysis.dwell_tail_bound_geometric(
                        params.window_base,
                        params.log_coeff,
                        params.dwell_cap,
                        params.n_agents,
                        proc.prob_min,
                    )
                    if params.dwell_cap >= m_min
                    else None
                )
            rep.conditions.append(
                ("M >= smallest valid M", params.dwell_cap >= m_min, params.dwell_cap - m_min)
            )
            rep.values["smallest_valid_M"] = m_min
            if bound is None:
                rep.notes.append(f"increase M to at least {m_min}")
            else:
                rep.values["p2"] = bound.value
                rep.values["p2_tail_bound"] = bound.tail_bound
        except ValueError as exc:
            rep.conditions.append((str(exc), False, float("-inf")))
        rep.passed = all(ok for _, ok, _ in rep.conditions)
        reports.append(rep)
    return reports


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    reports = _check_reports(cfg)
    for rep in reports:
        print(render_report(rep))
    out = _out_dir(args, cfg)
    payload = {
        "config_hash": config_hash(cfg),
        "reports": [r.to_dict() for r in reports],
    }
    with open(out / "check.json", "w") as f:
        json.dump(payload, f, indent=2, default=float)
        f.write("\n")
    return 0 if all(r.passed for r in reports) else 1


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args, cfg)
    horizon = args.horizon if args.horizon is not None else cfg.run.horizon
    out = _out_dir(args, cfg)
    spec = cfg.build_spec(root_seed=seed, n_runs=1, horizon=horizon, kernel=args.kernel)
    cond = analysis.check_flocking_conditions(cfg.build_params())
    if not cond.passed:
        # the conditions are sufficient, not necessary: warn and simulate anyway
        print("warning: flocking conditions not satisfied; simulating anyway",
              file=sys.stderr)
    traj, sched = run_path(spec, 0, return_schedule=True,
                           snapshot_stride=cfg.run.snapshot_stride,
                           record_states=args.assert_bounds)
    traj.to_csv(out / "trajectory.csv")

    summary = {
        "config_hash": config_hash(cfg),
        "seed": seed,
        "horizon": horizon,
        "kernel": args.kernel,
        **traj.summary(),
    }
    snap_payload = [
        {"t": int(t), "positions": x.tolist(), "velocities": v.tolist()}
        for (t, x, v) in traj.snapshots
    ]
    with open(out / "snapshots.json", "w") as f:
        json.dump(snap_payload, f)
        f.write("\n")

    code = 0
    if args.assert_bounds:
        params = cfg.build_params()
        audit = analysis.audit_path(
            traj, sched, spec.ensemble, cfg.h, spec.weight,
            params.window_base, params.log_coeff, params.dwell_cap,
            x_bound=params.x_bound,
        )
        summary["audit"] = {
            "windows_checked": audit.n_windows,
            "assumptions_ok": audit.assumptions_ok,
            "mu_violations": audit.mu_violations,
            "envelope_violations": audit.envelope_violations,
            "stochasticity_violations": audit.stochasticity_violations,
            "x_bound_used": audit.x_bound_used,
        }
        if audit.mu_violations or audit.envelope_violations or audit.stochasticity_violations:
            code = 1
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, default=float)
        f.write("\n")
    print(json.dumps(summary, indent=2, default=float))
    return code


def cmd_ensemble(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args, cfg)
    out = _out_dir(args, cfg)
    spec = cfg.build_spec(
        root_seed=seed,
        n_runs=args.runs,
        horizon=args.horizon,
        jobs=args.jobs,
        kernel=args.kernel,
    )
    result = run_ensemble(spec)
    payload = result.to_dict()
    payload["config_hash"] = config_hash(cfg)
    with open(out / "ensemble.json", "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    result.write_csv(out / "runs.csv")
    lo, hi = result.confidence_interval
    print(
        f"flocking fraction {result.flocking_fraction:.4f} "
        f"({result.n_flocked}/{result.n_runs}), wilson95 [{lo:.4f}, {hi:.4f}]"
    )
    return 0


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    params = cfg.build_params()
    weight = cfg.build_weight()
    ens = cfg.build_ensemble()
    proc = cfg.build_process()
    out = _out_dir(args, cfg)
    kind = cfg.dwelling.kind

    import csv as _csv

    rows_n = []
    for n in cfg.grids.n:
        row = {"n": n, "p1": "", "p2": "", "p2_tail_bound": ""}
        try:
            row["p1"] = repr(
                analysis.rooted_windows_lower_bound(n, params.log_coeff, ens).value
            )
        except ValueError:
            pass
        try:
            if kind == "poisson":
                b = analysis.dwell_tail_bound_poisson(
                    n, params.log_coeff, params.dwell_cap, params.n_agents, proc.rate_max
                )
            elif kind == "geometric":
                b = analysis.dwell_tail_bound_geometric(
                    n, params.log_coeff, params.dwell_cap, params.n_agents, proc.prob_min
                )
            else:
                b = None
            if b is not None:
                row["p2"] = repr(b.value)
                row["p2_tail_bound"] = repr(b.tail_bound)
        except ValueError:
            pass
        rows_n.append(row)

    x_bound = params.x_bound
    if x_bound is None:
        init = cfg.build_init()
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(0)))
        cfg0 = init.realize(rng)
        from .matrix import diameter

        x_bound = analysis.solve_spatial_bound(
            params, weight, diameter(cfg0.positions), diameter(cfg0.velocities)
        )

    rows_r = []
    env_params = params if params.x_bound is not None else (
        None if x_bound is None else dataclasses.replace(params, x_bound=x_bound)
    )
    for r in cfg.grids.r:
        val = ""
        if env_params is not None:
            try:
                val = repr(analysis.velocity_decay_envelope(int(r), env_params, weight))
            except ValueError:
                val = ""
        rows_r.append({"r": int(r), "envelope": val})

    with open(out / "bounds_n.csv", "w", newline="") as f:
        wr = _csv.DictWriter(f, fieldnames=["n", "p1", "p2", "p2_tail_bound"])
        wr.writeheader()
        wr.writerows(rows_n)
    with open(out / "bounds_r.csv", "w", newline="") as f:
        wr = _csv.DictWriter(f, fieldnames=["r", "envelope"])
        wr.writeheader()
        wr.writerows(rows_r)

    print(f"x_bound: {x_bound!r}")
    for row in rows_n:
        print(f"  n={row['n']:<6} p1={row['p1'] or 'n/a':<24} p2={row['p2'] or 'n/a'}")
    for row in rows_r:
        print(f"  r={row['r']:<6} envelope={row['envelope'] or 'n/a'}")
    with open(out / "bounds_summary.json", "w") as f:
        json.dump(
            {"config_hash": config_hash(cfg), "x_bound": x_bound},
            f,
            indent=2,
            default=float,
        )
        f.write("\n")
    return 0


def cmd_schedule(args) -> int:
    cfg = load_config(args.config)
    seed = _resolve_seed(args, cfg)
    horizon = args.horizon if args.horizon is not None else cfg.run.horizon
    out = _out_dir(args, cfg)
    sched = generate_schedule(cfg.build_ensemble(), cfg.build_process(), horizon, seed)
    payload = {
        "config_hash": config_hash(cfg),
        "seed": seed,
        "horizon": horizon,
        **sched.to_dict(),
    }
    with open(out / "schedule.json", "w") as f:
        json.dump(payload, f)
        f.write("\n")
    print(f"{sched.n_switches} switching instants covering [0, {sched.coverage})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flockswitch",
        description="Flocking under randomly switching directed topologies: "
        "simulation, bound evaluation, Monte Carlo estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True, horizon=False):
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help=f"root seed (default: config, then ${SEED_ENV_VAR}, then 0)")
        if horizon:
            p.add_argument("--horizon", type=int, default=None)

    p = sub.add_parser("check", help="evaluate the parameter conditions")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="run one sample path")
    add_common(p, horizon=True)
    p.add_argument("--assert-bounds", action="store_true",
                   help="audit window contraction and decay envelopes; exit 1 on violation")
    p.add_argument("--kernel", default=DEFAULT_KERNEL, choices=["auto", "compiled", "python"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="run many seeded paths")
    add_common(p, horizon=True)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--kernel", default=DEFAULT_KERNEL, choices=["auto", "compiled", "python"])
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("bounds", help="tabulate analytic bounds over the config grids")
    add_common(p, seed=False)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("schedule", help="dump one realized switching schedule")
    add_common(p, horizon=True)
    p.set_defaults(func=cmd_schedule)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"condition failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
