"""Command-line front end.

Subcommands:
  run        execute a configured twin experiment
  sweep      single-update diversity curves across gamma
  summarize  quantile table from a cycles.csv
  update     one bridged analysis step on an ensemble stored as CSV
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bridge import enkpf_update
from .ensemble import Ensemble, TaperSpec
from .errors import DegenerateWeightsError, DivergenceError
from .experiment import (
    SUMMARY_HEADER,
    _fmt,
    diversity_sweep,
    load_experiment_config,
    read_cycles_csv,
    read_matrix_csv,
    run_experiment,
    summarize,
    sweep_config_from_dict,
    write_matrix_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .gamma import GammaPolicy
from .observation import LinearGaussianObservation
from .rng import RngNode


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="enkpf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment")
    p_run.add_argument("--config", required=True, help="JSON experiment configuration")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument("--out", default=None, help="override the config output directory")

    p_sweep = sub.add_parser("sweep", help="diversity curves over gamma")
    p_sweep.add_argument("--config", required=True, help="JSON sweep configuration")

    p_sum = sub.add_parser("summarize", help="quantile table from cycle records")
    p_sum.add_argument("--in", dest="infile", required=True, help="cycles.csv to summarize")
    p_sum.add_argument("--out", default=None, help="write summary csv here instead of stdout")

    p_upd = sub.add_parser("update", help="one bridged analysis step on a stored ensemble")
    p_upd.add_argument("--ensemble", required=True, help="ensemble matrix csv (header 'q,N')")
    p_upd.add_argument(
        "--obs",
        required=True,
        help="observation csv with header component,value,noise_variance (components 1-based)",
    )
    p_upd.add_argument("--gamma", required=True, help="bridge parameter in [0,1], or 'auto'")
    p_upd.add_argument("--taper", default="none", choices=["none", "triangular", "gaspari_cohn"])
    p_upd.add_argument("--taper-support", type=float, default=0.0)
    p_upd.add_argument("--taper-topology", default="line", choices=["line", "ring"])
    p_upd.add_argument("--seed", type=int, default=0)
    p_upd.add_argument("--out", default=None, help="write updated ensemble here (default stdout)")
    return parser


def _cmd_run(args) -> int:
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    try:
        records, _ = run_experiment(cfg, out_dir=args.out)
    except (DegenerateWeightsError, DivergenceError) as err:
        print(f"run aborted: {err}", file=sys.stderr)
        return 1
    print(f"completed {len(records)} cycles", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    kwargs = sweep_config_from_dict(raw)
    rows = diversity_sweep(**kwargs)
    target = raw.get("output")
    if target:
        write_sweep_csv(target, rows)
    else:
        sys.stdout.write("prior,y,q,gamma,ess_frac,ess_frac_approx\n")
        for prior, y_name, q, gamma, frac, approx in rows:
            sys.stdout.write(
                ",".join([prior, y_name, str(q), _fmt(gamma), _fmt(frac), _fmt(approx)]) + "\n"
            )
    return 0


def _cmd_summarize(args) -> int:
    rows = summarize(read_cycles_csv(args.infile))
    if args.out:
        write_summary_csv(args.out, rows)
    else:
        sys.stdout.write(SUMMARY_HEADER + "\n")
        for name, p10, p50, mean, p90 in rows:
            sys.stdout.write(",".join([name] + [_fmt(v) for v in (p10, p50, mean, p90)]) + "\n")
    return 0


def _read_obs_csv(path, state_dim: int) -> LinearGaussianObservation:
    components, values, variances = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "component,value,noise_variance":
            raise ValueError(f"unexpected observation header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            c, v, s2 = line.strip().split(",")
            components.append(int(c))
            values.append(float(v))
            variances.append(float(s2))
    if not components:
        raise ValueError("observation file holds no rows")
    if min(components) < 1 or max(components) > state_dim:
        raise ValueError(f"observed components must lie in [1, {state_dim}]")
    idx = np.asarray(components, dtype=int) - 1
    return LinearGaussianObservation.from_indices(
        idx, np.diag(variances), np.asarray(values), state_dim
    )


def _cmd_update(args) -> int:
    states = read_matrix_csv(args.ensemble)
    ens = Ensemble(states)
    obs = _read_obs_csv(args.obs, ens.q)
    taper = TaperSpec(kind=args.taper, support=args.taper_support, topology=args.taper_topology)
    if args.gamma == "auto":
        policy = GammaPolicy()
    else:
        policy = GammaPolicy.fixed(float(args.gamma))
    node = RngNode(args.seed).child("cycle", 1, "update")
    try:
        out, diag = enkpf_update(ens, obs, policy, taper, node)
    except (DegenerateWeightsError, DivergenceError) as err:
        print(f"update failed: {err}", file=sys.stderr)
        return 1
    n = ens.n_members
    print(
        f"gamma={_fmt(diag.gamma)} ess_frac={_fmt(diag.ess / n)} div_frac={_fmt(diag.div / n)}",
        file=sys.stderr,
    )
    if args.out:
        write_matrix_csv(args.out, out.states)
    else:
        q, n = out.states.shape
        sys.stdout.write(f"{q},{n}\n")
        for row in out.states:
            sys.stdout.write(",".join(_fmt(v) for v in row) + "\n")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "summarize": _cmd_summarize,
        "update": _cmd_update,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
