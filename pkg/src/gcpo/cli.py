"""Command-line entry point.

Subcommands:
  credit    batch credit assignment over a JSONL dump of rollout groups
  simulate  run the synthetic training loop and emit a CSV dynamics trace
  metrics   per-problem metric report from JSONL sample records
  bench     timing table for exact vs Monte-Carlo credits across group sizes

Exit codes: 0 ok, 1 input error, 2 numerical error. Set GCPO_LOG to a
logging level name (e.g. DEBUG) to control verbosity.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .credit import CreditConfig, mc_shapley, exact_shapley
from .errors import DegenerateEmbedding, GcpoError, InvalidParams
from .kernel import GatedFeatures, Rollout, RolloutGroup
from .metrics import distinct_n, eigenvalue_ratio, pass_at_k, self_bleu, self_rouge_l
from .redistribution import AdvantageConfig, assign_group_rewards
from .sim import ReasoningMode, SyntheticTask, TrainConfig, default_task, run_training
from .team_value import TeamValueConfig
from .kernel import build_gated_features, build_kernel

log = logging.getLogger("gcpo")

MODE_ALIASES = {"exact": "exact", "loo": "loo", "mc": "monte_carlo", "auto": "auto"}


def _parse_kernel_params(pairs):
    params = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise InvalidParams(f"--kernel-param expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        params[key] = float(value)
    return params


def _group_from_record(record, line_no):
    try:
        rollouts = [
            Rollout(id=str(r["id"]), embedding=np.asarray(r["embedding"], dtype=np.float64), reward=r["reward"])
            for r in record["rollouts"]
        ]
        return RolloutGroup(group_id=str(record["group_id"]), rollouts=rollouts)
    except (KeyError, TypeError, ValueError, InvalidParams) as exc:
        raise InvalidParams(f"line {line_no}: {exc}") from exc


def run_credit(args, out) -> int:
    kernel_kind = "polynomial" if args.kernel == "poly" else args.kernel
    credit_cfg = CreditConfig(
        eta=args.eta,
        mode=MODE_ALIASES[args.mode],
        permutations=args.permutations,
        epsilon=args.epsilon,
        delta=args.delta,
        seed=args.seed,
    )
    team_cfg = TeamValueConfig(eta=args.eta)
    params = _parse_kernel_params(args.kernel_param)

    with open(args.input) as stream:
        for line_no, line in enumerate(stream, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                print(f"line {line_no}: invalid JSON: {exc}", file=sys.stderr)
                return 1
            try:
                group = _group_from_record(record, line_no)
            except InvalidParams as exc:
                print(str(exc), file=sys.stderr)
                return 1
            try:
                result = assign_group_rewards(
                    group, credit_cfg, team_cfg, kernel_kind=kernel_kind, kernel_params=params
                )
            except (DegenerateEmbedding, InvalidParams) as exc:
                print(f"line {line_no}: {exc}", file=sys.stderr)
                return 1
            except GcpoError as exc:
                print(f"group {group.group_id}: numerical failure: {exc}", file=sys.stderr)
                return 2
            report = result.report
            out.write(
                json.dumps(
                    {
                        "group_id": group.group_id,
                        "method": report.method_used,
                        "eta": args.eta,
                        "rollouts": [
                            {
                                "id": r.id,
                                "reward": result.rewards[i],
                                "credit": result.credits[i],
                                "redistributed_reward": result.redistributed[i],
                                "advantage_gcpo": result.advantages_gcpo[i],
                                "advantage_grpo": result.advantages_grpo[i],
                                "delta_advantage": result.corrections[i],
                            }
                            for i, r in enumerate(group.rollouts)
                        ],
                        "diagnostics": {
                            "team_value": report.team_value_total,
                            "permutations": report.permutations_used,
                            "error_bound": report.error_bound,
                        },
                    }
                )
                + "\n"
            )
    return 0


def _task_from_config(cfg_dict):
    if "modes" not in cfg_dict:
        return default_task()
    modes = [
        ReasoningMode(
            direction=np.asarray(m["direction"], dtype=np.float64),
            p_correct=float(m["p_correct"]),
            noise_scale=float(m.get("noise_scale", 0.0)),
        )
        for m in cfg_dict["modes"]
    ]
    return SyntheticTask(modes=modes, prompt_count=int(cfg_dict.get("prompt_count", 1)))


def run_simulate(args, out) -> int:
    cfg_dict = {}
    if args.config:
        try:
            with open(args.config) as stream:
                cfg_dict = json.load(stream)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    try:
        task = _task_from_config(cfg_dict)
        train_keys = (
            "algorithm group_size learning_rate steps eta beta clip_low clip_high "
            "seed credit_mode pass_k old_refresh_every"
        ).split()
        kwargs = {k: cfg_dict[k] for k in train_keys if k in cfg_dict}
        if args.algorithm is not None:
            kwargs["algorithm"] = args.algorithm
        if args.seed is not None:
            kwargs["seed"] = args.seed
        if args.steps is not None:
            kwargs["steps"] = args.steps
        cfg = TrainConfig(**kwargs)
    except (InvalidParams, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    dynamics = run_training(task, cfg)
    dynamics.write_csv(out)
    return 0


def run_metrics(args, out) -> int:
    ks = [int(k) for k in args.k.split(",")] if args.k else [1]
    with open(args.input) as stream:
        for line_no, line in enumerate(stream, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                n, c = int(record["n"]), int(record["c"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                print(f"line {line_no}: {exc}", file=sys.stderr)
                return 1
            try:
                report = {"n": n, "c": c, "pass_at_k": {str(k): pass_at_k(n, c, k) for k in ks if k <= n}}
                sequences = record.get("sequences")
                if sequences:
                    report["distinct_1"] = distinct_n(sequences, 1)
                    if len(sequences) >= 2:
                        sb = self_bleu(sequences, max_n=args.max_n)
                        sr = self_rouge_l(sequences)
                        report["self_bleu"] = sb
                        report["self_rouge_l"] = sr
                        report["diversity_bleu"] = 1.0 - sb
                        report["diversity_rouge_l"] = 1.0 - sr
                if "embeddings" in record and "rewards" in record:
                    emb = np.asarray(record["embeddings"], dtype=np.float64)
                    rew = np.asarray(record["rewards"], dtype=np.float64)
                    group = RolloutGroup(
                        group_id=str(line_no),
                        rollouts=[
                            Rollout(id=str(i), embedding=emb[i], reward=rew[i])
                            for i in range(emb.shape[0])
                        ],
                    )
                    kern = build_kernel(build_gated_features(group))
                    spectrum = eigenvalue_ratio(kern)
                    report["eigenvalue_ratio"] = spectrum.leading_ratio
            except GcpoError as exc:
                print(f"line {line_no}: {exc}", file=sys.stderr)
                return 1
            out.write(json.dumps(report) + "\n")
    return 0


def run_bench(args, out) -> int:
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    out.write(f"{'m':>4} {'exact_s':>12} {'mc_s':>12} (K={args.permutations}, d={args.dim})\n")
    for m in (4, 8, 16, 32, 64):
        Z = rng.standard_normal((m, args.dim))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        features = GatedFeatures(matrix=Z, rewards=np.ones(m))
        cfg = CreditConfig(eta=args.eta, permutations=args.permutations, seed=args.seed)
        mc_shapley(features, cfg)  # warm-up (jit compile)
        t0 = time.perf_counter()
        mc_shapley(features, cfg)
        t_mc = time.perf_counter() - t0
        if m <= cfg.exact_cutoff:
            t0 = time.perf_counter()
            exact_shapley(features, cfg)
            t_exact = f"{time.perf_counter() - t0:12.6f}"
        else:
            t_exact = f"{'-':>12}"
        out.write(f"{m:>4} {t_exact} {t_mc:12.6f}\n")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="gcpo", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("credit", help="credit assignment over a JSONL rollout dump")
    p.add_argument("input")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--mode", choices=sorted(MODE_ALIASES), default="auto")
    p.add_argument("--permutations", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernel", choices=["dot", "rbf", "laplacian", "poly"], default="dot")
    p.add_argument("--kernel-param", action="append", metavar="KEY=VALUE")
    p.add_argument("--output", default=None)

    p = sub.add_parser("simulate", help="synthetic training run, CSV dynamics to stdout")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--algorithm", choices=["grpo", "gcpo"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--output", default=None)

    p = sub.add_parser("metrics", help="metric report from JSONL sample records")
    p.add_argument("input")
    p.add_argument("--k", default="1", help="comma-separated k values for pass@k")
    p.add_argument("--max-n", type=int, default=4, help="max n-gram order for self-BLEU")
    p.add_argument("--output", default=None)

    p = sub.add_parser("bench", help="exact vs Monte-Carlo timing table")
    p.add_argument("--permutations", type=int, default=200)
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("GCPO_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    runner = {
        "credit": run_credit,
        "simulate": run_simulate,
        "metrics": run_metrics,
        "bench": run_bench,
    }[args.command]
    if args.output:
        with open(args.output, "w") as out:
            return runner(args, out)
    return runner(args, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
