"""Command line entry point: ``axlab run | oracle | sweep``."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ALGOS, DEFAULT_BUDGET, ConfigError, ExperimentConfig, build_env, run_experiment, sweep_eps
from .oracle import oracle_summary


def parse_seeds(text: str) -> list[int]:
    """``"0..19"`` (inclusive range), ``"3,5,8"``, or a mix of both."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise argparse.ArgumentTypeError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    return seeds


def parse_params(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _add_env(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", required=True, help="constructor name (chain, gridworld, ...) or MDP JSON path")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="constructor parameter, repeatable")
    p.add_argument("--L", type=float, required=True, dest="L")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    _add_env(p)
    p.add_argument("--algo", choices=ALGOS, default="lasd")
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seeds", type=parse_seeds, default=[0])
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--const", action="append", metavar="NAME=VALUE", help="override one algorithm constant")
    p.add_argument("--lae-discovery", choices=("lasd", "lasd+"), default="lasd+")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        env=args.env,
        env_params=parse_params(args.param),
        algo=args.algo,
        L=args.L,
        eps=args.eps,
        delta=args.delta,
        seeds=args.seeds,
        budget=args.budget,
        preset=args.preset,
        overrides=parse_params(args.const),
        lae_discovery=args.lae_discovery,
        out=args.out,
        jobs=args.jobs,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="axlab", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run an algorithm over seeds and verify against the oracle")
    _add_run_args(run)

    orc = sub.add_parser("oracle", help="print layers, S_L, Gamma_L and identifiability")
    _add_env(orc)
    orc.add_argument("--eps", type=float, default=None)
    orc.add_argument("--out", default=None, help="also write oracle.json here")

    sw = sub.add_parser("sweep", help="mean samples per eps")
    _add_run_args(sw)
    sw.add_argument("--eps-list", required=True, type=lambda s: [float(x) for x in s.split(",") if x])
    sw.add_argument("--csv", default=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "oracle":
            mdp = build_env(args.env, parse_params(args.param))
            info = oracle_summary(mdp, args.L, args.eps)
            text = json.dumps(info, indent=2, sort_keys=True)
            print(text)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            return 0
        cfg = _config(args)
        if args.cmd == "run":
            summary = run_experiment(cfg)
            for r in summary.seeds:
                status = "pass" if r.passed else "FAIL"
                extra = f" error={r.error}" if r.error else ""
                print(f"seed {r.seed}: {status} K={r.K} samples={r.samples} trials={r.trials}{extra}")
            print(f"pass rate {summary.pass_rate:.3f} (required {summary.required_rate:.3f})")
            return 0 if summary.ok else 1
        rows = sweep_eps(cfg, args.eps_list, args.csv)
        print("eps,mean_samples,pass_rate")
        for r in rows:
            print(f"{r['eps']},{r['mean_samples']},{r['pass_rate']}")
        return 0
    except ConfigError as exc:
        print(f"axlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
