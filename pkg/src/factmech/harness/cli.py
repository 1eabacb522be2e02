"""Command-line front end.

    factmech verify        --config scenario.toml
    factmech sweep         --config scenario.toml --svg
    factmech penalty-curve --config scenario.toml
    factmech compare       --config scenario.toml --trials 5000
    factmech train         --config scenario.toml --workers 4

Exit codes: 0 success, 1 verification check failed, 2 bad configuration or
arguments, 3 internal invariant violated.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import (EXIT_BAD_CONFIG, EXIT_CHECK_FAILED, EXIT_INTERNAL, EXIT_OK,
                      FactmechError, InvariantViolation)
from .config import ScenarioConfig, load_config, with_overrides
from .scenarios import (run_compare, run_penalty_curve, run_sweep, run_train,
                        write_report)
from .svg import write_chart
from .verify import run_all


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario TOML file")
    common.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    common.add_argument("--trials", type=int, default=None,
                        help="override the Monte Carlo trial count")
    common.add_argument("--paper-scale", action="store_true",
                        help="run with 100000 trials (overridden by --trials)")
    common.add_argument("--out", default="out", help="output directory")

    parser = argparse.ArgumentParser(
        prog="factmech",
        description="Free-rider penalties, truthfulness competition, and "
                    "equilibrium verification for a federated-learning market.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common],
                   help="run the invariant suite and write verify.json")
    for name, blurb in (("sweep", "misreport sweep for one agent"),
                        ("penalty-curve", "penalty-plus-cost curve over contributions"),
                        ("compare", "standalone / federation / mechanism losses")):
        p = sub.add_parser(name, parents=[common], help=blurb)
        p.add_argument("--svg", action="store_true", help="also write an SVG chart")
    p = sub.add_parser("train", parents=[common],
                       help="full pipeline with synthetic federated training")
    p.add_argument("--svg", action="store_true", help="also write an SVG chart")
    p.add_argument("--workers", type=int, default=1,
                   help="threads for per-agent local training")
    return parser


def _cmd_verify(cfg: ScenarioConfig, out: Path) -> int:
    report = run_all(cfg)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: residual {check.residual:.3g} "
              f"(tolerance {check.tolerance:.3g}) — {check.detail}")
    path = out / "verify.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    passed = sum(1 for c in report.checks if c.passed)
    print(f"verify: {passed}/{len(report.checks)} checks passed; wrote {path}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_sweep(cfg: ScenarioConfig, out: Path, svg: bool) -> int:
    table = run_sweep(cfg)
    path = out / "sweep.csv"
    table.write_csv(path)
    pcts = table.column("misreport_pct")
    nets = table.column("mean_net_improvement")
    best = max(range(len(nets)), key=nets.__getitem__)
    print(f"peak mean net improvement {nets[best]:.6g} at misreport "
          f"{pcts[best]:+g}%; wrote {path}")
    if svg:
        chart = out / "sweep.svg"
        write_chart(chart, pcts,
                    {"mean net improvement": nets, "win probability":
                     table.column("win_prob")},
                    "Misreport sweep", "misreport %", "value")
        print(f"wrote {chart}")
    return EXIT_OK


def _cmd_penalty_curve(cfg: ScenarioConfig, out: Path, svg: bool) -> int:
    table = run_penalty_curve(cfg)
    path = out / "penalty_curve.csv"
    table.write_csv(path)
    ms = table.column("m")
    vals = table.column("penalty_plus_cost")
    best = min(range(len(vals)), key=vals.__getitem__)
    print(f"penalty + data cost minimized at m = {ms[best]:.6g} "
          f"(standalone optimum {table.metadata['local_optimum']}); wrote {path}")
    if svg:
        chart = out / "penalty_curve.svg"
        write_chart(chart, ms, {"penalty + data cost": vals},
                    "Under-contribution penalty", "contribution m", "loss")
        print(f"wrote {chart}")
    return EXIT_OK


def _cmd_compare(cfg: ScenarioConfig, out: Path, svg: bool) -> int:
    table = run_compare(cfg)
    path = out / "compare.csv"
    table.write_csv(path)
    agg = table.rows[-1]
    print(f"mean loss over {cfg.constants.num_agents} agents: "
          f"standalone {agg[1]:.6g}, federation {agg[2]:.6g}, "
          f"mechanism {agg[3]:.6g} (stderr {agg[4]:.2g}); wrote {path}")
    if svg:
        per_agent = table.rows[:-1]
        chart = out / "compare.svg"
        write_chart(chart, [r[0] for r in per_agent],
                    {"standalone": [r[1] for r in per_agent],
                     "federation": [r[2] for r in per_agent],
                     "mechanism": [r[3] for r in per_agent]},
                    "Per-agent mean loss", "agent index", "loss")
        print(f"wrote {chart}")
    return EXIT_OK


def _cmd_train(cfg: ScenarioConfig, out: Path, svg: bool, workers: int) -> int:
    outputs = run_train(cfg, workers=workers)
    csv_path = out / "train.csv"
    outputs.table.write_csv(csv_path)
    report_path = out / "train_report.json"
    write_report(outputs.report, report_path)
    ledger = outputs.report["ledger"]
    winners = outputs.report["competition"]["winners"]
    print(f"trained {cfg.train.rounds} rounds; final squared gradient norm "
          f"{outputs.run.grad_sq_norm_history[-1]:.6g}")
    print(f"competition winners {winners}; fees {ledger['fees_collected']:.6g}, "
          f"payouts {ledger['payouts_made']:.6g}, feasible {ledger['feasible']}")
    if ledger["deficit"]:
        print(f"note: leftover winner overdrew the fee pool by "
              f"{ledger['deficit']:.6g}")
    print(f"wrote {csv_path} and {report_path}")
    if svg:
        chart = out / "train.svg"
        write_chart(chart, outputs.table.column("round"),
                    {"avg squared gradient norm":
                     outputs.table.column("avg_sq_grad_norm")},
                    "Training progress", "round", "squared gradient norm")
        print(f"wrote {chart}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = with_overrides(cfg, seed=args.seed, trials=args.trials,
                             paper_scale=args.paper_scale)
        if args.command == "train" and args.workers < 1:
            raise FactmechError(f"--workers must be >= 1, got {args.workers}")
    except InvariantViolation as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except FactmechError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    out = Path(args.out)
    try:
        if args.command == "verify":
            return _cmd_verify(cfg, out)
        if args.command == "sweep":
            return _cmd_sweep(cfg, out, args.svg)
        if args.command == "penalty-curve":
            return _cmd_penalty_curve(cfg, out, args.svg)
        if args.command == "compare":
            return _cmd_compare(cfg, out, args.svg)
        return _cmd_train(cfg, out, args.svg, args.workers)
    except InvariantViolation as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except FactmechError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
