"""Command-line interface: scenario replay, loan quotes, and experiments.

Exit codes: 0 success, 1 invariant or assertion failure, 2 infeasible
request, 3 I/O or parse error. With ``--out DIR`` each command writes its
machine-readable artifacts (snapshot, CSV, JSON report) plus rendered
figures into the directory.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import ledger, scenario, simlab, verify
from .errors import CreditLimitExceededError, InfeasibleLoanError, LedgerError
from .model import EngineConfig, LedgerState
from .pricing import break_even_rate, quote_loan
from .rates import PPM

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3

EXPERIMENTS = ("mc-breakeven", "sybil-split", "repay-default")

MC_GRID_D_PPM = (50_000, 100_000, 200_000, 500_000)
MC_GRID_TERMS = (1, 4)
MC_PRINCIPAL = 100_000


@dataclass(frozen=True)
class RunConfig:
    """One resolved CLI invocation; identical configs yield identical outputs."""

    command: str
    scenario: str | None = None
    snapshot: str | None = None
    out: str | None = None
    rng_seed: int = 0
    rdmax_ppm: int = 80_000
    gamma_ppm: int | None = None
    report_format: str = "table"
    trials: int | None = None
    experiment: str | None = None

    @property
    def engine(self) -> EngineConfig:
        return EngineConfig(rdmax_ppm=self.rdmax_ppm, gamma_ppm=self.gamma_ppm)


def _out_dir(config: RunConfig) -> Path | None:
    if config.out is None:
        return None
    path = Path(config.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(config: RunConfig, document: dict, table: str) -> None:
    if config.report_format == "machine":
        print(json.dumps(document, sort_keys=True))
    else:
        print(table)


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def cmd_replay(config: RunConfig) -> int:
    from . import reporting

    try:
        with open(config.scenario, encoding="utf-8") as handle:
            events = scenario.parse_scenario(handle)
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_IO
    except scenario.ScenarioParseError as exc:
        print(f"scenario parse error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        state, report, log = scenario.replay(events, config.engine)
    except scenario.ReplayError as exc:
        print(f"replay failed at event {exc.index}: {exc.reason}", file=sys.stderr)
        return EXIT_VIOLATION

    flagged = verify.over_delegated(state)
    document = {
        "command": "replay",
        "events": [
            {
                "index": r.index,
                "op": r.op,
                "detail": r.detail,
                "total_credit": r.total_credit,
            }
            for r in log
        ],
        "report": report.to_dict(),
        "over_delegated": flagged,
        "snapshot": scenario.export_state(state),
    }
    table = reporting.format_table(
        ["index", "op", "detail", "total_credit"],
        [[r.index, r.op, r.detail, r.total_credit] for r in log],
    )
    summary = (
        f"\n{len(log)} events, final aggregate credit {ledger.total_credit(state)}, "
        f"invariants {'ok' if report.ok else 'VIOLATED'}"
    )
    if flagged:
        summary += f"\nover-delegated accounts: {', '.join(flagged)}"
    _emit(config, document, table + summary)

    out = _out_dir(config)
    if out is not None:
        (out / "snapshot.json").write_text(scenario.dumps_snapshot(state), encoding="utf-8")
        (out / "report.json").write_text(
            json.dumps(
                {"report": report.to_dict(), "over_delegated": flagged},
                sort_keys=True, indent=2,
            ) + "\n",
            encoding="utf-8",
        )
        reporting.write_delimited(
            out / "events.csv",
            ["index", "line", "op", "detail", "total_credit"],
            [[r.index, r.line, r.op, r.detail, r.total_credit] for r in log],
        )
        reporting.render_credit_trajectory(log, out / "credit_trajectory.png")
    return EXIT_OK if report.ok else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# quote
# ---------------------------------------------------------------------------


def cmd_quote(
    config: RunConfig, borrower: str, principal: int, term: int, default_prob_ppm: int
) -> int:
    from . import reporting

    try:
        text = Path(config.snapshot).read_text(encoding="utf-8")
        state = scenario.loads_snapshot(text)
    except OSError as exc:
        print(f"cannot read snapshot: {exc}", file=sys.stderr)
        return EXIT_IO
    except scenario.SnapshotError as exc:
        print(f"snapshot rejected: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        quote = quote_loan(
            state, borrower, principal, term, default_prob_ppm, config=config.engine
        )
    except InfeasibleLoanError as exc:
        print(f"infeasible: {exc} (first failing edge {exc.edge_index})", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CreditLimitExceededError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except LedgerError as exc:
        print(f"quote rejected: {exc}", file=sys.stderr)
        return EXIT_IO

    document = {
        "command": "quote",
        "borrower": borrower,
        "principal": principal,
        "term": term,
        "default_prob_ppm": default_prob_ppm,
        "protocol_rate_ppm": quote.protocol_rate_ppm,
        "protocol_premium": quote.protocol_premium,
        "utilization_ppm": quote.utilization_ppm,
        "delegation_rate_ppm": quote.delegation_rate_ppm,
        "locked": [
            {"sponsor": e.sponsor, "locked": e.locked, "payout": e.payout}
            for e in quote.locked
        ],
        "delegation_premium": quote.delegation_premium,
        "earned_award": quote.earned_award,
        "total_interest": quote.protocol_premium + quote.delegation_premium,
    }
    lines = [
        f"quote for {borrower}: principal {principal}, term {term}, "
        f"default probability {default_prob_ppm / PPM:.4%}",
        f"  protocol rate     {quote.protocol_rate_ppm} ppm/period",
        f"  protocol premium  {quote.protocol_premium}",
        f"  seed utilization  {quote.utilization_ppm} ppm",
        f"  delegation rate   {quote.delegation_rate_ppm} ppm/period",
        f"  delegation premium {quote.delegation_premium}",
        f"  earned award      {quote.earned_award}",
        f"  total interest    {quote.protocol_premium + quote.delegation_premium}",
    ]
    if quote.locked:
        lines.append(
            reporting.format_table(
                ["edge", "sponsor", "locked", "payout"],
                [[i, e.sponsor, e.locked, e.payout] for i, e in enumerate(quote.locked)],
            )
        )
    _emit(config, document, "\n".join(lines))

    out = _out_dir(config)
    if out is not None:
        (out / "quote.json").write_text(
            json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def _experiment_mc(config: RunConfig, out: Path | None):
    from . import reporting

    trials = config.trials or 100_000
    rows = []
    summaries = []
    for cell, (d_ppm, term) in enumerate(
        (d, t) for d in MC_GRID_D_PPM for t in MC_GRID_TERMS
    ):
        rate = break_even_rate(d_ppm, term)
        summary = simlab.mc_breakeven(
            MC_PRINCIPAL, term, d_ppm, rate, trials,
            config.rng_seed + 7919 * (cell + 1),  # decorrelate grid cells
            config=config.engine,
        )
        summaries.append(summary)
        rows.append(_mc_row(summary, "breakeven"))
    # 10% under the break-even rate must lose money, visibly beyond noise
    d_ppm, term = 100_000, 1
    cheap = (break_even_rate(d_ppm, term) * 9) // 10
    under = simlab.mc_breakeven(
        MC_PRINCIPAL, term, d_ppm, cheap, trials, config.rng_seed, config=config.engine
    )
    rows.append(_mc_row(under, "underpriced"))
    accepted = all(s.accepted for s in summaries) and (
        under.mean_pnl < -3.0 * under.stderr
    )
    if out is not None:
        reporting.write_delimited(
            out / "mc_breakeven.csv",
            ["kind", "default_prob_ppm", "term", "rate_ppm", "trials",
             "mean_pnl", "std_pnl", "stderr", "within_band"],
            [
                [r["kind"], r["default_prob_ppm"], r["term"], r["rate_ppm"], r["trials"],
                 f"{r['mean_pnl']:.6f}", f"{r['std_pnl']:.6f}", f"{r['stderr']:.6f}",
                 r["within_band"]]
                for r in rows
            ],
        )
        reporting.render_mc_results(rows, out / "mc_breakeven.png")
    table = reporting.format_table(
        ["kind", "D", "T", "rate ppm", "mean P&L", "3*SE", "in band"],
        [
            [r["kind"], f"{r['default_prob_ppm'] / PPM:.2f}", r["term"], r["rate_ppm"],
             f"{r['mean_pnl']:.2f}", f"{3 * r['stderr']:.2f}", r["within_band"]]
            for r in rows
        ],
    )
    document = {"command": "experiment", "experiment": "mc-breakeven",
                "accepted": accepted, "rows": rows}
    return accepted, document, table


def _mc_row(summary: simlab.ExperimentSummary, kind: str) -> dict:
    return {
        "kind": kind,
        "default_prob_ppm": summary.params["default_prob_ppm"],
        "term": summary.params["term"],
        "rate_ppm": summary.params["protocol_rate_ppm"],
        "trials": summary.trials,
        "mean_pnl": summary.mean_pnl,
        "std_pnl": summary.std_pnl,
        "stderr": summary.stderr,
        "within_band": summary.accepted,
    }


def _experiment_sybil(config: RunConfig, out: Path | None):
    from . import reporting

    runs = config.trials or 1_000
    rng = random.Random(config.rng_seed)
    rows = []
    accepted = True
    for run in range(runs):
        state = LedgerState()
        base = rng.randint(200, 5_000)
        ledger.add_seed(state, "seed", base)
        ledger.onboard(state, "seed", "holder", rng.randint(100, base))
        k = rng.randint(2, 10)
        summary = simlab.sybil_split(state, "holder", k, rng_seed=rng.randrange(2**32))
        accepted = accepted and summary.accepted
        rows.append(
            {
                "run": run,
                "pseudonyms": k,
                "total": summary.params["total"],
                "total_before": summary.detail["total_before"],
                "total_after": summary.detail["total_after"],
                "limit_drop": summary.detail["limit_drop"],
                "conserved": summary.accepted,
            }
        )
    if out is not None:
        reporting.write_delimited(
            out / "sybil_split.csv",
            ["run", "pseudonyms", "total", "total_before", "total_after",
             "limit_drop", "conserved"],
            [[r["run"], r["pseudonyms"], r["total"], r["total_before"],
              r["total_after"], r["limit_drop"], r["conserved"]] for r in rows],
        )
        reporting.render_sybil_results(rows, out / "sybil_split.png")
    shown = rows[:10]
    table = reporting.format_table(
        ["run", "pseudonyms", "total", "Sigma C before", "Sigma C after", "conserved"],
        [[r["run"], r["pseudonyms"], r["total"], r["total_before"], r["total_after"],
          r["conserved"]] for r in shown],
    ) + f"\n... {len(rows)} runs, all conserved: {accepted}"
    document = {"command": "experiment", "experiment": "sybil-split",
                "accepted": accepted, "runs": len(rows)}
    return accepted, document, table


def _experiment_ladder(config: RunConfig, out: Path | None):
    from . import reporting

    params = simlab.LadderParams(configs=config.trials or 10_000)
    summary = simlab.repay_default_ladder(params, config.rng_seed, keep_traces=True)
    traces = summary.traces or []
    if out is not None:
        reporting.write_delimited(
            out / "repay_default.csv",
            ["config", "rungs", "initial_limit", "final_principal",
             "protocol_premiums", "attacker_pnl"],
            [
                [i, len(t.steps), t.initial_limit, t.final_principal,
                 sum(s.protocol_premium for s in t.steps), t.attacker_pnl]
                for i, t in enumerate(traces)
            ],
        )
        reporting.render_ladder_results(
            [t.attacker_pnl for t in traces], out / "repay_default.png"
        )
    worst = summary.worst_trace
    table = "\n".join(
        [
            f"repay-then-default sweep: {summary.trials} configurations, "
            f"max attacker P&L {summary.detail['max_pnl']}",
            f"argmax trace: rungs {summary.detail['worst_rungs']}, "
            f"initial limit {summary.detail['worst_initial_limit']}, "
            f"final principal {summary.detail['worst_final_principal']}",
            f"bound holds: {summary.accepted}",
        ]
    )
    document = {
        "command": "experiment",
        "experiment": "repay-default",
        "accepted": summary.accepted,
        "summary": summary.to_dict(),
        "worst_trace": {
            "initial_limit": worst.initial_limit,
            "final_principal": worst.final_principal,
            "attacker_pnl": worst.attacker_pnl,
            "steps": [
                {
                    "principal": s.principal,
                    "protocol_premium": s.protocol_premium,
                    "delegation_premium": s.delegation_premium,
                    "earned_award": s.earned_award,
                }
                for s in worst.steps
            ],
        }
        if worst
        else None,
    }
    return summary.accepted, document, table


def cmd_experiment(config: RunConfig) -> int:
    if config.experiment not in EXPERIMENTS:
        print(
            f"unknown experiment {config.experiment!r}; choose from {', '.join(EXPERIMENTS)}",
            file=sys.stderr,
        )
        return EXIT_IO
    out = _out_dir(config)
    if config.experiment == "mc-breakeven":
        accepted, document, table = _experiment_mc(config, out)
    elif config.experiment == "sybil-split":
        accepted, document, table = _experiment_sybil(config, out)
    else:
        accepted, document, table = _experiment_ladder(config, out)
    _emit(config, document, table)
    if out is not None:
        (out / "summary.json").write_text(
            json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return EXIT_OK if accepted else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="creditforest",
        description="Sponsor-delegated credit ledger: replay, quotes, experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", metavar="PATH", help="directory for reports and figures")
        p.add_argument("--seed", type=int, default=0, metavar="N", help="RNG seed")
        p.add_argument("--rdmax", type=int, default=80_000, metavar="PPM",
                       help="delegation premium rate at zero utilization")
        p.add_argument("--gamma", type=int, default=None, metavar="PPM",
                       help="earned-credit award factor (default: award the cap)")
        p.add_argument("--format", choices=("table", "machine"), default="table",
                       help="report format")

    replay = sub.add_parser("replay", help="replay a scenario file")
    replay.add_argument("--scenario", required=True, metavar="PATH")
    common(replay)

    quote = sub.add_parser("quote", help="price a loan against a snapshot")
    quote.add_argument("borrower")
    quote.add_argument("amount", type=int)
    quote.add_argument("term", type=int)
    quote.add_argument("default_prob_ppm", type=int)
    quote.add_argument("--snapshot", required=True, metavar="PATH")
    common(quote)

    experiment = sub.add_parser("experiment", help="run a named experiment")
    experiment.add_argument("--experiment", required=True, metavar="NAME",
                            help=f"one of: {', '.join(EXPERIMENTS)}")
    experiment.add_argument("--trials", type=int, default=None, metavar="N")
    common(experiment)
    return parser


def _to_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        scenario=getattr(args, "scenario", None),
        snapshot=getattr(args, "snapshot", None),
        out=args.out,
        rng_seed=args.seed,
        rdmax_ppm=args.rdmax,
        gamma_ppm=args.gamma,
        report_format=args.format,
        trials=getattr(args, "trials", None),
        experiment=getattr(args, "experiment", None),
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = _to_config(args)
    if args.command == "replay":
        return cmd_replay(config)
    if args.command == "quote":
        return cmd_quote(config, args.borrower, args.amount, args.term, args.default_prob_ppm)
    return cmd_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
