"""Command-line entry point: ``resmatch match|verify|payoff|cost|simulate``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from resmatch import __version__
from resmatch.cost import (
    Budget,
    expected_interviews,
    expected_spend,
    format_money,
    optimal_application_count,
    parse_money,
    scan,
    total_expected_payoff,
)
from resmatch.engines import GuardLimitError, ProposingSide, boston_pool, gale_shapley
from resmatch.formats import (
    JsonLinesTrace,
    ParseError,
    RunManifest,
    load_cost_config,
    load_payoff_spec,
    load_sim_config,
    matching_to_csv,
    parse_market_file,
    parse_matching_file,
    resolve_config,
    rows_to_csv,
    write_text,
)
from resmatch.game import Player, all_players, build_payoff_table, check_rank_all_dominance
from resmatch.market import MarketError
from resmatch.simulate import escalation_dynamics, simulate_market
from resmatch.stability import find_blocking_pairs

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_GUARD = 5
EXIT_INTERNAL = 70


def _emit(path: Optional[str], text: str, out) -> None:
    if path:
        write_text(path, text)
    else:
        out.write(text)


def cmd_match(args, manifest: RunManifest, out) -> int:
    market = parse_market_file(args.input)
    manifest.add_input(args.input)
    manifest.config.update(engine=args.engine, propose=args.propose, flatten=args.flatten)
    if args.flatten:
        market = market.flattened()
    trace_stream = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        sink = JsonLinesTrace(trace_stream) if trace_stream else None
        if args.engine == "boston":
            matching = boston_pool(market, trace=sink)
        else:
            matching = gale_shapley(market, ProposingSide(args.propose), trace=sink)
    finally:
        if trace_stream:
            trace_stream.close()
    _emit(args.output, matching_to_csv(matching), out)
    return EXIT_OK


def cmd_verify(args, manifest: RunManifest, out) -> int:
    market = parse_market_file(args.input)
    matching = parse_matching_file(args.matching, market)
    manifest.add_input(args.input)
    manifest.add_input(args.matching)
    pairs = find_blocking_pairs(market, matching)
    for bp in pairs:
        out.write(f"BLOCKING {bp}\n")
    verdict = "STABLE" if not pairs else "UNSTABLE"
    out.write(f"{verdict}, {len(pairs)} blocking pairs\n")
    return EXIT_OK


def cmd_payoff(args, manifest: RunManifest, out) -> int:
    market = parse_market_file(args.input)
    spec_path = resolve_config(args.spec)
    spec = load_payoff_spec(spec_path)
    manifest.add_input(args.input)
    manifest.add_input(spec_path)
    players = [Player.parse(p) for p in args.players.split(",")] if args.players else list(all_players(market))
    manifest.config.update(players=[str(p) for p in players], actions=args.actions)

    cache: dict = {}
    table = build_payoff_table(market, spec, players, args.actions, _outcome_cache=cache)
    header = [f"action:{p}" for p in players] + [f"payoff:{p}" for p in players]
    rows = [list(labels) + [str(v) for v in payoffs] for labels, payoffs in table.rows()]
    _emit(args.output, rows_to_csv(header, rows), out)

    # the dominance verdict always covers every participant
    if args.players:
        cache = None
    verdict = check_rank_all_dominance(market, spec, args.actions, _outcome_cache=cache).summary()
    text = json.dumps(verdict, sort_keys=True) + "\n"
    if args.summary:
        write_text(args.summary, text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_cost(args, manifest: RunManifest, out) -> int:
    schedule_path = resolve_config(args.schedule)
    spec, budget = load_cost_config(schedule_path)
    manifest.add_input(schedule_path)
    if args.budget_money is not None:
        budget = Budget(parse_money(args.budget_money), budget.time)
    if args.budget_time is not None:
        budget = Budget(budget.money, Fraction(args.budget_time))
    q_max = args.q_max if args.q_max is not None else spec.program_count
    if q_max is None:
        raise MarketError(f"{schedule_path}: no [market] programs; pass --q-max")
    manifest.config.update(q_max=q_max, budget_money_cents=budget.money,
                           budget_time=str(budget.time), worst_case=args.worst_case)

    rows = scan(spec, budget, q_max, args.worst_case)
    if args.output:
        write_text(args.output, rows_to_csv(
            ["q", "application_cost_cents", "expected_interviews", "expected_spend_cents",
             "expected_payoff_cents", "feasible"],
            [[r.q, r.application_cost, f"{float(r.expected_interviews):.6f}",
              round(r.expected_spend), round(r.expected_payoff), int(r.feasible)] for r in rows],
        ))

    if args.optimize:
        q, _ = optimal_application_count(spec, budget, q_max, args.worst_case)
        out.write(f"optimal applications q* = {q}\n")
    elif args.programs is not None:
        q = args.programs
    else:
        return EXIT_OK
    value, feasible = total_expected_payoff(q, spec, budget, args.worst_case)
    out.write(f"applications: {q}\n")
    out.write(f"application cost: {format_money(spec.fee_schedule.cost(q))}\n")
    out.write(f"expected interviews: {float(expected_interviews(q, spec)):.3f}\n")
    out.write(f"expected total cost: {format_money(expected_spend(q, spec, args.worst_case))}\n")
    out.write(f"expected payoff: {format_money(value)}\n")
    out.write(f"budget: {format_money(budget.money)}, feasible: {'yes' if feasible else 'no'}\n")
    return EXIT_OK


def cmd_simulate(args, manifest: RunManifest, out) -> int:
    config_path = resolve_config(args.config)
    config, escalation = load_sim_config(config_path)
    manifest.add_input(config_path)
    overrides = {k: v for k, v in (("seed", args.seed), ("replicas", args.replicas),
                                   ("workers", args.workers)) if v is not None}
    if overrides:
        config = replace(config, **overrides)
    manifest.seed = config.seed
    manifest.config.update(simulation=asdict(config))
    out_dir = Path(args.out_dir)

    result = simulate_market(config)
    write_text(out_dir / "curve.csv", rows_to_csv(
        ["k", "cum_prob", "stderr", "n_k", "matched_k"],
        [[k, repr(p), repr(se), n, m] for k, p, se, n, m in result.curve.rows()],
    ))
    out.write(f"match rate {result.match_rate:.4f}, mean interviews {result.mean_interviews:.3f}, "
              f"curve k = 0..{result.curve.max_k}\n")

    rounds = args.rounds if args.rounds is not None else (escalation.rounds if escalation else 0)
    if rounds:
        schedule = escalation.schedule if escalation else "ophtho2019.cfg"
        schedule_path = resolve_config(schedule)
        manifest.add_input(schedule_path)
        cost_spec, budget = load_cost_config(schedule_path)
        if escalation and escalation.budget_money is not None:
            budget = Budget(escalation.budget_money, budget.time)
        if escalation and escalation.budget_time is not None:
            budget = Budget(budget.money, escalation.budget_time)
        start = escalation.start_applications if escalation else config.applications
        series = escalation_dynamics(replace(config, applications=start), rounds, cost_spec, budget)
        manifest.config.update(escalation={"rounds": rounds, "start_applications": start,
                                           "schedule": str(schedule_path)})
        write_text(out_dir / "escalation.csv", rows_to_csv(
            ["round", "mean_q", "mean_interviews", "interview_rate", "match_rate"],
            [[s.round, repr(s.mean_applications), repr(s.mean_interviews),
              repr(float(s.interview_rate)) if s.interview_rate is not None else "",
              repr(s.match_rate)] for s in series],
        ))
        out.write("escalation mean q: " + " ".join(f"{s.mean_applications:g}" for s in series) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resmatch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"resmatch {__version__}")
    parser.add_argument("--manifest", help="write the run manifest here (default depends on subcommand)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="run a matching engine")
    p.add_argument("-i", "--input", required=True, help="market file (.csv or .json)")
    p.add_argument("--engine", choices=["gs", "boston"], default="gs")
    p.add_argument("--propose", choices=["applicants", "programs"], default="applicants")
    p.add_argument("--flatten", action="store_true", help="flatten tiered program lists first")
    p.add_argument("-o", "--output", help="matching CSV (default stdout)")
    p.add_argument("--trace", help="write a JSON-lines step trace here")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("verify", help="check a matching for blocking pairs")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-m", "--matching", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("payoff", help="rank/not-rank payoff table and dominance check")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--spec", default="payoff_default.cfg")
    p.add_argument("--players", help="comma-separated applicant:ID / program:ID (default: everyone)")
    p.add_argument("--actions", choices=["auto", "binary", "subsets"], default="auto")
    p.add_argument("-o", "--output", help="table CSV (default stdout)")
    p.add_argument("--summary", help="dominance summary JSON (default stdout)")
    p.set_defaults(func=cmd_payoff)

    p = sub.add_parser("cost", help="application cost model and optimizer")
    p.add_argument("--schedule", default="ophtho2019.cfg")
    p.add_argument("--programs", type=int, help="evaluate this many applications")
    p.add_argument("--q-max", type=int, help="largest application count scanned (default: programs in schedule)")
    p.add_argument("--budget-money", help="money budget in dollars")
    p.add_argument("--budget-time", help="time budget")
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--worst-case", action="store_true",
                   help="budget for an interview at every application")
    p.add_argument("-o", "--output", help="per-q CSV")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("simulate", help="Monte Carlo match curve and escalation dynamics")
    p.add_argument("-c", "--config", default="simulate_default.cfg")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--rounds", type=int, help="escalation rounds (0 disables)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)
    return parser


def _manifest_path(args) -> Optional[Path]:
    if args.manifest:
        return Path(args.manifest)
    if args.command == "simulate":
        return Path(args.out_dir) / "manifest.json"
    output = getattr(args, "output", None)
    return Path(output + ".manifest.json") if output else None


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    manifest = RunManifest(subcommand=args.command, version=__version__)
    started = time.perf_counter()
    try:
        code = args.func(args, manifest, out)
    except ParseError as exc:
        err.write(f"parse error: {exc}\n")
        return EXIT_PARSE
    except MarketError as exc:
        err.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except GuardLimitError as exc:
        err.write(f"too large: {exc}\n")
        return EXIT_GUARD
    except ValueError as exc:
        err.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        err.write(f"internal error: {type(exc).__name__}: {exc}\n")
        return EXIT_INTERNAL
    manifest.duration_seconds = round(time.perf_counter() - started, 6)
    path = _manifest_path(args)
    if path is None:
        err.write(manifest.to_json())
    else:
        write_text(path, manifest.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())
