"""File formats: market CSV/JSON, matching CSV, traces, config files and run manifests."""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from resmatch.cost import Budget, CostSpec, ProgramTerms, parse_fee_tiers, parse_money
from resmatch.game import PayoffSpec, RankPayoff
from resmatch.market import MarketError, MarketInstance, Matching, TieredPreferenceList, validate_market
from resmatch.simulate import SimConfig

CONFIG_DIR_ENV = "RESMATCH_CONFIG_DIR"
MARKET_CSV_HEADER = ("side", "id", "rank_or_tier", "within_tier", "counterpart_id")

PathLike = Union[str, os.PathLike]


class ParseError(ValueError):
    """Malformed input file; the message starts with ``path:line``."""


def resolve_config(name: PathLike) -> Path:
    """Find a config file as given, then in ``$RESMATCH_CONFIG_DIR``, then among shipped defaults."""
    path = Path(name)
    if path.exists():
        return path
    env_dir = os.environ.get(CONFIG_DIR_ENV)
    if env_dir and (Path(env_dir) / path.name).exists():
        return Path(env_dir) / path.name
    shipped = resources.files("resmatch") / "data" / path.name
    if shipped.is_file():
        return Path(str(shipped))
    raise ParseError(f"{name}: config file not found")


def digest(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- markets -----------------------------------------------------------------

def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from None


def parse_market_csv(text: str, source: str = "<csv>") -> MarketInstance:
    """Rows ``side,id,rank_or_tier,within_tier,counterpart_id``.

    ``side`` is ``applicant``, ``program`` or ``capacity``.  Capacity rows
    put the seat count in the third column; a program without one has a
    single seat.  A row with empty rank and
    counterpart just declares the participant.  Program rows with a
    within-tier position form a tiered list.  Blank lines and ``#`` comments
    are skipped; a header row is optional.
    """
    applicants: list[str] = []
    programs: dict[str, str] = {}
    applicant_prefs: dict[str, list] = {}
    program_prefs: dict[str, list] = {}
    reader = csv.reader(io.StringIO(text))
    for line_no, row in enumerate(reader, start=1):
        at = f"{source}:{line_no}"
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        row = [c.strip() for c in row]
        if tuple(row) == MARKET_CSV_HEADER:
            continue
        if len(row) != len(MARKET_CSV_HEADER):
            raise ParseError(f"{at}: expected {len(MARKET_CSV_HEADER)} fields, got {len(row)}")
        side, ident, rank, within, counterpart = row
        if not ident:
            raise ParseError(f"{at}: missing id")
        if side == "capacity":
            if programs.get(ident):
                raise MarketError(f"{at}: second capacity row for program {ident!r}")
            programs[ident] = rank
            continue
        if side not in ("applicant", "program"):
            raise ParseError(f"{at}: unknown side {side!r}")
        if not rank and not counterpart:
            if within:
                raise ParseError(f"{at}: within-tier position without a rank")
            if side == "applicant":
                applicants.append(ident)
            else:
                programs.setdefault(ident, "")
            continue
        if not rank or not counterpart:
            raise ParseError(f"{at}: rank and counterpart must both be given")
        if side == "applicant":
            if within:
                raise MarketError(f"{at}: applicant lists cannot be tiered")
            applicant_prefs.setdefault(ident, []).append({"rank": rank, "id": counterpart, "at": at})
        elif within:
            program_prefs.setdefault(ident, []).append(
                {"tier": rank, "within": within, "id": counterpart, "at": at})
        else:
            program_prefs.setdefault(ident, []).append({"rank": rank, "id": counterpart, "at": at})

    referenced = list(program_prefs) + [e["id"] for entries in applicant_prefs.values() for e in entries]
    for pid in referenced:
        programs.setdefault(pid, "")
    programs = {pid: (cap if cap != "" else 1) for pid, cap in programs.items()}
    return validate_market({
        "applicants": list(dict.fromkeys(applicants)),
        "programs": programs,
        "applicant_prefs": applicant_prefs,
        "program_prefs": program_prefs,
    })


def parse_market_json(text: str, source: str = "<json>") -> MarketInstance:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{source}: top level must be an object")
    return validate_market(raw)


def parse_market_file(path: PathLike) -> MarketInstance:
    """Read a market from ``.json`` or CSV (anything else), validating it."""
    text = _read_text(path)
    if Path(path).suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return parse_market_json(text, str(path))
    return parse_market_csv(text, str(path))


def market_to_csv(market: MarketInstance) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MARKET_CSV_HEADER)
    for p in market.programs:
        w.writerow(["capacity", p, market.capacity[p], "", ""])
    for a in market.applicants:
        prefs = market.applicant_prefs[a]
        if not len(prefs):
            w.writerow(["applicant", a, "", "", ""])
        for k, p in enumerate(prefs, start=1):
            w.writerow(["applicant", a, k, "", p])
    for p in market.programs:
        prefs = market.program_prefs[p]
        if isinstance(prefs, TieredPreferenceList):
            for t, tier in enumerate(prefs.tiers, start=1):
                for pos, a in enumerate(tier, start=1):
                    w.writerow(["program", p, t, pos, a])
        else:
            for k, a in enumerate(prefs, start=1):
                w.writerow(["program", p, k, "", a])
    return buf.getvalue()


def market_to_json(market: MarketInstance) -> str:
    return json.dumps(market.to_raw(), indent=2) + "\n"


# -- matchings and traces ----------------------------------------------------

def matching_to_csv(matching: Matching) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["applicant", "program"])
    for a, p in matching.pairs():
        w.writerow([a, p or ""])
    return buf.getvalue()


def parse_matching_csv(text: str, market: MarketInstance, source: str = "<matching>") -> Matching:
    pairs = []
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or row[0].lstrip().startswith("#"):
            continue
        row = [c.strip() for c in row]
        if row == ["applicant", "program"]:
            continue
        if len(row) != 2 or not row[0]:
            raise ParseError(f"{source}:{line_no}: expected 'applicant,program'")
        pairs.append((row[0], row[1] or None))
    try:
        return Matching.from_pairs(market, pairs)
    except MarketError as exc:
        raise MarketError(f"{source}: {exc}") from None


def parse_matching_file(path: PathLike, market: MarketInstance) -> Matching:
    return parse_matching_csv(_read_text(path), market, str(path))


class JsonLinesTrace:
    """Trace sink writing one JSON object per line."""

    def __init__(self, stream):
        self.stream = stream

    def __call__(self, record: dict) -> None:
        self.stream.write(json.dumps(record, sort_keys=True) + "\n")


# -- configs -----------------------------------------------------------------

def _config(path: PathLike) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(_read_text(path), source=str(path))
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parser


def _fraction(text: str, where: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"{where}: not a number: {text!r}") from None


def _values(text: str, where: str) -> tuple:
    return tuple(_fraction(v, where) for v in text.split(",") if v.strip())


def _normalize(x: Fraction):
    return int(x) if x.denominator == 1 else x


def load_payoff_spec(path: PathLike) -> PayoffSpec:
    """Sections ``[applicant]`` and ``[program]`` with ``matched``, ``unmatched`` and tails."""
    cfg = _config(path)
    parts = {}
    for side in ("applicant", "program"):
        if not cfg.has_section(side):
            raise ParseError(f"{path}: missing [{side}] section")
        sec = cfg[side]
        where = f"{path} [{side}]"
        try:
            parts[side] = RankPayoff(
                matched=tuple(map(_normalize, _values(sec.get("matched", ""), where))),
                unmatched=tuple(map(_normalize, _values(sec.get("unmatched", ""), where))),
                matched_tail=_normalize(_fraction(sec.get("matched_tail", "0"), where)),
                unmatched_tail=_normalize(_fraction(sec.get("unmatched_tail", "0"), where)),
            )
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise MarketError(f"{where}: {exc}") from None
    return PayoffSpec(parts["applicant"], parts["program"])


def _terms(sec, where: str, base: Optional[ProgramTerms] = None) -> dict:
    def money(key, default):
        return parse_money(sec[key]) if key in sec else default

    def frac(key, default):
        return _fraction(sec[key], f"{where} {key}") if key in sec else default

    return dict(
        interview_prob=frac("probability", base.interview_prob if base else None),
        interview_cost=money("cost", base.interview_cost if base else 0),
        interview_time=frac("time", base.interview_time if base else Fraction(0)),
        payoff_if_interviewed=money("payoff_if_interviewed", base.payoff_if_interviewed if base else 0),
        payoff_if_rejected=money("payoff_if_rejected", base.payoff_if_rejected if base else 0),
    )


def load_cost_config(path: PathLike) -> tuple[CostSpec, Budget]:
    """Cost spec and budget from a schedule file.

    Sections: ``[market] programs``; ``[fees]`` with ``first-last = amount
    flat|each`` lines; ``[interview]``; ``[budget] money, time``; optional
    ``[application N]`` sections overriding interview terms for the N-th
    application.
    """
    cfg = _config(path)
    try:
        if not cfg.has_section("fees"):
            raise ParseError(f"{path}: missing [fees] section")
        schedule = parse_fee_tiers(list(cfg["fees"].items()))
        interview = cfg["interview"] if cfg.has_section("interview") else {}
        terms = _terms(interview, f"{path} [interview]")
        if terms["interview_prob"] is None:
            raise ParseError(f"{path}: [interview] probability is required")
        program_count = None
        if cfg.has_section("market") and "programs" in cfg["market"]:
            program_count = int(cfg["market"]["programs"])
        base = ProgramTerms(**terms)
        overrides = {}
        for section in cfg.sections():
            if section.startswith("application "):
                j = int(section.split()[1])
                overrides[j] = ProgramTerms(**_terms(cfg[section], f"{path} [{section}]", base))
        spec = CostSpec(schedule, overrides=overrides, program_count=program_count, **terms)
        budget_sec = cfg["budget"] if cfg.has_section("budget") else {}
        budget = Budget(
            money=parse_money(budget_sec["money"]) if "money" in budget_sec else 0,
            time=_fraction(budget_sec["time"], f"{path} [budget] time") if "time" in budget_sec else None,
        )
    except ParseError:
        raise
    except (ValueError, KeyError) as exc:
        raise MarketError(f"{path}: {exc}") from None
    return spec, budget


@dataclass(frozen=True)
class EscalationSettings:
    rounds: int
    start_applications: int
    schedule: str
    budget_money: Optional[int] = None
    budget_time: Optional[Fraction] = None


def load_sim_config(path: PathLike) -> tuple[SimConfig, Optional[EscalationSettings]]:
    """``[simulation]`` keys mirror :class:`SimConfig`; optional ``[escalation]``."""
    cfg = _config(path)
    if not cfg.has_section("simulation"):
        raise ParseError(f"{path}: missing [simulation] section")
    sec = cfg["simulation"]
    kwargs: dict[str, Any] = {}
    known = {f.name: f for f in fields(SimConfig)}
    for key, value in sec.items():
        if key not in known:
            raise ParseError(f"{path} [simulation]: unknown key {key!r}")
        where = f"{path} [simulation] {key}"
        if key == "screening":
            kwargs[key] = value.strip()
        elif key in ("interview_prob", "correlation"):
            kwargs[key] = float(_fraction(value, where))
        else:
            number = _fraction(value, where)
            if number.denominator != 1:
                raise ParseError(f"{where}: expected an integer, got {value!r}")
            kwargs[key] = int(number)
    escalation = None
    if cfg.has_section("escalation"):
        esc = cfg["escalation"]
        try:
            escalation = EscalationSettings(
                rounds=int(esc.get("rounds", "5")),
                start_applications=int(esc.get("start_applications", str(kwargs.get("applications", 1)))),
                schedule=esc.get("schedule", "ophtho2019.cfg"),
                budget_money=parse_money(esc["budget_money"]) if "budget_money" in esc else None,
                budget_time=_fraction(esc["budget_time"], f"{path} [escalation]") if "budget_time" in esc else None,
            )
        except ValueError as exc:
            raise ParseError(f"{path} [escalation]: {exc}") from None
    try:
        return SimConfig(**kwargs), escalation
    except ValueError as exc:
        raise MarketError(f"{path} [simulation]: {exc}") from None


# -- manifests ---------------------------------------------------------------

@dataclass
class RunManifest:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: Optional[int] = None
    version: str = ""
    duration_seconds: float = 0.0

    def add_input(self, path: PathLike) -> None:
        self.inputs[str(path)] = digest(path)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=str) + "\n"


def write_text(path: PathLike, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8", newline="")


def rows_to_csv(header: Iterable[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow(list(row))
    return buf.getvalue()
