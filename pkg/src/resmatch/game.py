"""Rank / not-rank payoff games resolved by applicant-proposing deferred acceptance.

A player's payoff sums one term per counterpart it ranked: ``f(r, 1)`` for
the counterpart it is matched with and ``f(r, 0)`` for every other ranked
counterpart, where ``r`` is the counterpart's rank on the player's *true*
list.  Ranking nobody pays zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from numbers import Real
from typing import Iterable, Literal, NamedTuple, Optional, Sequence

from resmatch.engines import GuardLimitError, gale_shapley
from resmatch.market import MarketError, MarketInstance, Matching

MAX_BINARY_PLAYERS = 12
MAX_SUBSET_PLAYERS = 3
MAX_SUBSET_COUNTERPARTS = 3

ActionMode = Literal["auto", "binary", "subsets"]


@dataclass(frozen=True)
class RankPayoff:
    """Payoff by rank and match status, as a finite table plus tail values.

    ``matched[r - 1]`` is the payoff at rank ``r`` when matched; ranks past
    the table pay the tail.  Non-increasing in rank and matched >= unmatched
    >= 0 at every rank.
    """

    matched: tuple = ()
    unmatched: tuple = ()
    matched_tail: Real = 0
    unmatched_tail: Real = 0

    def __post_init__(self):
        object.__setattr__(self, "matched", tuple(self.matched))
        object.__setattr__(self, "unmatched", tuple(self.unmatched))
        depth = max(len(self.matched), len(self.unmatched)) + 1
        for status in (1, 0):
            values = [self(r, status) for r in range(1, depth + 1)]
            for r, (hi, lo) in enumerate(zip(values, values[1:]), start=1):
                if lo > hi:
                    raise ValueError(f"payoff must not increase with rank: f({r},{status})={hi} < f({r + 1},{status})={lo}")
        for r in range(1, depth + 1):
            if not self(r, 1) >= self(r, 0) >= 0:
                raise ValueError(f"need f({r},1) >= f({r},0) >= 0, got {self(r, 1)}, {self(r, 0)}")

    def __call__(self, rank: int, matched: int) -> Real:
        table, tail = (self.matched, self.matched_tail) if matched else (self.unmatched, self.unmatched_tail)
        return table[rank - 1] if rank <= len(table) else tail


@dataclass(frozen=True)
class PayoffSpec:
    applicant: RankPayoff
    program: RankPayoff


class Player(NamedTuple):
    side: Literal["applicant", "program"]
    id: str

    def __str__(self) -> str:
        return f"{self.side}:{self.id}"

    @classmethod
    def parse(cls, text: str) -> "Player":
        side, _, ident = text.partition(":")
        if side not in ("applicant", "program") or not ident:
            raise ValueError(f"player must look like applicant:ID or program:ID, got {text!r}")
        return cls(side, ident)


@dataclass(frozen=True)
class StrategyProfile:
    """Which counterparts each participant ranks; order follows the true list."""

    applicant_ranks: dict = field(default_factory=dict)
    program_ranks: dict = field(default_factory=dict)

    @classmethod
    def truthful(cls, market: MarketInstance) -> "StrategyProfile":
        return cls(
            {a: tuple(market.applicant_prefs[a]) for a in market.applicants},
            {p: tuple(market.program_prefs[p]) for p in market.programs},
        )

    def with_action(self, player: Player, action: Sequence[str]) -> "StrategyProfile":
        if player.side == "applicant":
            return StrategyProfile({**self.applicant_ranks, player.id: tuple(action)}, self.program_ranks)
        return StrategyProfile(self.applicant_ranks, {**self.program_ranks, player.id: tuple(action)})

    def ranks_of(self, player: Player) -> tuple:
        table = self.applicant_ranks if player.side == "applicant" else self.program_ranks
        return tuple(table[player.id])


@dataclass(frozen=True)
class Payoffs:
    applicants: dict
    programs: dict

    def of(self, player: Player):
        return (self.applicants if player.side == "applicant" else self.programs)[player.id]


def _true_list(market: MarketInstance, player: Player) -> tuple:
    if player.side == "applicant":
        return tuple(market.applicant_prefs[player.id])
    return tuple(market.program_prefs[player.id])


def _check_profile(market: MarketInstance, profile: StrategyProfile) -> None:
    for side, table, ids in (
        ("applicant", profile.applicant_ranks, market.applicants),
        ("program", profile.program_ranks, market.programs),
    ):
        for ident in table:
            if ident not in ids:
                raise MarketError(f"profile: unknown {side} {ident!r}")
        for ident in ids:
            if ident not in table:
                raise MarketError(f"profile: no action for {side} {ident!r}")
            true = _true_list(market, Player(side, ident))
            position = {x: k for k, x in enumerate(true)}
            chosen = table[ident]
            if any(x not in position for x in chosen):
                raise MarketError(f"profile: {side} {ident} ranks someone outside its true list")
            idx = [position[x] for x in chosen]
            if idx != sorted(set(idx)):
                raise MarketError(f"profile: {side} {ident} reorders or repeats its true list")


def resolve(market: MarketInstance, profile: StrategyProfile) -> Matching:
    """Match the market induced by ``profile`` with applicant-proposing deferred acceptance."""
    _check_profile(market, profile)
    effective = market.flattened().restricted(profile.applicant_ranks, profile.program_ranks)
    return gale_shapley(effective)


def pay(market: MarketInstance, profile: StrategyProfile, matching: Matching, spec: PayoffSpec) -> Payoffs:
    flat = market.flattened()
    applicants = {}
    for a in market.applicants:
        true = flat.applicant_prefs[a]
        matched_to = matching.program_of(a)
        applicants[a] = sum(
            (spec.applicant(true.rank(p), int(p == matched_to)) for p in profile.applicant_ranks[a]),
            0,
        )
    programs = {}
    for p in market.programs:
        true = flat.program_prefs[p]
        members = matching.members(p)
        programs[p] = sum(
            (spec.program(true.rank(a), int(a in members)) for a in profile.program_ranks[p]),
            0,
        )
    return Payoffs(applicants, programs)


def resolve_and_pay(market: MarketInstance, profile: StrategyProfile, spec: PayoffSpec) -> Payoffs:
    return pay(market, profile, resolve(market, profile), spec)


def action_label(action: Sequence[str], true: Sequence[str]) -> str:
    if len(action) == len(true):
        return "rank"
    if not action:
        return "not rank"
    return "rank:" + "|".join(action)


def _actions(true: tuple, mode: str) -> list[tuple]:
    if mode == "binary":
        return [true, ()] if true else [()]
    out = []
    for size in range(len(true), -1, -1):
        out.extend(itertools.combinations(true, size))
    return out


def choose_mode(market: MarketInstance, players: Sequence[Player], mode: ActionMode = "auto") -> str:
    small = len(players) <= MAX_SUBSET_PLAYERS and all(
        len(_true_list(market, pl)) <= MAX_SUBSET_COUNTERPARTS for pl in players
    )
    if mode == "subsets" and not small:
        raise GuardLimitError(
            f"subset actions are limited to {MAX_SUBSET_PLAYERS} players with "
            f"<= {MAX_SUBSET_COUNTERPARTS} counterparts each"
        )
    if mode == "auto":
        mode = "subsets" if small else "binary"
    if mode == "binary" and len(players) > MAX_BINARY_PLAYERS:
        raise GuardLimitError(f"binary games are limited to {MAX_BINARY_PLAYERS} players")
    return mode


@dataclass
class PayoffTable:
    """Payoff tuples for every joint action of ``players``.

    ``cells`` maps a tuple of action indices (one per player) to the payoffs
    of the players in order.  Participants outside ``players`` rank their
    full true lists.
    """

    players: tuple
    actions: tuple
    labels: tuple
    cells: dict
    matchings: dict
    mode: str

    def payoff(self, profile: tuple, player_index: int):
        return self.cells[profile][player_index]

    def rows(self) -> Iterable[tuple[tuple, tuple]]:
        for profile in self.cells:
            yield tuple(self.labels[i][k] for i, k in enumerate(profile)), self.cells[profile]


def _outcomes(market: MarketInstance, players: tuple, actions: list[list[tuple]]) -> dict:
    base = StrategyProfile.truthful(market)
    out = {}
    for profile in itertools.product(*(range(len(a)) for a in actions)):
        strategy = base
        for player, acts, k in zip(players, actions, profile):
            strategy = strategy.with_action(player, acts[k])
        out[profile] = (strategy, resolve(market, strategy))
    return out


def build_payoff_table(
    market: MarketInstance,
    spec: PayoffSpec,
    players: Sequence[Player],
    mode: ActionMode = "auto",
    *,
    _outcome_cache: Optional[dict] = None,
) -> PayoffTable:
    """Enumerate every joint action of ``players`` and pay each outcome.

    Actions are either ``binary`` (rank the full true list or nobody) or
    ``subsets`` (every order-preserving subset of the true list).  ``auto``
    picks subsets for games of at most three players with at most three
    counterparts each, binary otherwise.
    """
    players = tuple(players)
    for pl in players:
        ids = market.applicants if pl.side == "applicant" else market.programs
        if pl.id not in ids:
            raise MarketError(f"unknown player {pl}")
    if not players:
        return PayoffTable((), (), (), {}, {}, "empty")
    mode = choose_mode(market, players, mode)
    trues = [_true_list(market, pl) for pl in players]
    actions = [_actions(t, mode) for t in trues]
    labels = tuple(tuple(action_label(a, t) for a in acts) for acts, t in zip(actions, trues))
    key = (players, mode)
    if _outcome_cache is not None and key in _outcome_cache:
        outcomes = _outcome_cache[key]
    else:
        outcomes = _outcomes(market, players, actions)
        if _outcome_cache is not None:
            _outcome_cache[key] = outcomes
    cells = {}
    for profile, (strategy, matching) in outcomes.items():
        paid = pay(market, strategy, matching, spec)
        cells[profile] = tuple(paid.of(pl) for pl in players)
    matchings = {profile: m for profile, (_, m) in outcomes.items()}
    return PayoffTable(players, tuple(map(tuple, actions)), labels, cells, matchings, mode)


@dataclass(frozen=True)
class Counterexample:
    player: Player
    action: str
    opponents: tuple
    payoff_rank_all: Real
    payoff_alternative: Real


@dataclass
class DominanceReport:
    players: tuple
    mode: str
    profiles_checked: int
    counterexamples: list

    @property
    def holds(self) -> bool:
        return not self.counterexamples

    def summary(self) -> dict:
        return {
            "verdict": "rank-all weakly dominant" if self.holds else "counterexample found",
            "holds": self.holds,
            "mode": self.mode,
            "players": [str(p) for p in self.players],
            "profiles_checked": self.profiles_checked,
            "counterexamples": [
                {
                    "player": str(c.player),
                    "action": c.action,
                    "opponents": list(c.opponents),
                    "payoff_rank_all": str(c.payoff_rank_all),
                    "payoff_alternative": str(c.payoff_alternative),
                }
                for c in self.counterexamples
            ],
        }


def all_players(market: MarketInstance) -> tuple:
    return tuple(Player("applicant", a) for a in market.applicants) + tuple(
        Player("program", p) for p in market.programs
    )


def check_rank_all_dominance(
    market: MarketInstance,
    spec: PayoffSpec,
    mode: ActionMode = "auto",
    *,
    _outcome_cache: Optional[dict] = None,
) -> DominanceReport:
    """Check that ranking the full true list weakly dominates every other action.

    Every participant is a player.  For each player and each joint action of
    the others, the rank-all payoff must be at least the payoff of every
    alternative action.
    """
    players = all_players(market)
    table = build_payoff_table(market, spec, players, mode, _outcome_cache=_outcome_cache)
    counterexamples = []
    for i, player in enumerate(players):
        for profile, payoffs in table.cells.items():
            if profile[i] == 0:
                continue
            rank_all_profile = profile[:i] + (0,) + profile[i + 1:]
            full = table.cells[rank_all_profile][i]
            if payoffs[i] > full:
                counterexamples.append(Counterexample(
                    player,
                    table.labels[i][profile[i]],
                    tuple(f"{pl}={table.labels[j][k]}" for j, (pl, k) in enumerate(zip(players, profile)) if j != i),
                    full,
                    payoffs[i],
                ))
    return DominanceReport(players, table.mode, len(table.cells), counterexamples)
