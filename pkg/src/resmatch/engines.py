"""Matching procedures: deferred acceptance, the Boston Pool plan, and a brute-force oracle."""

from __future__ import annotations

import enum
from collections import deque
from itertools import count
from typing import Callable, Iterator, Optional, Sequence

from resmatch.market import (
    MarketError,
    MarketInstance,
    Matching,
    PreferenceList,
    TieredPreferenceList,
)

TraceSink = Callable[[dict], None]

DEFAULT_ENUMERATION_LIMIT = 10**6


class GuardLimitError(RuntimeError):
    """Instance too large for an exhaustive mode."""


class ProposingSide(enum.Enum):
    APPLICANTS = "applicants"
    PROGRAMS = "programs"


def pairing_order(max_diagonal: Optional[int] = None) -> Iterator[tuple[int, int]]:
    """Yield Boston Pool ``(program tier, applicant rank)`` pairs.

    Diagonal ``d`` emits ``(d, 1) .. (d, d-1)`` and then ``(1, d) .. (d, d)``,
    giving ``(1,1), (2,1), (1,2), (2,2), (3,1), (3,2), (1,3), (2,3), (3,3), ...``.
    Unbounded when ``max_diagonal`` is None.
    """
    diagonals = count(1) if max_diagonal is None else range(1, max_diagonal + 1)
    for d in diagonals:
        for k in range(1, d):
            yield (d, k)
        for t in range(1, d + 1):
            yield (t, d)


def deferred_acceptance(
    proposer_lists: Sequence[Sequence[int]],
    proposer_capacity: Sequence[int],
    receiver_rank: Sequence[dict[int, int]],
    receiver_capacity: Sequence[int],
    on_event: Optional[Callable[[str, int, int], None]] = None,
) -> list[list[int]]:
    """Index-level deferred acceptance; returns the proposers each receiver holds.

    A receiver only ever holds proposers present in its ``receiver_rank``
    map, so one-sided rankings never produce a pair.  Free proposers are
    served from a FIFO queue seeded in index order.
    """
    n = len(proposer_lists)
    next_choice = [0] * n
    held_by = [0] * n
    holding: list[list[int]] = [[] for _ in receiver_rank]
    queued = [True] * n
    queue = deque(range(n))

    while queue:
        i = queue.popleft()
        queued[i] = False
        prefs = proposer_lists[i]
        while held_by[i] < proposer_capacity[i] and next_choice[i] < len(prefs):
            j = prefs[next_choice[i]]
            next_choice[i] += 1
            ranks = receiver_rank[j]
            if on_event:
                on_event("propose", i, j)
            r = ranks.get(i)
            if r is None:
                if on_event:
                    on_event("reject", i, j)
                continue
            held = holding[j]
            if len(held) < receiver_capacity[j]:
                held.append(i)
                held_by[i] += 1
                if on_event:
                    on_event("hold", i, j)
                continue
            worst = max(held, key=ranks.__getitem__)
            if r < ranks[worst]:
                held.remove(worst)
                held.append(i)
                held_by[i] += 1
                held_by[worst] -= 1
                if on_event:
                    on_event("hold", i, j)
                    on_event("displace", worst, j)
                if not queued[worst]:
                    queued[worst] = True
                    queue.append(worst)
            elif on_event:
                on_event("reject", i, j)

    return [sorted(held) for held in holding]


def _strict_program_lists(market: MarketInstance, engine: str) -> dict[str, PreferenceList]:
    out = {}
    for p, prefs in market.program_prefs.items():
        if isinstance(prefs, TieredPreferenceList):
            if len(prefs):
                raise MarketError(
                    f"{engine}: program {p} has a tiered list; flatten the market first"
                )
            prefs = PreferenceList()
        out[p] = prefs
    return out


def gale_shapley(
    market: MarketInstance,
    side: ProposingSide = ProposingSide.APPLICANTS,
    trace: Optional[TraceSink] = None,
) -> Matching:
    """Stable matching by deferred acceptance, optimal for the proposing side.

    Every program list must be strict.  ``trace`` receives one record per
    proposal, tentative hold, displacement and rejection.
    """
    program_prefs = _strict_program_lists(market, "gale_shapley")
    aidx = market.applicant_index
    pidx = market.program_index
    applicant_lists = [[pidx[p] for p in market.applicant_prefs[a]] for a in market.applicants]
    program_lists = [[aidx[a] for a in program_prefs[p]] for p in market.programs]
    capacity = [market.capacity[p] for p in market.programs]

    if side is ProposingSide.APPLICANTS:
        proposers, receivers = market.applicants, market.programs
        args = (
            applicant_lists,
            [1] * len(proposers),
            [{i: k for k, i in enumerate(lst)} for lst in program_lists],
            capacity,
        )
    else:
        proposers, receivers = market.programs, market.applicants
        args = (
            program_lists,
            capacity,
            [{j: k for k, j in enumerate(lst)} for lst in applicant_lists],
            [1] * len(receivers),
        )

    role = side.value[:-1]

    def emit(kind, i, j):
        trace({"engine": "gale_shapley", "event": kind, role: proposers[i], "to": receivers[j]})

    holding = deferred_acceptance(*args, on_event=emit if trace is not None else None)
    if side is ProposingSide.APPLICANTS:
        pairs = [(market.applicants[i], market.programs[j]) for j, held in enumerate(holding) for i in held]
    else:
        pairs = [(market.applicants[i], market.programs[j]) for i, held in enumerate(holding) for j in held]
    return Matching.from_pairs(market, pairs)


def boston_pool(market: MarketInstance, trace: Optional[TraceSink] = None) -> Matching:
    """Priority matching over ``pairing_order`` with final, non-deferred matches.

    At step ``(t, k)`` each program takes, in within-tier order and while
    seats remain, the unmatched applicants in its tier ``t`` who ranked it
    ``k``-th.
    """
    tiers: dict[str, TieredPreferenceList] = {}
    for p, prefs in market.program_prefs.items():
        if isinstance(prefs, PreferenceList):
            if len(prefs):
                raise MarketError(f"boston_pool: program {p} has a strict list; tiers required")
            prefs = TieredPreferenceList()
        tiers[p] = prefs

    depth = max(
        [len(t.tiers) for t in tiers.values()]
        + [len(l) for l in market.applicant_prefs.values()]
        + [0]
    )
    assigned: dict[str, str] = {}
    remaining = dict(market.capacity)
    for t, k in pairing_order(depth):
        filled = []
        for p in market.programs:
            for a in tiers[p].tier(t):
                if remaining[p] == 0:
                    break
                if a not in assigned and market.applicant_prefs[a].rank(p) == k:
                    assigned[a] = p
                    remaining[p] -= 1
                    filled.append((a, p))
        if trace is not None:
            trace({"engine": "boston_pool", "event": "step", "tier": t, "rank": k,
                   "matched": [list(x) for x in filled]})
    return Matching.from_pairs(market, assigned.items())


def _blocks(market: MarketInstance, assignment: dict, members: dict, a: str, p: str) -> bool:
    aprefs = market.applicant_prefs[a]
    pprefs = market.program_prefs[p]
    if p not in aprefs or a not in pprefs:
        return False
    current = assignment[a]
    if current == p:
        return False
    if current is not None and aprefs.rank(current) < aprefs.rank(p):
        return False
    held = members.get(p, ())
    if len(held) < market.capacity[p]:
        return True
    return any(pprefs.rank(b) > pprefs.rank(a) for b in held)


def enumerate_stable_matchings(
    market: MarketInstance, limit: int = DEFAULT_ENUMERATION_LIMIT
) -> list[Matching]:
    """Every stable matching, found by exhaustive search; canonical order.

    Candidates are all capacity-respecting assignments using only mutually
    ranked pairs.  Raises :class:`GuardLimitError` once more than ``limit``
    candidates have been generated.
    """
    options = [
        [None] + [p for p in market.applicant_prefs[a] if a in market.program_prefs[p]]
        for a in market.applicants
    ]
    remaining = dict(market.capacity)
    choice: list[Optional[str]] = [None] * len(market.applicants)
    found: list[Matching] = []
    generated = 0

    def check():
        assignment = dict(zip(market.applicants, choice))
        members: dict[str, list] = {}
        for a, p in assignment.items():
            if p is not None:
                members.setdefault(p, []).append(a)
        for a in market.applicants:
            for p in market.applicant_prefs[a]:
                if _blocks(market, assignment, members, a, p):
                    return
        found.append(Matching.from_pairs(market, assignment.items()))

    def extend(i: int):
        nonlocal generated
        if i == len(options):
            generated += 1
            if generated > limit:
                raise GuardLimitError(
                    f"more than {limit} feasible assignments; too large for exhaustive enumeration"
                )
            check()
            return
        for p in options[i]:
            if p is not None:
                if remaining[p] == 0:
                    continue
                remaining[p] -= 1
            choice[i] = p
            extend(i + 1)
            if p is not None:
                remaining[p] += 1
        choice[i] = None

    extend(0)
    return sorted(found, key=Matching.key)
