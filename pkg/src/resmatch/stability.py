"""Blocking-pair detection for many-to-one matchings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from resmatch.market import MarketError, MarketInstance, Matching


@dataclass(frozen=True)
class BlockingPair:
    """An applicant and a program that each strictly prefer one another.

    Gains are rank improvements over the current situation; ``math.inf`` means
    the applicant is unmatched or the program has a free seat.
    """

    applicant: str
    program: str
    applicant_gain: Union[int, float]
    program_gain: Union[int, float]

    def __str__(self) -> str:
        return (f"({self.applicant}, {self.program}) applicant_gain={self.applicant_gain} "
                f"program_gain={self.program_gain}")


def _check_matching(market: MarketInstance, matching: Matching) -> None:
    if set(matching.assignment) != set(market.applicants):
        unknown = sorted(set(matching.assignment) - set(market.applicants))
        missing = sorted(set(market.applicants) - set(matching.assignment))
        raise MarketError(f"matching does not cover the market: unknown={unknown} missing={missing}")
    for a, p in matching.assignment.items():
        if p is None:
            continue
        if p not in market.capacity:
            raise MarketError(f"matching: unknown program {p!r} for applicant {a!r}")
        if not market.mutually_ranked(a, p):
            raise MarketError(f"matching: pair ({a}, {p}) did not rank each other")
    for p, members in matching.members_by_program.items():
        if len(members) > market.capacity[p]:
            raise MarketError(f"matching: program {p!r} over capacity")


def find_blocking_pairs(market: MarketInstance, matching: Matching) -> list[BlockingPair]:
    """All blocking pairs, ordered by (applicant, program) id.

    Tiered program lists compare by flattened position, i.e. by
    ``(tier, within_tier)``.  A program with a free seat blocks with any
    applicant it ranked who prefers it.
    """
    _check_matching(market, matching)
    out = []
    for a in market.applicants:
        aprefs = market.applicant_prefs[a]
        current = matching.program_of(a)
        current_rank = aprefs.rank(current) if current is not None else math.inf
        for p in aprefs:
            r = aprefs.rank(p)
            if r >= current_rank:
                break
            pprefs = market.program_prefs[p]
            rho = pprefs.rank(a)
            if rho is None:
                continue
            members = matching.members(p)
            if len(members) < market.capacity[p]:
                program_gain = math.inf
            else:
                worst = max(pprefs.rank(b) for b in members)
                if worst <= rho:
                    continue
                program_gain = worst - rho
            out.append(BlockingPair(a, p, current_rank - r, program_gain))
    return sorted(out, key=lambda bp: (bp.applicant, bp.program))


def is_stable(market: MarketInstance, matching: Matching) -> bool:
    return not find_blocking_pairs(market, matching)
