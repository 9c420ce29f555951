"""Application and interview cost model with budgeted choice of application count.

Money is integer cents.  Probabilities and expectations are exact
``Fraction`` values, so expected spends are exact until they are formatted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Mapping, Optional, Sequence


@dataclass(frozen=True)
class FeeTier:
    """Applications ``first..last`` (inclusive; ``last=None`` is open-ended).

    A flat tier charges ``fee_cents`` once, with its first application;
    otherwise every application in the tier costs ``fee_cents``.
    """

    first: int
    last: Optional[int]
    fee_cents: int
    flat: bool = False


@dataclass(frozen=True)
class FeeSchedule:
    tiers: tuple

    def __post_init__(self):
        tiers = tuple(self.tiers)
        object.__setattr__(self, "tiers", tiers)
        if not tiers:
            raise ValueError("fee schedule needs at least one tier")
        expected_first = 1
        for n, tier in enumerate(tiers, start=1):
            if tier.first != expected_first:
                raise ValueError(f"fee tier {n} starts at {tier.first}, expected {expected_first}")
            if tier.fee_cents < 0:
                raise ValueError(f"fee tier {n} has a negative fee")
            if tier.last is None:
                if n != len(tiers):
                    raise ValueError(f"fee tier {n} is open-ended but not last")
            else:
                if tier.last < tier.first:
                    raise ValueError(f"fee tier {n} ends before it starts")
                expected_first = tier.last + 1
        if tiers[-1].last is not None:
            raise ValueError("the last fee tier must be open-ended")

    def marginal(self, q: int) -> int:
        """Cost in cents of the ``q``-th application."""
        for tier in self.tiers:
            if tier.last is None or q <= tier.last:
                if tier.flat:
                    return tier.fee_cents if q == tier.first else 0
                return tier.fee_cents
        raise AssertionError("unreachable: last tier is open-ended")

    def cost(self, q: int) -> int:
        if q < 0:
            raise ValueError("application count must be >= 0")
        total = 0
        for tier in self.tiers:
            if q < tier.first:
                break
            upto = q if tier.last is None else min(q, tier.last)
            total += tier.fee_cents if tier.flat else tier.fee_cents * (upto - tier.first + 1)
        return total

    def breakpoints(self) -> list[int]:
        """First application count of every tier."""
        return [t.first for t in self.tiers]


@dataclass(frozen=True)
class ProgramTerms:
    interview_prob: Fraction
    interview_cost: int
    interview_time: Fraction
    payoff_if_interviewed: int
    payoff_if_rejected: int

    def __post_init__(self):
        if not 0 <= self.interview_prob <= 1:
            raise ValueError(f"interview probability {self.interview_prob} not in [0, 1]")
        if self.interview_cost < 0 or self.interview_time < 0:
            raise ValueError("interview cost and time must be >= 0")
        if not self.payoff_if_interviewed >= self.payoff_if_rejected >= 0:
            raise ValueError("need payoff_if_interviewed >= payoff_if_rejected >= 0")


@dataclass(frozen=True)
class CostSpec:
    """Fee schedule plus per-application interview terms.

    ``overrides`` replaces the default terms for the ``j``-th application
    (1-based).  ``program_count`` is the number of programs one could apply
    to; it is the optimizer's default upper bound.
    """

    fee_schedule: FeeSchedule
    interview_prob: Fraction
    interview_cost: int
    interview_time: Fraction = Fraction(0)
    payoff_if_interviewed: int = 0
    payoff_if_rejected: int = 0
    overrides: Mapping[int, ProgramTerms] = field(default_factory=dict)
    program_count: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "interview_prob", Fraction(self.interview_prob))
        object.__setattr__(self, "interview_time", Fraction(self.interview_time))
        self.default_terms()

    def default_terms(self) -> ProgramTerms:
        return ProgramTerms(self.interview_prob, self.interview_cost, self.interview_time,
                            self.payoff_if_interviewed, self.payoff_if_rejected)

    def terms(self, j: int) -> ProgramTerms:
        return self.overrides.get(j) or self.default_terms()

    def with_interview_prob(self, prob) -> "CostSpec":
        return replace(self, interview_prob=Fraction(prob))


@dataclass(frozen=True)
class Budget:
    """Money in cents and time in interview-time units; ``time=None`` is unlimited."""

    money: int
    time: Optional[Fraction] = None

    def __post_init__(self):
        if self.money < 0 or (self.time is not None and self.time < 0):
            raise ValueError("budgets must be >= 0")

    def allows(self, money, time) -> bool:
        return money <= self.money and (self.time is None or time <= self.time)


def application_cost(q: int, spec) -> int:
    """Cumulative fee for ``q`` applications, in cents."""
    schedule = spec.fee_schedule if isinstance(spec, CostSpec) else spec
    return schedule.cost(q)


def expected_program_payoff(spec: CostSpec, j: Optional[int] = None) -> Fraction:
    """Expected value of one application, before its fee.

    The interview cost is paid only when an interview is offered:
    ``p * (payoff_if_interviewed - cost) + (1 - p) * payoff_if_rejected``.
    """
    t = spec.default_terms() if j is None else spec.terms(j)
    p = t.interview_prob
    return p * (t.payoff_if_interviewed - t.interview_cost) + (1 - p) * t.payoff_if_rejected


def expected_interviews(q: int, spec: CostSpec) -> Fraction:
    return sum((spec.terms(j).interview_prob for j in range(1, q + 1)), Fraction(0))


def expected_spend(q: int, spec: CostSpec, worst_case: bool = False) -> Fraction:
    """Fees plus interview costs: expected, or one interview per application when ``worst_case``."""
    interviews = Fraction(0)
    for j in range(1, q + 1):
        t = spec.terms(j)
        interviews += t.interview_cost if worst_case else t.interview_prob * t.interview_cost
    return application_cost(q, spec) + interviews


def expected_time(q: int, spec: CostSpec, worst_case: bool = False) -> Fraction:
    total = Fraction(0)
    for j in range(1, q + 1):
        t = spec.terms(j)
        total += t.interview_time if worst_case else t.interview_prob * t.interview_time
    return total


def total_expected_payoff(
    q: int, spec: CostSpec, budget: Budget, worst_case: bool = False
) -> tuple[Fraction, bool]:
    """``(sum of expected application payoffs - fees, fits both budgets)`` for ``q`` applications."""
    if q < 0:
        raise ValueError("application count must be >= 0")
    value = sum((expected_program_payoff(spec, j) for j in range(1, q + 1)), Fraction(0))
    value -= application_cost(q, spec)
    feasible = budget.allows(expected_spend(q, spec, worst_case), expected_time(q, spec, worst_case))
    return value, feasible


@dataclass(frozen=True)
class ScanRow:
    q: int
    application_cost: int
    expected_interviews: Fraction
    expected_spend: Fraction
    expected_payoff: Fraction
    feasible: bool


def scan(spec: CostSpec, budget: Budget, q_max: int, worst_case: bool = False) -> list[ScanRow]:
    """One row per application count ``0..q_max``, accumulated incrementally."""
    rows = []
    payoff = Fraction(0)
    interviews = Fraction(0)
    interview_money = Fraction(0)
    interview_time = Fraction(0)
    for q in range(q_max + 1):
        if q:
            t = spec.terms(q)
            payoff += expected_program_payoff(spec, q)
            interviews += t.interview_prob
            interview_money += t.interview_cost if worst_case else t.interview_prob * t.interview_cost
            interview_time += t.interview_time if worst_case else t.interview_prob * t.interview_time
        fee = application_cost(q, spec)
        spend = fee + interview_money
        rows.append(ScanRow(q, fee, interviews, spend, payoff - fee, budget.allows(spend, interview_time)))
    return rows


def optimal_application_count(
    spec: CostSpec,
    budget: Budget,
    q_max: Optional[int] = None,
    worst_case: bool = False,
) -> tuple[int, Fraction]:
    """Feasible application count with the highest expected payoff; ties go to fewer applications."""
    if q_max is None:
        if spec.program_count is None:
            raise ValueError("q_max not given and the cost spec has no program_count")
        q_max = spec.program_count
    if q_max < 0:
        raise ValueError("q_max must be >= 0")
    best_q, best_value = 0, Fraction(0)
    for row in scan(spec, budget, q_max, worst_case):
        if row.feasible and row.expected_payoff > best_value:
            best_q, best_value = row.q, row.expected_payoff
    return best_q, best_value


def format_money(cents) -> str:
    """``$9,864.86`` style display of a cent amount (rounded half-even)."""
    value = round(Fraction(cents))
    sign = "-" if value < 0 else ""
    dollars, rem = divmod(abs(value), 100)
    return f"{sign}${dollars:,}.{rem:02d}"


def parse_money(text: str) -> int:
    """``"60.00"`` / ``"$3,170"`` to cents; rejects fractional cents."""
    cleaned = str(text).strip().replace("$", "").replace(",", "")
    try:
        amount = Decimal(cleaned) * 100
    except InvalidOperation:
        raise ValueError(f"not a money amount: {text!r}") from None
    if amount != amount.to_integral_value():
        raise ValueError(f"money amount has fractional cents: {text!r}")
    return int(amount)


def parse_fee_tiers(entries: Sequence[tuple[str, str]]) -> FeeSchedule:
    """Tiers from ``("1-10", "60.00 flat")``-style pairs; ``"41-"`` is open-ended."""
    tiers = []
    for key, value in entries:
        lo, sep, hi = key.partition("-")
        if not sep or not lo.strip().isdigit():
            raise ValueError(f"fee tier range must look like 'first-last' or 'first-', got {key!r}")
        parts = value.split()
        if len(parts) not in (1, 2) or (len(parts) == 2 and parts[1] not in ("flat", "each")):
            raise ValueError(f"fee tier {key!r}: expected '<amount> [flat|each]', got {value!r}")
        tiers.append(FeeTier(
            first=int(lo),
            last=int(hi) if hi.strip() else None,
            fee_cents=parse_money(parts[0]),
            flat=len(parts) == 2 and parts[1] == "flat",
        ))
    tiers.sort(key=lambda t: t.first)
    return FeeSchedule(tuple(tiers))
