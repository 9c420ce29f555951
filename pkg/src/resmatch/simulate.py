"""Seeded Monte Carlo markets: match probability by times ranked, and application escalation.

Randomness: one root ``numpy.random.SeedSequence(seed)``; replica ``r`` draws
from ``root.spawn(R)[r]`` (escalation rounds spawn one child per round and
then one grandchild per replica).  A replica's stream therefore depends
only on its index, never on which worker ran it.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Literal, Optional

import numpy as np

from resmatch.cost import Budget, CostSpec, optimal_application_count
from resmatch.engines import deferred_acceptance


@dataclass(frozen=True)
class SimConfig:
    """Synthetic market parameters.

    ``correlation`` blends a common quality score with idiosyncratic noise:
    0 gives independent uniform-random preferences, 1 a single common
    ranking on each side.  ``screening`` is ``"probability"`` (each applied-to
    program interviews independently with ``interview_prob``) or ``"topk"``
    (each program interviews its ``interview_topk`` favourite applicants).
    """

    applicants: int = 60
    programs: int = 20
    capacity_min: int = 1
    capacity_max: int = 3
    applications: int = 20
    screening: Literal["probability", "topk"] = "probability"
    interview_prob: float = 1 / 7
    interview_topk: int = 10
    correlation: float = 0.5
    replicas: int = 200
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("applicants", "programs", "capacity_min", "replicas", "interview_topk", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.capacity_max < self.capacity_min:
            raise ValueError("capacity_max must be >= capacity_min")
        if not 0 <= self.applications <= self.programs:
            raise ValueError("applications must be between 0 and the number of programs")
        if self.screening not in ("probability", "topk"):
            raise ValueError(f"unknown screening rule {self.screening!r}")
        if not 0 <= self.interview_prob <= 1:
            raise ValueError("interview_prob must be in [0, 1]")
        if not 0 <= self.correlation <= 1:
            raise ValueError("correlation must be in [0, 1]")


@dataclass(frozen=True)
class ReplicaStats:
    matched: int
    filled_seats: int
    seats: int
    applications: int
    interviews: int
    ranked_hist: tuple
    matched_hist: tuple


@dataclass(frozen=True)
class MatchCurve:
    """P(matched | ranked by at least k programs) for k = 0..K.

    ``n_exact[k]`` / ``matched_exact[k]`` count applicant-replicas ranked by
    exactly ``k`` programs; ``n_at_least`` and ``matched_at_least`` are their
    upper-tail sums, and ``cum_prob[k] = matched_at_least[k] / n_at_least[k]``.
    K is the largest k observed.
    """

    n_exact: tuple
    matched_exact: tuple
    n_at_least: tuple
    matched_at_least: tuple
    cum_prob: tuple
    stderr: tuple
    replicas: int

    @property
    def max_k(self) -> int:
        return len(self.cum_prob) - 1

    def rows(self):
        for k in range(len(self.cum_prob)):
            yield k, self.cum_prob[k], self.stderr[k], self.n_at_least[k], self.matched_at_least[k]


def curve_from_counts(n_exact, matched_exact, replicas: int) -> MatchCurve:
    n_exact = [int(x) for x in n_exact]
    matched_exact = [int(x) for x in matched_exact]
    top = max((k for k, n in enumerate(n_exact) if n), default=0)
    n_exact, matched_exact = n_exact[: top + 1], matched_exact[: top + 1]
    n_tail, m_tail = [], []
    n_run = m_run = 0
    for n, m in zip(reversed(n_exact), reversed(matched_exact)):
        n_run += n
        m_run += m
        n_tail.append(n_run)
        m_tail.append(m_run)
    n_tail.reverse()
    m_tail.reverse()
    probs = tuple(m / n if n else 0.0 for n, m in zip(n_tail, m_tail))
    errs = tuple(math.sqrt(p * (1 - p) / n) if n else 0.0 for p, n in zip(probs, n_tail))
    return MatchCurve(tuple(n_exact), tuple(matched_exact), tuple(n_tail), tuple(m_tail),
                      probs, errs, replicas)


@dataclass(frozen=True)
class SimResult:
    config: SimConfig
    curve: MatchCurve
    replicas: tuple

    @property
    def match_rate(self) -> float:
        return sum(r.matched for r in self.replicas) / (self.config.applicants * len(self.replicas))

    @property
    def mean_interviews(self) -> float:
        return sum(r.interviews for r in self.replicas) / (self.config.applicants * len(self.replicas))

    @property
    def interview_rate(self) -> Optional[Fraction]:
        apps = sum(r.applications for r in self.replicas)
        return Fraction(sum(r.interviews for r in self.replicas), apps) if apps else None


def _scores(rng: np.random.Generator, quality: np.ndarray, rows: int, correlation: float) -> np.ndarray:
    noise = rng.standard_normal((rows, quality.size))
    return math.sqrt(correlation) * quality[None, :] + math.sqrt(1 - correlation) * noise


def run_replica(config: SimConfig, seed_seq: np.random.SeedSequence) -> ReplicaStats:
    """Draw one market, screen, match with applicant-proposing deferred acceptance."""
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    n, p = config.applicants, config.programs
    capacity = rng.integers(config.capacity_min, config.capacity_max + 1, size=p)
    applicant_quality = rng.standard_normal(n)
    program_quality = rng.standard_normal(p)
    applicant_util = _scores(rng, program_quality, n, config.correlation)
    program_util = _scores(rng, applicant_quality, p, config.correlation)
    screen_draws = rng.random((n, p))

    applicant_order = np.argsort(-applicant_util, axis=1, kind="stable")
    applied = np.zeros((n, p), dtype=bool)
    q = config.applications
    if q:
        np.put_along_axis(applied, applicant_order[:, :q], True, axis=1)

    if config.screening == "probability":
        interviewed = applied & (screen_draws < config.interview_prob)
    else:
        interviewed = np.zeros((n, p), dtype=bool)
        masked = np.where(applied.T, program_util, -np.inf)
        top = np.argsort(-masked, axis=1, kind="stable")[:, : config.interview_topk]
        for j in range(p):
            chosen = top[j][np.isfinite(masked[j, top[j]])]
            interviewed[chosen, j] = True

    applicant_lists = [[int(j) for j in applicant_order[i] if interviewed[i, j]] for i in range(n)]
    program_order = np.argsort(-program_util, axis=1, kind="stable")
    program_rank = []
    for j in range(p):
        ranked = [int(i) for i in program_order[j] if interviewed[i, j]]
        program_rank.append({i: k for k, i in enumerate(ranked)})

    holding = deferred_acceptance(applicant_lists, [1] * n, program_rank, [int(c) for c in capacity])
    matched = np.zeros(n, dtype=bool)
    for held in holding:
        matched[held] = True
    ranked_count = interviewed.sum(axis=1)
    ranked_hist = np.bincount(ranked_count, minlength=p + 1)
    matched_hist = np.bincount(ranked_count[matched], minlength=p + 1)
    return ReplicaStats(
        matched=int(matched.sum()),
        filled_seats=sum(len(h) for h in holding),
        seats=int(capacity.sum()),
        applications=int(applied.sum()),
        interviews=int(interviewed.sum()),
        ranked_hist=tuple(int(x) for x in ranked_hist),
        matched_hist=tuple(int(x) for x in matched_hist),
    )


def _run(config: SimConfig, root: np.random.SeedSequence) -> SimResult:
    children = root.spawn(config.replicas)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            stats = list(pool.map(run_replica, [config] * len(children), children,
                                  chunksize=max(1, len(children) // (4 * config.workers))))
    else:
        stats = [run_replica(config, child) for child in children]
    width = config.programs + 1
    n_exact = np.zeros(width, dtype=np.int64)
    matched_exact = np.zeros(width, dtype=np.int64)
    for s in stats:
        n_exact += s.ranked_hist
        matched_exact += s.matched_hist
    return SimResult(config, curve_from_counts(n_exact, matched_exact, config.replicas), tuple(stats))


def simulate_market(config: SimConfig) -> SimResult:
    """Run ``config.replicas`` independent markets and aggregate the match curve."""
    return _run(config, np.random.SeedSequence(config.seed))


@dataclass(frozen=True)
class EscalationRound:
    round: int
    mean_applications: float
    mean_interviews: float
    interview_rate: Optional[Fraction]
    match_rate: float


def escalation_dynamics(
    config: SimConfig,
    rounds: int,
    cost_spec: CostSpec,
    budget: Budget,
    worst_case: bool = False,
) -> list[EscalationRound]:
    """Repeated best response in the number of applications.

    Round 0 plays ``config.applications``.  In each later round every
    applicant picks the count maximizing expected payoff under ``cost_spec``,
    with the interview probability replaced by the rate observed in the
    previous round (the configured probability until anyone has applied).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    round_seeds = np.random.SeedSequence(config.seed).spawn(rounds + 1)
    q = config.applications
    prior = Fraction(config.interview_prob).limit_denominator(10**6) if config.screening == "probability" \
        else cost_spec.interview_prob
    observed: Optional[Fraction] = None
    series = []
    for r in range(rounds + 1):
        if r > 0:
            rate = observed if observed is not None else prior
            q, _ = optimal_application_count(cost_spec.with_interview_prob(rate), budget,
                                             q_max=config.programs, worst_case=worst_case)
        result = _run(replace(config, applications=q), round_seeds[r])
        observed = result.interview_rate if result.interview_rate is not None else observed
        series.append(EscalationRound(r, float(q), result.mean_interviews,
                                      result.interview_rate, result.match_rate))
    return series
