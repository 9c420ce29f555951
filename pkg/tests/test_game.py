import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resmatch import GuardLimitError, MarketError, validate_market
from resmatch.game import (
    PayoffSpec,
    Player,
    RankPayoff,
    StrategyProfile,
    build_payoff_table,
    check_rank_all_dominance,
    resolve,
    resolve_and_pay,
)

from marketgen import random_market, random_payoff_spec

A, B = Player("applicant", "A"), Player("applicant", "B")
ALPHA, BETA = Player("program", "alpha"), Player("program", "beta")


def one_by_one():
    return validate_market({"programs": {"alpha": 1}, "applicant_prefs": {"A": ["alpha"]},
                            "program_prefs": {"alpha": ["A"]}})


SPEC_10_1 = PayoffSpec(RankPayoff((10,), (1,)), RankPayoff((10,), (0,)))


def test_one_by_one_table():
    table = build_payoff_table(one_by_one(), SPEC_10_1, [A, ALPHA])
    assert table.labels == (("rank", "not rank"), ("rank", "not rank"))
    assert table.cells == {(0, 0): (10, 10), (0, 1): (1, 0), (1, 0): (0, 0), (1, 1): (0, 0)}


def test_only_applicant_ranks():
    m = one_by_one()
    profile = StrategyProfile.truthful(m).with_action(ALPHA, ())
    assert resolve(m, profile).program_of("A") is None
    paid = resolve_and_pay(m, profile, SPEC_10_1)
    assert (paid.of(A), paid.of(ALPHA)) == (1, 0)


def test_one_applicant_two_programs():
    m = validate_market({"programs": {"alpha": 1, "beta": 1}, "applicant_prefs": {"A": ["alpha", "beta"]},
                         "program_prefs": {"alpha": ["A"], "beta": ["A"]}})
    spec = PayoffSpec(RankPayoff((10, 5), (1, 1)), RankPayoff((10,), (0,)))
    profile = StrategyProfile.truthful(m)
    assert resolve(m, profile).program_of("A") == "alpha"
    paid = resolve_and_pay(m, profile, spec)
    assert paid.of(A) == 11
    assert paid.programs == {"alpha": 10, "beta": 0}


def test_one_applicant_two_programs_dominance():
    m = validate_market({"programs": {"alpha": 1, "beta": 1}, "applicant_prefs": {"A": ["alpha", "beta"]},
                         "program_prefs": {"alpha": ["A"], "beta": ["A"]}})
    spec = PayoffSpec(RankPayoff((10, 5), (1, 1)), RankPayoff((10,), (0,)))
    table = build_payoff_table(m, spec, [A, ALPHA, BETA])
    assert table.mode == "subsets"
    assert table.labels[0] == ("rank", "rank:alpha", "rank:beta", "not rank")
    for profile, payoffs in table.cells.items():
        full = table.cells[(0,) + profile[1:]][0]
        assert full >= payoffs[0]
    assert check_rank_all_dominance(m, spec).holds


def test_two_applicants_one_program_binary():
    m = validate_market({"programs": {"alpha": 1}, "applicant_prefs": {"A": ["alpha"], "B": ["alpha"]},
                         "program_prefs": {"alpha": ["A", "B"]}})
    spec = PayoffSpec(RankPayoff((10,), (1,)), RankPayoff((10, 6), (2, 1)))
    table = build_payoff_table(m, spec, [A, B, ALPHA], mode="binary")
    assert len(table.cells) == 8
    assert [len(x) for x in table.labels] == [2, 2, 2]
    # program ranks both, both apply: A (rank 1) matched, B (rank 2) not
    assert table.cells[(0, 0, 0)] == (10, 1, 10 + 1)
    # only B applies: B matched at rank 2, A ranked but unmatched
    assert table.cells[(1, 0, 0)] == (0, 10, 6 + 2)
    assert table.cells[(0, 0, 1)] == (1, 1, 0)


def test_empty_player_set():
    table = build_payoff_table(one_by_one(), SPEC_10_1, [])
    assert table.cells == {} and table.mode == "empty"


def test_zero_payoff_ties():
    zero = PayoffSpec(RankPayoff(), RankPayoff())
    report = check_rank_all_dominance(one_by_one(), zero)
    assert report.holds
    table = build_payoff_table(one_by_one(), zero, [A, ALPHA])
    assert set(table.cells.values()) == {(0, 0)}


def test_guards(two_by_two):
    with pytest.raises(GuardLimitError):
        build_payoff_table(two_by_two, SPEC_10_1, [A, B, ALPHA, BETA], mode="subsets")
    big = validate_market({
        "programs": {f"p{j}": 1 for j in range(7)},
        "applicant_prefs": {f"a{i}": ["p0"] for i in range(6)},
    })
    with pytest.raises(GuardLimitError):
        check_rank_all_dominance(big, SPEC_10_1)


def test_invalid_profile_rejected(two_by_two):
    base = StrategyProfile.truthful(two_by_two)
    with pytest.raises(MarketError, match="reorders"):
        resolve(two_by_two, base.with_action(A, ("beta", "alpha")))
    with pytest.raises(MarketError, match="outside"):
        resolve(two_by_two, base.with_action(A, ("gamma",)))


@pytest.mark.parametrize("kwargs", [
    {"matched": (1, 2)},
    {"matched": (1,), "unmatched": (2,)},
    {"matched": (1,), "unmatched": (-1,)},
    {"matched": (3,), "matched_tail": 4},
])
def test_rank_payoff_invariants(kwargs):
    with pytest.raises(ValueError):
        RankPayoff(**kwargs)


def test_rank_payoff_tail():
    f = RankPayoff((10, 6), (1,), matched_tail=1)
    assert [f(r, 1) for r in (1, 2, 3, 9)] == [10, 6, 1, 1]
    assert [f(r, 0) for r in (1, 2)] == [1, 0]


def test_program_truncation_can_pay_under_applicant_proposing():
    # receiving side is not protected: alpha drops A and lands its first choice
    m = validate_market({
        "programs": {"alpha": 1, "beta": 1},
        "applicant_prefs": {"A": ["alpha", "beta"], "B": ["beta", "alpha"]},
        "program_prefs": {"alpha": ["B", "A"], "beta": ["A", "B"]},
    })
    spec = PayoffSpec(RankPayoff((10, 6)), RankPayoff((10, 6)))
    truthful = StrategyProfile.truthful(m)
    truncated = truthful.with_action(ALPHA, ("B",))
    assert resolve_and_pay(m, truthful, spec).of(ALPHA) == 6
    assert resolve_and_pay(m, truncated, spec).of(ALPHA) == 10
    # the guarded binary check only compares rank-all with rank-none
    assert check_rank_all_dominance(m, spec).mode == "binary"
    assert check_rank_all_dominance(m, spec).holds


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_dominance_on_small_markets(seed):
    rng = random.Random(seed)
    m = random_market(rng, max_applicants=3, max_programs=3)
    report = check_rank_all_dominance(m, random_payoff_spec(rng))
    assert report.holds, report.summary()


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_adding_a_program_never_hurts(seed):
    rng = random.Random(seed)
    m = random_market(rng, max_applicants=4, max_programs=4)
    spec = random_payoff_spec(rng)
    a = rng.choice(m.applicants)
    true = tuple(m.applicant_prefs[a])
    if not true:
        return
    subset = tuple(p for p in true if rng.random() < 0.5)
    extra = rng.choice([p for p in true])
    bigger = tuple(p for p in true if p in subset or p == extra)
    base = StrategyProfile.truthful(m)
    before = resolve_and_pay(m, base.with_action(Player("applicant", a), subset), spec).applicants[a]
    after = resolve_and_pay(m, base.with_action(Player("applicant", a), bigger), spec).applicants[a]
    assert after >= before


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_payoffs_invariant_under_relabeling(seed):
    rng = random.Random(seed)
    m = random_market(rng, max_applicants=4, max_programs=3)
    spec = random_payoff_spec(rng)
    amap = {a: f"x{rng.random():.9f}" for a in m.applicants}
    pmap = {p: f"y{rng.random():.9f}" for p in m.programs}
    before = resolve_and_pay(m, StrategyProfile.truthful(m), spec)
    relabeled = m.relabeled(amap, pmap)
    after = resolve_and_pay(relabeled, StrategyProfile.truthful(relabeled), spec)
    assert after.applicants == {amap[a]: v for a, v in before.applicants.items()}
    assert after.programs == {pmap[p]: v for p, v in before.programs.items()}


def test_exact_fraction_payoffs():
    spec = PayoffSpec(RankPayoff((Fraction(7, 2),), (Fraction(1, 3),)), RankPayoff((Fraction(5, 4),)))
    paid = resolve_and_pay(one_by_one(), StrategyProfile.truthful(one_by_one()), spec)
    assert paid.of(A) == Fraction(7, 2) and paid.of(ALPHA) == Fraction(5, 4)
