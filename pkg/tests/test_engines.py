import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resmatch import (
    GuardLimitError,
    MarketError,
    Matching,
    ProposingSide,
    boston_pool,
    enumerate_stable_matchings,
    gale_shapley,
    is_stable,
    pairing_order,
    validate_market,
)

from marketgen import random_market

FIRST_NINE = [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (3, 2), (1, 3), (2, 3), (3, 3)]


def test_pairing_order_prefix():
    assert list(itertools.islice(pairing_order(), 9)) == FIRST_NINE


def test_pairing_order_bounded_covers_square():
    order = list(pairing_order(4))
    assert len(order) == 16
    assert sorted(order) == [(t, k) for t in range(1, 5) for k in range(1, 5)]


@pytest.mark.parametrize("side", list(ProposingSide))
def test_mutual_single_pair(side):
    m = validate_market({"programs": {"alpha": 1}, "applicant_prefs": {"A": ["alpha"]},
                         "program_prefs": {"alpha": ["A"]}})
    assert gale_shapley(m, side).assignment == {"A": "alpha"}


def test_two_by_two_applicants_propose(two_by_two):
    assert gale_shapley(two_by_two).assignment == {"A": "beta", "B": "alpha"}


def test_two_by_two_hand_enumeration(two_by_two):
    # the two perfect matchings; the other one is blocked by (B, alpha)
    good = Matching.from_pairs(two_by_two, [("A", "beta"), ("B", "alpha")])
    other = Matching.from_pairs(two_by_two, [("A", "alpha"), ("B", "beta")])
    b = two_by_two.applicant_prefs["B"]
    alpha = two_by_two.program_prefs["alpha"]
    assert b.rank("alpha") < b.rank("beta") and alpha.rank("B") < alpha.rank("A")
    assert is_stable(two_by_two, good)
    assert not is_stable(two_by_two, other)


def test_one_sided_ranking_never_matches():
    m = validate_market({"programs": {"alpha": 1}, "applicants": ["A"],
                         "applicant_prefs": {"A": ["alpha"]}})
    for side in ProposingSide:
        assert gale_shapley(m, side).assignment == {"A": None}


def test_gale_shapley_rejects_tiers(boston_market):
    with pytest.raises(MarketError, match="tiered"):
        gale_shapley(boston_market)


def test_gale_shapley_trace(two_by_two):
    events = []
    gale_shapley(two_by_two, trace=events.append)
    kinds = [e["event"] for e in events]
    assert kinds.count("propose") == 3
    assert {"engine": "gale_shapley", "event": "displace", "applicant": "A", "to": "alpha"} in events


def test_boston_mutual_first_choice():
    m = validate_market({"programs": {"alpha": 1}, "applicant_prefs": {"A": ["alpha"]},
                         "program_prefs": {"alpha": {"tiers": [["A"]]}}})
    steps = []
    assert boston_pool(m, trace=steps.append).assignment == {"A": "alpha"}
    assert steps[0]["tier"] == 1 and steps[0]["rank"] == 1 and steps[0]["matched"] == [["A", "alpha"]]


def test_boston_instability_instance(boston_market):
    steps = []
    result = boston_pool(boston_market, trace=steps.append)
    assert result.assignment == {"A": None, "B": "P2", "C": "P1"}
    assert [(s["tier"], s["rank"], s["matched"]) for s in steps[:3]] == [
        (1, 1, [["C", "P1"]]),
        (2, 1, [["B", "P2"]]),
        (1, 2, []),
    ]


def test_boston_instance_under_gale_shapley(boston_market):
    flat = boston_market.flattened()
    result = gale_shapley(flat)
    assert result.assignment == {"A": "P2", "B": None, "C": "P1"}
    assert enumerate_stable_matchings(flat) == [result]


def test_boston_rejects_strict_lists(two_by_two):
    with pytest.raises(MarketError, match="tiers required"):
        boston_pool(two_by_two)


def test_boston_within_tier_tie_break():
    m = validate_market({"programs": {"alpha": 1}, "applicant_prefs": {"A": ["alpha"], "B": ["alpha"]},
                         "program_prefs": {"alpha": {"tiers": [["B", "A"]]}}})
    assert boston_pool(m).assignment == {"A": None, "B": "alpha"}


def test_enumerate_two_by_two(two_by_two):
    assert enumerate_stable_matchings(two_by_two) == [
        Matching.from_pairs(two_by_two, [("A", "beta"), ("B", "alpha")])
    ]


def test_enumerate_empty_market():
    m = validate_market({})
    assert [x.assignment for x in enumerate_stable_matchings(m)] == [{}]


def test_enumerate_isolated_applicant():
    m = validate_market({"programs": {"alpha": 1}, "applicants": ["Z"],
                         "applicant_prefs": {"A": ["alpha"]}, "program_prefs": {"alpha": ["A"]}})
    assert [x.assignment for x in enumerate_stable_matchings(m)] == [{"A": "alpha", "Z": None}]


def test_enumerate_guard():
    m = validate_market({
        "programs": {f"p{j}": 1 for j in range(4)},
        "applicant_prefs": {f"a{i}": [f"p{j}" for j in range(4)] for i in range(6)},
        "program_prefs": {f"p{j}": [f"a{i}" for i in range(6)] for j in range(4)},
    })
    with pytest.raises(GuardLimitError):
        enumerate_stable_matchings(m, limit=100)


def test_enumerate_finds_both_extremes():
    # men/women style cycle with two stable matchings
    m = validate_market({
        "programs": {"x": 1, "y": 1},
        "applicant_prefs": {"A": ["x", "y"], "B": ["y", "x"]},
        "program_prefs": {"x": ["B", "A"], "y": ["A", "B"]},
    })
    found = enumerate_stable_matchings(m)
    assert [x.assignment for x in found] == [{"A": "x", "B": "y"}, {"A": "y", "B": "x"}]
    assert gale_shapley(m).assignment == {"A": "x", "B": "y"}
    assert gale_shapley(m, ProposingSide.PROGRAMS).assignment == {"A": "y", "B": "x"}


def _rank(prefs, program):
    return prefs.rank(program) if program is not None else math.inf


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_gale_shapley_in_oracle_and_side_optimal(seed):
    m = random_market(random.Random(seed))
    stable = enumerate_stable_matchings(m)
    ours = gale_shapley(m)
    theirs = gale_shapley(m, ProposingSide.PROGRAMS)
    assert ours in stable and theirs in stable
    for other in stable:
        for a in m.applicants:
            prefs = m.applicant_prefs[a]
            assert _rank(prefs, ours.program_of(a)) <= _rank(prefs, other.program_of(a))
            assert _rank(prefs, theirs.program_of(a)) >= _rank(prefs, other.program_of(a))
    for a, p in ours.assignment.items():
        assert p is None or m.mutually_ranked(a, p)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_gale_shapley_independent_of_id_order(seed):
    rng = random.Random(seed)
    m = random_market(rng)
    amap = {a: f"z{rng.random():.12f}" for a in m.applicants}
    pmap = {p: f"q{rng.random():.12f}" for p in m.programs}
    relabeled = m.relabeled(amap, pmap)
    before = {amap[a]: (pmap[p] if p else None) for a, p in gale_shapley(m).assignment.items()}
    assert gale_shapley(relabeled).assignment == before


def _random_tiered_market(rng):
    n, p = rng.randint(1, 8), rng.randint(1, 4)
    applicants = [f"a{i}" for i in range(n)]
    programs = [f"p{j}" for j in range(p)]
    program_prefs = {}
    for q in programs:
        ranked = [a for a in applicants if rng.random() < 0.8]
        rng.shuffle(ranked)
        tiers, i = [], 0
        while i < len(ranked):
            size = rng.randint(1, 3)
            tiers.append(ranked[i:i + size])
            i += size
        if tiers:
            program_prefs[q] = {"tiers": tiers}
    return validate_market({
        "applicants": applicants,
        "programs": {q: rng.randint(1, 2) for q in programs},
        "applicant_prefs": {a: rng.sample(programs, rng.randint(0, p)) for a in applicants},
        "program_prefs": program_prefs,
    })


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_boston_steps_respect_capacity_and_finality(seed):
    m = _random_tiered_market(random.Random(seed))
    steps = []
    result = boston_pool(m, trace=steps.append)
    seen, load = set(), {p: 0 for p in m.programs}
    for step in steps:
        for a, p in step["matched"]:
            assert a not in seen
            seen.add(a)
            load[p] += 1
            assert load[p] <= m.capacity[p]
            assert m.applicant_prefs[a].rank(p) == step["rank"]
            assert m.program_prefs[p].position(a)[0] == step["tier"]
    assert {a for a, p in result.assignment.items() if p} == seen
