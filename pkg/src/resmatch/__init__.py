"""Two-sided residency matching: engines, stability, payoff games and cost simulation."""

from resmatch.market import (
    MarketError,
    MarketInstance,
    Matching,
    PreferenceList,
    TieredPreferenceList,
    rank_of,
    validate_market,
)
from resmatch.engines import (
    GuardLimitError,
    ProposingSide,
    boston_pool,
    enumerate_stable_matchings,
    gale_shapley,
    pairing_order,
)
from resmatch.stability import BlockingPair, find_blocking_pairs, is_stable

__version__ = "0.1.0"

__all__ = [
    "BlockingPair",
    "GuardLimitError",
    "MarketError",
    "MarketInstance",
    "Matching",
    "PreferenceList",
    "ProposingSide",
    "TieredPreferenceList",
    "boston_pool",
    "enumerate_stable_matchings",
    "find_blocking_pairs",
    "gale_shapley",
    "is_stable",
    "pairing_order",
    "rank_of",
    "validate_market",
]
