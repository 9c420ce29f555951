"""Market domain types and validation of raw preference data.

A market has applicants and programs identified by opaque string ids.
Applicants always submit strict ordinal lists over programs.  Programs submit
either a strict list or a tiered list (Boston Pool style).  Anything absent
from a list is "not ranked"; no engine pairs two sides unless both ranked
each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence, Union


class MarketError(ValueError):
    """Invalid market or matching data.  The message names the offending location."""


def canonical_id(raw: Any, where: str = "") -> str:
    ident = str(raw).strip() if raw is not None else ""
    if not ident:
        raise MarketError(f"{where}: empty id" if where else "empty id")
    return ident


@dataclass(frozen=True)
class PreferenceList:
    """Strict ordinal list; ``ids[k - 1]`` holds rank ``k``."""

    ids: tuple[str, ...] = ()

    def __post_init__(self):
        seen = set()
        for ident in self.ids:
            if ident in seen:
                raise MarketError(f"duplicate id {ident!r} in preference list")
            seen.add(ident)

    @cached_property
    def _positions(self) -> dict[str, int]:
        return {ident: k for k, ident in enumerate(self.ids, start=1)}

    def rank(self, ident: str) -> Optional[int]:
        return self._positions.get(ident)

    def __contains__(self, ident: object) -> bool:
        return ident in self._positions

    def __iter__(self) -> Iterator[str]:
        return iter(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def restricted(self, keep: Iterable[str]) -> "PreferenceList":
        keep = set(keep)
        return PreferenceList(tuple(i for i in self.ids if i in keep))


@dataclass(frozen=True)
class TieredPreferenceList:
    """Applicants grouped into tiers, ranked within each tier.

    The global rank of an applicant is its position in the flattened order,
    so comparing global ranks is the same as comparing
    ``(tier, within_tier)`` lexicographically.
    """

    tiers: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        seen = set()
        for t, tier in enumerate(self.tiers, start=1):
            if not tier:
                raise MarketError(f"tier {t} is empty")
            for ident in tier:
                if ident in seen:
                    raise MarketError(f"duplicate id {ident!r} across tiers")
                seen.add(ident)

    @cached_property
    def _positions(self) -> dict[str, tuple[int, int]]:
        return {
            ident: (t, w)
            for t, tier in enumerate(self.tiers, start=1)
            for w, ident in enumerate(tier, start=1)
        }

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(i for tier in self.tiers for i in tier)

    def position(self, ident: str) -> Optional[tuple[int, int]]:
        """``(tier, within_tier)`` of ``ident``, or None if unranked."""
        return self._positions.get(ident)

    def rank(self, ident: str) -> Optional[int]:
        return self.flatten().rank(ident)

    def tier(self, t: int) -> tuple[str, ...]:
        return self.tiers[t - 1] if 1 <= t <= len(self.tiers) else ()

    def flatten(self) -> PreferenceList:
        return _flat_cache(self)

    def __contains__(self, ident: object) -> bool:
        return ident in self._positions

    def __iter__(self) -> Iterator[str]:
        return iter(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def restricted(self, keep: Iterable[str]) -> "TieredPreferenceList":
        keep = set(keep)
        tiers = (tuple(i for i in tier if i in keep) for tier in self.tiers)
        return TieredPreferenceList(tuple(t for t in tiers if t))


def _flat_cache(tiered: TieredPreferenceList) -> PreferenceList:
    flat = tiered.__dict__.get("_flat")
    if flat is None:
        flat = PreferenceList(tiered.ids)
        tiered.__dict__["_flat"] = flat
    return flat


ProgramList = Union[PreferenceList, TieredPreferenceList]


def rank_of(prefs: ProgramList, ident: str) -> Optional[int]:
    """1-based rank of ``ident`` in ``prefs``; None when unranked."""
    return prefs.rank(ident)


@dataclass(frozen=True)
class MarketInstance:
    applicants: tuple[str, ...]
    programs: tuple[str, ...]
    capacity: Mapping[str, int]
    applicant_prefs: Mapping[str, PreferenceList]
    program_prefs: Mapping[str, ProgramList]

    @property
    def total_spots(self) -> int:
        return sum(self.capacity.values())

    @cached_property
    def applicant_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.applicants)}

    @cached_property
    def program_index(self) -> dict[str, int]:
        return {p: j for j, p in enumerate(self.programs)}

    @property
    def has_tiered(self) -> bool:
        return any(isinstance(v, TieredPreferenceList) for v in self.program_prefs.values())

    @property
    def has_strict_programs(self) -> bool:
        return any(isinstance(v, PreferenceList) for v in self.program_prefs.values())

    def mutually_ranked(self, applicant: str, program: str) -> bool:
        return program in self.applicant_prefs[applicant] and applicant in self.program_prefs[program]

    def flattened(self) -> "MarketInstance":
        """Same market with every tiered program list flattened to a strict one."""
        prefs = {
            p: (v.flatten() if isinstance(v, TieredPreferenceList) else v)
            for p, v in self.program_prefs.items()
        }
        return MarketInstance(self.applicants, self.programs, dict(self.capacity),
                              dict(self.applicant_prefs), prefs)

    def restricted(
        self,
        applicant_keep: Mapping[str, Iterable[str]] = {},
        program_keep: Mapping[str, Iterable[str]] = {},
    ) -> "MarketInstance":
        """Market where the given participants rank only the given subsets (order kept)."""
        aprefs = dict(self.applicant_prefs)
        for a, keep in applicant_keep.items():
            aprefs[a] = aprefs[a].restricted(keep)
        pprefs = dict(self.program_prefs)
        for p, keep in program_keep.items():
            pprefs[p] = pprefs[p].restricted(keep)
        return MarketInstance(self.applicants, self.programs, dict(self.capacity), aprefs, pprefs)

    def relabeled(self, applicant_map: Mapping[str, str], program_map: Mapping[str, str]) -> "MarketInstance":
        return validate_market(_relabel_raw(self.to_raw(), applicant_map, program_map))

    def to_raw(self) -> dict[str, Any]:
        """Plain-data form accepted by :func:`validate_market` (the JSON file layout)."""
        program_prefs: dict[str, Any] = {}
        for p in self.programs:
            prefs = self.program_prefs[p]
            if isinstance(prefs, TieredPreferenceList):
                program_prefs[p] = {"tiers": [list(t) for t in prefs.tiers]}
            else:
                program_prefs[p] = list(prefs.ids)
        return {
            "applicants": list(self.applicants),
            "programs": {p: self.capacity[p] for p in self.programs},
            "applicant_prefs": {a: list(self.applicant_prefs[a].ids) for a in self.applicants},
            "program_prefs": program_prefs,
        }


def _relabel_raw(raw, amap, pmap):
    def tiers_or_list(v):
        if isinstance(v, dict):
            return {"tiers": [[amap[a] for a in t] for t in v["tiers"]]}
        return [amap[a] for a in v]

    return {
        "applicants": [amap[a] for a in raw["applicants"]],
        "programs": {pmap[p]: c for p, c in raw["programs"].items()},
        "applicant_prefs": {amap[a]: [pmap[p] for p in v] for a, v in raw["applicant_prefs"].items()},
        "program_prefs": {pmap[p]: tiers_or_list(v) for p, v in raw["program_prefs"].items()},
    }


def _strict_from_raw(entries: Any, owner: str) -> PreferenceList:
    """Strict list from either a plain id sequence or explicit rank entries.

    Explicit entries are mappings ``{"rank": k, "id": x}`` with an optional
    ``"at"`` location label used in error messages.
    """
    if not isinstance(entries, (list, tuple)):
        raise MarketError(f"{owner}: preference list must be a list")
    if all(not isinstance(e, Mapping) for e in entries):
        ids = [canonical_id(e, owner) for e in entries]
        _check_duplicates(ids, [owner] * len(ids))
        return PreferenceList(tuple(ids))

    rows = []
    for e in entries:
        if not isinstance(e, Mapping):
            raise MarketError(f"{owner}: cannot mix plain ids and ranked entries")
        at = e.get("at", owner)
        rows.append((_positive_int(e.get("rank"), at, "rank"), canonical_id(e.get("id"), at), at))
    rows.sort(key=lambda r: r[0])
    _check_duplicates([r[1] for r in rows], [r[2] for r in rows])
    for expected, (rank, _, at) in enumerate(rows, start=1):
        if rank != expected:
            raise MarketError(f"{at}: rank gap in list of {owner}: expected rank {expected}, got {rank}")
    return PreferenceList(tuple(r[1] for r in rows))


def _tiered_from_raw(entries: Any, owner: str) -> TieredPreferenceList:
    """Tiered list from ``{"tiers": [[...], ...]}`` or explicit tier entries.

    Explicit entries are ``{"tier": t, "within": w, "id": x}``; tiers must be
    contiguous from 1 and within-tier positions contiguous from 1.
    """
    if isinstance(entries, Mapping):
        tiers = entries.get("tiers")
        if not isinstance(tiers, (list, tuple)):
            raise MarketError(f"{owner}: 'tiers' must be a list of lists")
        out = []
        for t, tier in enumerate(tiers, start=1):
            if not tier:
                raise MarketError(f"{owner}: tier {t} is empty")
            out.append(tuple(canonical_id(i, owner) for i in tier))
        flat = [i for tier in out for i in tier]
        _check_duplicates(flat, [owner] * len(flat))
        return TieredPreferenceList(tuple(out))

    rows = []
    for e in entries:
        at = e.get("at", owner)
        rows.append((
            _positive_int(e.get("tier"), at, "tier"),
            _positive_int(e.get("within"), at, "within-tier position"),
            canonical_id(e.get("id"), at),
            at,
        ))
    rows.sort(key=lambda r: (r[0], r[1]))
    _check_duplicates([r[2] for r in rows], [r[3] for r in rows])
    tiers: list[list[str]] = []
    for tier_no, within, ident, at in rows:
        if tier_no > len(tiers) + 1:
            raise MarketError(f"{at}: empty tier {len(tiers) + 1} in list of {owner}")
        if tier_no == len(tiers) + 1:
            tiers.append([])
        if within != len(tiers[tier_no - 1]) + 1:
            raise MarketError(
                f"{at}: rank gap in tier {tier_no} of {owner}: "
                f"expected position {len(tiers[tier_no - 1]) + 1}, got {within}"
            )
        tiers[tier_no - 1].append(ident)
    return TieredPreferenceList(tuple(tuple(t) for t in tiers))


def _positive_int(value: Any, at: str, what: str) -> int:
    if isinstance(value, int) and not isinstance(value, bool):
        n = value
    elif isinstance(value, str) and value.strip().isdigit():
        n = int(value.strip())
    else:
        raise MarketError(f"{at}: {what} must be a positive integer, got {value!r}")
    if n < 1:
        raise MarketError(f"{at}: {what} must be a positive integer, got {value!r}")
    return n


def _check_duplicates(ids: Sequence[str], locations: Sequence[str]) -> None:
    seen = set()
    for ident, at in zip(ids, locations):
        if ident in seen:
            raise MarketError(f"{at}: duplicate id {ident!r}")
        seen.add(ident)


def _is_tiered(entries: Any) -> bool:
    if isinstance(entries, Mapping):
        return True
    kinds = {("tier" in e) for e in entries if isinstance(e, Mapping)}
    if len(kinds) > 1:
        raise MarketError("cannot mix strict and tiered entries within one program's list")
    return kinds == {True}


def validate_market(raw: Mapping[str, Any]) -> MarketInstance:
    """Build a :class:`MarketInstance` from plain data, enforcing every invariant.

    ``raw`` layout::

        {"applicants": [ids...],                 # optional, unioned with applicant_prefs keys
         "programs": {id: capacity, ...},
         "applicant_prefs": {id: [program ids...]},
         "program_prefs": {id: [applicant ids...] | {"tiers": [[ids...], ...]}}}

    Lists may instead hold explicit ranked entries (see ``_strict_from_raw``
    and ``_tiered_from_raw``); the CSV reader produces those.
    """
    programs_raw = raw.get("programs", {})
    if not isinstance(programs_raw, Mapping):
        raise MarketError("'programs' must map program id to capacity")
    capacity: dict[str, int] = {}
    for p, cap in programs_raw.items():
        pid = canonical_id(p, "programs")
        if pid in capacity:
            raise MarketError(f"programs: duplicate program id {pid!r}")
        if isinstance(cap, bool) or not isinstance(cap, int):
            try:
                cap_int = int(str(cap).strip())
            except ValueError:
                raise MarketError(f"program {pid}: capacity must be an integer, got {cap!r}") from None
        else:
            cap_int = cap
        if cap_int <= 0:
            raise MarketError(f"program {pid}: capacity must be positive, got {cap_int}")
        capacity[pid] = cap_int

    applicants_set: dict[str, None] = {}
    for a in raw.get("applicants", []):
        aid = canonical_id(a, "applicants")
        if aid in applicants_set:
            raise MarketError(f"applicants: duplicate applicant id {aid!r}")
        applicants_set[aid] = None

    applicant_prefs: dict[str, PreferenceList] = {}
    for a, entries in raw.get("applicant_prefs", {}).items():
        aid = canonical_id(a, "applicant_prefs")
        if aid in applicant_prefs:
            raise MarketError(f"applicant {aid}: listed twice")
        if isinstance(entries, Mapping) or any(isinstance(e, Mapping) and "tier" in e for e in entries):
            raise MarketError(f"applicant {aid}: tiered lists are program-side only")
        applicant_prefs[aid] = _strict_from_raw(entries, f"applicant {aid}")
        applicants_set.setdefault(aid, None)

    program_prefs: dict[str, ProgramList] = {}
    for p, entries in raw.get("program_prefs", {}).items():
        pid = canonical_id(p, "program_prefs")
        if pid not in capacity:
            raise MarketError(f"program {pid}: has a preference list but no capacity")
        if pid in program_prefs:
            raise MarketError(f"program {pid}: listed twice")
        if _is_tiered(entries):
            program_prefs[pid] = _tiered_from_raw(entries, f"program {pid}")
        else:
            program_prefs[pid] = _strict_from_raw(entries, f"program {pid}")

    for aid, prefs in applicant_prefs.items():
        for pid in prefs:
            if pid not in capacity:
                raise MarketError(f"applicant {aid}: unknown program {pid!r}")
    for pid, prefs in program_prefs.items():
        for aid in prefs:
            if aid not in applicants_set:
                raise MarketError(f"program {pid}: unknown applicant {aid!r}")

    applicants = tuple(sorted(applicants_set))
    programs = tuple(sorted(capacity))
    return MarketInstance(
        applicants=applicants,
        programs=programs,
        capacity={p: capacity[p] for p in programs},
        applicant_prefs={a: applicant_prefs.get(a, PreferenceList()) for a in applicants},
        program_prefs={p: program_prefs.get(p, PreferenceList()) for p in programs},
    )


@dataclass(frozen=True)
class Matching:
    """Many-to-one assignment of applicants to programs.

    ``assignment`` covers every applicant of the market it was built for;
    unmatched applicants map to None.
    """

    assignment: Mapping[str, Optional[str]]

    @classmethod
    def from_pairs(
        cls, market: MarketInstance, pairs: Iterable[tuple[str, Optional[str]]]
    ) -> "Matching":
        assignment: dict[str, Optional[str]] = {a: None for a in market.applicants}
        seen = set()
        for a, p in pairs:
            if a not in assignment:
                raise MarketError(f"matching: unknown applicant {a!r}")
            if a in seen:
                raise MarketError(f"matching: applicant {a!r} assigned more than once")
            seen.add(a)
            if p is not None and p not in market.capacity:
                raise MarketError(f"matching: unknown program {p!r} for applicant {a!r}")
            assignment[a] = p
        m = cls(assignment)
        for p, members in m.members_by_program.items():
            if len(members) > market.capacity[p]:
                raise MarketError(
                    f"matching: program {p!r} holds {len(members)} > capacity {market.capacity[p]}"
                )
        return m

    @cached_property
    def members_by_program(self) -> dict[str, frozenset]:
        inverse: dict[str, set] = {}
        for a, p in self.assignment.items():
            if p is not None:
                inverse.setdefault(p, set()).add(a)
        return {p: frozenset(s) for p, s in inverse.items()}

    def members(self, program: str) -> frozenset:
        return self.members_by_program.get(program, frozenset())

    def program_of(self, applicant: str) -> Optional[str]:
        return self.assignment.get(applicant)

    @property
    def matched_count(self) -> int:
        return sum(p is not None for p in self.assignment.values())

    def pairs(self) -> list[tuple[str, Optional[str]]]:
        return sorted(self.assignment.items())

    def key(self) -> tuple:
        return tuple((a, p or "") for a, p in sorted(self.assignment.items()))

    def __hash__(self) -> int:
        return hash(self.key())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matching):
            return NotImplemented
        return dict(self.assignment) == dict(other.assignment)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{a}->{p or '-'}" for a, p in self.pairs()) + "}"
