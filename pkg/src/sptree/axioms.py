"""Mechanism axioms as executable predicates.

Pairwise predicates quantify over a single unilateral deviation: one
agent swaps her report while everyone else stays put.  They all take a
:class:`DeviationPair` and, by convention, a trivial pair (the agent
re-reporting her own location) satisfies every predicate.  Whole
mechanism checks quantify the predicates over all profiles and all
deviations in lexicographic (profile code, agent index, report) order,
so the first witness of a violation is reproducible byte for byte.

The predicates here are the readable reference route, built from the
set-returning tree primitives (side trees, path intersections, tree
medians).  The bulk sweeps in :mod:`sptree.kernels` recompute the same
predicates from closed-form anchor/depth tables; tests pin the two
routes against each other.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Mapping, Sequence

from .mechanisms import Mechanism, all_profiles, profile_code
from .reports import HOLDS, VIOLATED, PropertyReport
from .tree import DiscreteTree


class UnsupportedPropertyError(ValueError):
    """The requested property does not apply to this mechanism's domain."""


@dataclass(frozen=True)
class DeviationPair:
    """One unilateral deviation with both outcomes cached.

    ``agent`` is 1-based.  ``profile`` is the truthful-side profile,
    ``report`` the agent's alternate report; ``outcome``/``outcome_alt``
    are the mechanism outcomes before and after the swap.
    """

    mechanism: Mechanism
    profile: tuple[int, ...]
    agent: int
    report: int
    outcome: int
    outcome_alt: int

    @classmethod
    def build(cls, mechanism: Mechanism, profile: Sequence[int], agent: int, report: int) -> "DeviationPair":
        profile = tuple(profile)
        if not 1 <= agent <= mechanism.n:
            raise ValueError(f"agent index {agent} out of range 1..{mechanism.n}")
        report = mechanism.tree.check_vertex(report)
        alt = profile[: agent - 1] + (report,) + profile[agent:]
        return cls(
            mechanism=mechanism,
            profile=profile,
            agent=agent,
            report=report,
            outcome=mechanism.evaluate(profile),
            outcome_alt=mechanism.evaluate(alt),
        )

    @property
    def tree(self) -> DiscreteTree:
        return self.mechanism.tree

    @property
    def location(self) -> int:
        """The deviating agent's original location a_i."""
        return self.profile[self.agent - 1]

    @property
    def alt_profile(self) -> tuple[int, ...]:
        return self.profile[: self.agent - 1] + (self.report,) + self.profile[self.agent:]

    @property
    def trivial(self) -> bool:
        return self.report == self.location

    def swapped(self) -> "DeviationPair":
        """The same move seen from the alternate profile's side."""
        return DeviationPair(
            mechanism=self.mechanism,
            profile=self.alt_profile,
            agent=self.agent,
            report=self.location,
            outcome=self.outcome_alt,
            outcome_alt=self.outcome,
        )

    def witness_fields(self):
        return [
            ("profile", self.profile),
            ("agent", self.agent),
            ("report", self.report),
            ("outcome", self.outcome),
            ("outcome_alt", self.outcome_alt),
        ]


# -- pairwise predicates -----------------------------------------------------

def sp_pair(p: DeviationPair) -> bool:
    """No gain in either direction of the swap.

    Checked bidirectionally (truth at the original profile and truth at
    the alternate one); the mechanism-level quantification is unchanged,
    and pairwise equivalence testing against depth-balance needs both
    directions.
    """
    if p.trivial:
        return True
    d = p.tree.dist
    a_i, r = p.location, p.report
    return bool(
        d[a_i, p.outcome] <= d[a_i, p.outcome_alt]
        and d[r, p.outcome_alt] <= d[r, p.outcome]
    )


def tmon_pair(p: DeviationPair) -> bool:
    """The outcome moves in the same direction as the agent.

    Reduced to an endpoint comparison on the common subpath of the
    agent's trajectory and the outcome's trajectory: distances from the
    agent and from the old outcome are strictly monotone along that
    subpath, so checking its two endpoints decides every inner segment.
    The full quantifier form is kept as :func:`tmon_pair_bruteforce`.
    """
    if p.trivial:
        return True
    t = p.tree
    common = t.path_intersection((p.location, p.report), (p.outcome, p.outcome_alt))
    if len(common) <= 1:
        return True
    # common[0] is the endpoint nearest the agent; it must also be the
    # endpoint nearest the old outcome.
    return t.distance(p.outcome, common[0]) < t.distance(p.outcome, common[-1])


def tmon_pair_bruteforce(p: DeviationPair) -> bool:
    """Direct quantifier form of tree monotonicity (debug oracle)."""
    if p.trivial:
        return True
    t = p.tree
    common = t.path_intersection((p.location, p.report), (p.outcome, p.outcome_alt))
    a_i, x = p.location, p.outcome
    for u in common:
        for w in common:
            if (t.distance(a_i, u) < t.distance(a_i, w)) != (t.distance(x, u) < t.distance(x, w)):
                return False
    return True


def db_pair(p: DeviationPair) -> bool:
    """Side-tree distance of the outcomes dominates their depth difference."""
    if p.trivial:
        return True
    t = p.tree
    a_i, r = p.location, p.report
    side_old = t.side_tree(a_i, r, p.outcome)
    side_new = t.side_tree(a_i, r, p.outcome_alt)
    gap = t.set_distance(side_old, side_new)
    return gap >= abs(t.depth_from_path(a_i, r, p.outcome) - t.depth_from_path(a_i, r, p.outcome_alt))


def adr_pair(p: DeviationPair) -> bool:
    """Within one side tree the outcome may only move to a sibling.

    Applies when the outcome changes without changing side trees: both
    outcomes must sit at distance exactly 1 from their tree median with
    the agent's location.
    """
    if p.trivial or p.outcome == p.outcome_alt:
        return True
    t = p.tree
    a_i, r = p.location, p.report
    if t.side_tree(a_i, r, p.outcome) != t.side_tree(a_i, r, p.outcome_alt):
        return True
    z = t.median_of_three(p.location, p.outcome, p.outcome_alt)
    return t.distance(p.outcome, z) == 1 and t.distance(p.outcome_alt, z) == 1


def tsi_pair(p: DeviationPair, m: int) -> bool:
    """Outcomes farther than m from the agent's trajectory keep their side tree."""
    if p.trivial:
        return True
    t = p.tree
    a_i, r = p.location, p.report
    if t.set_distance(t.path(a_i, r), [p.outcome]) > m:
        return t.side_tree(a_i, r, p.outcome) == t.side_tree(a_i, r, p.outcome_alt)
    return True


def tc_pair(p: DeviationPair) -> bool:
    """The outcome trajectory is contained in the agent's, or does not move."""
    if p.trivial or p.outcome == p.outcome_alt:
        return True
    t = p.tree
    allowed = set(t.path(p.location, p.report))
    return all(v in allowed for v in t.path(p.outcome, p.outcome_alt))


def atc_pair(p: DeviationPair) -> bool:
    """Sibling-restricted moves plus 1-step independence."""
    return adr_pair(p) and tsi_pair(p, 1)


def tpar_profile(tree: DiscreteTree, mechanism: Mechanism, profile: Sequence[int]) -> bool:
    """The outcome is an agent's peak or within 1 of the profile's interior."""
    profile = tuple(profile)
    x = mechanism.evaluate(profile)
    if x in profile:
        return True
    return tree.set_distance([x], tree.interior(profile)) <= 1


# -- whole-mechanism checks --------------------------------------------------

_PAIRWISE = {
    "sp": sp_pair,
    "tmon": tmon_pair,
    "db": db_pair,
    "adr": adr_pair,
    "tc": tc_pair,
    "atc": atc_pair,
}

PROPERTY_IDS = tuple(_PAIRWISE) + ("tsi:<m>", "tpar", "onto", "unanimous", "anonymous")


def _deviations(mechanism: Mechanism):
    """All (profile, agent, report) triples in lexicographic scan order."""
    V = mechanism.tree.vertex_count
    for profile in all_profiles(V, mechanism.n):
        yield profile, [
            (agent, report)
            for agent in range(1, mechanism.n + 1)
            for report in range(V)
            if report != profile[agent - 1]
        ]


def _pairwise_scan(mechanism: Mechanism, predicate, prop: str, full: bool) -> PropertyReport:
    started = time.perf_counter()
    outcomes: dict[tuple[int, ...], int] = {}

    def outcome(profile: tuple[int, ...]) -> int:
        cached = outcomes.get(profile)
        if cached is None:
            cached = outcomes[profile] = mechanism.evaluate(profile)
        return cached

    witness = None
    pairs = profiles = 0
    for profile, moves in _deviations(mechanism):
        profiles += 1
        x = outcome(profile)
        for agent, report in moves:
            alt = profile[: agent - 1] + (report,) + profile[agent:]
            pair = DeviationPair(mechanism, profile, agent, report, x, outcome(alt))
            pairs += 1
            if witness is None and not predicate(pair):
                witness = pair
                if not full:
                    return PropertyReport(
                        prop, VIOLATED, witness, profiles, pairs,
                        subject=mechanism.label(), elapsed=time.perf_counter() - started,
                    )
    verdict = HOLDS if witness is None else VIOLATED
    return PropertyReport(
        prop, verdict, witness, profiles, pairs,
        subject=mechanism.label(), elapsed=time.perf_counter() - started,
    )


def check_property(mechanism: Mechanism, prop: str, *, full: bool = False) -> PropertyReport:
    """Quantify one property over the whole mechanism.

    ``prop`` is one of sp, tmon, db, adr, tc, atc, tsi:<m>, tpar, onto,
    unanimous, anonymous.  The scan short-circuits at the first witness
    unless ``full`` asks for complete counts.
    """
    if prop.startswith("tsi"):
        _, _, arg = prop.partition(":")
        if not arg:
            raise UnsupportedPropertyError("tsi needs a step bound, e.g. 'tsi:1'")
        m = int(arg)
        if m < 0:
            raise UnsupportedPropertyError("tsi step bound must be >= 0")
        return _pairwise_scan(mechanism, lambda p: tsi_pair(p, m), prop, full)
    if prop in _PAIRWISE:
        return _pairwise_scan(mechanism, _PAIRWISE[prop], prop, full)
    if prop == "tpar":
        return _tpar_scan(mechanism, full)
    if prop == "onto":
        return check_onto(mechanism)
    if prop == "unanimous":
        return check_unanimous(mechanism)
    if prop == "anonymous":
        return check_anonymous(mechanism)
    raise UnsupportedPropertyError(f"unknown property {prop!r}")


def _tpar_scan(mechanism: Mechanism, full: bool) -> PropertyReport:
    started = time.perf_counter()
    tree = mechanism.tree
    witness = None
    profiles = 0
    for profile in all_profiles(tree.vertex_count, mechanism.n):
        profiles += 1
        if witness is None and not tpar_profile(tree, mechanism, profile):
            witness = profile
            if not full:
                break
    verdict = HOLDS if witness is None else VIOLATED
    return PropertyReport(
        "tpar", verdict, witness, profiles, 0,
        subject=mechanism.label(), elapsed=time.perf_counter() - started,
    )


def check_onto(mechanism: Mechanism) -> PropertyReport:
    """Every vertex must be hit by some profile (exhaustive image scan)."""
    started = time.perf_counter()
    tree = mechanism.tree
    hit = set()
    profiles = 0
    for profile in all_profiles(tree.vertex_count, mechanism.n):
        profiles += 1
        hit.add(mechanism.evaluate(profile))
    missing = [v for v in tree.vertices if v not in hit]
    witness = missing[0] if missing else None
    return PropertyReport(
        "onto", HOLDS if not missing else VIOLATED, witness, profiles, 0,
        subject=mechanism.label(), elapsed=time.perf_counter() - started,
    )


def check_unanimous(mechanism: Mechanism) -> PropertyReport:
    started = time.perf_counter()
    tree = mechanism.tree
    witness = None
    for v in tree.vertices:
        profile = (v,) * mechanism.n
        if mechanism.evaluate(profile) != v:
            witness = profile
            break
    return PropertyReport(
        "unanimous", HOLDS if witness is None else VIOLATED, witness,
        tree.vertex_count, 0, subject=mechanism.label(),
        elapsed=time.perf_counter() - started,
    )


def check_anonymous(mechanism: Mechanism) -> PropertyReport:
    """Outcome must depend only on the multiset of reports."""
    if mechanism.n < 2:
        raise UnsupportedPropertyError("anonymity needs at least 2 agents")
    started = time.perf_counter()
    tree = mechanism.tree
    witness = None
    profiles = 0
    for profile in all_profiles(tree.vertex_count, mechanism.n):
        profiles += 1
        if mechanism.evaluate(profile) != mechanism.evaluate(tuple(sorted(profile))):
            witness = profile
            break
    return PropertyReport(
        "anonymous", HOLDS if witness is None else VIOLATED, witness, profiles, 0,
        subject=mechanism.label(), elapsed=time.perf_counter() - started,
    )


# -- ordinal preferences -----------------------------------------------------

@dataclass(frozen=True)
class PreferenceProfile:
    """Per-agent total preorders over the vertices, given as ranked tiers."""

    vertex_count: int
    tiers: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        for agent_no, agent_tiers in enumerate(self.tiers, start=1):
            seen: list[int] = []
            for tier in agent_tiers:
                seen.extend(tier)
            if sorted(seen) != list(range(self.vertex_count)):
                raise ValueError(
                    f"agent {agent_no}: tiers must cover every vertex exactly once"
                )

    @property
    def n(self) -> int:
        return len(self.tiers)

    def rank(self, agent: int, v: int) -> int:
        for idx, tier in enumerate(self.tiers[agent - 1]):
            if v in tier:
                return idx
        raise ValueError(f"vertex {v} missing from agent {agent}'s preference")

    def prefers(self, agent: int, a: int, b: int) -> bool:
        """Strict preference of vertex a over vertex b."""
        return self.rank(agent, a) < self.rank(agent, b)

    def peak(self, agent: int) -> int:
        top = self.tiers[agent - 1][0]
        if len(top) != 1:
            raise ValueError(f"agent {agent} has an ambiguous peak (top tier {top})")
        return top[0]


def quadratic_preferences(tree: DiscreteTree, peaks: Sequence[int]) -> PreferenceProfile:
    """Distance-induced preferences: closer vertices ranked strictly higher."""
    tiers = []
    for peak in peaks:
        peak = tree.check_vertex(peak)
        by_distance: dict[int, list[int]] = {}
        for v in tree.vertices:
            by_distance.setdefault(tree.distance(peak, v), []).append(v)
        tiers.append(tuple(tuple(by_distance[d]) for d in sorted(by_distance)))
    return PreferenceProfile(tree.vertex_count, tuple(tiers))


def parse_preferences(text: str, vertex_count: int) -> PreferenceProfile:
    """One line per agent: ';'-separated tiers, each a ','-separated vertex list."""
    tiers = []
    for raw in text.splitlines():
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        agent_tiers = []
        for chunk in body.split(";"):
            agent_tiers.append(tuple(int(t) for t in chunk.split(",") if t.strip()))
        tiers.append(tuple(agent_tiers))
    return PreferenceProfile(vertex_count, tuple(tiers))


def format_preferences(prefs: PreferenceProfile) -> str:
    lines = []
    for agent_tiers in prefs.tiers:
        lines.append(";".join(",".join(str(v) for v in tier) for tier in agent_tiers))
    return "\n".join(lines) + "\n"


def check_sp_under_preferences(mechanism: Mechanism, prefs: PreferenceProfile) -> PropertyReport:
    """Truth-telling must be dominant under the given ordinal preferences.

    Each agent's true location is her preference peak; profiles where she
    reports it are scanned against every alternate report, with the other
    agents' reports ranging freely.
    """
    tree = mechanism.tree
    if prefs.n != mechanism.n:
        raise ValueError(f"preference profile has {prefs.n} agents, mechanism has {mechanism.n}")
    if prefs.vertex_count != tree.vertex_count:
        raise ValueError("preference profile does not cover this tree's vertices")
    peaks = [prefs.peak(agent) for agent in range(1, mechanism.n + 1)]

    started = time.perf_counter()
    witness = None
    pairs = profiles = 0
    outcomes: dict[tuple[int, ...], int] = {}

    def outcome(profile: tuple[int, ...]) -> int:
        cached = outcomes.get(profile)
        if cached is None:
            cached = outcomes[profile] = mechanism.evaluate(profile)
        return cached

    for profile in all_profiles(tree.vertex_count, mechanism.n):
        profiles += 1
        for agent in range(1, mechanism.n + 1):
            if profile[agent - 1] != peaks[agent - 1]:
                continue  # not a truthful scenario for this agent
            x = outcome(profile)
            for report in range(tree.vertex_count):
                if report == profile[agent - 1]:
                    continue
                alt = profile[: agent - 1] + (report,) + profile[agent:]
                x_alt = outcome(alt)
                pairs += 1
                if prefs.prefers(agent, x_alt, x):
                    witness = DeviationPair(mechanism, profile, agent, report, x, x_alt)
                    return PropertyReport(
                        "sp-ordinal", VIOLATED, witness, profiles, pairs,
                        subject=mechanism.label(), elapsed=time.perf_counter() - started,
                    )
    return PropertyReport(
        "sp-ordinal", HOLDS, None, profiles, pairs,
        subject=mechanism.label(), elapsed=time.perf_counter() - started,
    )


def check_uncompromising(mechanism: Mechanism) -> PropertyReport:
    """Agents strictly on one side of the outcome cannot move it by staying there.

    Only defined on path domains whose vertex ids are ordered along the
    path; both clauses of the definition are checked for every profile,
    agent and same-side re-report.
    """
    tree = mechanism.tree
    for v in range(tree.vertex_count - 1):
        if tree.distance(v, v + 1) != 1:
            raise UnsupportedPropertyError("uncompromising needs an ordered path domain")

    started = time.perf_counter()
    witness = None
    pairs = profiles = 0
    for profile in all_profiles(tree.vertex_count, mechanism.n):
        profiles += 1
        x = mechanism.evaluate(profile)
        for agent in range(1, mechanism.n + 1):
            a_i = profile[agent - 1]
            if a_i > x:
                same_side = range(x, tree.vertex_count)
            elif a_i < x:
                same_side = range(0, x + 1)
            else:
                continue
            for report in same_side:
                alt = profile[: agent - 1] + (report,) + profile[agent:]
                pairs += 1
                x_alt = mechanism.evaluate(alt)
                if x_alt != x:
                    witness = DeviationPair(mechanism, profile, agent, report, x, x_alt)
                    return PropertyReport(
                        "uncompromising", VIOLATED, witness, profiles, pairs,
                        subject=mechanism.label(), elapsed=time.perf_counter() - started,
                    )
    return PropertyReport(
        "uncompromising", HOLDS, None, profiles, pairs,
        subject=mechanism.label(), elapsed=time.perf_counter() - started,
    )
