"""Facility-location mechanisms: explicit tables and the named built-ins.

A mechanism maps a profile of reported vertex locations to a single
vertex of its tree.  Evaluation is deterministic, stateless and total on
``V^n``, so mechanisms are safe to share across workers.  Every
mechanism can be materialised into a :class:`TableMechanism` (a dense
outcome array indexed by the mixed-radix profile code), which is the
representation the search engine enumerates and the table file format
serialises.

Profile codes are most-significant-agent-first:
``code(a) = sum a_i * V**(n - i)`` for 1-based agent index i.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .tree import DiscreteTree, fig_example_tree, load_tree, path_tree


class MechanismTableError(ValueError):
    """Bad table contents: missing/duplicate profiles or non-vertex outcomes."""


def profile_code(vertex_count: int, profile: Sequence[int]) -> int:
    code = 0
    for a in profile:
        code = code * vertex_count + int(a)
    return code


def profile_from_code(vertex_count: int, n: int, code: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        code, digit = divmod(code, vertex_count)
        out.append(digit)
    return tuple(reversed(out))


def all_profiles(vertex_count: int, n: int) -> Iterable[tuple[int, ...]]:
    """All profiles in mixed-radix code order."""
    return itertools.product(range(vertex_count), repeat=n)


class Mechanism:
    """Base contract: an evaluable map ``V^n -> V`` over one tree."""

    kind = "abstract"

    def __init__(self, tree: DiscreteTree, n: int):
        if n < 1:
            raise ValueError("a mechanism needs at least one agent")
        self.tree = tree
        self.n = n

    def _outcome(self, profile: tuple[int, ...]) -> int:
        raise NotImplementedError

    def evaluate(self, profile: Sequence[int]) -> int:
        """Outcome for the profile; validates arity and vertex ids."""
        if len(profile) != self.n:
            raise ValueError(f"profile has {len(profile)} entries, mechanism expects {self.n}")
        clean = tuple(self.tree.check_vertex(v) for v in profile)
        outcome = self._outcome(clean)
        return self.tree.check_vertex(outcome)

    def as_table(self) -> "TableMechanism":
        outcomes = [self.evaluate(p) for p in all_profiles(self.tree.vertex_count, self.n)]
        return TableMechanism(self.tree, self.n, np.asarray(outcomes, dtype=np.int64))

    def outcome_array(self) -> np.ndarray:
        return self.as_table().outcomes

    def label(self) -> str:
        return self.kind


class TableMechanism(Mechanism):
    """Dense outcome array indexed by mixed-radix profile code."""

    kind = "table"

    def __init__(self, tree: DiscreteTree, n: int, outcomes: np.ndarray):
        super().__init__(tree, n)
        expected = tree.vertex_count ** n
        outcomes = np.asarray(outcomes, dtype=np.int64)
        if outcomes.shape != (expected,):
            raise MechanismTableError(f"table needs {expected} entries, got {outcomes.shape}")
        if outcomes.size and (outcomes.min() < 0 or outcomes.max() >= tree.vertex_count):
            bad = int(np.argmax((outcomes < 0) | (outcomes >= tree.vertex_count)))
            raise MechanismTableError(f"outcome {int(outcomes[bad])} at profile code {bad} is not a vertex")
        self.outcomes = outcomes
        self.outcomes.setflags(write=False)

    def _outcome(self, profile: tuple[int, ...]) -> int:
        return int(self.outcomes[profile_code(self.tree.vertex_count, profile)])

    def as_table(self) -> "TableMechanism":
        return self

    def mechanism_id(self) -> int:
        """The table's rank in the lexicographic enumeration of all tables."""
        value = 0
        for outcome in self.outcomes:
            value = value * self.tree.vertex_count + int(outcome)
        return value

    def label(self) -> str:
        return f"table:{self.mechanism_id()}"


def table_mechanism(
    tree: DiscreteTree,
    n: int,
    entries: Mapping[Sequence[int], int],
    fill: Callable[[tuple[int, ...]], int] | None = None,
) -> TableMechanism:
    """Build a table from a profile->vertex mapping.

    ``entries`` must cover every profile unless ``fill`` supplies outcomes
    for the missing ones.  Duplicate profiles (same code from two keys) and
    non-vertex outcomes are rejected.
    """
    size = tree.vertex_count ** n
    outcomes = np.full(size, -1, dtype=np.int64)
    for key, value in entries.items():
        profile = tuple(tree.check_vertex(v) for v in key)
        if len(profile) != n:
            raise MechanismTableError(f"profile {key!r} has wrong arity")
        code = profile_code(tree.vertex_count, profile)
        if outcomes[code] >= 0:
            raise MechanismTableError(f"duplicate profile {tuple(key)!r}")
        value = int(value)
        if not 0 <= value < tree.vertex_count:
            raise MechanismTableError(f"outcome {value} for profile {tuple(key)!r} is not a vertex")
        outcomes[code] = value
    if (outcomes < 0).any():
        missing = int(np.argmax(outcomes < 0))
        if fill is None:
            raise MechanismTableError(
                f"missing profile {profile_from_code(tree.vertex_count, n, missing)} (code {missing})"
            )
        for code in np.nonzero(outcomes < 0)[0]:
            profile = profile_from_code(tree.vertex_count, n, int(code))
            outcomes[code] = tree.check_vertex(fill(profile))
    return TableMechanism(tree, n, outcomes)


def table_from_id(tree: DiscreteTree, n: int, mechanism_id: int) -> TableMechanism:
    """Inverse of :meth:`TableMechanism.mechanism_id`."""
    size = tree.vertex_count ** n
    digits = np.empty(size, dtype=np.int64)
    for slot in range(size - 1, -1, -1):
        mechanism_id, digit = divmod(mechanism_id, tree.vertex_count)
        digits[slot] = digit
    if mechanism_id:
        raise MechanismTableError("mechanism id out of range for this table size")
    return TableMechanism(tree, n, digits)


class Fig1Mechanism(Mechanism):
    """Two-agent parity/min mechanism on the fixed 5-vertex example tree.

    With y the first agent's report and x the second agent's:
    ``y == 0 -> x mod 2``, ``y == 2 -> min(x, 3)``, otherwise ``min(x, y)``.
    Strategyproof and onto, yet the outcome can jump between branches
    without touching the deviating agent's path.
    """

    kind = "fig1"

    def __init__(self):
        super().__init__(fig_example_tree(), 2)

    def _outcome(self, profile: tuple[int, ...]) -> int:
        y, x = profile
        if y == 0:
            return x % 2
        if y == 2:
            return min(x, 3)
        return min(x, y)


def fig1_mechanism() -> Fig1Mechanism:
    return Fig1Mechanism()


class DictatorMechanism(Mechanism):
    kind = "dictator"

    def __init__(self, tree: DiscreteTree, n: int, agent: int):
        super().__init__(tree, n)
        if not 1 <= agent <= n:
            raise ValueError(f"dictator index {agent} out of range 1..{n}")
        self.agent = agent

    def _outcome(self, profile: tuple[int, ...]) -> int:
        return profile[self.agent - 1]

    def label(self) -> str:
        return f"dictator:{self.agent}"


def dictator_mechanism(tree: DiscreteTree, n: int, agent: int) -> DictatorMechanism:
    return DictatorMechanism(tree, n, agent)


class MedianMechanism(Mechanism):
    """Tree median of the reported peaks plus fixed phantom ballots.

    The total ballot count must be odd, which makes the distance-sum
    minimiser unique on a tree, so no tie-break rule exists to disturb
    strategyproofness.
    """

    kind = "median"

    def __init__(self, tree: DiscreteTree, n: int, phantoms: Sequence[int] = ()):
        super().__init__(tree, n)
        self.phantoms = tuple(tree.check_vertex(v) for v in phantoms)
        if (n + len(self.phantoms)) % 2 == 0:
            raise ValueError("median needs an odd total ballot count (agents + phantoms)")

    def _outcome(self, profile: tuple[int, ...]) -> int:
        ballots = list(profile) + list(self.phantoms)
        sums = self.tree.dist[:, ballots].sum(axis=1)
        best = np.nonzero(sums == sums.min())[0]
        assert len(best) == 1, "odd ballot count must give a unique tree median"
        return int(best[0])

    def label(self) -> str:
        return f"median:{','.join(map(str, self.phantoms))}"


def median_mechanism(tree: DiscreteTree, n: int, phantoms: Sequence[int] = ()) -> MedianMechanism:
    return MedianMechanism(tree, n, phantoms)


def _subset_key(subset: Iterable[int]) -> frozenset[int]:
    return frozenset(int(i) for i in subset)


@dataclass(frozen=True)
class GmvsParams:
    """Threshold family for a generalized median voter scheme on [0..size-1].

    ``thresholds`` maps every subset of agents ``1..n`` to a vertex of the
    interval.  It must be monotone under inclusion, send the empty set to
    the left endpoint and the full set to the right endpoint.
    """

    n: int
    size: int
    thresholds: Mapping[frozenset[int], int]

    def validate(self) -> None:
        agents = frozenset(range(1, self.n + 1))
        subsets = [_subset_key(c) for r in range(self.n + 1) for c in itertools.combinations(sorted(agents), r)]
        for s in subsets:
            if s not in self.thresholds:
                raise ValueError(f"threshold missing for subset {sorted(s)}")
            value = self.thresholds[s]
            if not 0 <= value < self.size:
                raise ValueError(f"threshold {value} for subset {sorted(s)} outside interval")
        if self.thresholds[frozenset()] != 0:
            raise ValueError("threshold of the empty set must be the left endpoint")
        if self.thresholds[agents] != self.size - 1:
            raise ValueError("threshold of the full set must be the right endpoint")
        for s in subsets:
            for r in subsets:
                if s < r and self.thresholds[s] > self.thresholds[r]:
                    raise ValueError(
                        f"thresholds not monotone: {sorted(s)} -> {self.thresholds[s]} "
                        f"> {sorted(r)} -> {self.thresholds[r]}"
                    )


class GmvsMechanism(Mechanism):
    """Generalized median voter scheme on a discrete interval.

    The outcome offset from the left endpoint is
    ``max over subsets S of min({a_i : i in S} + [threshold(S)])``,
    with the empty subset contributing its (zero) threshold.  Subsets
    range over all of them including the full set, which is what makes
    the full-set threshold meaningful; the strict-subset variant is kept
    available for comparison via :meth:`evaluate_both_conventions`.
    """

    kind = "gmvs"

    def __init__(self, params: GmvsParams):
        params.validate()
        super().__init__(path_tree(params.size), params.n)
        self.params = params

    def _offset(self, profile: tuple[int, ...], include_full_set: bool) -> int:
        agents = range(1, self.n + 1)
        best = 0
        for r in range(self.n + 1):
            for combo in itertools.combinations(agents, r):
                subset = _subset_key(combo)
                if not include_full_set and len(subset) == self.n and self.n > 0:
                    continue
                term = min([profile[i - 1] for i in combo] + [self.params.thresholds[subset]])
                best = max(best, term)
        return best

    def _outcome(self, profile: tuple[int, ...]) -> int:
        return self._offset(profile, include_full_set=True)

    def evaluate_both_conventions(self, profile: Sequence[int]) -> dict[str, int]:
        clean = tuple(self.tree.check_vertex(v) for v in profile)
        return {
            "subset_or_equal": self._offset(clean, include_full_set=True),
            "strict_subset": self._offset(clean, include_full_set=False),
        }

    def label(self) -> str:
        return "gmvs"


def gmvs_mechanism(params: GmvsParams) -> GmvsMechanism:
    return GmvsMechanism(params)


class OrderStatisticMechanism:
    """k-th smallest reported location on the integer line (1-based k).

    This one lives on the unbounded line rather than on a tree; profiles
    are tuples of integers of any arity >= k.
    """

    kind = "order-statistic"
    tree = None

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("order statistic index must be >= 1")
        self.k = k

    def evaluate(self, profile: Sequence[int]) -> int:
        if self.k > len(profile):
            raise ValueError(f"order statistic {self.k} needs at least {self.k} agents, got {len(profile)}")
        return sorted(int(v) for v in profile)[self.k - 1]

    def label(self) -> str:
        return f"order-statistic:{self.k}"


def order_statistic_mechanism(k: int) -> OrderStatisticMechanism:
    return OrderStatisticMechanism(k)


def evaluate(mechanism, profile: Sequence[int]) -> int:
    """Module-level convenience mirroring ``mechanism.evaluate``."""
    return mechanism.evaluate(profile)


# -- table file format -------------------------------------------------------
#
#   tree: <path>
#   agents: <n>
#   a_1 ... a_n -> x        (one line per profile, sorted by profile code)

def save_table_file(mechanism: Mechanism, path, tree_ref: str) -> None:
    table = mechanism.as_table()
    lines = [f"tree: {tree_ref}", f"agents: {table.n}"]
    for code, outcome in enumerate(table.outcomes):
        profile = profile_from_code(table.tree.vertex_count, table.n, code)
        lines.append(f"{' '.join(map(str, profile))} -> {int(outcome)}")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def load_table_file(path, tree: DiscreteTree | None = None) -> TableMechanism:
    """Read a mechanism table file; unknown header keys are rejected.

    When no tree is passed, the ``tree:`` header is resolved relative to
    the table file's directory.
    """
    path = Path(path)
    headers: dict[str, str] = {}
    entries: dict[tuple[int, ...], int] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            body = raw.strip()
            if not body or body.startswith("#"):
                continue
            if "->" in body:
                left, _, right = body.partition("->")
                try:
                    profile = tuple(int(t) for t in left.split())
                    outcome = int(right.strip())
                except ValueError:
                    raise MechanismTableError(f"{path}:{line_no}: bad table entry {body!r}") from None
                if profile in entries:
                    raise MechanismTableError(f"{path}:{line_no}: duplicate profile {profile}")
                entries[profile] = outcome
            else:
                key, sep, value = body.partition(":")
                if not sep:
                    raise MechanismTableError(f"{path}:{line_no}: expected 'key: value' or table entry")
                key = key.strip()
                if key not in ("tree", "agents"):
                    raise MechanismTableError(f"{path}:{line_no}: unknown key {key!r}")
                if key in headers:
                    raise MechanismTableError(f"{path}:{line_no}: repeated key {key!r}")
                headers[key] = value.strip()

    if "agents" not in headers:
        raise MechanismTableError(f"{path}: missing 'agents:' header")
    n = int(headers["agents"])
    if tree is None:
        if "tree" not in headers:
            raise MechanismTableError(f"{path}: missing 'tree:' header and no tree supplied")
        ref = Path(headers["tree"])
        tree = load_tree(ref if ref.is_absolute() else path.parent / ref)
    return table_mechanism(tree, n, entries)
