"""Mechanism-space search: enumeration, claim verification, synthesis, mining.

Work over a mechanism space is always partitioned by id range (exhaustive
mode) or by sample position (sampled mode).  Partitions merge by summing
tallies and keeping the scan-order-first witness, so reports are
byte-identical no matter how many workers ran, and a run split at any
cursor and concatenated equals the unsplit run.

Mechanism ids are the lexicographic rank of the dense outcome table;
space sizes (``V ** V**n``) overflow 64 bits quickly, so all id
arithmetic outside the kernels uses Python integers.
"""

from __future__ import annotations

import multiprocessing
import random
import time
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .axioms import DeviationPair, db_pair, sp_pair, tmon_pair, tpar_profile, check_property
from .kernels import (
    FLAG_ATC,
    FLAG_LEMMA,
    FLAG_ONTO,
    FLAG_SP,
    FLAG_TMON,
    FLAG_TPAR,
    FLAG_UNANIMOUS,
    build_pair_tables,
)
from .mechanisms import TableMechanism, all_profiles, table_from_id
from .reports import CONFIRMED, INCONCLUSIVE, REFUTED, EquivalenceReport
from .tree import DiscreteTree

_INT64_MAX = np.iinfo(np.int64).max


def mechanism_count(tree: DiscreteTree, n: int) -> int:
    """Number of distinct tables: V ** (V ** n), as an exact big integer."""
    return tree.vertex_count ** (tree.vertex_count ** n)


@dataclass(frozen=True)
class SearchSpace:
    tree: DiscreteTree
    n: int

    @property
    def profile_count(self) -> int:
        return self.tree.vertex_count ** self.n

    @property
    def total_mechanisms(self) -> int:
        return mechanism_count(self.tree, self.n)


# -- cursors ------------------------------------------------------------------

_CURSOR_MAGIC = "sptree-cursor/1"


def make_cursor(tree: DiscreteTree, n: int, next_id: int) -> bytes:
    return f"{_CURSOR_MAGIC}\n{tree.canonical_edges()}\n{n}\n{next_id}\n".encode("ascii")


def read_cursor(blob: bytes, tree: DiscreteTree, n: int) -> int:
    lines = blob.decode("ascii").splitlines()
    if len(lines) != 4 or lines[0] != _CURSOR_MAGIC:
        raise ValueError("unrecognised cursor blob")
    if lines[1] != tree.canonical_edges() or int(lines[2]) != n:
        raise ValueError("cursor belongs to a different search space")
    return int(lines[3])


# -- enumeration ----------------------------------------------------------------

class EnumerationRun:
    """Resumable lexicographic stream of mechanism tables.

    The budget bounds the number of table ids *scanned* (filters skip
    tables without yielding them).  When the budget runs out before the
    space is exhausted the run stops cleanly and exposes a cursor.
    """

    def __init__(
        self,
        tree: DiscreteTree,
        n: int,
        *,
        budget: int,
        filter: str | None = None,
        cursor: bytes | None = None,
    ):
        if budget is None or budget < 0:
            raise ValueError("enumeration requires a nonnegative budget")
        if filter not in (None, "onto", "unanimous"):
            raise ValueError(f"unknown filter {filter!r}")
        self.tree = tree
        self.n = n
        self.budget = budget
        self.filter = filter
        self.start_id = read_cursor(cursor, tree, n) if cursor is not None else 0
        self.total = mechanism_count(tree, n)
        self.cursor: bytes | None = None
        self.stopped_early = False
        self.scanned = 0
        self.produced = 0
        self._diag = [sum(v * tree.vertex_count ** k for k in range(n)) for v in tree.vertices]

    def _passes(self, table: TableMechanism) -> bool:
        if self.filter == "onto":
            return len(np.unique(table.outcomes)) == self.tree.vertex_count
        if self.filter == "unanimous":
            return all(int(table.outcomes[self._diag[v]]) == v for v in self.tree.vertices)
        return True

    def __iter__(self) -> Iterator[TableMechanism]:
        mech_id = self.start_id
        while mech_id < self.total:
            if self.scanned >= self.budget:
                self.stopped_early = True
                self.cursor = make_cursor(self.tree, self.n, mech_id)
                return
            self.scanned += 1
            table = table_from_id(self.tree, self.n, mech_id)
            if self._passes(table):
                self.produced += 1
                yield table
            mech_id += 1


def enumerate_mechanisms(
    tree: DiscreteTree,
    n: int,
    *,
    budget: int,
    filter: str | None = None,
    cursor: bytes | None = None,
) -> EnumerationRun:
    return EnumerationRun(tree, n, budget=budget, filter=filter, cursor=cursor)


# -- flag sweeps (worker plumbing) ---------------------------------------------

def _sweep_range_worker(payload):
    edges, labels, n, lo, hi, backend = payload
    tree = DiscreteTree(edges, labels=labels)
    pt = build_pair_tables(tree, n)
    return kernels.classify_range(pt, lo, hi, backend)


def _sweep_ids_worker(payload):
    edges, labels, n, ids, backend = payload
    tree = DiscreteTree(edges, labels=labels)
    pt = build_pair_tables(tree, n)
    tables = _decode_big_ids(tree.vertex_count, tree.vertex_count ** n, ids)
    return kernels.classify_tables(pt, tables, backend)


def _decode_big_ids(vertex_count: int, profile_count: int, ids: Sequence[int]) -> np.ndarray:
    tables = np.empty((len(ids), profile_count), dtype=np.int64)
    for row, mech_id in enumerate(ids):
        for slot in range(profile_count - 1, -1, -1):
            mech_id, digit = divmod(mech_id, vertex_count)
            tables[row, slot] = digit
    return tables


def _chunks(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    span = hi - lo
    parts = max(1, min(parts, span)) if span else 1
    bounds = [lo + (span * k) // parts for k in range(parts + 1)]
    return [(bounds[k], bounds[k + 1]) for k in range(parts)]


def _run_partitions(worker, payloads, workers: int) -> list[np.ndarray]:
    if workers <= 1 or len(payloads) <= 1:
        return [worker(p) for p in payloads]
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=min(workers, len(payloads))) as pool:
            return pool.map(worker, payloads)
    except (OSError, ValueError):  # no fork available: degrade to serial chunks
        return [worker(p) for p in payloads]


def sweep_flags_range(
    tree: DiscreteTree, n: int, lo: int, hi: int, *, workers: int = 1, backend: str | None = None
) -> np.ndarray:
    """Classification flags for mechanism ids [lo, hi), chunked across workers."""
    if hi > 0 and hi - 1 > _INT64_MAX:
        raise ValueError("id range exceeds int64; use sampled mode")
    payloads = [
        (tree.edge_pairs(), tree.labels, n, a, b, backend)
        for a, b in _chunks(lo, hi, workers)
    ]
    parts = _run_partitions(_sweep_range_worker, payloads, workers)
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.uint8)


def sweep_flags_ids(
    tree: DiscreteTree, n: int, ids: Sequence[int], *, workers: int = 1, backend: str | None = None
) -> np.ndarray:
    payloads = [
        (tree.edge_pairs(), tree.labels, n, list(ids[a:b]), backend)
        for a, b in _chunks(0, len(ids), workers)
    ]
    parts = _run_partitions(_sweep_ids_worker, payloads, workers)
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.uint8)


# -- claim verification ----------------------------------------------------------

def _draw_sample_ids(total: int, seed: int, samples: int) -> list[int]:
    rng = random.Random(seed)
    return [rng.randrange(total) for _ in range(samples)]


def _gather_flags(tree, n, mode, budget, seed, samples, workers, backend):
    """Returns (flags, ids, examined, covered_whole_space)."""
    total = mechanism_count(tree, n)
    if mode == "exhaustive":
        if budget is None:
            raise ValueError("exhaustive mode requires a budget (number of tables to scan)")
        limit = min(total, budget)
        flags = sweep_flags_range(tree, n, 0, limit, workers=workers, backend=backend)
        return flags, range(limit), limit, limit == total
    if mode == "sampled":
        if seed is None or samples is None:
            raise ValueError("sampled mode requires seed and sample count")
        ids = _draw_sample_ids(total, seed, samples)
        flags = sweep_flags_ids(tree, n, ids, workers=workers, backend=backend)
        return flags, ids, len(ids), False
    raise ValueError(f"unknown mode {mode!r}")


def _scan_deviations(mechanism):
    V = mechanism.tree.vertex_count
    for profile in all_profiles(V, mechanism.n):
        for agent in range(1, mechanism.n + 1):
            for report in range(V):
                if report != profile[agent - 1]:
                    yield profile, agent, report


def _first_lemma_discrepancy(tree: DiscreteTree, n: int, mech_id: int) -> dict:
    mech = table_from_id(tree, n, mech_id)
    for profile, agent, report in _scan_deviations(mech):
        pair = DeviationPair.build(mech, profile, agent, report)
        s, t, d = sp_pair(pair), tmon_pair(pair), db_pair(pair)
        if s != (t and d):
            return {
                "mech": mech_id,
                "profile": profile,
                "agent": agent,
                "report": report,
                "sp": int(s),
                "tmon": int(t),
                "db": int(d),
            }
    raise AssertionError("kernel flagged a lemma discrepancy the scalar replay cannot find")


def _first_tpar_violation(tree: DiscreteTree, n: int, mech_id: int) -> dict:
    mech = table_from_id(tree, n, mech_id)
    for profile in all_profiles(tree.vertex_count, n):
        if not tpar_profile(tree, mech, profile):
            return {"mech": mech_id, "profile": profile}
    raise AssertionError("kernel flagged a tpar violation the scalar replay cannot find")


def verify_pairwise_lemma(
    tree: DiscreteTree,
    n: int,
    *,
    mode: str = "exhaustive",
    budget: int | None = None,
    seed: int | None = None,
    samples: int | None = None,
    workers: int = 1,
    backend: str | None = None,
) -> EquivalenceReport:
    """Check sp <-> (tmon and db) on every deviation pair of every table."""
    started = time.perf_counter()
    flags, ids, examined, covered = _gather_flags(tree, n, mode, budget, seed, samples, workers, backend)
    bad = np.nonzero((flags & FLAG_LEMMA) == 0)[0]
    witness = None
    if len(bad):
        witness = _first_lemma_discrepancy(tree, n, int(ids[int(bad[0])]))
        verdict = REFUTED
    else:
        verdict = CONFIRMED if (covered or mode == "sampled") else INCONCLUSIVE
    return EquivalenceReport(
        claim="pairwise-lemma",
        mode=mode,
        seed=seed,
        examined=examined,
        verdict=verdict,
        tallies={"lemma_ok": int(examined - len(bad))},
        witness=witness,
        params={"tree": tree.canonical_edges(), "agents": n},
        elapsed=time.perf_counter() - started,
    )


def _theorem_report(tree, n, mode, seed, examined, covered, flags, ids, started) -> EquivalenceReport:
    onto = (flags & FLAG_ONTO) != 0
    sp = (flags & FLAG_SP) != 0
    tmon = (flags & FLAG_TMON) != 0
    atc = (flags & FLAG_ATC) != 0
    rhs = tmon & atc
    mismatch = np.nonzero(onto & (sp != rhs))[0]
    witness = None
    if len(mismatch):
        pos = int(mismatch[0])
        witness = {
            "mech": int(ids[pos]),
            "sp": int(sp[pos]),
            "tmon": int(tmon[pos]),
            "atc": int(atc[pos]),
        }
        verdict = REFUTED
    else:
        verdict = CONFIRMED if (covered or mode in ("sampled", "synthesized")) else INCONCLUSIVE
    return EquivalenceReport(
        claim="main-theorem",
        mode=mode,
        seed=seed,
        examined=examined,
        verdict=verdict,
        tallies={
            "onto": int(onto.sum()),
            "onto_sp": int((onto & sp).sum()),
            "onto_tmon_atc": int((onto & rhs).sum()),
        },
        witness=witness,
        params={"tree": tree.canonical_edges(), "agents": n},
        elapsed=time.perf_counter() - started,
    )


def verify_main_theorem(
    tree: DiscreteTree,
    n: int,
    *,
    mode: str = "exhaustive",
    budget: int | None = None,
    seed: int | None = None,
    samples: int | None = None,
    workers: int = 1,
    backend: str | None = None,
    synthesis_expansions: int | None = None,
) -> EquivalenceReport:
    """Among onto tables: strategyproof <-> (tree-monotone and almost trajectory contained)."""
    started = time.perf_counter()
    if mode == "synthesized":
        tables, _stats = synthesize_sp_onto(
            tree, n, max_expansions=synthesis_expansions, backend=backend
        )
        ids = [t.mechanism_id() for t in tables]
        flags = sweep_flags_ids(tree, n, ids, workers=workers, backend=backend)
        return _theorem_report(tree, n, mode, seed, len(ids), False, flags, ids, started)
    flags, ids, examined, covered = _gather_flags(tree, n, mode, budget, seed, samples, workers, backend)
    return _theorem_report(tree, n, mode, seed, examined, covered, flags, ids, started)


def verify_tpar_necessity(
    tree: DiscreteTree,
    n: int,
    *,
    mode: str = "exhaustive",
    budget: int | None = None,
    seed: int | None = None,
    samples: int | None = None,
    workers: int = 1,
    backend: str | None = None,
    synthesis_expansions: int | None = None,
) -> EquivalenceReport:
    """Every onto, strategyproof table places outcomes at tree-Pareto locations."""
    started = time.perf_counter()
    if mode == "synthesized":
        tables, _stats = synthesize_sp_onto(
            tree, n, max_expansions=synthesis_expansions, backend=backend
        )
        ids = [t.mechanism_id() for t in tables]
        flags = sweep_flags_ids(tree, n, ids, workers=workers, backend=backend)
        examined, covered = len(ids), False
    else:
        flags, ids, examined, covered = _gather_flags(tree, n, mode, budget, seed, samples, workers, backend)
    eligible = ((flags & FLAG_ONTO) != 0) & ((flags & FLAG_SP) != 0)
    bad = np.nonzero(eligible & ((flags & FLAG_TPAR) == 0))[0]
    witness = None
    if len(bad):
        witness = _first_tpar_violation(tree, n, int(ids[int(bad[0])]))
        verdict = REFUTED
    else:
        verdict = CONFIRMED if (covered or mode in ("sampled", "synthesized")) else INCONCLUSIVE
    return EquivalenceReport(
        claim="tpar-necessity",
        mode=mode,
        seed=seed,
        examined=examined,
        verdict=verdict,
        tallies={
            "onto_sp": int(eligible.sum()),
            "tpar_ok": int(eligible.sum() - len(bad)),
        },
        witness=witness,
        params={"tree": tree.canonical_edges(), "agents": n},
        elapsed=time.perf_counter() - started,
    )


# -- synthesis ---------------------------------------------------------------

@dataclass
class SynthesisStats:
    expansions: int
    emitted: int
    complete: bool
    elapsed: float


def synthesize_sp_onto(
    tree: DiscreteTree,
    n: int,
    *,
    max_expansions: int | None = None,
    max_emit: int | None = None,
    backend: str | None = None,
) -> tuple[list[TableMechanism], SynthesisStats]:
    """Backtracking synthesis of every onto table whose determined pairs all
    pass tree-monotonicity and depth-balance.

    Those two predicates are the only pruning rules: by the pairwise
    equivalence they capture strategyproofness exactly, and unlike the
    sibling/step properties they are sound on partial tables because they
    carry no onto assumption.  On spaces small enough to enumerate, the
    emitted set must equal the brute-force sp-and-onto set.
    """
    started = time.perf_counter()
    pt = build_pair_tables(tree, n)
    ids, expansions, complete = kernels.synthesize_ids(
        pt, max_expansions=max_expansions, max_emit=max_emit, backend=backend
    )
    tables = [table_from_id(tree, n, mech_id) for mech_id in ids]
    stats = SynthesisStats(
        expansions=expansions,
        emitted=len(tables),
        complete=complete,
        elapsed=time.perf_counter() - started,
    )
    return tables, stats


# -- counterexample mining --------------------------------------------------------

@dataclass
class MineResult:
    witness: object | None
    searched_all: bool
    tries: int

    @property
    def marker(self) -> str:
        if self.witness is not None:
            return "witness-found"
        return "none-found-full-scan" if self.searched_all else "none-found-within-budget"


def mine_violation(
    mechanism,
    prop: str,
    strategy: str = "scan",
    *,
    seed: int | None = None,
    tries: int | None = None,
) -> MineResult:
    """Hunt for a witness violating the property.

    ``scan`` walks the full lexicographic order and can conclude absence;
    ``random`` draws seeded (profile, agent, report) triples and can only
    ever report a witness or exhaustion of its budget.
    """
    if strategy == "scan":
        report = check_property(mechanism, prop)
        return MineResult(report.witness, True, report.pairs_checked or report.profiles_checked)
    if strategy != "random":
        raise ValueError(f"unknown strategy {strategy!r}")
    if seed is None or tries is None:
        raise ValueError("random mining requires seed and tries")

    from .axioms import _PAIRWISE, tsi_pair  # local import to keep module load light

    tree = mechanism.tree
    V = tree.vertex_count
    rng = random.Random(seed)
    if prop == "tpar":
        for attempt in range(tries):
            profile = tuple(rng.randrange(V) for _ in range(mechanism.n))
            if not tpar_profile(tree, mechanism, profile):
                return MineResult(profile, False, attempt + 1)
        return MineResult(None, False, tries)
    if prop.startswith("tsi"):
        bound = int(prop.partition(":")[2])
        predicate = lambda p: tsi_pair(p, bound)  # noqa: E731
    elif prop in _PAIRWISE:
        predicate = _PAIRWISE[prop]
    else:
        raise ValueError(f"random mining does not support property {prop!r}")
    for attempt in range(tries):
        profile = tuple(rng.randrange(V) for _ in range(mechanism.n))
        agent = rng.randrange(1, mechanism.n + 1)
        report = rng.randrange(V)
        pair = DeviationPair.build(mechanism, profile, agent, report)
        if not predicate(pair):
            return MineResult(pair, False, attempt + 1)
    return MineResult(None, False, tries)
