"""Hot sweep kernels: numba-jitted loops with a pure-numpy fallback.

The search engine classifies millions of mechanism tables against the
pairwise axioms.  Per deviation the predicates collapse to O(1) integer
comparisons once each vertex's *anchor* (the path vertex whose side tree
contains it) and *depth* (distance to the path) are tabulated, so a full
sweep is one tight loop over (mechanism, deviation) pairs.

Two interchangeable backends implement the sweeps:

* ``numba`` - ``@njit`` kernels looping per mechanism (default when
  numba imports cleanly);
* ``numpy`` - the same arithmetic vectorised across a whole id range.

Select one with the ``SPTREE_BACKEND`` environment variable (``numba``,
``numpy`` or ``auto``) or :func:`set_backend`.  Both backends consume
identical precomputed tables and must produce identical flag bytes;
``benchmarks/bench_kernels.py`` compares their throughput.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .mechanisms import all_profiles, profile_code
from .tree import DiscreteTree

try:  # pragma: no cover - exercised implicitly by backend selection
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        return wrap(args[0]) if args and callable(args[0]) else wrap


# per-deviation predicate bits stored in the lookup tables
BIT_SP = 1
BIT_TMON = 2
BIT_DB = 4
BIT_ADR = 8
BIT_TSI1 = 16
BIT_TC = 32
BIT_TMON_DB = BIT_TMON | BIT_DB

# per-mechanism classification flags
FLAG_LEMMA = 1     # sp <-> (tmon and db) on every pair
FLAG_SP = 2
FLAG_TMON = 4
FLAG_ATC = 8       # adr and 1-tsi on every pair
FLAG_TC = 16
FLAG_ONTO = 32
FLAG_UNANIMOUS = 64
FLAG_TPAR = 128

_backend_override: str | None = None


def default_backend() -> str:
    env = os.environ.get("SPTREE_BACKEND", "auto").strip().lower()
    if env in ("numba", "numpy"):
        return env
    if env not in ("", "auto"):
        raise ValueError(f"SPTREE_BACKEND must be auto, numba or numpy, not {env!r}")
    return "numba" if HAVE_NUMBA else "numpy"


def active_backend() -> str:
    backend = _backend_override or default_backend()
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


def set_backend(name: str | None) -> None:
    """Force a backend for this process; None restores env-based selection."""
    global _backend_override
    if name is not None and name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    _backend_override = name


@dataclass(frozen=True)
class PairTables:
    """Precomputed deviation tables for one (tree, agent count) domain.

    ``luts[u * V + w, x, y]`` holds the predicate bits of the deviation
    u -> w taking the outcome from x to y.  ``devs`` lists every
    nontrivial ordered deviation as (profile code, alternate code,
    geometry id) rows in lexicographic scan order.
    """

    tree: DiscreteTree
    n: int
    vertex_count: int
    profile_count: int
    devs: np.ndarray          # (ndev, 3) int64
    luts: np.ndarray          # (V*V, V, V) uint8
    tpar_ok: np.ndarray       # (P, V) uint8
    diag_codes: np.ndarray    # (V,) int64

    @property
    def table_count(self) -> int:
        return self.vertex_count ** self.profile_count


def build_pair_tables(tree: DiscreteTree, n: int) -> PairTables:
    V = tree.vertex_count
    P = V ** n
    if P > 4096:
        raise ValueError(f"table domain too large for sweeps: {V}^{n} = {P} profiles")

    ids = np.arange(V)
    luts = np.zeros((V * V, V, V), dtype=np.uint8)
    for u in range(V):
        for w in range(V):
            if u == w:
                continue
            geom = tree.deviation_geometry(u, w)
            ap = geom.anchor_pos.astype(np.int64)
            dp = geom.depth.astype(np.int64)
            length = geom.length
            apx, apy = ap[:, None], ap[None, :]
            dpx, dpy = dp[:, None], dp[None, :]
            same_vertex = ids[:, None] == ids[None, :]
            sp = ((apx + dpx) <= (apy + dpy)) & (((length - apy) + dpy) <= ((length - apx) + dpx))
            tmon = apx <= apy
            db = np.abs(apx - apy) >= np.abs(dpx - dpy)
            adr = same_vertex | (apx != apy) | ((dpx == dpy) & (tree.dist == 2))
            tsi1 = (dpx <= 1) | (apx == apy)
            tc = same_vertex | ((dpx == 0) & (dpy == 0))
            luts[u * V + w] = (
                sp * BIT_SP
                | tmon * BIT_TMON
                | db * BIT_DB
                | adr * BIT_ADR
                | tsi1 * BIT_TSI1
                | tc * BIT_TC
            ).astype(np.uint8)

    powers = [V ** (n - 1 - i) for i in range(n)]
    devs = []
    for code, profile in enumerate(all_profiles(V, n)):
        for slot in range(n):
            a_i = profile[slot]
            for report in range(V):
                if report != a_i:
                    devs.append((code, code + (report - a_i) * powers[slot], a_i * V + report))
    devs_arr = np.asarray(devs, dtype=np.int64).reshape(-1, 3)

    tpar_ok = np.zeros((P, V), dtype=np.uint8)
    for code, profile in enumerate(all_profiles(V, n)):
        inner = sorted(tree.interior(profile))
        if inner:
            ok = tree.dist[:, inner].min(axis=1) <= 1
        else:
            ok = np.zeros(V, dtype=bool)
        ok = ok.copy()
        ok[list(profile)] = True
        tpar_ok[code] = ok

    diag = np.asarray([profile_code(V, (v,) * n) for v in range(V)], dtype=np.int64)
    return PairTables(tree, n, V, P, devs_arr, luts, tpar_ok, diag)


# -- numpy backend -----------------------------------------------------------

def _decode_ids_numpy(ids: np.ndarray, V: int, P: int) -> np.ndarray:
    rem = ids.astype(np.int64, copy=True)
    tables = np.empty((len(ids), P), dtype=np.int64)
    for slot in range(P - 1, -1, -1):
        rem, tables[:, slot] = np.divmod(rem, V)
    return tables


def _classify_tables_numpy(pt: PairTables, tables: np.ndarray) -> np.ndarray:
    m = tables.shape[0]
    lemma = np.ones(m, dtype=bool)
    sp = np.ones(m, dtype=bool)
    tmon = np.ones(m, dtype=bool)
    atc = np.ones(m, dtype=bool)
    tc = np.ones(m, dtype=bool)
    for code, alt, gid in pt.devs:
        bits = pt.luts[gid, tables[:, code], tables[:, alt]]
        b_sp = (bits & BIT_SP) != 0
        b_tmon = (bits & BIT_TMON) != 0
        b_db = (bits & BIT_DB) != 0
        lemma &= b_sp == (b_tmon & b_db)
        sp &= b_sp
        tmon &= b_tmon
        atc &= ((bits & BIT_ADR) != 0) & ((bits & BIT_TSI1) != 0)
        tc &= (bits & BIT_TC) != 0

    cover = np.zeros((m, pt.vertex_count), dtype=bool)
    cover[np.arange(m)[:, None], tables] = True
    onto = cover.all(axis=1)
    unanimous = (tables[:, pt.diag_codes] == np.arange(pt.vertex_count)[None, :]).all(axis=1)

    tpar = np.ones(m, dtype=bool)
    for code in range(pt.profile_count):
        tpar &= pt.tpar_ok[code, tables[:, code]] != 0

    return (
        lemma * FLAG_LEMMA
        | sp * FLAG_SP
        | tmon * FLAG_TMON
        | atc * FLAG_ATC
        | tc * FLAG_TC
        | onto * FLAG_ONTO
        | unanimous * FLAG_UNANIMOUS
        | tpar * FLAG_TPAR
    ).astype(np.uint8)


# -- numba backend -----------------------------------------------------------

@njit(cache=True)
def _classify_tables_numba(tables, V, devs, luts, tpar_ok, diag_codes):  # pragma: no cover - jitted
    m, P = tables.shape
    out = np.zeros(m, dtype=np.uint8)
    ndev = devs.shape[0]
    for row in range(m):
        lemma = True
        sp = True
        tmon = True
        atc = True
        tc = True
        for k in range(ndev):
            bits = luts[devs[k, 2], tables[row, devs[k, 0]], tables[row, devs[k, 1]]]
            b_sp = (bits & 1) != 0
            b_tmon = (bits & 2) != 0
            b_db = (bits & 4) != 0
            if b_sp != (b_tmon and b_db):
                lemma = False
            sp = sp and b_sp
            tmon = tmon and b_tmon
            atc = atc and ((bits & 8) != 0) and ((bits & 16) != 0)
            tc = tc and ((bits & 32) != 0)

        covered = 0
        seen = np.zeros(V, dtype=np.uint8)
        tpar = True
        for code in range(P):
            x = tables[row, code]
            if seen[x] == 0:
                seen[x] = 1
                covered += 1
            if tpar_ok[code, x] == 0:
                tpar = False
        onto = covered == V
        unanimous = True
        for v in range(V):
            if tables[row, diag_codes[v]] != v:
                unanimous = False

        flags = 0
        if lemma:
            flags |= 1
        if sp:
            flags |= 2
        if tmon:
            flags |= 4
        if atc:
            flags |= 8
        if tc:
            flags |= 16
        if onto:
            flags |= 32
        if unanimous:
            flags |= 64
        if tpar:
            flags |= 128
        out[row] = flags
    return out


@njit(cache=True)
def _decode_range_numba(lo, hi, V, P):  # pragma: no cover - jitted
    m = hi - lo
    tables = np.empty((m, P), dtype=np.int64)
    for row in range(m):
        rem = lo + row
        for slot in range(P - 1, -1, -1):
            tables[row, slot] = rem % V
            rem //= V
    return tables


# -- public sweep API --------------------------------------------------------

_RANGE_CHUNK = 1 << 15


def classify_tables(pt: PairTables, tables: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Flag byte per table row; rows are dense outcome arrays."""
    tables = np.ascontiguousarray(np.asarray(tables, dtype=np.int64))
    if tables.ndim != 2 or tables.shape[1] != pt.profile_count:
        raise ValueError(f"tables must have shape (m, {pt.profile_count})")
    backend = backend or active_backend()
    if backend == "numba":
        return _classify_tables_numba(tables, pt.vertex_count, pt.devs, pt.luts, pt.tpar_ok, pt.diag_codes)
    return _classify_tables_numpy(pt, tables)


def classify_range(pt: PairTables, lo: int, hi: int, backend: str | None = None) -> np.ndarray:
    """Flag byte per mechanism id in [lo, hi); ids must fit in int64."""
    if not 0 <= lo <= hi <= pt.table_count:
        raise ValueError(f"bad id range [{lo}, {hi}) for {pt.table_count} tables")
    if hi > 0 and hi - 1 > np.iinfo(np.int64).max:
        raise ValueError("id range does not fit in int64; use sampled mode")
    backend = backend or active_backend()
    out = np.empty(hi - lo, dtype=np.uint8)
    for start in range(lo, hi, _RANGE_CHUNK):
        stop = min(start + _RANGE_CHUNK, hi)
        if backend == "numba":
            tables = _decode_range_numba(start, stop, pt.vertex_count, pt.profile_count)
        else:
            tables = _decode_ids_numpy(np.arange(start, stop, dtype=np.int64), pt.vertex_count, pt.profile_count)
        out[start - lo:stop - lo] = classify_tables(pt, tables, backend)
    return out


# -- constraint-pruned synthesis ---------------------------------------------

def _synthesis_csr(pt: PairTables) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For each slot, the earlier slots reachable by one deviation, as CSR."""
    per_slot: list[list[tuple[int, int]]] = [[] for _ in range(pt.profile_count)]
    for code, alt, gid in pt.devs:
        if alt < code:
            per_slot[code].append((int(alt), int(gid)))
    offsets = np.zeros(pt.profile_count + 1, dtype=np.int64)
    prev_code = []
    prev_gid = []
    for slot, items in enumerate(per_slot):
        for alt, gid in items:
            prev_code.append(alt)
            prev_gid.append(gid)
        offsets[slot + 1] = len(prev_code)
    return (
        np.asarray(prev_code, dtype=np.int64),
        np.asarray(prev_gid, dtype=np.int64),
        offsets,
    )


def _synthesize_python(pt, prev_code, prev_gid, offsets, max_expansions, max_emit):
    V, P = pt.vertex_count, pt.profile_count
    luts = pt.luts
    digits = [0] * P
    counts = [0] * V
    covered = 0
    emitted: list[int] = []
    expansions = 0
    complete = True

    cand = [0] * P
    slot = 0
    while slot >= 0:
        if cand[slot] >= V:
            cand[slot] = 0
            slot -= 1
            if slot >= 0:
                v = digits[slot]
                counts[v] -= 1
                if counts[v] == 0:
                    covered -= 1
            continue
        v = cand[slot]
        cand[slot] += 1
        expansions += 1
        if max_expansions is not None and expansions > max_expansions:
            complete = False
            break
        ok = True
        for k in range(offsets[slot], offsets[slot + 1]):
            if luts[prev_gid[k], v, digits[prev_code[k]]] & BIT_TMON_DB != BIT_TMON_DB:
                ok = False
                break
        if not ok:
            continue
        new_covered = covered + (1 if counts[v] == 0 else 0)
        if new_covered + (P - slot - 1) < V:
            continue  # cannot reach onto any more
        if slot == P - 1:
            if new_covered == V:
                if max_emit is not None and len(emitted) >= max_emit:
                    complete = False
                    break
                digits[slot] = v
                code = 0
                for d in digits:
                    code = code * V + d
                emitted.append(code)
            continue
        digits[slot] = v
        counts[v] += 1
        covered = new_covered
        slot += 1
    return emitted, expansions, complete


@njit(cache=True)
def _synthesize_numba(V, P, prev_code, prev_gid, offsets, luts, max_expansions, max_emit):  # pragma: no cover - jitted
    digits = np.zeros(P, dtype=np.int64)
    counts = np.zeros(V, dtype=np.int64)
    cand = np.zeros(P, dtype=np.int64)
    out = np.empty(max_emit, dtype=np.int64)
    n_out = 0
    covered = 0
    expansions = 0
    complete = True

    slot = 0
    while slot >= 0:
        if cand[slot] >= V:
            cand[slot] = 0
            slot -= 1
            if slot >= 0:
                v = digits[slot]
                counts[v] -= 1
                if counts[v] == 0:
                    covered -= 1
            continue
        v = cand[slot]
        cand[slot] += 1
        expansions += 1
        if max_expansions >= 0 and expansions > max_expansions:
            complete = False
            break
        ok = True
        for k in range(offsets[slot], offsets[slot + 1]):
            if luts[prev_gid[k], v, digits[prev_code[k]]] & 6 != 6:
                ok = False
                break
        if not ok:
            continue
        if counts[v] == 0:
            new_covered = covered + 1
        else:
            new_covered = covered
        if new_covered + (P - slot - 1) < V:
            continue
        if slot == P - 1:
            if new_covered == V:
                if n_out >= max_emit:
                    complete = False
                    break
                digits[slot] = v
                code = 0
                for s in range(P):
                    code = code * V + digits[s]
                out[n_out] = code
                n_out += 1
            continue
        digits[slot] = v
        counts[v] += 1
        covered = new_covered
        slot += 1
    return out[:n_out], expansions, complete


def synthesize_ids(
    pt: PairTables,
    max_expansions: int | None = None,
    max_emit: int | None = None,
    backend: str | None = None,
) -> tuple[list[int], int, bool]:
    """Depth-first synthesis of all onto tables whose every determined pair
    passes the tree-monotone and depth-balance predicates.

    Returns (emitted table ids in lexicographic order, expansions, complete).
    """
    prev_code, prev_gid, offsets = _synthesis_csr(pt)
    backend = backend or active_backend()
    if backend == "numba" and pt.table_count <= np.iinfo(np.int64).max:
        ids, expansions, complete = _synthesize_numba(
            pt.vertex_count,
            pt.profile_count,
            prev_code,
            prev_gid,
            offsets,
            pt.luts,
            -1 if max_expansions is None else int(max_expansions),
            (1 << 20) if max_emit is None else int(max_emit),
        )
        return [int(i) for i in ids], int(expansions), bool(complete)
    emitted, expansions, complete = _synthesize_python(
        pt, prev_code, prev_gid, offsets, max_expansions, max_emit
    )
    return emitted, expansions, complete
