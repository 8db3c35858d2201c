"""Finite discrete trees: all-pairs distances, path queries, side trees.

A :class:`DiscreteTree` is an immutable, unweighted, connected, acyclic
graph on vertices ``0..V-1``.  All distances are hop counts along the
unique path between two vertices.  Distance and next-hop tables are
precomputed at construction (one BFS per vertex), so every query after
that is a table lookup or a short walk; trees up to a few thousand
vertices stay cheap.

Everything here is a pure read after construction, so a tree can be
shared freely across worker processes or threads.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class TreeParseError(ValueError):
    """Malformed tree description; carries the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class DeviationGeometry:
    """Precomputed geometry of one agent move ``u -> w``.

    ``path``       vertices of [u, w] in order, ``path[0] == u``.
    ``anchor_pos`` for each vertex v, the index into ``path`` of the path
                   vertex whose side tree contains v (its *anchor*).
    ``depth``      for each vertex v, the distance from v to [u, w].
    """

    path: np.ndarray
    anchor_pos: np.ndarray
    depth: np.ndarray

    @property
    def length(self) -> int:
        return len(self.path) - 1


class DiscreteTree:
    """Unweighted tree on dense vertex ids with precomputed path tables."""

    def __init__(self, edges: Iterable[tuple[int, int]], labels: Sequence[int] | None = None):
        edge_list = [(int(u), int(v)) for u, v in edges]
        if edge_list:
            n = max(max(u, v) for u, v in edge_list) + 1
        else:
            n = 1  # the single-vertex tree has no edges
        if labels is not None and len(labels) != n:
            raise ValueError(f"expected {n} labels, got {len(labels)}")

        adjacency: list[list[int]] = [[] for _ in range(n)]
        seen: set[frozenset[int]] = set()
        for u, v in edge_list:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = frozenset((u, v))
            if key in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add(key)
            adjacency[u].append(v)
            adjacency[v].append(u)
        if len(edge_list) != n - 1:
            raise ValueError(f"{n} vertices need {n - 1} edges, got {len(edge_list)}")

        self.vertex_count = n
        self.edges = frozenset(seen)
        self.labels = tuple(labels) if labels is not None else tuple(range(n))
        self._adjacency = tuple(tuple(sorted(a)) for a in adjacency)

        # dist[u, w] = hops; next_hop[u, w] = neighbour of u on the path to w.
        dist = np.full((n, n), -1, dtype=np.int32)
        next_hop = np.full((n, n), -1, dtype=np.int32)
        for source in range(n):
            dist[source, source] = 0
            next_hop[source, source] = source
            queue = deque([source])
            while queue:
                cur = queue.popleft()
                for nb in self._adjacency[cur]:
                    if dist[nb, source] < 0:
                        dist[nb, source] = dist[cur, source] + 1
                        next_hop[nb, source] = cur
                        queue.append(nb)
        if (dist < 0).any():
            raise ValueError("tree is disconnected")
        self.dist = dist
        self.next_hop = next_hop
        self._geometry_cache: dict[tuple[int, int], DeviationGeometry] = {}

    # -- basic queries ---------------------------------------------------

    @property
    def vertices(self) -> range:
        return range(self.vertex_count)

    def check_vertex(self, v: int) -> int:
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.vertex_count):
            raise ValueError(f"invalid vertex id {v!r} for tree with {self.vertex_count} vertices")
        return int(v)

    def degree(self, v: int) -> int:
        return len(self._adjacency[self.check_vertex(v)])

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adjacency[self.check_vertex(v)]

    def distance(self, u: int, v: int) -> int:
        """Hop count of the unique path between u and v."""
        return int(self.dist[self.check_vertex(u), self.check_vertex(v)])

    def path(self, u: int, w: int) -> list[int]:
        """Vertices of [u, w] in order; [v, v] is the one-vertex sequence (v)."""
        u = self.check_vertex(u)
        w = self.check_vertex(w)
        out = [u]
        cur = u
        while cur != w:
            cur = int(self.next_hop[cur, w])
            out.append(cur)
        return out

    def set_distance(self, a_set: Iterable[int], b_set: Iterable[int]) -> float:
        """Minimum distance between two vertex sets; +inf if either is empty."""
        a_ids = [self.check_vertex(v) for v in a_set]
        b_ids = [self.check_vertex(v) for v in b_set]
        if not a_ids or not b_ids:
            return math.inf
        return int(self.dist[np.ix_(a_ids, b_ids)].min())

    # -- deviation geometry ----------------------------------------------

    def side_tree(self, a: int, b: int, v: int) -> frozenset[int]:
        """Component of v once all edges of [a, b] are removed.

        With a == b no edge is removed and the whole tree is returned.
        """
        a = self.check_vertex(a)
        b = self.check_vertex(b)
        v = self.check_vertex(v)
        pv = self.path(a, b)
        blocked = {frozenset((p, q)) for p, q in zip(pv, pv[1:])}
        component = {v}
        queue = deque([v])
        while queue:
            cur = queue.popleft()
            for nb in self._adjacency[cur]:
                if nb not in component and frozenset((cur, nb)) not in blocked:
                    component.add(nb)
                    queue.append(nb)
        return frozenset(component)

    def depth_from_path(self, a: int, b: int, v: int) -> int:
        """Distance of v from the path [a, b]."""
        v = self.check_vertex(v)
        return int(self.set_distance([v], self.path(a, b)))

    def deviation_geometry(self, u: int, w: int) -> DeviationGeometry:
        """Anchor positions and depths of every vertex relative to [u, w], cached."""
        u = self.check_vertex(u)
        w = self.check_vertex(w)
        cached = self._geometry_cache.get((u, w))
        if cached is not None:
            return cached
        pv = np.asarray(self.path(u, w), dtype=np.int32)
        sub = self.dist[:, pv]
        geometry = DeviationGeometry(
            path=pv,
            anchor_pos=sub.argmin(axis=1).astype(np.int32),
            depth=sub.min(axis=1).astype(np.int32),
        )
        self._geometry_cache[(u, w)] = geometry
        return geometry

    # -- composite path queries --------------------------------------------

    def path_intersection(self, pair1: tuple[int, int], pair2: tuple[int, int]) -> list[int]:
        """Common subpath of [u1, w1] and [u2, w2], ordered away from u1; may be empty."""
        u1, w1 = pair1
        p1 = self.path(u1, w1)
        p2 = set(self.path(*pair2))
        return [v for v in p1 if v in p2]

    def median_of_three(self, p: int, q: int, r: int) -> int:
        """The unique vertex on all three pairwise paths (tree Steiner point)."""
        r = self.check_vertex(r)
        d_pr = self.distance(p, r)
        d_qr = self.distance(q, r)
        # scan [p, q]; the median is the vertex of it lying on [p, r] and [q, r] too
        for v in self.path(p, q):
            d_vr = int(self.dist[v, r])
            if d_vr + self.distance(p, v) == d_pr and d_vr + self.distance(q, v) == d_qr:
                return v
        raise AssertionError("tree median not found; tree invariants broken")

    def interior(self, profile: Sequence[int]) -> frozenset[int]:
        """Vertices strictly between two profile entries: union of open paths (a_i, a_j)."""
        peaks = [self.check_vertex(v) for v in profile]
        out: set[int] = set()
        for i, p in enumerate(peaks):
            for q in peaks[i + 1:]:
                out.update(self.path(p, q)[1:-1])
        return frozenset(out)

    # -- identity / description ---------------------------------------------

    def canonical_edges(self) -> str:
        pairs = sorted(tuple(sorted(e)) for e in self.edges)
        return ",".join(f"{u}-{v}" for u, v in pairs)

    def edge_pairs(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.edges)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"DiscreteTree({self.vertex_count} vertices: {self.canonical_edges()})"

    def __eq__(self, other) -> bool:
        return isinstance(other, DiscreteTree) and self.edges == other.edges and self.vertex_count == other.vertex_count

    def __hash__(self) -> int:
        return hash((self.vertex_count, self.edges))

    def __reduce__(self):
        return (DiscreteTree, (self.edge_pairs(), self.labels))


def parse_tree(text: str) -> DiscreteTree:
    """Parse an edge-list description: one ``u v`` pair per line.

    ``#`` starts a comment; blank lines are ignored.  Vertex labels may be
    arbitrary integers and are remapped to dense ids ``0..V-1`` in sorted
    label order (original labels are kept on the tree).  Duplicate edges,
    self-loops and cycles are rejected with the offending line number;
    disconnected input is rejected after the full file is read.
    """
    raw_edges: list[tuple[int, int, int]] = []  # (label_u, label_v, line_no)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        if len(tokens) != 2:
            raise TreeParseError(f"expected 'u v', got {body!r}", line_no)
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise TreeParseError(f"non-integer token in {body!r}", line_no) from None
        raw_edges.append((u, v, line_no))

    if not raw_edges:
        raise TreeParseError("no edges found")

    labels = sorted({u for u, _, _ in raw_edges} | {v for _, v, _ in raw_edges})
    index = {label: i for i, label in enumerate(labels)}

    parent = list(range(len(labels)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    seen: set[frozenset[int]] = set()
    dense_edges: list[tuple[int, int]] = []
    for u, v, line_no in raw_edges:
        if u == v:
            raise TreeParseError(f"cycle detected: self-loop {u} {v}", line_no)
        du, dv = index[u], index[v]
        key = frozenset((du, dv))
        if key in seen:
            raise TreeParseError(f"duplicate edge {u} {v}", line_no)
        seen.add(key)
        ru, rv = find(du), find(dv)
        if ru == rv:
            raise TreeParseError(f"cycle detected at edge {u} {v}", line_no)
        parent[ru] = rv
        dense_edges.append((du, dv))

    roots = {find(i) for i in range(len(labels))}
    if len(roots) > 1:
        raise TreeParseError("disconnected input")
    return DiscreteTree(dense_edges, labels=labels)


def load_tree(path) -> DiscreteTree:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_tree(handle.read())


def save_tree(tree: DiscreteTree, path) -> None:
    lines = [f"{tree.labels[u]} {tree.labels[v]}" for u, v in tree.edge_pairs()]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


# -- common shapes used throughout the test corpus and the CLI demos --------

def path_tree(k: int) -> DiscreteTree:
    """Path 0-1-...-(k-1); vertex ids are ordered along the path."""
    if k < 1:
        raise ValueError("path needs at least one vertex")
    return DiscreteTree([(i, i + 1) for i in range(k - 1)])


def star_tree(leaves: int) -> DiscreteTree:
    """Star with center 0 and the given number of leaves."""
    if leaves < 1:
        raise ValueError("star needs at least one leaf")
    return DiscreteTree([(0, i) for i in range(1, leaves + 1)])


def spider_tree(*leg_lengths: int) -> DiscreteTree:
    """Spider: center 0 with one path of each given length hanging off it."""
    edges = []
    nxt = 1
    for length in leg_lengths:
        prev = 0
        for _ in range(length):
            edges.append((prev, nxt))
            prev = nxt
            nxt += 1
    if not edges:
        raise ValueError("spider needs at least one leg")
    return DiscreteTree(edges)


def binary_tree(vertices: int) -> DiscreteTree:
    """Heap-shaped binary tree: vertex i has children 2i+1 and 2i+2."""
    if vertices < 1:
        raise ValueError("binary tree needs at least one vertex")
    return DiscreteTree([((i - 1) // 2, i) for i in range(1, vertices)])


def fig_example_tree() -> DiscreteTree:
    """The 5-vertex tree with two branches at vertex 2 and a tail 2-3-4."""
    return DiscreteTree([(0, 2), (1, 2), (2, 3), (3, 4)])
