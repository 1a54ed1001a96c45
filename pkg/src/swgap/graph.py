"""Multigraphs with a fixed edge order, planar embeddings and dual graphs.

Edge subsets are integer bitmasks over the edge order: bit ``e`` is set iff
edge ``e`` belongs to the subset.  Embeddings are combinatorial: each face is
a cyclic sequence of darts ``(edge, side)``, where the dart leaves endpoint
``side`` of the edge and arrives at endpoint ``1 - side``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Dart = tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """Finite multigraph; parallel edges and loops are allowed."""

    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a graph needs at least one vertex")
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise ValueError(f"edge ({a}, {b}) has an endpoint outside [0, {self.n})")
        object.__setattr__(self, "edges", edges)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        arr = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]

    def degree(self, v: int) -> int:
        # a loop is one edge containing v, so it counts once
        return sum(1 for a, b in self.edges if a == v or b == v)

    def degrees(self) -> list[int]:
        return [self.degree(v) for v in range(self.n)]

    @property
    def max_degree(self) -> int:
        return max(self.degrees())

    def adjacency_indicator(self) -> np.ndarray:
        """0/1 matrix with entry 1 iff some edge joins u and v (u != v)."""
        adj = np.zeros((self.n, self.n), dtype=np.int64)
        for a, b in self.edges:
            if a != b:
                adj[a, b] = adj[b, a] = 1
        return adj

    def full_mask(self) -> int:
        return (1 << self.m) - 1

    def without_edges(self, removed: Iterable[int], name: str | None = None) -> "Graph":
        drop = set(removed)
        kept = tuple(e for i, e in enumerate(self.edges) if i not in drop)
        return Graph(self.n, kept, name if name is not None else f"{self.name}-minus{sorted(drop)}")

    def is_connected(self) -> bool:
        return connected_components(self, self.full_mask())[0] == 1

    def to_json(self, embedding: "PlanarEmbedding | None" = None) -> dict:
        out: dict = {"n": self.n, "edges": [list(e) for e in self.edges], "name": self.name}
        if embedding is not None:
            out["faces"] = [[list(d) for d in face] for face in embedding.faces]
            out["outer_face"] = embedding.outer_face
        return out


@dataclass(frozen=True)
class PlanarEmbedding:
    """Faces of a fixed plane drawing, as cyclic dart sequences."""

    faces: tuple[tuple[Dart, ...], ...]
    outer_face: int = 0
    _face_of: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        faces = tuple(tuple((int(e), int(s)) for e, s in face) for face in self.faces)
        object.__setattr__(self, "faces", faces)
        face_of = {}
        for f, face in enumerate(faces):
            for d in face:
                if d in face_of:
                    raise ValueError(f"dart {d} appears in more than one face incidence")
                face_of[d] = f
        object.__setattr__(self, "_face_of", face_of)
        if faces and not (0 <= self.outer_face < len(faces)):
            raise ValueError("outer_face out of range")

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def face_of(self, dart: Dart) -> int:
        return self._face_of[dart]

    def successor(self) -> dict[Dart, Dart]:
        nxt = {}
        for face in self.faces:
            for i, d in enumerate(face):
                nxt[d] = face[(i + 1) % len(face)]
        return nxt

    def validate(self, graph: Graph) -> None:
        """Check that the faces form a genus-0 embedding of ``graph``."""
        expected = {(e, s) for e in range(graph.m) for s in (0, 1)}
        if set(self._face_of) != expected:
            raise ValueError("every edge must contribute exactly two dart incidences")
        for face in self.faces:
            for i, (e, s) in enumerate(face):
                e2, s2 = face[(i + 1) % len(face)]
                head = graph.edges[e][1 - s]
                tail = graph.edges[e2][s2]
                if head != tail:
                    raise ValueError(f"face walk breaks between darts {(e, s)} and {(e2, s2)}")
        if graph.is_connected() and graph.n - graph.m + self.face_count != 2:
            raise ValueError(
                f"Euler characteristic {graph.n - graph.m + self.face_count} != 2; "
                "faces do not describe a plane embedding"
            )

    def digest(self) -> str:
        payload = json.dumps([[list(d) for d in f] for f in self.faces] + [self.outer_face])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DualLinkage:
    """Dual graph of an embedded graph plus the primal-to-dual edge map.

    Dual vertex ``f`` sits in primal face ``f``; dual edge ``edge_map[e]``
    crosses primal edge ``e``.  ``dual_embedding`` is the induced embedding of
    the dual, whose faces correspond to primal vertices in vertex order.
    """

    dual_graph: Graph
    edge_map: tuple[int, ...]
    dual_embedding: PlanarEmbedding

    @property
    def inverse_map(self) -> tuple[int, ...]:
        inv = [0] * len(self.edge_map)
        for e, d in enumerate(self.edge_map):
            inv[d] = e
        return tuple(inv)


# ---------------------------------------------------------------------------
# union-find and connectivity
# ---------------------------------------------------------------------------


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def connected_components(graph: Graph, edge_subset: int) -> tuple[int, list[int]]:
    """Components of the spanning subgraph ``(V, A)``.

    Returns the component count and, for every vertex, the smallest vertex id
    of its component.
    """
    uf = UnionFind(graph.n)
    count = graph.n
    for e, (a, b) in enumerate(graph.edges):
        if edge_subset >> e & 1 and uf.union(a, b):
            count -= 1
    smallest: dict[int, int] = {}
    for v in range(graph.n):
        smallest.setdefault(uf.find(v), v)
    return count, [smallest[uf.find(v)] for v in range(graph.n)]


def mask_bits(masks: np.ndarray, m: int) -> np.ndarray:
    """Boolean ``(len(masks), m)`` array of edge memberships."""
    masks = np.asarray(masks, dtype=np.int64)
    return ((masks[:, None] >> np.arange(m, dtype=np.int64)) & 1).astype(bool)


def bits_to_masks(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return (bits << np.arange(bits.shape[-1], dtype=np.int64)).sum(axis=-1)


def component_labels(graph: Graph, open_edges: np.ndarray) -> np.ndarray:
    """Smallest-vertex component labels for a batch of edge subsets.

    ``open_edges`` is a boolean ``(batch, m)`` array.  Labels are found by
    min-label propagation with pointer jumping, vectorised over the batch.
    """
    open_edges = np.asarray(open_edges, dtype=bool)
    batch = open_edges.shape[0]
    labels = np.tile(np.arange(graph.n, dtype=np.int64), (batch, 1))
    if graph.m == 0 or batch == 0:
        return labels
    a, b = graph.endpoints
    sel = [(e, a[e], b[e]) for e in range(graph.m) if a[e] != b[e]]
    while True:
        before = labels.copy()
        for e, u, v in sel:
            on = open_edges[:, e]
            low = np.minimum(labels[:, u], labels[:, v])
            labels[:, u] = np.where(on, low, labels[:, u])
            labels[:, v] = np.where(on, low, labels[:, v])
        while True:
            jumped = np.take_along_axis(labels, labels, axis=1)
            if np.array_equal(jumped, labels):
                break
            labels = jumped
        if np.array_equal(before, labels):
            return labels


def component_counts(labels: np.ndarray) -> np.ndarray:
    return (labels == np.arange(labels.shape[1])).sum(axis=1)


def all_subset_labels(graph: Graph) -> np.ndarray:
    """Component labels for every edge subset, indexed by bitmask."""
    masks = np.arange(1 << graph.m, dtype=np.int64)
    return component_labels(graph, mask_bits(masks, graph.m))


# ---------------------------------------------------------------------------
# embeddings and duals
# ---------------------------------------------------------------------------


def faces_from_rotation(graph: Graph, rotation: Sequence[Sequence[Dart]]) -> list[list[Dart]]:
    """Trace faces of a rotation system.

    ``rotation[v]`` lists the darts leaving ``v`` in cyclic order.  The face
    successor of a dart is the rotation-successor of its reverse.
    """
    succ_rot = {}
    for darts in rotation:
        for i, d in enumerate(darts):
            succ_rot[d] = darts[(i + 1) % len(darts)]
    seen: set[Dart] = set()
    faces = []
    for e in range(graph.m):
        for s in (0, 1):
            start = (e, s)
            if start in seen:
                continue
            face = []
            d = start
            while d not in seen:
                seen.add(d)
                face.append(d)
                d = succ_rot[(d[0], 1 - d[1])]
            faces.append(face)
    return faces


def embedding_from_positions(graph: Graph, positions: Sequence[tuple[float, float]]) -> PlanarEmbedding:
    """Embedding of a straight-line drawing; parallel edges and loops are not supported."""
    pos = np.asarray(positions, dtype=float)
    rotation: list[list[Dart]] = [[] for _ in range(graph.n)]
    for e, (a, b) in enumerate(graph.edges):
        if a == b:
            raise ValueError("straight-line drawings cannot contain loops")
        rotation[a].append((e, 0))
        rotation[b].append((e, 1))
    for v in range(graph.n):
        def angle(d, v=v):
            e, s = d
            w = graph.edges[e][1 - s]
            dx, dy = pos[w] - pos[v]
            return math.atan2(dy, dx)

        # clockwise order, so that faces are traced with the face on the left
        rotation[v].sort(key=lambda d: -angle(d))
    faces = faces_from_rotation(graph, rotation)
    areas = []
    for face in faces:
        pts = [pos[graph.edges[e][s]] for e, s in face]
        area = 0.0
        for i in range(len(pts)):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % len(pts)]
            area += x1 * y2 - x2 * y1
        areas.append(area / 2)
    outer = int(np.argmin(areas)) if len(faces) > 1 else 0
    emb = PlanarEmbedding(tuple(tuple(f) for f in faces), outer)
    emb.validate(graph)
    return emb


def build_dual(graph: Graph, embedding: PlanarEmbedding) -> DualLinkage:
    """Dual graph of a connected embedded graph."""
    if not graph.is_connected():
        raise ValueError("duals are only defined for connected graphs")
    embedding.validate(graph)
    dual_edges = tuple(
        (embedding.face_of((e, 0)), embedding.face_of((e, 1))) for e in range(graph.m)
    )
    dual = Graph(embedding.face_count, dual_edges, f"dual({graph.name})")
    # dual faces are the rotations around primal vertices: rot(d) = next(rev(d))
    nxt = embedding.successor()
    dual_faces = []
    on_outer = set()
    for v in range(graph.n):
        leaving = [(e, s) for e in range(graph.m) for s in (0, 1) if graph.edges[e][s] == v]
        if not leaving:
            dual_faces.append(())
            continue
        cycle = [leaving[0]]
        while True:
            e, s = cycle[-1]
            d = nxt[(e, 1 - s)]
            if d == cycle[0]:
                break
            cycle.append(d)
        dual_faces.append(tuple(cycle))
        if any(embedding.face_of(d) == embedding.outer_face for d in cycle):
            on_outer.add(v)
    outer = min(on_outer) if on_outer else 0
    dual_emb = PlanarEmbedding(tuple(dual_faces), outer)
    linkage = DualLinkage(dual, tuple(range(graph.m)), dual_emb)
    dual_emb.validate(dual)
    return linkage


def dual_mask(linkage: DualLinkage, edge_subset: int) -> int:
    """Dual configuration: dual edge present iff the primal edge is absent."""
    out = 0
    for e, d in enumerate(linkage.edge_map):
        if not edge_subset >> e & 1:
            out |= 1 << d
    return out


def dual_mask_array(linkage: DualLinkage, masks: np.ndarray) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    out = np.zeros_like(masks)
    for e, d in enumerate(linkage.edge_map):
        out |= (((masks >> e) & 1) ^ 1) << d
    return out


def dual_components_identity_check(graph: Graph, linkage: DualLinkage, edge_subset: int) -> int:
    """``c(A) + 1 - (c(A*) + |V| - |E| + |A*|)``; zero for every subset of a plane graph."""
    dual_subset = dual_mask(linkage, edge_subset)
    c_primal, _ = connected_components(graph, edge_subset)
    c_dual, _ = connected_components(linkage.dual_graph, dual_subset)
    return c_primal + 1 - (c_dual + graph.n - graph.m + bin(dual_subset).count("1"))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _grid_edges(side: int) -> list[tuple[int, int]]:
    edges = []
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                edges.append((v, v + 1))
            if r + 1 < side:
                edges.append((v, v + side))
    return edges


def make_square_lattice(side: int) -> tuple[Graph, PlanarEmbedding]:
    """``side x side`` grid, vertices row-major, with its plane embedding."""
    if side < 2:
        raise ValueError("square lattice needs side >= 2")
    graph = Graph(side * side, tuple(_grid_edges(side)), f"square:{side}")
    positions = [(c, -r) for r in range(side) for c in range(side)]
    return graph, embedding_from_positions(graph, positions)


def make_dual_square_lattice(side: int) -> Graph:
    """The ``(side-1)``-grid plus an apex joined to every boundary vertex.

    Each grid vertex ``u`` gets ``4 - deg(u)`` parallel edges to the apex (the
    last vertex), which doubles the corner connections.  This is the plane dual
    of ``make_square_lattice(side)``.
    """
    if side < 2:
        raise ValueError("dual square lattice needs side >= 2")
    inner = side - 1
    edges = _grid_edges(inner)
    apex = inner * inner
    deg = [0] * apex
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    for u in range(apex):
        edges.extend([(u, apex)] * (4 - deg[u]))
    return Graph(apex + 1, tuple(edges), f"dual_square:{side}")


def _tree_edges(n: int) -> list[tuple[int, int]]:
    return [((v - 1) // 2, v) for v in range(1, n)]


def _tree_positions(n: int) -> list[tuple[float, float]]:
    pos = []
    for v in range(n):
        depth = int(math.floor(math.log2(v + 1)))
        slot = v + 1 - 2**depth
        width = 2**depth
        pos.append(((slot + 0.5) / width, -float(depth)))
    return pos


def make_standard(kind: str, size: int | None = None) -> tuple[Graph, PlanarEmbedding | None]:
    """Named graph families with deterministic vertex and edge order.

    ``tree`` is the complete binary tree in breadth-first order, ``star`` has
    centre 0, ``torus2d`` is the cycle product C_L x C_L.  Families without a
    straight-line plane drawing here return ``None`` as the embedding.
    """
    if kind == "single_edge":
        g = Graph(2, ((0, 1),), "single_edge")
        return g, embedding_from_positions(g, [(0, 0), (1, 0)])
    if size is None:
        raise ValueError(f"{kind} needs a size parameter")
    if kind == "path":
        if size < 2:
            raise ValueError("path needs >= 2 vertices")
        g = Graph(size, tuple((v, v + 1) for v in range(size - 1)), f"path:{size}")
        return g, embedding_from_positions(g, [(v, 0) for v in range(size)])
    if kind == "cycle":
        if size < 3:
            raise ValueError("cycle needs length >= 3")
        edges = [(v, v + 1) for v in range(size - 1)] + [(0, size - 1)]
        g = Graph(size, tuple(edges), f"cycle:{size}")
        pos = [(math.cos(2 * math.pi * v / size), math.sin(2 * math.pi * v / size)) for v in range(size)]
        return g, embedding_from_positions(g, pos)
    if kind == "tree":
        if size < 2:
            raise ValueError("tree needs >= 2 vertices")
        g = Graph(size, tuple(_tree_edges(size)), f"tree:{size}")
        return g, embedding_from_positions(g, _tree_positions(size))
    if kind == "star":
        if size < 2:
            raise ValueError("star needs >= 2 vertices")
        g = Graph(size, tuple((0, v) for v in range(1, size)), f"star:{size}")
        pos = [(0.0, 0.0)] + [
            (math.cos(2 * math.pi * v / (size - 1)), math.sin(2 * math.pi * v / (size - 1)))
            for v in range(size - 1)
        ]
        return g, embedding_from_positions(g, pos)
    if kind == "complete":
        if size < 1:
            raise ValueError("complete graph needs >= 1 vertex")
        edges = tuple((u, v) for u in range(size) for v in range(u + 1, size))
        return Graph(size, edges, f"complete:{size}"), None
    if kind == "torus2d":
        if size < 3:
            raise ValueError("torus needs side >= 3")
        edges = []
        for r in range(size):
            for c in range(size):
                v = r * size + c
                edges.append((v, r * size + (c + 1) % size))
                edges.append((v, ((r + 1) % size) * size + c))
        return Graph(size * size, tuple(edges), f"torus2d:{size}"), None
    if kind == "square":
        return make_square_lattice(size)
    if kind == "dual_square":
        return make_dual_square_lattice(size), None
    raise ValueError(f"unknown graph family {kind!r}")


_ALIASES = {"cycle": "cycle", "C": "cycle", "Z2": "square", "torus": "torus2d"}


def parse_builtin(text: str) -> tuple[Graph, PlanarEmbedding | None]:
    """Parse ``family[:size]``, e.g. ``tree:5``, ``cycle:4``, ``square:3``."""
    kind, _, size = text.partition(":")
    kind = _ALIASES.get(kind, kind)
    return make_standard(kind, int(size) if size else None)


def graph_from_json(data: dict) -> tuple[Graph, PlanarEmbedding | None]:
    graph = Graph(int(data["n"]), tuple(tuple(e) for e in data["edges"]), data.get("name", ""))
    embedding = None
    if data.get("faces") is not None:
        embedding = PlanarEmbedding(
            tuple(tuple(tuple(d) for d in face) for face in data["faces"]),
            int(data.get("outer_face", 0)),
        )
        embedding.validate(graph)
    return graph, embedding


def load_graph(path: str) -> tuple[Graph, PlanarEmbedding | None]:
    with open(path) as fh:
        data = json.load(fh)
    # unnamed graphs take the file stem so reports stay readable
    data.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    return graph_from_json(data)
