"""Markov chains on colourings and bond configurations.

Each dynamics is available as a random step on a batch of states (sampler
mode) and as an exact transition matrix on the enumerated space (matrix
mode).  Potts states are integer arrays of shape ``(n,)`` or ``(batch, n)``;
bond states are boolean arrays of shape ``(m,)`` or ``(batch, m)``.

The heat-bath matrix includes the self-transition ``sigma -> sigma`` once per
vertex, so its diagonal aggregates every vertex choice.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import Graph, all_subset_labels, component_counts, component_labels
from .measures import (
    DEFAULT_STATE_CAP,
    EnumeratedMeasure,
    ModelParams,
    agreement_masks,
    check_cap,
    pinned_potts_measure,
    pinned_states,
    popcount,
    potts_measure,
    potts_states,
    rc_measure,
)
from .rng import make_rng

KINDS = ("hb_potts", "sw_potts", "sw_rc", "hb_rc", "sb_rc", "metropolis_sb", "hb_potts_pinned")
POTTS_KINDS = ("hb_potts", "sw_potts", "hb_potts_pinned")
RC_KINDS = ("sw_rc", "hb_rc", "sb_rc", "metropolis_sb")
MATRIX_STATE_CAP = 4096


# ---------------------------------------------------------------------------
# single-bond case probabilities (shared by both modes)
# ---------------------------------------------------------------------------


def sb_inclusion_probability(p: float, q: float, connected: np.ndarray) -> np.ndarray:
    """Single-bond: include e with prob p if its endpoints are joined in A, else p/q."""
    return np.where(connected, p, p / q)


def hb_rc_inclusion_probability(p: float, q: float, connected_without_e: np.ndarray) -> np.ndarray:
    """Bond heat-bath: p if joined in A minus e, else p / (p + q(1-p))."""
    return np.where(connected_without_e, p, p / (p + q * (1 - p)))


# ---------------------------------------------------------------------------
# specs and matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    params: ModelParams
    graph: Graph
    pinned_vertex: int | None = None
    lazy: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "hb_potts_pinned":
            if self.pinned_vertex is None or not 0 <= self.pinned_vertex < self.graph.n:
                raise ValueError("hb_potts_pinned needs a valid pinned_vertex")
        if self.kind in POTTS_KINDS or self.kind == "sw_rc":
            self.params.require_potts()

    @property
    def on_bonds(self) -> bool:
        return self.kind in RC_KINDS


@dataclass
class TransitionMatrix:
    """Row-stochastic matrix with its declared stationary distribution."""

    kind: str
    matrix: np.ndarray | sp.csr_matrix
    stationary: np.ndarray
    lazy: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.stationary.size)

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def row_sum_residual(self) -> float:
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        return float(np.abs(sums - 1).max())

    def min_entry(self) -> float:
        return float(self.matrix.min())

    def reversibility_residual(self) -> float:
        """Largest relative violation of detailed balance over nonzero flows."""
        if self.is_sparse:
            flow = sp.diags(self.stationary) @ self.matrix
            diff = abs(flow - flow.T)
            scale = abs(flow).maximum(abs(flow.T))
            diff = diff.tocoo()
            if diff.nnz == 0:
                return 0.0
            denom = np.asarray(scale[diff.row, diff.col]).ravel()
            return float((diff.data / denom).max())
        flow = self.stationary[:, None] * self.matrix
        diff = np.abs(flow - flow.T)
        scale = np.maximum(np.abs(flow), np.abs(flow.T))
        rel = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
        return float(rel.max())

    def stationarity_residual(self) -> float:
        moved = np.asarray(self.stationary @ self.matrix).ravel()
        return float(np.abs(moved - self.stationary).max())

    def as_lazy(self) -> "TransitionMatrix":
        n = self.size
        eye = sp.identity(n, format="csr") if self.is_sparse else np.eye(n)
        return TransitionMatrix(self.kind, (self.matrix + eye) / 2, self.stationary, True, self.label, dict(self.meta))

    def stationary_digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.stationary).tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# matrix builders
# ---------------------------------------------------------------------------


def _subset_zeta(values: np.ndarray, m: int) -> np.ndarray:
    """``g[S] = sum over A subset of S of values[A]``."""
    g = np.array(values, dtype=float)
    for i in range(m):
        view = g.reshape(-1, 2, 1 << i)
        view[:, 1, :] += view[:, 0, :]
    return g


def _superset_zeta(values: np.ndarray, m: int) -> np.ndarray:
    """``h[S] = sum over A superset of S of values[A]``."""
    h = np.array(values, dtype=float)
    for i in range(m):
        view = h.reshape(-1, 2, 1 << i)
        view[:, 0, :] += view[:, 1, :]
    return h


def _heat_bath_on_product(log_weights: np.ndarray, q: int, sites: int) -> np.ndarray:
    """Uniform-site heat-bath matrix for a measure on ``[q]**sites``."""
    if sites == 0:
        return np.ones((1, 1))  # nothing left to update
    size = q**sites
    idx = np.arange(size, dtype=np.int64)
    digits = potts_states(sites, q)
    P = np.zeros((size, size))
    for v in range(sites):
        place = q ** (sites - 1 - v)
        base = idx - digits[:, v] * place
        targets = base[:, None] + np.arange(q, dtype=np.int64)[None, :] * place
        lw = log_weights[targets]
        lw = lw - lw.max(axis=1, keepdims=True)
        pr = np.exp(lw)
        pr /= pr.sum(axis=1, keepdims=True)
        P[idx[:, None], targets] += pr / sites
    return P


def hb_potts_matrix(graph: Graph, params: ModelParams) -> TransitionMatrix:
    q = params.require_potts()
    check_cap("heat-bath matrix", q**graph.n, MATRIX_STATE_CAP)
    pi = potts_measure(graph, params)
    return TransitionMatrix("hb_potts", _heat_bath_on_product(pi.log_weights, q, graph.n), pi.probabilities)


def hb_potts_pinned_matrix(graph: Graph, params: ModelParams, pinned: int) -> TransitionMatrix:
    """Heat-bath on colourings of ``V - {pinned}`` with the pinned vertex at colour 0."""
    q = params.require_potts()
    check_cap("pinned heat-bath matrix", q ** (graph.n - 1), MATRIX_STATE_CAP)
    pi_w = pinned_potts_measure(graph, params, pinned)
    P = _heat_bath_on_product(pi_w.log_weights, q, graph.n - 1)
    return TransitionMatrix("hb_potts_pinned", P, pi_w.probabilities, meta={"pinned_vertex": pinned})


def sw_potts_matrix(graph: Graph, params: ModelParams) -> TransitionMatrix:
    """Exact SW matrix on colourings.

    Entry ``(sigma, tau)`` is the sum over ``A`` inside ``E(sigma) & E(tau)``
    of ``p**|A| (1-p)**(|E(sigma)|-|A|) q**-c(A)``.  All these subset sums are
    obtained at once by a subset-sum (zeta) transform over edge bitmasks.
    """
    q = params.require_potts()
    params.require_open()
    check_cap("SW matrix", q**graph.n, MATRIX_STATE_CAP)
    pi = potts_measure(graph, params)
    masks = np.arange(1 << graph.m, dtype=np.int64)
    counts = component_counts(all_subset_labels(graph))
    terms = np.exp(popcount(masks) * params.log_bond_weight - counts * math.log(q))
    g = _subset_zeta(terms, graph.m)
    agree = agreement_masks(graph, potts_states(graph.n, q))
    scale = np.exp(popcount(agree) * math.log1p(-params.p))
    P = scale[:, None] * g[agree[:, None] & agree[None, :]]
    return TransitionMatrix("sw_potts", P, pi.probabilities)


def sw_rc_matrix(graph: Graph, params: ModelParams) -> TransitionMatrix:
    """Exact SW matrix on bond configurations.

    Entry ``(A, B)`` is ``q**-c(A) w**|B|`` times the sum over colourings with
    ``A | B`` inside ``E(sigma)`` of ``(1-p)**|E(sigma)|``; that sum is a
    superset transform of the agreement-set histogram.
    """
    q = params.require_potts()
    params.require_open()
    check_cap("SW bond matrix", 1 << graph.m, MATRIX_STATE_CAP)
    check_cap("colour enumeration", q**graph.n)
    mu = rc_measure(graph, params)
    agree = agreement_masks(graph, potts_states(graph.n, q))
    hist = np.bincount(agree, minlength=1 << graph.m).astype(float)
    masks = np.arange(1 << graph.m, dtype=np.int64)
    hist *= np.exp(popcount(masks) * math.log1p(-params.p))
    h = _superset_zeta(hist, graph.m)
    counts = component_counts(all_subset_labels(graph))
    left = np.exp(-counts * math.log(q))
    right = np.exp(popcount(masks) * params.log_bond_weight)
    P = left[:, None] * right[None, :] * h[masks[:, None] | masks[None, :]]
    return TransitionMatrix("sw_rc", P, mu.probabilities)


def _single_bond_matrix(graph: Graph, params: ModelParams, rule: str, sparse: bool, cap: int) -> TransitionMatrix:
    params.require_open()
    m = graph.m
    check_cap(f"{rule} matrix", 1 << m, cap)
    mu = rc_measure(graph, params)
    size = 1 << m
    masks = np.arange(size, dtype=np.int64)
    labels = all_subset_labels(graph)
    counts = component_counts(labels)
    a, b = graph.endpoints
    p, q = params.p, params.q
    rows, cols, vals = [], [], []
    diag = np.zeros(size)
    for e in range(m):
        bit = np.int64(1) << e
        has = (masks & bit) != 0
        flip = masks ^ bit
        if rule == "metropolis":
            log_ratio = (counts[flip] - counts) * math.log(q) + np.where(has, -1.0, 1.0) * params.log_bond_weight
            move = np.exp(np.minimum(0.0, log_ratio)) / (2 * m)
            stay = 1.0 / (2 * m) + (1.0 / (2 * m) - move)
        else:
            if rule == "hb":
                lab = labels[masks & ~bit]
                inc = hb_rc_inclusion_probability(p, q, lab[:, a[e]] == lab[:, b[e]])
            else:
                inc = sb_inclusion_probability(p, q, labels[:, a[e]] == labels[:, b[e]])
            move = np.where(has, 1 - inc, inc) / m
            stay = np.where(has, inc, 1 - inc) / m
        rows.append(masks)
        cols.append(flip)
        vals.append(move)
        diag += stay
    rows.append(masks)
    cols.append(masks)
    vals.append(diag)
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    kind = {"hb": "hb_rc", "sb": "sb_rc", "metropolis": "metropolis_sb"}[rule]
    return TransitionMatrix(kind, mat if sparse else mat.toarray(), mu.probabilities, lazy=rule == "metropolis")


def hb_rc_matrix(graph: Graph, params: ModelParams, sparse: bool = False, cap: int = MATRIX_STATE_CAP) -> TransitionMatrix:
    return _single_bond_matrix(graph, params, "hb", sparse, cap)


def sb_rc_matrix(graph: Graph, params: ModelParams, sparse: bool = False, cap: int = MATRIX_STATE_CAP) -> TransitionMatrix:
    return _single_bond_matrix(graph, params, "sb", sparse, cap)


def metropolis_sb_matrix(graph: Graph, params: ModelParams, sparse: bool = False, cap: int = MATRIX_STATE_CAP) -> TransitionMatrix:
    """Lazy Metropolis single-bond chain: pick e and flip it with prob min(1, ratio)/2."""
    return _single_bond_matrix(graph, params, "metropolis", sparse, cap)


def build_matrix(spec: KernelSpec, sparse: bool = False) -> TransitionMatrix:
    g, prm = spec.graph, spec.params
    if spec.kind == "hb_potts":
        tm = hb_potts_matrix(g, prm)
    elif spec.kind == "sw_potts":
        tm = sw_potts_matrix(g, prm)
    elif spec.kind == "sw_rc":
        tm = sw_rc_matrix(g, prm)
    elif spec.kind == "hb_rc":
        tm = hb_rc_matrix(g, prm, sparse)
    elif spec.kind == "sb_rc":
        tm = sb_rc_matrix(g, prm, sparse)
    elif spec.kind == "metropolis_sb":
        tm = metropolis_sb_matrix(g, prm, sparse)
    else:
        tm = hb_potts_pinned_matrix(g, prm, spec.pinned_vertex)
    tm.label = f"{spec.kind}[{g.name}, q={prm.q}, p={prm.p!r}]"
    return tm.as_lazy() if spec.lazy else tm


def stationary_measure(spec: KernelSpec) -> EnumeratedMeasure:
    if spec.kind in ("hb_potts", "sw_potts"):
        return potts_measure(spec.graph, spec.params)
    if spec.kind == "hb_potts_pinned":
        return pinned_potts_measure(spec.graph, spec.params, spec.pinned_vertex)
    return rc_measure(spec.graph, spec.params)


# ---------------------------------------------------------------------------
# sampler mode
# ---------------------------------------------------------------------------


def _as_batch(state):
    arr = np.asarray(state)
    return (arr[None, :], True) if arr.ndim == 1 else (arr, False)


def _neighbour_table(graph: Graph) -> np.ndarray:
    """``(n, maxdeg)`` neighbour ids with multiplicity, padded by -1; loops skipped."""
    nbrs: list[list[int]] = [[] for _ in range(graph.n)]
    for a, b in graph.edges:
        if a != b:
            nbrs[a].append(b)
            nbrs[b].append(a)
    width = max(1, max(len(x) for x in nbrs))
    table = -np.ones((graph.n, width), dtype=np.int64)
    for v, x in enumerate(nbrs):
        table[v, : len(x)] = x
    return table


def _sample_categorical(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(weights, axis=1)
    cdf /= cdf[:, -1:]
    return np.minimum((cdf < u[:, None]).sum(axis=1), weights.shape[1] - 1)


def hb_potts_step(graph: Graph, params: ModelParams, state, rng: np.random.Generator, sites=None):
    """Resample one uniformly chosen vertex (from ``sites``) from its conditional law."""
    q = params.require_potts()
    sigma, single = _as_batch(state)
    sigma = sigma.astype(np.int64, copy=True)
    batch = sigma.shape[0]
    sites = np.arange(graph.n) if sites is None else np.asarray(sites, dtype=np.int64)
    if sites.size == 0:
        return sigma[0] if single else sigma
    v = sites[rng.integers(sites.size, size=batch)]
    nb = _neighbour_table(graph)[v]
    rows = np.repeat(np.arange(batch), nb.shape[1])
    valid = nb.ravel() >= 0
    colours = sigma[rows[valid], nb.ravel()[valid]]
    counts = np.zeros((batch, q))
    np.add.at(counts, (rows[valid], colours), 1.0)
    top = counts.max(axis=1, keepdims=True)
    if math.isinf(params.beta):
        weights = (counts == top).astype(float)
    else:
        weights = np.exp(params.beta * (counts - top))
    sigma[np.arange(batch), v] = _sample_categorical(weights, rng.random(batch))
    return sigma[0] if single else sigma


def sw_potts_step(graph: Graph, params: ModelParams, state, rng: np.random.Generator):
    """Percolate the agreement edges with prob p, then recolour every cluster uniformly."""
    q = params.require_potts()
    sigma, single = _as_batch(state)
    a, b = graph.endpoints
    open_ = (sigma[:, a] == sigma[:, b]) & (rng.random((sigma.shape[0], graph.m)) < params.p)
    labels = component_labels(graph, open_)
    fresh = rng.integers(q, size=sigma.shape)
    out = np.take_along_axis(fresh, labels, axis=1)
    return out[0] if single else out


def sw_rc_step(graph: Graph, params: ModelParams, state, rng: np.random.Generator):
    """Colour the clusters of A uniformly, then percolate the agreement edges."""
    q = params.require_potts()
    bonds, single = _as_batch(state)
    labels = component_labels(graph, bonds.astype(bool))
    sigma = np.take_along_axis(rng.integers(q, size=labels.shape), labels, axis=1)
    a, b = graph.endpoints
    out = (sigma[:, a] == sigma[:, b]) & (rng.random((sigma.shape[0], graph.m)) < params.p)
    return out[0] if single else out


def _single_bond_step(graph: Graph, params: ModelParams, state, rng, rule: str):
    bonds, single = _as_batch(state)
    bonds = bonds.astype(bool, copy=True)
    batch = bonds.shape[0]
    rows = np.arange(batch)
    e = rng.integers(graph.m, size=batch)
    a, b = graph.endpoints
    if rule == "sb":
        labels = component_labels(graph, bonds)
        inc = sb_inclusion_probability(params.p, params.q, labels[rows, a[e]] == labels[rows, b[e]])
        bonds[rows, e] = rng.random(batch) < inc
    else:
        without = bonds.copy()
        without[rows, e] = False
        labels = component_labels(graph, without)
        joined = labels[rows, a[e]] == labels[rows, b[e]]
        if rule == "hb":
            bonds[rows, e] = rng.random(batch) < hb_rc_inclusion_probability(params.p, params.q, joined)
        else:
            has = bonds[rows, e]
            dc = np.where(joined, 0, np.where(has, 1, -1))
            log_ratio = dc * math.log(params.q) + np.where(has, -1.0, 1.0) * params.log_bond_weight
            accept = rng.random(batch) < np.exp(np.minimum(0.0, log_ratio))
            active = rng.random(batch) < 0.5
            bonds[rows, e] = np.where(active & accept, ~has, has)
    return bonds[0] if single else bonds


def hb_rc_step(graph: Graph, params: ModelParams, state, rng: np.random.Generator):
    return _single_bond_step(graph, params, state, rng, "hb")


def sb_rc_step(graph: Graph, params: ModelParams, state, rng: np.random.Generator):
    return _single_bond_step(graph, params, state, rng, "sb")


def metropolis_sb_step(graph: Graph, params: ModelParams, state, rng: np.random.Generator):
    return _single_bond_step(graph, params, state, rng, "metropolis")


def step(spec: KernelSpec, state, rng: np.random.Generator):
    """One transition of ``spec`` applied to ``state`` (or a batch of states)."""
    if spec.lazy:
        arr, single = _as_batch(state)
        stay = rng.random(arr.shape[0]) < 0.5
        moved = _bare_step(spec, arr, rng)
        out = np.where(stay[:, None], arr, moved)
        return out[0] if single else out
    return _bare_step(spec, state, rng)


def _bare_step(spec: KernelSpec, state, rng):
    g, prm = spec.graph, spec.params
    if spec.kind == "hb_potts":
        return hb_potts_step(g, prm, state, rng)
    if spec.kind == "hb_potts_pinned":
        sites = [v for v in range(g.n) if v != spec.pinned_vertex]
        return hb_potts_step(g, prm, state, rng, sites=sites)
    return {
        "sw_potts": sw_potts_step,
        "sw_rc": sw_rc_step,
        "hb_rc": hb_rc_step,
        "sb_rc": sb_rc_step,
        "metropolis_sb": metropolis_sb_step,
    }[spec.kind](g, prm, state, rng)


# ---------------------------------------------------------------------------
# state indexing helpers
# ---------------------------------------------------------------------------


def state_index(spec: KernelSpec, states) -> np.ndarray:
    """Matrix-mode index of each state in a batch."""
    arr, _ = _as_batch(states)
    if spec.on_bonds:
        return (arr.astype(np.int64) << np.arange(arr.shape[1], dtype=np.int64)).sum(axis=1)
    q = spec.params.require_potts()
    if spec.kind == "hb_potts_pinned":
        arr = np.delete(arr, spec.pinned_vertex, axis=1)
    powers = q ** np.arange(arr.shape[1] - 1, -1, -1, dtype=np.int64)
    return arr.astype(np.int64) @ powers


def state_from_index(spec: KernelSpec, index: int) -> np.ndarray:
    if spec.on_bonds:
        return np.array([(index >> e) & 1 for e in range(spec.graph.m)], dtype=bool)
    q = spec.params.require_potts()
    if spec.kind == "hb_potts_pinned":
        return pinned_states(spec.graph.n, q, spec.pinned_vertex)[index]
    return potts_states(spec.graph.n, q)[index]


# ---------------------------------------------------------------------------
# simple driver
# ---------------------------------------------------------------------------

OBSERVABLES = ("agreement_count", "component_count", "edge_count", "color_histogram")


@dataclass
class ChainTrajectory:
    final_state: np.ndarray
    observables: dict[str, np.ndarray]
    steps: int


def observe(spec: KernelSpec, state: np.ndarray, name: str):
    g = spec.graph
    if spec.on_bonds:
        bonds = np.asarray(state, dtype=bool)
        if name == "edge_count":
            return int(bonds.sum())
        if name == "component_count":
            return int(component_counts(component_labels(g, bonds[None, :]))[0])
        raise ValueError(f"{name} is not defined on bond states")
    sigma = np.asarray(state)
    if name == "agreement_count":
        return int(popcount(agreement_masks(g, sigma[None, :]))[0])
    if name == "color_histogram":
        return np.bincount(sigma, minlength=spec.params.q)
    raise ValueError(f"{name} is not defined on colourings")


def sample_chain(
    spec: KernelSpec,
    initial_state,
    steps: int,
    seed: int,
    record: tuple[str, ...] = (),
    stream: int = 0,
) -> ChainTrajectory:
    """Run ``steps`` transitions from ``initial_state``; observables are recorded after each step."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    rng = make_rng(seed, stream)
    state = np.array(initial_state)
    traces: dict[str, list] = {name: [] for name in record}
    for _ in range(steps):
        state = step(spec, state, rng)
        for name in record:
            traces[name].append(observe(spec, state, name))
    return ChainTrajectory(state, {k: np.array(v) for k, v in traces.items()}, steps)


def one_step_frequencies(spec: KernelSpec, start_index: int, draws: int, seed: int) -> np.ndarray:
    """Empirical distribution of the next state index from a fixed start, batched."""
    rng = make_rng(seed)
    start = state_from_index(spec, start_index)
    size = (1 << spec.graph.m) if spec.on_bonds else spec.params.q ** (
        spec.graph.n - (1 if spec.kind == "hb_potts_pinned" else 0)
    )
    freq = np.zeros(size)
    chunk = 200_000
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        batch = np.repeat(start[None, :], k, axis=0)
        nxt = step(spec, batch, rng)
        freq += np.bincount(state_index(spec, nxt), minlength=size)
        done += k
    return freq / draws


