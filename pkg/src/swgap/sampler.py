"""Compiled samplers for graphs far beyond enumeration size.

Random numbers come from a per-chain Philox stream (see ``rng.make_rng``)
and are drawn in blocks on the Python side; the compiled loops only consume
them.  Every transition uses a fixed number of uniforms, so a run is a pure
function of its ``ChainRun`` description whatever the block size.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .graph import Graph
from .measures import EnumeratedMeasure, ModelParams
from .rng import make_rng

SAMPLER_KINDS = ("sw_potts", "sw_rc", "hb_potts", "hb_potts_pinned", "sb_rc", "hb_rc", "metropolis_sb")
POTTS_OBSERVABLES = ("agreement_count", "color_histogram", "component_count", "edge_density")
RC_OBSERVABLES = ("edge_density", "component_count")
_RULE = {"sb_rc": 0, "hb_rc": 1, "metropolis_sb": 2}
RANDOM_BLOCK = 1 << 22


# ---------------------------------------------------------------------------
# compiled pieces
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return False
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]
    return True


@njit(cache=True, nogil=True)
def _components(bonds, ea, eb, n, parent, size):
    for v in range(n):
        parent[v] = v
        size[v] = 1
    comps = n
    for e in range(ea.size):
        if bonds[e] and _union(parent, size, ea[e], eb[e]):
            comps -= 1
    return comps


@njit(cache=True, nogil=True)
def _record_potts(sigma, ea, eb, q, j, with_index, agree_out, index_out, hist_out):
    agree = 0
    for e in range(ea.size):
        if sigma[ea[e]] == sigma[eb[e]]:
            agree += 1
    agree_out[j] = agree
    for v in range(sigma.size):
        hist_out[j, sigma[v]] += 1
    if with_index:
        idx = 0
        for v in range(sigma.size):
            idx = idx * q + sigma[v]
        index_out[j] = idx


@njit(cache=True, nogil=True)
def _drive_sw_potts(sigma, ea, eb, p, q, u_edge, u_col, thin, first, with_index,
                    agree_out, index_out, hist_out, comp_out, open_out):
    n = sigma.size
    m = ea.size
    parent = np.empty(n, np.int64)
    size = np.empty(n, np.int64)
    steps = u_edge.shape[0]
    j = first
    for s in range(steps):
        for v in range(n):
            parent[v] = v
            size[v] = 1
        comps = n
        opened = 0
        for e in range(m):
            a = ea[e]
            b = eb[e]
            if sigma[a] == sigma[b] and u_edge[s, e] < p:
                opened += 1
                if _union(parent, size, a, b):
                    comps -= 1
        for v in range(n):
            r = _find(parent, v)
            c = int(u_col[s, r] * q)
            sigma[v] = c if c < q else q - 1
        if thin > 0 and (s + 1) % thin == 0:
            _record_potts(sigma, ea, eb, q, j, with_index, agree_out, index_out, hist_out)
            comp_out[j] = comps
            open_out[j] = opened
            j += 1
    return j


@njit(cache=True, nogil=True)
def _drive_sw_rc(bonds, ea, eb, n, p, q, u_edge, u_col, thin, first, with_index, edge_out, comp_out, index_out):
    m = ea.size
    parent = np.empty(n, np.int64)
    size = np.empty(n, np.int64)
    colour = np.empty(n, np.int64)
    j = first
    for s in range(u_edge.shape[0]):
        _components(bonds, ea, eb, n, parent, size)
        for v in range(n):
            r = _find(parent, v)
            c = int(u_col[s, r] * q)
            colour[v] = c if c < q else q - 1
        for e in range(m):
            bonds[e] = colour[ea[e]] == colour[eb[e]] and u_edge[s, e] < p
        if thin > 0 and (s + 1) % thin == 0:
            _record_rc(bonds, ea, eb, n, j, with_index, parent, size, edge_out, comp_out, index_out)
            j += 1
    return j


@njit(cache=True, nogil=True)
def _record_rc(bonds, ea, eb, n, j, with_index, parent, size, edge_out, comp_out, index_out):
    count = 0
    idx = 0
    for e in range(bonds.size):
        if bonds[e]:
            count += 1
            if with_index:
                idx += 1 << e
    edge_out[j] = count
    comp_out[j] = _components(bonds, ea, eb, n, parent, size)
    if with_index:
        index_out[j] = idx


@njit(cache=True, nogil=True)
def _drive_hb_potts(sigma, nbr_ptr, nbr, ea, eb, beta, q, sites, u_site, u_val, thin, first, with_index,
                    agree_out, index_out, hist_out):
    counts = np.zeros(q)
    weights = np.zeros(q)
    j = first
    for s in range(u_site.size):
        if sites.size == 0:
            # everything is pinned, so the step keeps the state
            if thin > 0 and (s + 1) % thin == 0:
                _record_potts(sigma, ea, eb, q, j, with_index, agree_out, index_out, hist_out)
                j += 1
            continue
        v = sites[u_site[s]]
        for k in range(q):
            counts[k] = 0.0
        for t in range(nbr_ptr[v], nbr_ptr[v + 1]):
            counts[sigma[nbr[t]]] += 1.0
        top = counts.max()
        total = 0.0
        for k in range(q):
            if math.isinf(beta):
                weights[k] = 1.0 if counts[k] == top else 0.0
            else:
                weights[k] = math.exp(beta * (counts[k] - top))
            total += weights[k]
        target = u_val[s] * total
        acc = 0.0
        pick = q - 1
        for k in range(q):
            acc += weights[k]
            if target < acc:
                pick = k
                break
        sigma[v] = pick
        if thin > 0 and (s + 1) % thin == 0:
            _record_potts(sigma, ea, eb, q, j, with_index, agree_out, index_out, hist_out)
            j += 1
    return j


@njit(cache=True, nogil=True)
def _joined(bonds, adj_ptr, adj_edge, adj_nbr, a, b, skip, stamp, mark, stack):
    """Is ``b`` reachable from ``a`` along open edges other than ``skip``?"""
    if a == b:
        return True
    mark[a] = stamp
    top = 0
    stack[top] = a
    top += 1
    while top > 0:
        top -= 1
        x = stack[top]
        for t in range(adj_ptr[x], adj_ptr[x + 1]):
            e = adj_edge[t]
            if e == skip or not bonds[e]:
                continue
            y = adj_nbr[t]
            if mark[y] == stamp:
                continue
            if y == b:
                return True
            mark[y] = stamp
            stack[top] = y
            top += 1
    return False


@njit(cache=True, nogil=True)
def _drive_single_bond(bonds, adj_ptr, adj_edge, adj_nbr, ea, eb, n, p, q, rule, u_edge, u1, u2, thin, first,
                       with_index, edge_out, comp_out, index_out):
    mark = np.zeros(n, np.int64)
    stack = np.empty(n, np.int64)
    parent = np.empty(n, np.int64)
    size = np.empty(n, np.int64)
    stamp = 0
    w = p / (1.0 - p) if p < 1.0 else np.inf
    j = first
    for s in range(u_edge.size):
        e = u_edge[s]
        a = ea[e]
        b = eb[e]
        stamp += 1
        if rule == 0:
            joined = _joined(bonds, adj_ptr, adj_edge, adj_nbr, a, b, -1, stamp, mark, stack)
            inc = p if joined else p / q
            bonds[e] = u1[s] < inc
        elif rule == 1:
            joined = _joined(bonds, adj_ptr, adj_edge, adj_nbr, a, b, e, stamp, mark, stack)
            inc = p if joined else p / (p + q * (1.0 - p))
            bonds[e] = u1[s] < inc
        else:
            if u2[s] < 0.5:
                joined = _joined(bonds, adj_ptr, adj_edge, adj_nbr, a, b, e, stamp, mark, stack)
                has = bonds[e]
                if has:
                    ratio = (1.0 / w) * (1.0 if joined else q)
                else:
                    ratio = w * (1.0 if joined else 1.0 / q)
                if u1[s] < ratio:
                    bonds[e] = not has
        if thin > 0 and (s + 1) % thin == 0:
            _record_rc(bonds, ea, eb, n, j, with_index, parent, size, edge_out, comp_out, index_out)
            j += 1
    return j


# ---------------------------------------------------------------------------
# Python front end
# ---------------------------------------------------------------------------


@dataclass
class ChainRun:
    """Full description of a run; results are a pure function of it.

    ``thinning`` counts kernel transitions: one SW update, or one single-site
    or single-bond update for the local chains.
    """

    graph: Graph
    kind: str
    params: ModelParams
    seed: int
    samples: int
    burn_in: int = 0
    thinning: int = 1
    observables: tuple[str, ...] = ()
    record_states: bool = False
    initial: str | np.ndarray = "ordered"
    pinned_vertex: int | None = None
    stream: int = 0

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"sampler kind must be one of {SAMPLER_KINDS}")
        if self.samples < 0 or self.burn_in < 0 or self.thinning < 1:
            raise ValueError("samples and burn_in must be >= 0 and thinning >= 1")
        if self.kind == "hb_potts_pinned" and self.pinned_vertex is None:
            raise ValueError("pinned heat-bath needs pinned_vertex")
        allowed = RC_OBSERVABLES if self.on_bonds else POTTS_OBSERVABLES
        for name in self.observables:
            if name not in allowed:
                raise ValueError(f"observable {name!r} is not available for {self.kind}")
        if self.kind in ("hb_potts", "hb_potts_pinned") and set(self.observables) & {"component_count", "edge_density"}:
            raise ValueError("heat-bath on colourings has no bond configuration to observe")

    @property
    def on_bonds(self) -> bool:
        return self.kind in ("sw_rc", "sb_rc", "hb_rc", "metropolis_sb")


@dataclass
class ChainResult:
    series: dict[str, np.ndarray]
    summary: dict[str, dict]
    final_state: np.ndarray
    state_indices: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            self.write_csv(fh)

    def write_csv(self, fh) -> None:
        """Rows ``sample, <observables...>``; the histogram spreads over ``color_k`` columns."""
        names = sorted(k for k, v in self.series.items() if v.ndim == 1)
        hist = self.series.get("color_histogram")
        cols = ["sample"] + names + ([f"color_{k}" for k in range(hist.shape[1])] if hist is not None else [])
        fh.write(",".join(cols) + "\n")
        length = len(next(iter(self.series.values()))) if self.series else 0
        for i in range(length):
            row = [str(i)] + [repr(float(self.series[k][i])) for k in names]
            if hist is not None:
                row += [str(int(x)) for x in hist[i]]
            fh.write(",".join(row) + "\n")


def _csr_neighbours(graph: Graph):
    """Neighbour lists with multiplicity (loops skipped) as CSR arrays."""
    lists: list[list[tuple[int, int]]] = [[] for _ in range(graph.n)]
    for e, (a, b) in enumerate(graph.edges):
        if a != b:
            lists[a].append((e, b))
            lists[b].append((e, a))
    ptr = np.zeros(graph.n + 1, dtype=np.int64)
    for v, lst in enumerate(lists):
        ptr[v + 1] = ptr[v] + len(lst)
    edge = np.array([e for lst in lists for e, _ in lst], dtype=np.int64)
    nbr = np.array([w for lst in lists for _, w in lst], dtype=np.int64)
    return ptr, edge, nbr


def _initial_state(run: ChainRun, rng: np.random.Generator) -> np.ndarray:
    g = run.graph
    if isinstance(run.initial, np.ndarray):
        state = run.initial.astype(np.bool_ if run.on_bonds else np.int64).copy()
    elif run.initial == "ordered":
        state = np.ones(g.m, dtype=np.bool_) if run.on_bonds else np.zeros(g.n, dtype=np.int64)
    elif run.initial == "random":
        state = rng.random(g.m) < 0.5 if run.on_bonds else rng.integers(run.params.q, size=g.n)
    else:
        raise ValueError("initial must be 'ordered', 'random' or a state array")
    if run.kind == "hb_potts_pinned":
        state[run.pinned_vertex] = 0
    return state


def run_chain(run: ChainRun) -> ChainResult:
    g, prm = run.graph, run.params
    rng = make_rng(run.seed, run.stream)
    state = _initial_state(run, rng)
    ea, eb = (np.ascontiguousarray(x, dtype=np.int64) for x in g.endpoints) if g.m else (
        np.zeros(0, np.int64), np.zeros(0, np.int64))
    q = int(prm.q) if prm.integer_q else prm.q
    total = run.samples
    with_index = bool(run.record_states)
    agree = np.zeros(total, np.int64)
    index = np.zeros(total, np.int64)
    comp = np.zeros(total, np.int64)
    opened = np.zeros(total, np.int64)
    hist = np.zeros((total, int(q) if not run.on_bonds else 1), np.int64)

    kind = run.kind
    if kind in ("hb_potts", "hb_potts_pinned"):
        ptr, _, nbr = _csr_neighbours(g)
        sites = np.array([v for v in range(g.n) if v != run.pinned_vertex], dtype=np.int64)
        per_step = 2
    elif kind in _RULE:
        ptr, adj_edge, adj_nbr = _csr_neighbours(g)
        per_step = 3 if kind == "metropolis_sb" else 2
    else:
        per_step = g.m + g.n

    def advance(steps: int, thin: int, first: int) -> int:
        """Apply ``steps`` transitions, recording every ``thin``-th state from slot ``first``."""
        if steps == 0:
            return first
        u = rng.random((steps, per_step))
        if kind == "sw_potts":
            ue, uc = u[:, : g.m], u[:, g.m :]
            return _drive_sw_potts(state, ea, eb, prm.p, q, ue, uc, thin, first, with_index,
                                   agree, index, hist, comp, opened)
        if kind == "sw_rc":
            ue, uc = u[:, : g.m], u[:, g.m :]
            return _drive_sw_rc(state, ea, eb, g.n, prm.p, q, ue, uc, thin, first, with_index, opened, comp, index)
        if kind in ("hb_potts", "hb_potts_pinned"):
            us = np.minimum((u[:, 0] * sites.size).astype(np.int64), sites.size - 1)
            return _drive_hb_potts(state, ptr, nbr, ea, eb, prm.beta, q, sites, us, u[:, 1], thin, first, with_index,
                                   agree, index, hist)
        ue = np.minimum((u[:, 0] * g.m).astype(np.int64), g.m - 1)
        return _drive_single_bond(state, ptr, adj_edge, adj_nbr, ea, eb, g.n, prm.p, float(q), _RULE[kind],
                                  ue, u[:, 1], u[:, per_step - 1], thin, first, with_index, opened, comp, index)

    block = max(1, RANDOM_BLOCK // max(1, per_step))
    left = run.burn_in
    while left:
        k = min(block, left)
        advance(k, 0, 0)
        left -= k
    samples_per_block = max(1, block // run.thinning)
    j = 0
    while j < total:
        k = min(samples_per_block, total - j)
        j = advance(k * run.thinning, run.thinning, j)

    series: dict[str, np.ndarray] = {}
    for name in run.observables:
        if name == "agreement_count":
            series[name] = agree
        elif name == "color_histogram":
            series[name] = hist
        elif name == "component_count":
            series[name] = comp
        elif name == "edge_density":
            series[name] = opened / g.m if g.m else opened.astype(float)
    summary = {name: summarize(series[name]) for name in series if series[name].ndim == 1}
    return ChainResult(series, summary, state.copy(), index if with_index else None,
                       meta={"kind": kind, "seed": run.seed, "stream": run.stream, "samples": total})


def run_chains(runs: list[ChainRun], workers: int | None = None) -> list[ChainResult]:
    """Independent runs on a thread pool; results come back in input order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(runs) <= 1:
        return [run_chain(r) for r in runs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_chain, runs))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SWGAP_WORKERS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Normalised autocorrelation function by FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    y = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] == 0:
        out = np.zeros(n)
        out[0] = 1.0
        return out
    return acov / acov[0]


def integrated_autocorrelation(x: np.ndarray) -> tuple[float, int]:
    """Initial-positive-sequence estimate of the integrated time and its truncation lag.

    Pairs ``rho(2k) + rho(2k+1)`` are summed while positive; ``tau = 1`` for
    independent samples.
    """
    rho = autocorrelation(x)
    if rho.size < 2:
        return 1.0, 0
    tau = -1.0
    k = 0
    while 2 * k + 1 < rho.size:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0:
            break
        tau += 2 * pair
        k += 1
    return max(tau, 1e-12), 2 * k


def summarize(x: np.ndarray) -> dict:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return {"mean": math.nan, "variance": math.nan, "tau_int": math.nan, "truncation_lag": 0}
    tau, lag = integrated_autocorrelation(x)
    return {"mean": float(x.mean()), "variance": float(x.var()), "tau_int": float(tau), "truncation_lag": int(lag)}


def cross_correlation(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Sample correlation of two equally long series and its standard error under independence.

    The error uses Bartlett's formula ``var(r) = (1/N) sum_k rho_x(k) rho_y(k)``,
    summed over lags up to the larger initial-positive-sequence truncation,
    so serially correlated chains are not flagged spuriously.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    r = float(np.corrcoef(x, y)[0, 1])
    lag = max(integrated_autocorrelation(x)[1], integrated_autocorrelation(y)[1])
    rx, ry = autocorrelation(x)[: lag + 1], autocorrelation(y)[: lag + 1]
    var = (1 + 2 * float(np.dot(rx[1:], ry[1:]))) / x.size
    return r, math.sqrt(max(var, 1 / x.size))


def empirical_vs_exact(run: ChainRun, exact: EnumeratedMeasure) -> tuple[float, float]:
    """TV distance and chi-square p-value of the sampled state histogram against ``exact``."""
    if not run.record_states:
        run = ChainRun(**{**run.__dict__, "record_states": True})
    res = run_chain(run)
    idx = res.state_indices
    if run.kind == "hb_potts_pinned":
        raise ValueError("compare pinned chains through their full colourings instead")
    counts = np.bincount(idx, minlength=exact.size).astype(float)
    if counts.size != exact.size:
        raise ValueError("sampled states fall outside the enumerated space")
    emp = counts / counts.sum()
    tv = 0.5 * float(np.abs(emp - exact.probabilities).sum())
    keep = exact.probabilities > 0
    pval = float(stats.chisquare(counts[keep], exact.probabilities[keep] * counts.sum()).pvalue)
    return tv, pval


def sweep_rate(side: int, params: ModelParams, sweeps: int, seed: int = 0) -> float:
    """SW updates per second on the ``side x side`` lattice after a warm-up run."""
    from .graph import make_square_lattice

    g, _ = make_square_lattice(side)
    run_chain(ChainRun(g, "sw_potts", params, seed, samples=2))
    start = time.perf_counter()
    run_chain(ChainRun(g, "sw_potts", params, seed, samples=sweeps, observables=("agreement_count",)))
    return sweeps / (time.perf_counter() - start)
