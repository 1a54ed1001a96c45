"""Comparison of SW with single-site heat-bath on colourings."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .graph import Graph
from .joint import CheckResult, check_leq, check_small
from .kernels import (
    TransitionMatrix,
    hb_potts_matrix,
    hb_potts_pinned_matrix,
    sw_potts_matrix,
)
from .measures import ModelParams, pinned_states, potts_index, potts_states
from .spectral import gap_value

EXHAUSTIVE_RATIO_CAP = 256


@dataclass(frozen=True)
class ComparisonConstants:
    c_sw: float
    c_sw_tilde: float
    a1: float
    a2: float
    a3: float
    delta: int
    delta_tilde: int

    def to_json(self) -> dict:
        return asdict(self)


def comparison_constants(graph: Graph, params: ModelParams, pinned: int | None = None) -> ComparisonConstants:
    q, beta = params.require_potts(), params.beta
    delta = graph.max_degree
    delta_t = max((graph.degree(u) for u in range(graph.n) if u != pinned), default=0) if pinned is not None else delta
    log_base = math.log(q) + 2 * beta
    c_sw = math.exp(-math.log(q) - 2 * delta * log_base)
    c_sw_t = math.exp(-math.log(q) - 2 * delta_t * log_base)
    a1 = math.exp(-beta)
    a2 = 1 + q * math.expm1(beta)
    a3 = q * math.exp(2 * beta) - (q - 1) * math.exp(beta)
    return ComparisonConstants(c_sw, c_sw_t, a1, a2, a3, delta, delta_t)


def _case(graph: Graph, params: ModelParams) -> str:
    return f"{graph.name}|q={params.q}|beta={params.beta!r}"


def _gap_check(name, case, lhs_gap, rhs_gap, constant, slack=1e-8) -> CheckResult:
    """``lhs_gap >= constant * rhs_gap`` written as ``constant * rhs_gap <= lhs_gap``."""
    bound = constant * rhs_gap
    res = check_leq(name, case, bound, lhs_gap, slack)
    res.detail.update(constant=constant, lhs_gap=lhs_gap, rhs_gap=rhs_gap, bound=bound)
    return res


def build_Q(graph: Graph, params: ModelParams, hb: TransitionMatrix | None = None, sw: TransitionMatrix | None = None) -> TransitionMatrix:
    """Auxiliary chain ``hb @ sw @ hb``; reversible because both factors are."""
    hb = hb_potts_matrix(graph, params) if hb is None else hb
    sw = sw_potts_matrix(graph, params) if sw is None else sw
    return TransitionMatrix("aux_q", hb.matrix @ sw.matrix @ hb.matrix, hb.stationary, label="hb sw hb")


def _single_site_images(n: int, q: int) -> list[np.ndarray]:
    """Index arrays ``sigma -> sigma^{v,k}`` for every vertex ``v`` and colour ``k``."""
    states = potts_states(n, q)
    idx = np.arange(q**n, dtype=np.int64)
    out = []
    for v in range(n):
        place = q ** (n - 1 - v)
        for k in range(q):
            out.append(idx + (k - states[:, v]) * place)
    return out


def exhaustive_sw_ratio(sw: np.ndarray, n: int, q: int) -> float:
    """``max sw(s1, t1) / sw(s2, t2)`` over ``s1 ~ s2`` and ``t1 ~ t2`` (differing in at most one vertex)."""
    images = _single_site_images(n, q)
    row_min = sw.copy()
    for img in images:
        row_min = np.minimum(row_min, sw[img, :])
    both_min = row_min.copy()
    for img in images:
        both_min = np.minimum(both_min, row_min[:, img])
    return float((sw / both_min).max())


def certify_spin_bound(graph: Graph, params: ModelParams, slack: float = 1e-8) -> list[CheckResult]:
    """``gap(sw) >= c_sw gap(hb)`` plus the intermediate chain through ``Q``."""
    case = _case(graph, params)
    q = params.require_potts()
    k = comparison_constants(graph, params)
    hb = hb_potts_matrix(graph, params)
    sw = sw_potts_matrix(graph, params)
    Q = build_Q(graph, params, hb, sw)
    g_hb, g_sw, g_q = gap_value(hb), gap_value(sw), gap_value(Q)
    out = [
        _gap_check("gap(sw) >= c_sw gap(hb)", case, g_sw, g_hb, k.c_sw, slack),
        check_leq("gap(hb) <= gap(Q)", case, g_hb, g_q, slack),
        check_small("a3 = a2 / a1", case, abs(k.a3 - k.a2 / k.a1) / k.a3, 1e-12),
        check_leq("a3 <= q exp(2 beta)", case, k.a3, q * math.exp(2 * params.beta), 0.0),
    ]
    a3_bound = q * k.a3 ** (2 * k.delta)
    out.append(check_leq("gap(Q) <= q a3^(2 Delta) gap(sw)", case, g_q, a3_bound * g_sw, slack))
    if q**graph.n <= EXHAUSTIVE_RATIO_CAP:
        c = exhaustive_sw_ratio(sw.matrix, graph.n, q)
        out.append(check_leq("c <= a3^(2 Delta)", case, c, k.a3 ** (2 * k.delta), slack))
        entry = float((Q.matrix / (q * c * sw.matrix)).max())
        out.append(check_leq("Q <= q c sw entrywise", case, entry, 1.0, slack))
        out.append(check_leq("gap(Q) <= q c gap(sw)", case, g_q, q * c * g_sw, slack, c=c))
    return out


def pinned_sw_matrix(graph: Graph, params: ModelParams, pinned: int, sw: TransitionMatrix | None = None) -> TransitionMatrix:
    """SW viewed on colourings relative to the pinned vertex: ``q sw(s^1, t^1)``."""
    q = params.require_potts()
    sw = sw_potts_matrix(graph, params) if sw is None else sw
    full = potts_index(pinned_states(graph.n, q, pinned), q)
    P = q * sw.matrix[np.ix_(full, full)]
    pi_w = q * sw.stationary[full]
    return TransitionMatrix("sw_pinned", P, pi_w, label="pinned sw")


def certify_pinned_spin_bound(graph: Graph, pinned: int, params: ModelParams, slack: float = 1e-8) -> list[CheckResult]:
    """``gap(sw) >= c~ gap(hb^w)`` with the degree maximum taken off the pinned vertex."""
    case = _case(graph, params) + f"|pinned={pinned}"
    k = comparison_constants(graph, params, pinned)
    sw = sw_potts_matrix(graph, params)
    hbw = hb_potts_pinned_matrix(graph, params, pinned)
    g_sw, g_hbw = gap_value(sw), gap_value(hbw)
    res = _gap_check("gap(sw) >= c~_sw gap(hb pinned)", case, g_sw, g_hbw, k.c_sw_tilde, slack)
    res.detail["delta_tilde"] = k.delta_tilde
    bar = pinned_sw_matrix(graph, params, pinned, sw)
    out = [
        res,
        check_small("pinned measure is q pi(extension)", case, np.abs(bar.stationary - hbw.stationary).max(), 1e-12),
        check_small("pinned SW is reversible", case, bar.reversibility_residual(), 1e-12),
        check_small("pinned SW keeps the gap", case, abs(gap_value(bar) - g_sw), 1e-9),
    ]
    return out


def heat_bath_conditionals(graph: Graph, params: ModelParams) -> np.ndarray:
    """``cond[u, sigma, k]``: heat-bath law of the colour at ``u`` given ``sigma``."""
    q = params.require_potts()
    states = potts_states(graph.n, q)
    counts = np.zeros((graph.n, states.shape[0], q))
    for a, b in graph.edges:
        if a == b:
            continue
        counts[a, np.arange(states.shape[0]), states[:, b]] += 1
        counts[b, np.arange(states.shape[0]), states[:, a]] += 1
    logits = params.beta * (counts - counts.max(axis=2, keepdims=True))
    w = np.exp(logits)
    return w / w.sum(axis=2, keepdims=True)


def dobrushin_influence(graph: Graph, params: ModelParams) -> np.ndarray:
    """``rho[u, v]``: worst TV change of the update at ``u`` when only ``v`` changes."""
    q = params.require_potts()
    cond = heat_bath_conditionals(graph, params)
    images = _single_site_images(graph.n, q)
    rho = np.zeros((graph.n, graph.n))
    for v in range(graph.n):
        for k in range(q):
            img = images[v * q + k]
            tv = 0.5 * np.abs(cond - cond[:, img, :]).sum(axis=2).max(axis=1)
            rho[:, v] = np.maximum(rho[:, v], tv)
    return rho


def is_simple(graph: Graph) -> bool:
    seen = set()
    for a, b in graph.edges:
        key = (min(a, b), max(a, b))
        if a == b or key in seen:
            return False
        seen.add(key)
    return True


def certify_dobrushin(graph: Graph, params: ModelParams, tol: float = 1e-12) -> list[CheckResult]:
    """``rho[u, v] <= tanh(beta / 2) A(u, v)`` for simple graphs."""
    case = _case(graph, params)
    if not is_simple(graph):
        raise ValueError("the influence bound is stated for simple graphs")
    rho = dobrushin_influence(graph, params)
    excess = rho - math.tanh(params.beta / 2) * graph.adjacency_indicator()
    return [check_leq("rho <= tanh(beta/2) A", case, float(excess.max()), 0.0, tol, max_rho=float(rho.max()))]


def certify_subgraph_sandwich(graph: Graph, params: ModelParams, removed, tol: float = 1e-12) -> list[CheckResult]:
    """``a1^k P_G0 <= P_G <= a2^k P_G0`` entrywise, ``G0 = G`` minus ``removed``."""
    case = _case(graph, params) + f"|removed={sorted(removed)}"
    k = comparison_constants(graph, params)
    sub = graph.without_edges(removed)
    PG = sw_potts_matrix(graph, params).matrix
    P0 = sw_potts_matrix(sub, params).matrix
    r = len(set(removed))
    low = float((k.a1**r * P0 / PG).max())
    high = float((PG / (k.a2**r * P0)).max())
    return [
        check_leq("a1^k P_G0 <= P_G", case, low, 1.0, tol),
        check_leq("P_G <= a2^k P_G0", case, high, 1.0, tol),
    ]


def certify_single_vertex_perturbation(graph: Graph, params: ModelParams, tol: float = 1e-12) -> list[CheckResult]:
    """``P(s^{v,k}, t^{v,l}) <= a3^deg(v) P(s, t)`` for all ``s, t, v, k, l``."""
    case = _case(graph, params)
    q = params.require_potts()
    k = comparison_constants(graph, params)
    P = sw_potts_matrix(graph, params).matrix
    images = _single_site_images(graph.n, q)
    worst = 0.0
    for v in range(graph.n):
        bound = k.a3 ** graph.degree(v)
        for i in range(q):
            rows = images[v * q + i]
            for j in range(q):
                cols = images[v * q + j]
                worst = max(worst, float((P[np.ix_(rows, cols)] / (bound * P)).max()))
    return [check_leq("P(s^vk, t^vl) <= a3^deg(v) P(s, t)", case, worst, 1.0, tol)]


def certify_flip_invariance(graph: Graph, params: ModelParams, tol: float = 1e-12) -> list[CheckResult]:
    """``sw(s, t) = sw(s + k, t + l)`` for all global colour shifts."""
    case = _case(graph, params)
    q = params.require_potts()
    P = sw_potts_matrix(graph, params).matrix
    states = potts_states(graph.n, q)
    shifted = [potts_index((states + k) % q, q) for k in range(q)]
    dev = max(float(np.abs(P[np.ix_(shifted[k], shifted[l])] - P).max()) for k in range(q) for l in range(q))
    return [check_small("sw invariant under global colour shifts", case, dev, tol)]


def pinned_boundary_deviation(side: int, params: ModelParams) -> float:
    """Pinning the apex of the dual lattice reproduces the boundary-coloured grid measure."""
    from .graph import make_dual_square_lattice
    from .measures import boundary_potts_measure, pinned_potts_measure

    g = make_dual_square_lattice(side)
    pinned = pinned_potts_measure(g, params, g.n - 1).probabilities
    boundary = boundary_potts_measure(side - 1, params).probabilities
    return float(np.abs(pinned - boundary).max())
