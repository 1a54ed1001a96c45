"""Comparisons between the local bond dynamics (heat-bath, single-bond, Metropolis)."""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .joint import CheckResult, check_leq
from .kernels import hb_rc_matrix, metropolis_sb_matrix, sb_rc_matrix
from .measures import ModelParams
from .spectral import SpectralInputError, comparison_bound, gap_value


def _case(graph: Graph, params: ModelParams) -> str:
    return f"{graph.name}|q={params.q}|p={params.p!r}"


def sb_hb_ratio_range(graph: Graph, params: ModelParams) -> tuple[float, float]:
    """Min and max of ``thb(A, A^e) / sb(A, A^e)`` over all ``A`` and ``e``."""
    thb = hb_rc_matrix(graph, params).matrix
    sb = sb_rc_matrix(graph, params).matrix
    masks = np.arange(1 << graph.m, dtype=np.int64)
    ratios = [thb[masks, masks ^ (1 << e)] / sb[masks, masks ^ (1 << e)] for e in range(graph.m)]
    r = np.concatenate(ratios)
    return float(r.min()), float(r.max())


def linear_width_of_ordering(graph: Graph, order=None) -> int:
    """Largest number of vertices shared by a prefix and its complementary suffix of ``order``."""
    order = list(range(graph.m)) if order is None else list(order)
    width = 0
    for i in range(1, len(order)):
        head = {v for e in order[:i] for v in graph.edges[e]}
        tail = {v for e in order[i:] for v in graph.edges[e]}
        width = max(width, len(head & tail))
    return width


def certify_sb_hb(graph: Graph, params: ModelParams, slack: float = 1e-8) -> list[CheckResult]:
    case = _case(graph, params)
    lo, hi = sb_hb_ratio_range(graph, params)
    top = 1 / (1 - params.p * (1 - 1 / params.q))
    out = [
        check_leq("1 <= thb/sb on flips", case, 1.0, lo, 1e-12),
        check_leq("thb/sb <= 1/(1-p(1-1/q)) on flips", case, hi, top, 1e-12),
    ]
    thb = hb_rc_matrix(graph, params)
    sb = sb_rc_matrix(graph, params)
    try:
        g_thb, g_sb = gap_value(thb), gap_value(sb)
    except SpectralInputError as exc:
        # keep the entrywise verdicts; a broken kernel should not hide them
        out.append(CheckResult("thb and sb are reversible and ergodic", case, np.inf, 0.0, "<=", False, slack,
                               {"error": str(exc)}))
        return out
    out.append(check_leq("(1-p(1-1/q)) gap(thb) <= gap(sb)", case, g_thb / top, g_sb, slack))
    out.append(check_leq("gap(sb) <= gap(thb)", case, g_sb, g_thb, slack))
    cmp = comparison_bound(thb, sb, off_diagonal=True, slack=slack)
    out.append(check_leq("gap(thb) <= (A/a) gap(sb)", case, cmp.gap_1, cmp.implied_ratio * cmp.gap_2, slack,
                         A=cmp.flow_ratio_max, a=cmp.measure_ratio_min))
    return out


def certify_metropolis(graph: Graph, params: ModelParams, order=None, slack: float = 1e-8) -> list[CheckResult]:
    """Metropolis versus single-bond, and the width bound for a given edge ordering."""
    case = _case(graph, params)
    q, m = params.q, graph.m
    pm = metropolis_sb_matrix(graph, params)
    sb = sb_rc_matrix(graph, params)
    off = ~np.eye(pm.size, dtype=bool)
    ratio = np.divide(pm.matrix, q * sb.matrix, out=np.zeros_like(pm.matrix), where=off & (sb.matrix > 0))
    escaped = bool(np.any(off & (pm.matrix > 0) & (sb.matrix == 0)))
    g_m, g_sb = gap_value(pm), gap_value(sb)
    width = linear_width_of_ordering(graph, order)
    out = [
        check_leq("P_M <= q sb off the diagonal", case, float(ratio.max()) if not escaped else np.inf, 1.0, 1e-12),
        check_leq("1/gap(sb) <= q/gap(P_M)", case, 1 / g_sb, q / g_m, slack),
        check_leq("1/gap(P_M) <= 2 m^2 q^width", case, 1 / g_m, 2 * m * m * q**width, slack, width=width),
        check_leq("1/(2 q^(width+1) m^2) <= gap(sb)", case, 1 / (2 * q ** (width + 1) * m * m), g_sb, slack, width=width),
    ]
    return out
