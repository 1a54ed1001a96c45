"""Planar duality for the random-cluster model and the bond dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import DualLinkage, Graph, dual_mask_array
from .joint import CheckResult, check_leq, check_small
from .kernels import hb_rc_matrix, sb_rc_matrix, sw_rc_matrix
from .measures import ModelParams, rc_measure
from .spectral import gap_value


def dual_p(p: float, q: float) -> float:
    """Dual edge probability, solving ``p*/(1-p*) = q(1-p)/p``."""
    if not 0 < p < 1:
        raise ValueError("dual_p needs 0 < p < 1")
    if q <= 0:
        raise ValueError("q must be positive")
    return q * (1 - p) / (p + q * (1 - p))


def self_dual_p(q: float) -> float:
    return math.sqrt(q) / (1 + math.sqrt(q))


def critical_beta(q: float) -> float:
    """Inverse temperature whose ``p = 1 - exp(-beta)`` is the self-dual point."""
    return math.log1p(math.sqrt(q))


@dataclass(frozen=True)
class DualParams:
    p: float
    p_star: float
    q: float

    @classmethod
    def of(cls, p: float, q: float) -> "DualParams":
        return cls(p, dual_p(p, q), q)


def dual_params(params: ModelParams) -> ModelParams:
    return ModelParams.from_p(params.q, dual_p(params.p, params.q), real_q=params.real_q)


def configuration_map(linkage: DualLinkage, m: int) -> np.ndarray:
    """Index of ``A*`` for every primal bitmask ``A``."""
    return dual_mask_array(linkage, np.arange(1 << m, dtype=np.int64))


def _case(graph: Graph, params: ModelParams) -> str:
    return f"{graph.name}|q={params.q}|p={params.p!r}"


def measure_duality_check(graph: Graph, linkage: DualLinkage, params: ModelParams) -> float:
    """``max_A |mu_G(A) - mu_dual(A*)|`` with the dual measure at ``p*``."""
    mu = rc_measure(graph, params).probabilities
    mu_d = rc_measure(linkage.dual_graph, dual_params(params)).probabilities
    return float(np.abs(mu - mu_d[configuration_map(linkage, graph.m)]).max())


def partition_offset_residual(graph: Graph, linkage: DualLinkage, params: ModelParams) -> float:
    """Log-space residual of ``Z(G*, p*) = q**(1-|V|) (p*/(1-p*))**|E| Z(G, p)``."""
    dp = dual_params(params)
    log_z = rc_measure(graph, params).log_partition
    log_zd = rc_measure(linkage.dual_graph, dp).log_partition
    predicted = (1 - graph.n) * math.log(params.q) + graph.m * dp.log_bond_weight + log_z
    return abs(log_zd - predicted)


def certify_measure_duality(graph: Graph, linkage: DualLinkage, params: ModelParams, tol: float = 1e-12) -> list[CheckResult]:
    case = _case(graph, params)
    return [
        check_small("mu_G(A) = mu_dual(A*)", case, measure_duality_check(graph, linkage, params), tol),
        check_small("dual partition function offset", case, partition_offset_residual(graph, linkage, params), 1e-10),
    ]


def certify_hb_duality(
    graph: Graph, linkage: DualLinkage, params: ModelParams, tol: float = 1e-12, with_gap: bool = True
) -> list[CheckResult]:
    """Entrywise ``thb(A, B) = thb*(A*, B*)``; gap equality when the space is small."""
    case = _case(graph, params)
    large = graph.m > 8
    P = hb_rc_matrix(graph, params, sparse=large)
    Pd = hb_rc_matrix(linkage.dual_graph, dual_params(params), sparse=large)
    perm = configuration_map(linkage, graph.m)
    if large:
        mapped = Pd.matrix[perm][:, perm]
        dev = abs(P.matrix - mapped).max()
    else:
        dev = np.abs(P.matrix - Pd.matrix[np.ix_(perm, perm)]).max()
    out = [check_small("thb(A,B) = thb_dual(A*,B*)", case, dev, tol)]
    if with_gap and not large:
        g1, g2 = gap_value(P), gap_value(Pd)
        out.append(check_small("gap(thb) = gap(thb_dual)", case, abs(g1 - g2), 1e-9, gap=g1))
    return out


def certify_dual_gap_bounds(graph: Graph, linkage: DualLinkage, params: ModelParams, slack: float = 1e-8) -> list[CheckResult]:
    """``gap(SB) <= q gap(SB*)`` and, for ``m >= 3``, ``gap(SW) <= 8 q m log m gap(SW*)``."""
    case = _case(graph, params)
    dp = dual_params(params)
    dual = linkage.dual_graph
    q, m = params.q, graph.m
    g_sb, g_sbd = gap_value(sb_rc_matrix(graph, params)), gap_value(sb_rc_matrix(dual, dp))
    out = [check_leq("gap(SB) <= q gap(SB dual)", case, g_sb, q * g_sbd, slack, ratio=g_sb / g_sbd)]
    if m >= 3 and params.integer_q:
        g_sw, g_swd = gap_value(sw_rc_matrix(graph, params)), gap_value(sw_rc_matrix(dual, dp))
        c = 8 * q * m * math.log(m)
        out.append(check_leq("gap(SW) <= 8 q m log m gap(SW dual)", case, g_sw, c * g_swd, slack,
                             ratio=g_sw / g_swd, constant=c))
    return out
