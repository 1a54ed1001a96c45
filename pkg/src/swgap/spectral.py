"""Spectral gaps, weighted operator norms and exact mixing times."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as graph_components

from .kernels import TransitionMatrix

REVERSIBILITY_TOL = 1e-9
TMIX_THRESHOLD = 1 / (2 * math.e)


class SpectralInputError(ValueError):
    """The matrix is not a reversible ergodic chain for its declared measure."""


@dataclass
class SpectralReport:
    gap: float
    one_minus_xi2: float
    second_eigenvalue: float
    min_eigenvalue: float
    reversibility_residual: float
    pi_min: float
    mixing_time_bounds: tuple[float, float]
    eigen_residual: float
    size: int
    t_mix_exact: int | None = None
    label: str = ""

    def to_json(self) -> dict:
        out = asdict(self)
        out["mixing_time_bounds"] = list(self.mixing_time_bounds)
        return out


def mixing_time_bounds(gap: float, pi_min: float) -> tuple[float, float]:
    """``(1/gap - 1, log(2e / pi_min) / gap)``: the bracket for t_mix(1/2e)."""
    if gap <= 0:
        return (math.inf, math.inf)
    return (1 / gap - 1, math.log(2 * math.e / pi_min) / gap)


def is_ergodic(matrix) -> bool:
    """Strong connectivity of the digraph of positive entries."""
    adj = sp.csr_matrix(matrix, copy=True)
    adj.data = (adj.data > 0).astype(float)
    adj.eliminate_zeros()
    count, _ = graph_components(adj, directed=True, connection="strong")
    return count == 1


def symmetrized(tm: TransitionMatrix) -> np.ndarray:
    root = np.sqrt(tm.stationary)
    S = root[:, None] * tm.dense() / root[None, :]
    return (S + S.T) / 2


def eigenvalues(tm: TransitionMatrix) -> np.ndarray:
    return np.linalg.eigvalsh(symmetrized(tm))


def _validate(tm: TransitionMatrix, tol: float) -> float:
    if np.any(tm.stationary <= 0):
        raise SpectralInputError("stationary measure has zero-mass states")
    resid = tm.reversibility_residual()
    if resid > tol:
        raise SpectralInputError(f"{tm.label or tm.kind}: detailed balance residual {resid:.3e} exceeds {tol:g}")
    if not is_ergodic(tm.matrix):
        raise SpectralInputError(f"{tm.label or tm.kind}: chain is not irreducible")
    return resid


def spectral_gap(tm: TransitionMatrix, with_tmix: bool = False, tol: float = REVERSIBILITY_TOL) -> SpectralReport:
    """Absolute spectral gap ``1 - max(|xi_2|, |xi_min|)`` via a symmetric eigensolve."""
    resid = _validate(tm, tol)
    S = symmetrized(tm)
    vals, vecs = np.linalg.eigh(S)
    eig_resid = float(np.abs(S @ vecs - vecs * vals[None, :]).max())
    pi_min = float(tm.stationary.min())
    if vals.size == 1:
        xi2 = xmin = 0.0
    else:
        xi2, xmin = float(vals[-2]), float(vals[0])
    gap = 1 - max(abs(xi2), abs(xmin))
    report = SpectralReport(
        gap=gap,
        one_minus_xi2=1 - xi2,
        second_eigenvalue=xi2,
        min_eigenvalue=xmin,
        reversibility_residual=resid,
        pi_min=pi_min,
        mixing_time_bounds=mixing_time_bounds(gap, pi_min),
        eigen_residual=eig_resid,
        size=tm.size,
        label=tm.label,
    )
    if with_tmix:
        report.t_mix_exact = exact_mixing_time(tm)
    return report


def gap_value(tm: TransitionMatrix) -> float:
    return spectral_gap(tm).gap


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------


def operator_norm_weighted(X, row_measure: np.ndarray, col_measure: np.ndarray | None = None) -> float:
    """Norm of ``X`` as a map from ``L2(col_measure)`` to ``L2(row_measure)``."""
    if col_measure is None:
        col_measure = row_measure
    row_measure = np.asarray(row_measure, dtype=float)
    col_measure = np.asarray(col_measure, dtype=float)
    if np.any(row_measure <= 0) or np.any(col_measure <= 0):
        raise SpectralInputError("weighted norms need strictly positive measures")
    X = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)
    scaled = np.sqrt(row_measure)[:, None] * X / np.sqrt(col_measure)[None, :]
    return float(np.linalg.norm(scaled, 2))


def adjoint(X, row_measure: np.ndarray, col_measure: np.ndarray) -> np.ndarray:
    """Adjoint of ``X: L2(col) -> L2(row)``: ``X*(c, r) = row(r) X(r, c) / col(c)``."""
    X = X.toarray() if sp.issparse(X) else np.asarray(X, dtype=float)
    return (np.asarray(row_measure)[None, :] * X.T) / np.asarray(col_measure)[:, None]


def projection_onto_constants(pi: np.ndarray, rows: int | None = None) -> np.ndarray:
    """Matrix with every row equal to ``pi``."""
    return np.tile(pi, (pi.size if rows is None else rows, 1))


def gap_from_norm(tm: TransitionMatrix) -> float:
    """``1 - ||P - S_pi||_pi``; equals the absolute spectral gap for reversible P."""
    return 1 - operator_norm_weighted(tm.dense() - projection_onto_constants(tm.stationary), tm.stationary)


# ---------------------------------------------------------------------------
# mixing
# ---------------------------------------------------------------------------


def worst_tv(power: np.ndarray, pi: np.ndarray) -> float:
    return float(0.5 * np.abs(power - pi[None, :]).sum(axis=1).max())


def tv_mixing_curve(tm: TransitionMatrix, t_max: int, budget: float = 4e9) -> np.ndarray:
    """``max_x TV(P^t(x, .), pi)`` for ``t = 0..t_max`` by repeated multiplication."""
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    size = tm.size
    if t_max * float(size) ** 3 > budget * size:
        raise ValueError(f"mixing curve of length {t_max} on {size} states exceeds the work budget")
    P = tm.dense()
    curve = np.empty(t_max + 1)
    power = np.eye(size)
    curve[0] = worst_tv(power, tm.stationary)
    for t in range(1, t_max + 1):
        power = power @ P
        curve[t] = worst_tv(power, tm.stationary)
    return curve


def mixing_envelopes(gap: float, pi_min: float, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    decay = (1 - gap) ** np.asarray(t, dtype=float)
    return 0.5 * decay, decay / pi_min


def exact_mixing_time(tm: TransitionMatrix, threshold: float = TMIX_THRESHOLD, t_limit: int = 2**40) -> int:
    """Smallest ``t`` with worst-case TV at most ``threshold``.

    Worst-case TV is non-increasing in ``t``, so dyadic squaring brackets the
    answer and a binary descent over the stored powers pins it down.
    """
    pi = tm.stationary
    size = tm.size
    if worst_tv(np.eye(size), pi) <= threshold:
        return 0
    powers = [tm.dense()]
    if worst_tv(powers[0], pi) <= threshold:
        return 1
    while worst_tv(powers[-1], pi) > threshold:
        if 2 ** len(powers) > t_limit:
            raise ValueError("mixing time exceeds t_limit")
        powers.append(powers[-1] @ powers[-1])
    j = len(powers) - 1
    lo, mat_lo = 2 ** (j - 1), powers[j - 1]
    for i in range(j - 2, -1, -1):
        cand = mat_lo @ powers[i]
        if worst_tv(cand, pi) > threshold:
            lo, mat_lo = lo + 2**i, cand
    return lo + 1


# ---------------------------------------------------------------------------
# comparison of two chains with the same state space
# ---------------------------------------------------------------------------


@dataclass
class ComparisonResult:
    flow_ratio_max: float
    measure_ratio_min: float
    implied_ratio: float
    gap_1: float
    gap_2: float
    holds: bool


def comparison_bound(tm1: TransitionMatrix, tm2: TransitionMatrix, off_diagonal: bool = True, slack: float = 1e-8) -> ComparisonResult:
    """Constants ``A = max pi1 P1 / pi2 P2`` and ``a = min pi1 / pi2``; checks ``gap1 <= (A/a) gap2``.

    Restricting ``A`` to off-diagonal pairs is valid when ``P2`` has a
    nonnegative spectrum; pass ``off_diagonal=False`` otherwise.
    """
    P1, P2 = tm1.dense(), tm2.dense()
    F1 = tm1.stationary[:, None] * P1
    F2 = tm2.stationary[:, None] * P2
    mask = F1 > 0
    if off_diagonal:
        np.fill_diagonal(mask, False)
    if np.any(mask & (F2 <= 0)):
        A = math.inf
    else:
        A = float((F1[mask] / F2[mask]).max()) if mask.any() else 0.0
    a = float((tm1.stationary / tm2.stationary).min())
    g1, g2 = gap_value(tm1), gap_value(tm2)
    ratio = A / a
    return ComparisonResult(A, a, ratio, g1, g2, holds_leq(g1, ratio * g2, slack))


def holds_leq(lhs: float, rhs: float, slack: float = 1e-8) -> bool:
    """``lhs <= rhs`` up to ``slack * max(1, |rhs|)``."""
    if math.isinf(rhs) and rhs > 0:
        return True
    return lhs <= rhs + slack * max(1.0, abs(rhs))
