"""Operators on the joint colouring/bond space and the norm inequalities they satisfy.

Only pairs ``(sigma, A)`` with ``A`` inside the agreement set of ``sigma`` are
enumerated, so every joint state has positive mass and ``L2(nu)`` is well
defined.  Joint states are ordered by composite index ``sigma * 2**m + A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, all_subset_labels, component_counts
from .kernels import TransitionMatrix, sb_rc_matrix, sw_potts_matrix, sw_rc_matrix
from .measures import (
    ModelParams,
    agreement_masks,
    check_cap,
    popcount,
    potts_measure,
    potts_states,
    rc_measure,
)
from .spectral import adjoint, gap_value, holds_leq, operator_norm_weighted

JOINT_CAP = 2**20


@dataclass
class CheckResult:
    """One certified relation ``lhs <relation> rhs``."""

    name: str
    case: str
    lhs: float
    rhs: float
    relation: str
    passed: bool
    slack: float
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "case": self.case,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "slack": self.slack,
            "pass": self.passed,
            "detail": self.detail,
        }


def check_leq(name: str, case: str, lhs: float, rhs: float, slack: float = 1e-8, **detail) -> CheckResult:
    lhs, rhs = float(lhs), float(rhs)
    return CheckResult(name, case, lhs, rhs, "<=", holds_leq(lhs, rhs, slack), rhs - lhs, detail)


def check_small(name: str, case: str, residual: float, tol: float, **detail) -> CheckResult:
    """``residual <= tol`` for identities checked up to rounding."""
    residual = float(residual)
    return CheckResult(name, case, residual, tol, "<=", bool(residual <= tol), tol - residual, detail)


@dataclass
class JointSpace:
    graph: Graph
    params: ModelParams
    sigma: np.ndarray      # Potts index of each joint state
    bonds: np.ndarray      # bond mask of each joint state
    nu: np.ndarray         # joint probabilities
    mu: np.ndarray         # bond marginal, indexed by mask
    pi: np.ndarray         # spin marginal, indexed by colouring
    agree: np.ndarray      # agreement mask per colouring
    counts: np.ndarray     # c(A) per mask

    @property
    def size(self) -> int:
        return int(self.sigma.size)

    @property
    def composite(self) -> np.ndarray:
        return self.sigma * (1 << self.graph.m) + self.bonds

    def locate(self, sigma: np.ndarray, bonds: np.ndarray) -> np.ndarray:
        key = np.asarray(sigma) * (1 << self.graph.m) + np.asarray(bonds)
        comp = self.composite
        pos = np.searchsorted(comp, key)
        if np.any(pos >= comp.size) or np.any(comp[np.minimum(pos, comp.size - 1)] != key):
            raise KeyError("state outside the joint support")
        return pos


def joint_space(graph: Graph, params: ModelParams, cap: int = JOINT_CAP) -> JointSpace:
    q = params.require_potts()
    params.require_open()
    check_cap("joint space", q**graph.n * (1 << graph.m), cap)
    agree = agreement_masks(graph, potts_states(graph.n, q))
    masks = np.arange(1 << graph.m, dtype=np.int64)
    s_idx, bonds = np.nonzero((masks[None, :] & ~agree[:, None]) == 0)
    lw = popcount(bonds) * params.log_bond_weight
    nu = np.exp(lw - lw.max())
    nu /= nu.sum()
    counts = component_counts(all_subset_labels(graph))
    return JointSpace(
        graph, params, s_idx.astype(np.int64), bonds.astype(np.int64), nu,
        rc_measure(graph, params).probabilities, potts_measure(graph, params).probabilities,
        agree, counts,
    )


@dataclass
class JointOperator:
    label: str
    matrix: np.ndarray
    row_space: str
    col_space: str


def build_M(space: JointSpace) -> tuple[JointOperator, JointOperator]:
    """``M(B, (sigma, A)) = q**-c(B) 1(A = B)`` and its adjoint ``M*((sigma, A), B) = 1(A = B)``."""
    q = space.params.q
    nb = 1 << space.graph.m
    M = np.zeros((nb, space.size))
    cols = np.arange(space.size)
    M[space.bonds, cols] = np.power(float(q), -space.counts[space.bonds])
    Ms = np.zeros((space.size, nb))
    Ms[cols, space.bonds] = 1.0
    return JointOperator("M", M, "rc", "joint"), JointOperator("M_star", Ms, "joint", "rc")


def build_Te(space: JointSpace, e: int) -> JointOperator:
    """Resample edge ``e`` of the joint state: open with prob p if sigma agrees on e, else close."""
    p = space.params.p
    bit = np.int64(1) << e
    agrees = (space.agree[space.sigma] & bit) != 0
    rows = np.arange(space.size)
    closed = space.locate(space.sigma, space.bonds & ~bit)
    T = np.zeros((space.size, space.size))
    np.add.at(T, (rows, closed), np.where(agrees, 1 - p, 1.0))
    ag = rows[agrees]
    opened = space.locate(space.sigma[ag], space.bonds[ag] | bit)
    np.add.at(T, (ag, opened), p)
    return JointOperator(f"T_e({e})", T, "joint", "joint")


def all_Te(space: JointSpace) -> list[np.ndarray]:
    return [build_Te(space, e).matrix for e in range(space.graph.m)]


def product(ops: list[np.ndarray], size: int) -> np.ndarray:
    out = np.eye(size)
    for T in ops:
        out = out @ T
    return out


def T_alpha(space: JointSpace, alpha, te: list[np.ndarray] | None = None) -> np.ndarray:
    """``prod_e T_e**alpha_e``; each ``T_e`` is a projection so only ``alpha_e > 0`` matters."""
    te = all_Te(space) if te is None else te
    return product([T for T, a in zip(te, alpha) if a > 0], space.size)


def assemble_sw_from_repr(space: JointSpace) -> TransitionMatrix:
    M, Ms = build_M(space)
    P = M.matrix @ product(all_Te(space), space.size) @ Ms.matrix
    return TransitionMatrix("sw_rc", P, space.mu, label="M prod(T_e) M*")


def assemble_sb_from_repr(space: JointSpace) -> TransitionMatrix:
    M, Ms = build_M(space)
    te = all_Te(space)
    avg = sum(te) / len(te)
    P = M.matrix @ avg @ Ms.matrix
    return TransitionMatrix("sb_rc", P, space.mu, label="M mean(T_e) M*")


def assemble_sw_potts_from_repr(space: JointSpace) -> TransitionMatrix:
    """Colouring-side SW: start at ``(sigma, empty)``, apply ``prod T_e``, then ``M* M``, forget bonds."""
    M, Ms = build_M(space)
    n_potts = space.pi.size
    start = np.zeros((n_potts, space.size))
    empty = space.locate(np.arange(n_potts), np.zeros(n_potts, dtype=np.int64))
    start[np.arange(n_potts), empty] = 1.0
    forget = np.zeros((space.size, n_potts))
    forget[np.arange(space.size), space.sigma] = 1.0
    P = start @ product(all_Te(space), space.size) @ Ms.matrix @ M.matrix @ forget
    return TransitionMatrix("sw_potts", P, space.pi, label="transported repr")


def residual_operator(space: JointSpace) -> tuple[np.ndarray, np.ndarray]:
    """``R = M - S1`` with ``S1(B, j) = nu(j)``, and its adjoint in ``L2(mu), L2(nu)``."""
    M, _ = build_M(space)
    R = M.matrix - np.tile(space.nu, (M.matrix.shape[0], 1))
    return R, adjoint(R, space.mu, space.nu)


# ---------------------------------------------------------------------------
# certifications
# ---------------------------------------------------------------------------


def _case(space: JointSpace) -> str:
    prm = space.params
    return f"{space.graph.name}|q={prm.q}|p={prm.p!r}"


def certify_representation(space: JointSpace, tol: float = 1e-12) -> list[CheckResult]:
    """Assembly identities, projection/commutation of the T_e and their spectra."""
    case = _case(space)
    g, prm = space.graph, space.params
    out = []
    M, Ms = build_M(space)
    te = all_Te(space)
    nb = 1 << g.m
    out.append(check_small("M M* = I", case, np.abs(M.matrix @ Ms.matrix - np.eye(nb)).max(), tol))
    out.append(check_small("mu M = nu", case, np.abs(space.mu @ M.matrix - space.nu).max(), tol))
    out.append(check_small(
        "M* is the weighted adjoint of M", case,
        np.abs(adjoint(M.matrix, space.mu, space.nu) - Ms.matrix).max(), tol,
    ))
    out.append(check_small("norm of M* M in L2(nu) is 1", case,
                           abs(operator_norm_weighted(Ms.matrix @ M.matrix, space.nu) - 1), 1e-9))
    proj = max(np.abs(T @ T - T).max() for T in te)
    out.append(check_small("T_e are projections", case, proj, tol))
    comm = max((np.abs(A @ B - B @ A).max() for i, A in enumerate(te) for B in te[i + 1:]), default=0.0)
    out.append(check_small("T_e commute", case, comm, tol))
    selfadj = max(np.abs(adjoint(T, space.nu, space.nu) - T).max() for T in te)
    out.append(check_small("T_e self-adjoint in L2(nu)", case, selfadj, tol))
    root = np.sqrt(space.nu)
    spec_dev = 0.0
    for T in te:
        vals = np.linalg.eigvalsh((root[:, None] * T / root[None, :] + (root[:, None] * T / root[None, :]).T) / 2)
        spec_dev = max(spec_dev, float(np.minimum(np.abs(vals), np.abs(vals - 1)).max()))
    out.append(check_small("T_e eigenvalues in {0, 1}", case, spec_dev, 1e-9))
    out.append(check_small("norm of T_e in L2(nu) is 1", case,
                           max(abs(operator_norm_weighted(T, space.nu) - 1) for T in te), 1e-9))
    sw_direct = sw_rc_matrix(g, prm).matrix
    sb_direct = sb_rc_matrix(g, prm).matrix
    out.append(check_small("M prod(T_e) M* equals SW bond matrix", case,
                           np.abs(assemble_sw_from_repr(space).matrix - sw_direct).max(), tol))
    out.append(check_small("mean of M T_e M* equals SB matrix", case,
                           np.abs(assemble_sb_from_repr(space).matrix - sb_direct).max(), tol))
    out.append(check_small("transported assembly equals SW colouring matrix", case,
                           np.abs(assemble_sw_potts_from_repr(space).matrix - sw_potts_matrix(g, prm).matrix).max(), tol))
    hat = product(te, space.size)
    sh = root[:, None] * hat / root[None, :]
    low = float(np.linalg.eigvalsh((sh + sh.T) / 2).min())
    out.append(CheckResult("prod(T_e) positive semidefinite", case, low, -1e-10, ">=", low >= -1e-10, low + 1e-10))
    return out


def certify_alpha_products(space: JointSpace, alphas, tol: float = 1e-12) -> list[CheckResult]:
    """``T_alpha`` equals ``T_hat`` iff alpha has full support; equal products iff equal zero sets."""
    case = _case(space)
    te = all_Te(space)
    hat = product(te, space.size)
    mats = [T_alpha(space, a, te) for a in alphas]
    out = []
    wrong = 0
    for a, Ta in zip(alphas, mats):
        full = all(x > 0 for x in a)
        if (np.abs(Ta - hat).max() <= tol) != full:
            wrong += 1
    for i, a in enumerate(alphas):
        for j in range(i + 1, len(alphas)):
            same_zeros = [x == 0 for x in a] == [x == 0 for x in alphas[j]]
            if (np.abs(mats[i] - mats[j]).max() <= tol) != same_zeros:
                wrong += 1
    out.append(check_small("T_alpha determined by its zero set", case, wrong, 0, pairs=len(alphas)))
    return out


def certify_norm_bounds(space: JointSpace, k_list=None, eps: float = 0.5, slack: float = 1e-8) -> list[CheckResult]:
    """Monotonicity, power and approximation inequalities for ``N(k) = ||R T^k R*||``."""
    case = _case(space)
    m = space.graph.m
    k_norm2 = math.ceil(m * math.log(m / eps))
    k_list = list(range(1, 41)) if k_list is None else sorted(set(k_list))
    k_max = max(max(k_list) + 1, k_norm2)
    te = all_Te(space)
    T = sum(te) / m
    hat = product(te, space.size)
    R, Rs = residual_operator(space)
    mu = space.mu
    norm = lambda X: operator_norm_weighted(X, mu)
    out = []
    nb = 1 << m
    out.append(check_small("R R* = I - S_mu", case, np.abs(R @ Rs - (np.eye(nb) - np.tile(mu, (nb, 1)))).max(), 1e-12))
    rr = norm(R @ Rs)
    if m > 1:
        out.append(check_small("||R R*|| = 1", case, abs(rr - 1), 1e-9))
    t_norm = operator_norm_weighted(T, space.nu)
    out.append(check_leq("||T|| <= 1", case, t_norm, 1.0, slack))
    N = {}
    power = np.eye(space.size)
    for k in range(0, k_max + 1):
        N[k] = norm(R @ power @ Rs)
        power = power @ T
    n_hat = norm(R @ hat @ Rs)
    for k in k_list:
        out.append(check_leq("N(k+1) <= ||T|| N(k)", case, N[k + 1], t_norm * N[k], slack, k=k))
        out.append(check_leq("N(1)^(2k) <= N(k)", case, N[1] ** (2 * k), N[k], slack, k=k))
        out.append(check_leq("||R T_hat R*|| <= N(k)", case, n_hat, N[k], slack, k=k))
    j = 0
    while 2**j <= k_max:
        out.append(check_leq("N(1)^(2^j) <= N(2^j)", case, N[1] ** (2**j), N[2**j], slack, j=j))
        j += 1
    out.append(check_leq(
        "N(k) <= (1-eps)||R T_hat R*|| + eps", case, N[k_norm2], (1 - eps) * n_hat + eps, slack,
        k=k_norm2, eps=eps,
    ))
    return out


def certify_sw_sb_sandwich(graph: Graph, params: ModelParams, slack: float = 1e-8) -> list[CheckResult]:
    """``gap(SB) <= gap(SW) <= 8 m log m gap(SB)``; the upper bound only for ``m >= 3``."""
    case = f"{graph.name}|q={params.q}|p={params.p!r}"
    g_sb = gap_value(sb_rc_matrix(graph, params))
    g_sw = gap_value(sw_rc_matrix(graph, params))
    out = [check_leq("gap(SB) <= gap(SW)", case, g_sb, g_sw, slack, ratio=g_sw / g_sb)]
    m = graph.m
    if m >= 3:
        c = 8 * m * math.log(m)
        out.append(check_leq("gap(SW) <= 8 m log m gap(SB)", case, g_sw, c * g_sb, slack,
                             ratio=g_sw / g_sb, constant=c))
    return out


def certify_cross_projections(space: JointSpace, tol: float = 1e-12) -> list[CheckResult]:
    """The spin/bond coupling ``C`` with ``sw = C C*``, ``tsw = C* C`` and its rank-one part."""
    case = _case(space)
    g, prm = space.graph, space.params
    n_potts = space.pi.size
    nb = 1 << g.m
    C = np.zeros((n_potts, nb))
    np.add.at(C, (space.sigma, space.bonds), space.nu / space.pi[space.sigma])
    Cs = adjoint(C, space.pi, space.mu)
    S = np.tile(space.mu, (n_potts, 1))
    Ss = adjoint(S, space.pi, space.mu)
    out = [
        check_small("C C* = sw", case, np.abs(C @ Cs - sw_potts_matrix(g, prm).matrix).max(), tol),
        check_small("C* C = tsw", case, np.abs(Cs @ C - sw_rc_matrix(g, prm).matrix).max(), tol),
        check_small("S S* = S_pi", case, np.abs(S @ Ss - np.tile(space.pi, (n_potts, 1))).max(), tol),
        check_small("S* S = S_mu", case, np.abs(Ss @ S - np.tile(space.mu, (nb, 1))).max(), tol),
    ]
    return out
