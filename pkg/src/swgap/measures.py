"""Exact Potts, random-cluster and joint measures by full enumeration.

Conventions: colours are ``0..q-1``.  A Potts configuration is indexed in
base ``q`` with vertex 0 as the most significant digit.  A bond configuration
is the integer bitmask of its open edges.  A joint configuration ``(sigma, A)``
has composite index ``sigma_index * 2**m + A``.  Weights are kept in log space.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .graph import Graph, component_counts, component_labels, mask_bits

DEFAULT_STATE_CAP = 2**24


class EnumerationTooLarge(ValueError):
    """Raised instead of attempting an enumeration above the state cap."""

    def __init__(self, what: str, required: int, cap: int):
        super().__init__(f"{what} needs {required} states, above the cap of {cap}")
        self.required = required
        self.cap = cap


def check_cap(what: str, required: int, cap: int = DEFAULT_STATE_CAP) -> None:
    if required > cap:
        raise EnumerationTooLarge(what, required, cap)


@dataclass(frozen=True)
class ModelParams:
    """Number of colours ``q``, inverse temperature ``beta`` and ``p = 1 - exp(-beta)``."""

    q: int | float
    beta: float
    p: float
    real_q: bool = False

    def __post_init__(self):
        if not self.real_q and (float(self.q) != int(self.q)):
            raise ValueError("non-integer q needs real_q=True (random-cluster side only)")
        if self.real_q and not self.q > 0:
            raise ValueError("q must be positive")
        if not self.real_q and self.q < 1:
            raise ValueError("q must be at least 1")
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("p must lie in [0, 1]")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not self.real_q:
            object.__setattr__(self, "q", int(self.q))

    @classmethod
    def from_beta(cls, q, beta: float, real_q: bool = False) -> "ModelParams":
        return cls(q, float(beta), float(-math.expm1(-beta)), real_q)

    @classmethod
    def from_p(cls, q, p: float, real_q: bool = False) -> "ModelParams":
        beta = math.inf if p == 1.0 else float(-math.log1p(-p))
        return cls(q, beta, float(p), real_q)

    @property
    def bond_weight(self) -> float:
        """``p / (1 - p)``; equals ``exp(beta) - 1``."""
        return self.p / (1.0 - self.p) if self.p < 1 else math.inf

    @property
    def log_bond_weight(self) -> float:
        return math.log(self.p) - math.log1p(-self.p) if 0 < self.p < 1 else (
            -math.inf if self.p == 0 else math.inf
        )

    @property
    def integer_q(self) -> bool:
        return float(self.q) == int(self.q)

    def require_potts(self) -> int:
        if not self.integer_q:
            raise ValueError("spin-side objects need an integer number of colours")
        return int(self.q)

    def require_open(self) -> None:
        if not (0.0 < self.p < 1.0):
            raise ValueError("this quantity needs 0 < p < 1")

    def to_json(self) -> dict:
        return {"q": self.q, "beta": self.beta, "p": self.p}


def _safe_mul_log(count: np.ndarray, log_factor: float) -> np.ndarray:
    """``count * log_factor`` with ``0 * (+-inf) = 0``."""
    count = np.asarray(count, dtype=float)
    if math.isinf(log_factor):
        return np.where(count == 0, 0.0, count * log_factor)
    return count * log_factor


@dataclass
class EnumeratedMeasure:
    """A probability vector on an explicitly enumerated state space."""

    kind: str
    log_weights: np.ndarray
    probabilities: np.ndarray
    log_partition: float
    graph_name: str = ""
    params: ModelParams | None = None
    labels: np.ndarray | None = None

    @classmethod
    def from_log_weights(cls, kind, log_weights, graph_name="", params=None, labels=None):
        log_weights = np.asarray(log_weights, dtype=float)
        log_z = float(logsumexp(log_weights))
        probs = np.exp(log_weights - log_z)
        return cls(kind, log_weights, probs, log_z, graph_name, params, labels)

    @property
    def size(self) -> int:
        return int(self.probabilities.size)

    @property
    def min_probability(self) -> float:
        return float(self.probabilities[self.probabilities > 0].min())

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "probability", "log_weight"])
            for i, (pr, lw) in enumerate(zip(self.probabilities, self.log_weights)):
                writer.writerow([i, repr(float(pr)), repr(float(lw))])

    def summary_json(self) -> str:
        data = {
            "kind": self.kind,
            "graph": self.graph_name,
            "size": self.size,
            "log_partition": self.log_partition,
            "min_probability": float(self.probabilities.min()),
            "max_probability": float(self.probabilities.max()),
            "params": self.params.to_json() if self.params else None,
        }
        return json.dumps(data, sort_keys=True)


# ---------------------------------------------------------------------------
# enumeration helpers
# ---------------------------------------------------------------------------


def potts_states(n: int, q: int) -> np.ndarray:
    """All ``q**n`` colourings as rows, in index order."""
    idx = np.arange(q**n, dtype=np.int64)
    return np.stack(np.unravel_index(idx, (q,) * n), axis=1).astype(np.int64) if n else np.zeros((1, 0), np.int64)


def potts_index(states: np.ndarray, q: int) -> np.ndarray:
    states = np.atleast_2d(np.asarray(states, dtype=np.int64))
    powers = q ** np.arange(states.shape[1] - 1, -1, -1, dtype=np.int64)
    return states @ powers


def agreement_masks(graph: Graph, states: np.ndarray) -> np.ndarray:
    """Bitmask of monochromatic edges for each colouring row."""
    states = np.atleast_2d(states)
    out = np.zeros(states.shape[0], dtype=np.int64)
    for e, (a, b) in enumerate(graph.edges):
        out |= (states[:, a] == states[:, b]).astype(np.int64) << e
    return out


def agreement_edges(graph: Graph, sigma) -> int:
    """Bitmask of the edges whose endpoints share a colour."""
    return int(agreement_masks(graph, np.asarray(sigma)[None, :])[0])


def popcount(masks) -> np.ndarray:
    return np.bitwise_count(np.asarray(masks, dtype=np.int64)).astype(np.int64)


def rc_component_counts(graph: Graph) -> np.ndarray:
    """``c(A)`` for every bitmask ``A``."""
    check_cap("bond enumeration", 1 << graph.m)
    masks = np.arange(1 << graph.m, dtype=np.int64)
    return component_counts(component_labels(graph, mask_bits(masks, graph.m)))


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


def potts_measure(graph: Graph, params: ModelParams, cap: int = DEFAULT_STATE_CAP) -> EnumeratedMeasure:
    q = params.require_potts()
    check_cap("Potts enumeration", q**graph.n, cap)
    states = potts_states(graph.n, q)
    agree = popcount(agreement_masks(graph, states))
    return EnumeratedMeasure.from_log_weights("potts", _safe_mul_log(agree, params.beta), graph.name, params)


def rc_log_weights(graph: Graph, params: ModelParams, counts: np.ndarray | None = None) -> np.ndarray:
    if counts is None:
        counts = rc_component_counts(graph)
    sizes = popcount(np.arange(1 << graph.m))
    return _safe_mul_log(sizes, params.log_bond_weight) + counts * math.log(params.q)


def rc_measure(graph: Graph, params: ModelParams, cap: int = DEFAULT_STATE_CAP) -> EnumeratedMeasure:
    """Random-cluster measure with weights ``w**|A| q**c(A)``, ``w = p/(1-p)``.

    With these weights the partition function equals the Potts partition
    function exactly.  The standard ``p**|A| (1-p)**(m-|A|) q**c(A)`` form has
    partition function ``(1-p)**m`` times that.
    """
    if params.p >= 1:
        raise ValueError("p = 1 is outside the supported range")
    check_cap("bond enumeration", 1 << graph.m, cap)
    return EnumeratedMeasure.from_log_weights("rc", rc_log_weights(graph, params), graph.name, params)


def rc_standard_log_partition(graph: Graph, params: ModelParams) -> float:
    """Log of the sum of ``p**|A| (1-p)**(m-|A|) q**c(A)``."""
    counts = rc_component_counts(graph)
    sizes = popcount(np.arange(1 << graph.m))
    lw = (
        _safe_mul_log(sizes, math.log(params.p) if params.p > 0 else -math.inf)
        + _safe_mul_log(graph.m - sizes, math.log1p(-params.p) if params.p < 1 else -math.inf)
        + counts * math.log(params.q)
    )
    return float(logsumexp(lw))


def joint_measure(graph: Graph, params: ModelParams, cap: int = DEFAULT_STATE_CAP) -> EnumeratedMeasure:
    """Joint measure ``w**|A| 1(A within agreement edges)`` on all pairs."""
    q = params.require_potts()
    if params.p >= 1:
        raise ValueError("p = 1 is outside the supported range")
    total = q**graph.n * (1 << graph.m)
    check_cap("joint enumeration", total, cap)
    agree = agreement_masks(graph, potts_states(graph.n, q))
    masks = np.arange(1 << graph.m, dtype=np.int64)
    inside = (masks[None, :] & ~agree[:, None]) == 0
    lw = np.where(inside, _safe_mul_log(popcount(masks), params.log_bond_weight)[None, :], -np.inf)
    return EnumeratedMeasure.from_log_weights("joint", lw.ravel(), graph.name, params)


def conditional_sigma_given_A(graph: Graph, params: ModelParams, edge_subset: int) -> np.ndarray:
    """Uniform over colourings constant on the components of ``A``; mass ``q**-c(A)`` each."""
    q = params.require_potts()
    check_cap("Potts enumeration", q**graph.n)
    agree = agreement_masks(graph, potts_states(graph.n, q))
    support = (edge_subset & ~agree) == 0
    out = support.astype(float)
    return out / out.sum()


def conditional_A_given_sigma(graph: Graph, params: ModelParams, sigma) -> np.ndarray:
    """Independent percolation with probability ``p`` on the agreement edges."""
    check_cap("bond enumeration", 1 << graph.m)
    agree = agreement_edges(graph, sigma)
    masks = np.arange(1 << graph.m, dtype=np.int64)
    inside = (masks & ~agree) == 0
    k = popcount(masks)
    free = bin(agree).count("1")
    with np.errstate(divide="ignore"):
        pr = np.where(inside, params.p ** k * (1 - params.p) ** (free - k), 0.0)
    return pr


def pinned_states(n: int, q: int, pinned: int) -> np.ndarray:
    """Full colourings with ``pinned`` fixed to colour 0, indexed over the other vertices."""
    free = potts_states(n - 1, q)
    return np.insert(free, pinned, 0, axis=1)


def pinned_potts_measure(graph: Graph, params: ModelParams, pinned: int, cap: int = DEFAULT_STATE_CAP) -> EnumeratedMeasure:
    """Potts measure conditioned on vertex ``pinned`` having colour 0.

    States are colourings of the remaining vertices in vertex order.  By
    colour symmetry each probability is ``q`` times the unconditioned Potts
    probability of the extended colouring.
    """
    q = params.require_potts()
    check_cap("pinned Potts enumeration", q ** (graph.n - 1), cap)
    full = pinned_states(graph.n, q, pinned)
    agree = popcount(agreement_masks(graph, full))
    return EnumeratedMeasure.from_log_weights("pinned_potts", _safe_mul_log(agree, params.beta), graph.name, params)


def boundary_potts_measure(side: int, params: ModelParams, cap: int = DEFAULT_STATE_CAP) -> EnumeratedMeasure:
    """Potts measure on the ``side``-grid with every missing neighbour fixed to colour 0.

    Each vertex ``v`` gains ``beta * (4 - deg(v)) * 1(sigma(v) == 0)``.
    """
    from .graph import make_square_lattice

    graph, _ = make_square_lattice(side) if side >= 2 else (Graph(1, (), "square:1"), None)
    q = params.require_potts()
    check_cap("Potts enumeration", q**graph.n, cap)
    states = potts_states(graph.n, q)
    agree = popcount(agreement_masks(graph, states)).astype(float)
    outside = np.array([4 - d for d in graph.degrees()], dtype=float)
    agree += ((states == 0) * outside[None, :]).sum(axis=1)
    return EnumeratedMeasure.from_log_weights("boundary_potts", _safe_mul_log(agree, params.beta), graph.name, params)
