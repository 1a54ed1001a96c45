import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swgap import bonds, spin
from swgap.duality import critical_beta
from swgap.graph import Graph, make_dual_square_lattice, parse_builtin
from swgap.kernels import hb_potts_pinned_matrix
from swgap.measures import ModelParams
from swgap.spectral import spectral_gap

SMALL = ["single_edge", "path:3", "cycle:3", "cycle:4", "tree:5", "square:2"]
BETAS = [0.25, 0.5, 1.0, "critical"]


def _params(q, beta):
    return ModelParams.from_beta(q, critical_beta(q) if beta == "critical" else beta)


def _failed(checks):
    return [(c.name, c.lhs, c.rhs) for c in checks if not c.passed]


@settings(max_examples=100)
@given(st.integers(2, 6), st.floats(0.0, 4.0))
def test_constant_relations(q, beta):
    k = spin.comparison_constants(Graph(2, ((0, 1),), "e"), ModelParams.from_beta(q, beta))
    assert k.a3 == pytest.approx(k.a2 / k.a1, rel=1e-12)
    assert k.a3 <= q * math.exp(2 * beta) * (1 + 1e-12)
    assert k.c_sw == pytest.approx(1 / (q * (q * math.exp(2 * beta)) ** (2 * k.delta)), rel=1e-12)


@pytest.mark.parametrize("name", SMALL)
@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("beta", BETAS)
def test_spin_bound(name, q, beta):
    g, _ = parse_builtin(name)
    checks = spin.certify_spin_bound(g, _params(q, beta))
    assert not _failed(checks)
    if q**g.n <= spin.EXHAUSTIVE_RATIO_CAP:
        assert any(c.name == "c <= a3^(2 Delta)" for c in checks)


@pytest.mark.parametrize("name", SMALL + ["dual_square:3"])
@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("beta", BETAS)
def test_spin_bound_pinned(name, q, beta):
    g, _ = parse_builtin(name)
    assert not _failed(spin.certify_pinned_spin_bound(g, g.n - 1, _params(q, beta)))


def test_pinned_single_edge_closed_form():
    # pinning one endpoint leaves one free vertex whose heat-bath update forgets the past
    g, _ = parse_builtin("single_edge")
    prm = ModelParams.from_beta(3, 0.8)
    rep = spectral_gap(hb_potts_pinned_matrix(g, prm, 1))
    assert rep.gap == pytest.approx(1.0, abs=1e-12)
    pi = hb_potts_pinned_matrix(g, prm, 1).stationary
    z = math.exp(0.8) + 2
    assert pi == pytest.approx([math.exp(0.8) / z, 1 / z, 1 / z], abs=1e-15)


@pytest.mark.parametrize("name", SMALL + ["square:3"])
@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("beta", BETAS)
def test_entrywise_bounds(name, q, beta):
    g, _ = parse_builtin(name)
    if q**g.n > 4096:
        pytest.skip("beyond the exhaustive range")
    prm = _params(q, beta)
    assert not _failed(spin.certify_single_vertex_perturbation(g, prm))
    assert not _failed(spin.certify_flip_invariance(g, prm))
    assert not _failed(spin.certify_subgraph_sandwich(g, prm, [0]))
    assert not _failed(spin.certify_subgraph_sandwich(g, prm, list(range(g.m))))
    assert not _failed(spin.certify_dobrushin(g, prm))


@pytest.mark.parametrize("q", [2, 3, 4])
@pytest.mark.parametrize("beta", [0.1, 0.9, 2.5])
def test_single_edge_influence_closed_form(q, beta):
    # the worst change moves the neighbour from the favoured colour to another one
    g, _ = parse_builtin("single_edge")
    rho = spin.dobrushin_influence(g, ModelParams.from_beta(q, beta))
    want = math.expm1(beta) / (math.exp(beta) + q - 1)
    assert rho[0, 1] == pytest.approx(want, abs=1e-14)
    assert rho[0, 0] == 0.0
    assert want <= math.tanh(beta / 2) + 1e-15


def test_influence_zero_off_neighbours():
    g, _ = parse_builtin("path:3")
    rho = spin.dobrushin_influence(g, ModelParams.from_beta(2, 0.7))
    assert rho[0, 2] == 0.0 and rho[2, 0] == 0.0


def test_dobrushin_rejects_multigraphs():
    with pytest.raises(ValueError):
        spin.certify_dobrushin(make_dual_square_lattice(3), ModelParams.from_beta(2, 0.5))


@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("beta", BETAS)
def test_pinned_apex_matches_boundary_grid(q, beta):
    assert spin.pinned_boundary_deviation(3, _params(q, beta)) <= 1e-12


def test_exhaustive_ratio_on_single_edge():
    from swgap.kernels import sw_potts_matrix

    g, _ = parse_builtin("single_edge")
    prm = ModelParams.from_p(2, 0.5)
    P = sw_potts_matrix(g, prm).matrix
    c = spin.exhaustive_sw_ratio(P, 2, 2)
    assert c == pytest.approx(P.max() / P.min(), rel=1e-12)


@pytest.mark.parametrize("name", SMALL)
@pytest.mark.parametrize("q", [1, 2, 3])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_bond_dynamics_comparisons(name, q, p):
    g, _ = parse_builtin(name)
    prm = ModelParams.from_p(q, p)
    assert not _failed(bonds.certify_sb_hb(g, prm))
    assert not _failed(bonds.certify_metropolis(g, prm))


def test_sb_hb_ratio_extremes_on_bridge():
    g, _ = parse_builtin("single_edge")
    lo, hi = bonds.sb_hb_ratio_range(g, ModelParams.from_p(2, 0.5))
    # on a bridge adding (1/3 vs 1/4) and removing (2/3 vs 1/2) both give 1/(1 - p(1 - 1/q))
    assert lo == pytest.approx(4 / 3)
    assert hi == pytest.approx(4 / 3)
    lo, hi = bonds.sb_hb_ratio_range(parse_builtin("cycle:3")[0], ModelParams.from_p(2, 0.5))
    # an edge closing a cycle is updated identically by both chains
    assert lo == pytest.approx(1.0)
    assert hi == pytest.approx(4 / 3)


@pytest.mark.parametrize(
    "edges,order,width",
    [
        (((0, 1), (1, 2), (2, 3)), None, 1),
        (((0, 1), (1, 2), (2, 3), (0, 3)), None, 2),
        (((0, 1), (0, 2), (0, 3)), None, 1),
        (((0, 1), (2, 3), (1, 2)), None, 2),
        (((0, 1), (2, 3), (1, 2)), (0, 2, 1), 1),
    ],
)
def test_linear_width(edges, order, width):
    g = Graph(4, edges, "w")
    assert bonds.linear_width_of_ordering(g, order) == width
