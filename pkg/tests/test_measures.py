import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from swgap.graph import Graph, parse_builtin
from swgap.measures import (
    EnumerationTooLarge,
    ModelParams,
    boundary_potts_measure,
    conditional_A_given_sigma,
    conditional_sigma_given_A,
    joint_measure,
    pinned_potts_measure,
    potts_index,
    potts_measure,
    potts_states,
    rc_measure,
    rc_standard_log_partition,
)

GRAPHS = ["single_edge", "path:3", "cycle:3", "cycle:4", "tree:5", "square:2"]

# log Z of the 3-state Potts model on the 4-cycle at beta = 0.5, from the brute-force oracle
LOG_Z_C4_Q3_HALF = 5.17950356331016


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams.from_p(2.5, 0.3)
    with pytest.raises(ValueError):
        ModelParams.from_p(2, 1.3)
    with pytest.raises(ValueError):
        ModelParams.from_beta(2, -1.0)
    with pytest.raises(ValueError):
        ModelParams.from_p(0.5, 0.3)
    prm = ModelParams.from_p(2.5, 0.3, real_q=True)
    with pytest.raises(ValueError):
        prm.require_potts()


@pytest.mark.parametrize("beta", [0.0, 0.3, 1.7])
def test_beta_p_relation(beta):
    prm = ModelParams.from_beta(3, beta)
    assert prm.p == pytest.approx(1 - math.exp(-beta), abs=1e-15)
    assert prm.bond_weight == pytest.approx(math.expm1(beta), rel=1e-12)
    back = ModelParams.from_p(3, prm.p)
    assert back.beta == pytest.approx(beta, abs=1e-12)


def test_single_edge_partition_function():
    g, _ = parse_builtin("single_edge")
    prm = ModelParams.from_beta(3, 0.7)
    # q colourings agree, q(q-1) disagree
    assert potts_measure(g, prm).log_partition == pytest.approx(math.log(3 * math.exp(0.7) + 6), abs=1e-14)


def test_frozen_log_partition():
    g, _ = parse_builtin("cycle:4")
    assert potts_measure(g, ModelParams.from_beta(3, 0.5)).log_partition == pytest.approx(LOG_Z_C4_Q3_HALF, abs=1e-12)


@pytest.mark.parametrize("name", GRAPHS)
@pytest.mark.parametrize("q", [2, 3])
def test_potts_matches_oracle(name, q):
    g, _ = parse_builtin(name)
    prm = ModelParams.from_beta(q, 0.8)
    want = oracles.potts_probs(g.n, g.edges, q, 0.8)
    assert np.abs(potts_measure(g, prm).probabilities - want).max() < 1e-14


@pytest.mark.parametrize("name", GRAPHS)
@pytest.mark.parametrize("q", [1, 2, 3])
def test_rc_matches_oracle(name, q):
    g, _ = parse_builtin(name)
    prm = ModelParams.from_p(q, 0.35)
    want = oracles.rc_probs(g.n, g.edges, q, 0.35)
    assert np.abs(rc_measure(g, prm).probabilities - want).max() < 1e-14


def test_rc_at_q1_is_independent_percolation():
    g, _ = parse_builtin("cycle:4")
    mu = rc_measure(g, ModelParams.from_p(1, 0.3)).probabilities
    sizes = np.array([bin(a).count("1") for a in range(16)])
    assert np.allclose(mu, 0.3**sizes * 0.7 ** (4 - sizes), atol=1e-15)


@pytest.mark.parametrize("name", GRAPHS)
def test_rc_and_potts_partition_functions_agree(name):
    g, _ = parse_builtin(name)
    prm = ModelParams.from_p(3, 0.45)
    assert rc_measure(g, prm).log_partition == pytest.approx(potts_measure(g, prm).log_partition, abs=1e-12)
    shift = g.m * math.log1p(-0.45)
    assert rc_standard_log_partition(g, prm) == pytest.approx(rc_measure(g, prm).log_partition + shift, abs=1e-12)


def test_non_integer_q_on_bond_side():
    g, _ = parse_builtin("cycle:3")
    prm = ModelParams.from_p(1.5, 0.4, real_q=True)
    want = oracles.rc_probs(g.n, g.edges, 1.5, 0.4)
    assert np.abs(rc_measure(g, prm).probabilities - want).max() < 1e-14


def test_joint_marginals():
    g, _ = parse_builtin("cycle:3")
    prm = ModelParams.from_p(2, 0.4)
    nu = joint_measure(g, prm).probabilities.reshape(2**3, 2**3)
    assert np.abs(nu.sum(axis=1) - potts_measure(g, prm).probabilities).max() < 1e-14
    assert np.abs(nu.sum(axis=0) - rc_measure(g, prm).probabilities).max() < 1e-14


def test_conditionals():
    g, _ = parse_builtin("cycle:3")
    prm = ModelParams.from_p(3, 0.4)
    nu = joint_measure(g, prm).probabilities.reshape(27, 8)
    for a in range(8):
        want = nu[:, a] / nu[:, a].sum()
        assert np.abs(conditional_sigma_given_A(g, prm, a) - want).max() < 1e-14
    for s in (0, 5, 13):
        sigma = potts_states(3, 3)[s]
        want = nu[s] / nu[s].sum()
        assert np.abs(conditional_A_given_sigma(g, prm, sigma) - want).max() < 1e-14


def test_pinned_measure_is_conditional():
    g, _ = parse_builtin("path:3")
    prm = ModelParams.from_beta(3, 0.9)
    pi = potts_measure(g, prm).probabilities
    states = potts_states(3, 3)
    keep = states[:, 2] == 0
    want = pi[keep] / pi[keep].sum()
    assert np.abs(pinned_potts_measure(g, prm, 2).probabilities - want).max() < 1e-14


def test_boundary_measure_single_vertex():
    prm = ModelParams.from_beta(2, 0.6)
    # four missing neighbours, all coloured 0
    mu = boundary_potts_measure(1, prm).probabilities
    assert mu == pytest.approx([math.exp(2.4) / (math.exp(2.4) + 1), 1 / (math.exp(2.4) + 1)], abs=1e-15)


def test_enumeration_cap():
    g = Graph(30, tuple((v, v + 1) for v in range(29)), "long")
    with pytest.raises(EnumerationTooLarge):
        potts_measure(g, ModelParams.from_p(2, 0.5))
    with pytest.raises(ValueError):
        rc_measure(g, ModelParams.from_p(2, 1.0))


def test_summary_and_csv(tmp_path):
    g, _ = parse_builtin("single_edge")
    mu = potts_measure(g, ModelParams.from_p(2, 0.5))
    data = json.loads(mu.summary_json())
    assert data["size"] == 4
    assert data["max_probability"] == pytest.approx(1 / 3)
    assert data["min_probability"] == pytest.approx(1 / 6)
    path = tmp_path / "mu.csv"
    mu.to_csv(str(path))
    assert path.read_text().splitlines()[0] == "index,probability,log_weight"


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(2, 4), st.data())
def test_index_roundtrip(n, q, data):
    states = potts_states(n, q)
    i = data.draw(st.integers(0, q**n - 1))
    assert potts_index(states[i][None, :], q)[0] == i
