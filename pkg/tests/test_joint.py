import numpy as np
import pytest

import oracles
from swgap import joint
from swgap.graph import parse_builtin
from swgap.measures import EnumerationTooLarge, ModelParams, joint_measure


def _failed(checks):
    return [(c.name, c.lhs, c.rhs) for c in checks if not c.passed]


@pytest.mark.parametrize("name", ["single_edge", "cycle:3", "cycle:4", "square:2"])
@pytest.mark.parametrize("q", [1, 2, 3])
@pytest.mark.parametrize("p", [0.3, 0.7])
def test_representation_identities(name, q, p):
    g, _ = parse_builtin(name)
    space = joint.joint_space(g, ModelParams.from_p(q, p))
    assert not _failed(joint.certify_representation(space))
    assert not _failed(joint.certify_cross_projections(space))


def test_joint_space_skips_zero_mass_pairs():
    g, _ = parse_builtin("cycle:3")
    prm = ModelParams.from_p(2, 0.4)
    space = joint.joint_space(g, prm)
    full = joint_measure(g, prm).probabilities
    assert space.size == int((full > 0).sum())
    assert np.abs(space.nu - full[full > 0]).max() < 1e-15


def test_sw_assembly_against_oracle():
    g, _ = parse_builtin("cycle:4")
    space = joint.joint_space(g, ModelParams.from_p(3, 0.4))
    want = oracles.sw_rc(g.n, g.edges, 3, 0.4)
    assert np.abs(joint.assemble_sw_from_repr(space).matrix - want).max() < 1e-12
    want_sb = oracles.single_bond(g.n, g.edges, 3, 0.4, "sb")
    assert np.abs(joint.assemble_sb_from_repr(space).matrix - want_sb).max() < 1e-12


def test_alpha_products_depend_only_on_zero_set():
    g, _ = parse_builtin("cycle:3")
    space = joint.joint_space(g, ModelParams.from_p(2, 0.5))
    alphas = [(1, 1, 1), (0.2, 3, 1), (0, 1, 1), (0, 5, 2), (0, 0, 1), (1, 0, 4)]
    assert not _failed(joint.certify_alpha_products(space, alphas))


@pytest.mark.parametrize("name", ["cycle:4", "square:2"])
@pytest.mark.parametrize("q", [2, 3])
def test_norm_bounds(name, q):
    g, _ = parse_builtin(name)
    space = joint.joint_space(g, ModelParams.from_p(q, 0.5))
    checks = joint.certify_norm_bounds(space, k_list=range(1, 21), eps=0.5)
    assert not _failed(checks)
    names = {c.name for c in checks}
    assert {"R R* = I - S_mu", "N(k+1) <= ||T|| N(k)", "N(1)^(2k) <= N(k)", "N(k) <= (1-eps)||R T_hat R*|| + eps"} <= names


@pytest.mark.parametrize("name", ["cycle:3", "cycle:4", "square:2", "tree:5"])
@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_sw_sb_sandwich_sandwich(name, q, p):
    assert not _failed(joint.certify_sw_sb_sandwich(parse_builtin(name)[0], ModelParams.from_p(q, p)))


def test_joint_cap():
    g, _ = parse_builtin("square:3")
    with pytest.raises(EnumerationTooLarge):
        joint.joint_space(g, ModelParams.from_p(3, 0.5))
