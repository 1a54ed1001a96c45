import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from swgap.graph import parse_builtin
from swgap.kernels import KINDS, KernelSpec, TransitionMatrix, build_matrix, sw_potts_matrix
from swgap.measures import ModelParams
from swgap.spectral import (
    SpectralInputError,
    comparison_bound,
    exact_mixing_time,
    gap_from_norm,
    holds_leq,
    is_ergodic,
    mixing_envelopes,
    operator_norm_weighted,
    projection_onto_constants,
    spectral_gap,
    tv_mixing_curve,
)


def two_state(a, b):
    """Chain flipping 0 -> 1 with prob a and 1 -> 0 with prob b."""
    P = np.array([[1 - a, a], [b, 1 - b]])
    return TransitionMatrix("toy", P, np.array([b, a]) / (a + b))


def test_projection_has_gap_one():
    pi = np.array([0.1, 0.2, 0.3, 0.4])
    tm = TransitionMatrix("proj", projection_onto_constants(pi), pi)
    rep = spectral_gap(tm)
    assert rep.gap == pytest.approx(1.0, abs=1e-12)
    assert rep.second_eigenvalue == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("a,b", [(0.3, 0.2), (0.9, 0.7), (0.05, 0.5)])
def test_two_state_closed_form(a, b):
    rep = spectral_gap(two_state(a, b))
    xi = 1 - a - b
    assert rep.gap == pytest.approx(1 - abs(xi), abs=1e-14)
    assert rep.one_minus_xi2 == pytest.approx(1 - xi, abs=1e-14)


@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("p", [0.3, 0.7])
@pytest.mark.parametrize("name", ["single_edge", "path:3", "tree:5"])
def test_tree_gap_formula(q, p, name):
    g, _ = parse_builtin(name)
    assert spectral_gap(sw_potts_matrix(g, ModelParams.from_p(q, p))).gap == pytest.approx(1 - p * (1 - 1 / q), abs=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_gap_equals_norm_identity(kind):
    g, _ = parse_builtin("cycle:4")
    tm = build_matrix(KernelSpec(kind, ModelParams.from_p(3, 0.45), g, pinned_vertex=0))
    assert abs(spectral_gap(tm).gap - gap_from_norm(tm)) < 1e-9


@pytest.mark.parametrize("kind", ["sw_potts", "hb_potts", "sb_rc", "metropolis_sb"])
def test_mixing_time_within_bounds(kind):
    g, _ = parse_builtin("cycle:4")
    tm = build_matrix(KernelSpec(kind, ModelParams.from_p(2, 0.6), g))
    rep = spectral_gap(tm, with_tmix=True)
    lo, hi = rep.mixing_time_bounds
    assert lo <= rep.t_mix_exact <= hi


def test_exact_mixing_time_is_first_crossing():
    g, _ = parse_builtin("cycle:3")
    tm = build_matrix(KernelSpec("sb_rc", ModelParams.from_p(2, 0.5), g))
    t = exact_mixing_time(tm)
    pi = tm.stationary
    thr = 1 / (2 * math.e)
    assert oracles.worst_tv_after(tm.dense(), pi, t) <= thr
    assert oracles.worst_tv_after(tm.dense(), pi, t - 1) > thr


def test_tv_curve_monotone_and_enveloped():
    g, _ = parse_builtin("cycle:4")
    tm = build_matrix(KernelSpec("hb_rc", ModelParams.from_p(3, 0.4), g))
    curve = tv_mixing_curve(tm, 120)
    assert np.all(np.diff(curve) <= 1e-15)
    rep = spectral_gap(tm)
    low, up = mixing_envelopes(rep.gap, rep.pi_min, np.arange(121))
    assert np.all(low <= curve + 1e-12) and np.all(curve <= up + 1e-12)


def test_rejects_non_reversible():
    P = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]) * 0.5 + np.eye(3) * 0.5
    with pytest.raises(SpectralInputError):
        spectral_gap(TransitionMatrix("cycle", P, np.full(3, 1 / 3)))


def test_rejects_reducible():
    P = np.eye(2)
    assert not is_ergodic(P)
    with pytest.raises(SpectralInputError):
        spectral_gap(TransitionMatrix("stuck", P, np.array([0.5, 0.5])))


def test_weighted_norm_of_identity_and_projection():
    pi = np.array([0.2, 0.3, 0.5])
    assert operator_norm_weighted(np.eye(3), pi) == pytest.approx(1.0)
    assert operator_norm_weighted(projection_onto_constants(pi), pi) == pytest.approx(1.0)


def test_comparison_bound_on_lazy_version():
    g, _ = parse_builtin("cycle:4")
    spec = KernelSpec("sb_rc", ModelParams.from_p(2, 0.5), g)
    plain, lazy = build_matrix(spec), build_matrix(KernelSpec("sb_rc", spec.params, g, lazy=True))
    res = comparison_bound(plain, lazy)
    assert res.flow_ratio_max == pytest.approx(2.0)
    assert res.measure_ratio_min == pytest.approx(1.0)
    assert res.holds


def test_slack_rule():
    assert holds_leq(1.0 + 5e-9, 1.0)
    assert not holds_leq(1.0 + 2e-8, 1.0)
    assert holds_leq(1000.0 + 5e-6, 1000.0)
    assert holds_leq(3.0, math.inf)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_random_reversible_chains(size, seed):
    rng = np.random.default_rng(seed)
    W = rng.random((size, size)) + 0.01
    W = W + W.T
    P = W / W.sum(axis=1, keepdims=True)
    pi = W.sum(axis=1) / W.sum()
    tm = TransitionMatrix("random", P, pi)
    rep = spectral_gap(tm, with_tmix=True)
    assert abs(rep.gap - gap_from_norm(tm)) < 1e-9
    assert rep.gap == pytest.approx(oracles.gap(P, pi), abs=1e-10)
    lo, hi = rep.mixing_time_bounds
    assert lo - 1e-9 <= rep.t_mix_exact <= hi + 1e-9
