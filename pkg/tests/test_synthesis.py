import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ntcons.errors import EmptyV1WithAntagonism, InvalidInput, OmegaSumNotPD
from ntcons.graph import MatrixGraph, block, laplacian
from ntcons.structure import Decomposition, find_decomposition
from ntcons.synthesis import Mode, certify_design, compute_Ci, synthesize

from conftest import THETA, graphs


def generalized_C(g, i):
    """Independent oracle: largest generalized eigenvalue of (out - in, S) via LAPACK."""
    d = g.dim
    neg = [j for (a, j), w in g.weights.items() if a == i and w.sign < 0]
    S = sum(g.weights[(i, j)].abs for j in neg)
    ins = sum((w.abs for (a, _), w in g.weights.items() if a == i), np.zeros((d, d)))
    outs = sum((w.abs for (_, b), w in g.weights.items() if b == i), np.zeros((d, d)))
    return 0.5 * scipy.linalg.eigh(outs - ins, S, eigvals_only=True)[-1]


def test_g1_constants(g1):
    d = synthesize(g1, find_decomposition(g1), THETA)
    assert d.C == pytest.approx(generalized_C(g1, 2), abs=1e-10)
    assert d.C == pytest.approx(7.1440, abs=5e-4)
    assert d.delta == pytest.approx(d.C + 0.1)
    assert np.allclose(d.x0, (1 + 2 / d.delta) * THETA)
    assert d.informed_set == {2, 3}


def test_g3_anchor_agents_without_negative_edges(g3):
    d = synthesize(g3, find_decomposition(g3), THETA, delta=3.1)
    assert set(d.C_by_agent) == {1, 2, 3}
    assert d.C == pytest.approx(3.0, abs=1e-9)
    assert any("agent 4" in n for n in d.notes)


@given(graphs(max_n=5), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_C_matches_generalized_eigenproblem(g, seed):
    for i in g.agents:
        if any(a == i and w.sign < 0 for (a, _), w in g.weights.items()):
            assert compute_Ci(g, i) == pytest.approx(generalized_C(g, i), rel=1e-8, abs=1e-8)


@given(graphs(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_stationarity_identity(g, seed):
    theta = np.random.default_rng(seed).normal(size=g.dim)
    d = synthesize(g, Decomposition.from_v1(g, g.agents), theta)
    assert d.stationarity_residual() <= 1e-9 * g.n_agents * np.linalg.norm(theta)


@given(graphs(), st.floats(-10, 10).filter(lambda s: abs(s) > 1e-3))
@settings(max_examples=40, deadline=None)
def test_theta_scaling(g, s):
    dec = Decomposition.from_v1(g, g.agents)
    a = synthesize(g, dec, THETA[:g.dim] + 0.5)
    b = synthesize(g, dec, s * (THETA[:g.dim] + 0.5))
    assert np.allclose(b.x0, s * a.x0, rtol=1e-14)
    assert b.delta == a.delta
    assert np.array_equal(b.grounded_laplacian, a.grounded_laplacian)
    assert all(np.array_equal(b.coupling[i], a.coupling[i]) for i in a.coupling)


@given(graphs(max_n=5))
@settings(max_examples=30, deadline=None)
def test_relabel_equivariance(g):
    perm = {k: g.n_agents + 1 - k for k in g.agents}
    h = g.relabel(perm)
    a = synthesize(g, Decomposition.from_v1(g, g.agents), THETA[:g.dim] + 0.5)
    b = synthesize(h, Decomposition.from_v1(h, h.agents), THETA[:g.dim] + 0.5)
    assert {perm[i]: c for i, c in a.C_by_agent.items()} == pytest.approx(b.C_by_agent, rel=1e-12)
    assert b.informed_set == {perm[i] for i in a.informed_set}


def test_grounded_laplacian_structure(g1):
    d = synthesize(g1, find_decomposition(g1), THETA)
    D = d.grounded_laplacian - laplacian(g1)
    for i in g1.agents:
        expected = d.delta * d.coupling[i] if i in d.coupling else np.zeros((3, 3))
        assert np.allclose(block(D, i, i, 3), expected)


def test_certificate_lyapunov_form(g1):
    rep = certify_design(synthesize(g1, find_decomposition(g1), THETA), Mode.FIXED)
    d = synthesize(g1, find_decomposition(g1), THETA)
    LB, P = d.grounded_laplacian, rep.lyapunov_P
    assert np.linalg.norm(-P @ LB - LB.T @ P + np.eye(21)) <= 1e-8
    assert rep.passed and rep.hurwitz and rep.sym_pd


def test_switching_designs_pass_time_varying(switching_schedule):
    for design in switching_schedule.designs.values():
        assert certify_design(design, Mode.TIME_VARYING).passed


def test_theta_zero_rejected(g1):
    with pytest.raises(InvalidInput):
        synthesize(g1, find_decomposition(g1), [0.0, 0.0, 0.0])


def test_no_antagonism_is_flagged():
    g = MatrixGraph.from_edges(2, 1, {(1, 2): [[1.0]], (2, 1): [[1.0]]})
    d = synthesize(g, find_decomposition(g), [1.0])
    assert d.C == 0.0 and not d.anchored
    assert not certify_design(d).passed


def test_anchor_required_for_antagonism():
    g = MatrixGraph.from_edges(3, 1, {(2, 1): [[-1.0]], (3, 2): [[1.0]], (1, 3): [[1.0]]})
    with pytest.raises(EmptyV1WithAntagonism):
        synthesize(g, Decomposition.from_v1(g, [1]), [1.0])


def test_semidefinite_omega_sum_rejected():
    g = MatrixGraph.from_edges(2, 2, {(1, 2): -np.diag([1.0, 0.0]), (2, 1): np.eye(2)})
    with pytest.raises(OmegaSumNotPD):
        compute_Ci(g, 1)


def test_delta_override_below_C_is_noted(g1):
    d = synthesize(g1, find_decomposition(g1), THETA, delta=1.0)
    assert not d.delta_exceeds_C and any("does not exceed" in n for n in d.notes)
