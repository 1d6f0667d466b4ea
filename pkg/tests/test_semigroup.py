import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturblab import lattice
from perturblab.numkernel import matrix_exp
from perturblab.operators import DiscreteOperator, PerturbationFamily, make_space
from perturblab.runner import monotone_to_floor
from perturblab.semigroup import (
    SemigroupEvaluator,
    dyson_phillips,
    geometric_edges,
    perturbed_evaluator,
    semigroup_symmetry_residual,
    term_bound,
    variation_residual,
)


def test_identity_at_zero(heat200):
    assert np.max(np.abs(heat200.evaluate(0.0) - np.eye(200))) <= 1e-12
    with pytest.raises(ValueError):
        heat200.evaluate(-1.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_semigroup_law(heat200, s, t):
    d = heat200.evaluate(s + t) - heat200.evaluate(s) @ heat200.evaluate(t)
    assert np.linalg.norm(d, 2) <= 1e-9


def test_long_time_limit(heat200, space200):
    proj = lattice.rank_one_positive(space200.ones(), space200) / (2 * math.pi)
    err50 = np.max(np.abs(heat200.evaluate(50.0) - proj))
    # leading term: exp(-t/4) phi_1(x_i) phi_1(x_j) w_j with phi_1 = sin(x/2)/sqrt(pi)
    x, w = space200.x, space200.weights
    lead = math.exp(-12.5) * np.max(np.abs(np.outer(np.sin(x / 2), np.sin(x / 2)) * w[None, :])) / math.pi
    assert err50 == pytest.approx(lead, rel=0.02)
    assert np.max(np.abs(heat200.evaluate(100.0) - proj)) <= 1e-8


def test_diagonal_generator():
    sp = make_space(4)
    d = np.array([-1.0, -2.0, 0.5, 0.0])
    ev = SemigroupEvaluator(DiscreteOperator(np.diag(d), sp, "diag", True, True))
    assert np.allclose(ev.evaluate(0.7), np.diag(np.exp(0.7 * d)), rtol=1e-14, atol=0)


def test_spectral_bound(heat200):
    assert abs(heat200.spectral_bound()) <= 1e-10


# ---------------------------------------------------------------------------
# Dyson-Phillips


def test_dyson_zero_perturbation(neumann200, space200, heat200):
    zero = DiscreteOperator(np.zeros((200, 200)), space200, "zero", True, True)
    r = dyson_phillips(neumann200.generator(), zero, 0.5, K=4)
    assert all(np.max(np.abs(s)) == 0 for s in r.partial_terms[1:])
    assert np.max(np.abs(r.sum - heat200.evaluate(0.5))) <= 1e-12
    assert r.oracle_error <= 1e-12


def test_dyson_commuting_diagonal():
    sp = make_space(5)
    a = np.array([-3.0, -1.0, -0.5, 0.0, -7.0])
    b = np.array([0.4, -0.2, 1.0, 0.3, -0.6])
    A = DiscreteOperator(np.diag(a), sp, "a", True, True)
    B = DiscreteOperator(np.diag(b), sp, "b", True, True)
    t, K = 0.5, 6
    r = dyson_phillips(A, B, t, K=K)
    for k, s in enumerate(r.partial_terms):
        exact = (t * b) ** k / math.factorial(k) * np.exp(t * a)
        assert np.allclose(np.diag(s), exact, rtol=1e-10, atol=1e-15)
    tail = np.exp(t * (a + b)) - sum(np.exp(t * a) * (t * b) ** k / math.factorial(k)
                                     for k in range(K + 1))
    assert np.allclose(np.diag(np.exp(t * (a + b))) - r.sum, np.diag(tail), atol=1e-13)


@pytest.fixture(scope="module")
def delta_dyson(neumann200, delta200):
    return dyson_phillips(neumann200.generator(), delta200.scaled(0.25), 0.5)


def test_dyson_delta_oracle(delta_dyson):
    r = delta_dyson
    # the series is in its geometric regime at the truncation order
    assert r.ratio_k is not None and r.ratio_k <= r.K
    assert r.ratios()[-1] < 0.1
    assert r.oracle_error <= 1e-6
    # the error keeps shrinking with K until it meets roundoff
    assert monotone_to_floor(r.oracle_errors_partial, 1e-11)


def test_dyson_terms_decay_and_sum(delta_dyson):
    r = delta_dyson
    n = r.term_norms
    assert all(b < a for a, b in zip(n[3:], n[4:]))
    assert np.array_equal(r.sum, np.sum(r.partial_terms, axis=0))


def test_dyson_time_range(neumann200, delta200):
    with pytest.raises(ValueError):
        dyson_phillips(neumann200.generator(), delta200, 1.5)


def test_geometric_edges():
    e = geometric_edges(0.5, 16)
    assert e[0] == 0.0 and e[-1] == 0.5
    assert np.all(np.diff(e) > 0)


def test_term_bound_closed_form():
    # beta = 0: C^{k+1} t^k / k!
    assert term_bound(2.0, 0.0, 0.5, 3) == pytest.approx(2.0**4 * 0.5**3 / 6)
    assert term_bound(1.5, 0.3, 0.7, 0) == 1.5


# ---------------------------------------------------------------------------
# variation of parameters


def test_variation_zero_perturbation(neumann200, space200):
    zero = DiscreteOperator(np.zeros((200, 200)), space200, "zero", True, True)
    assert variation_residual(neumann200.generator(), zero, 0.5) <= 1e-12


def test_variation_delta_converges(neumann200, delta200):
    a, b = neumann200.generator(), delta200.scaled(0.25)
    res = [variation_residual(a, b, 0.5, p) for p in (32, 64, 128, 256)]
    assert res[-1] <= 1e-7
    assert res[1] < res[0]
    assert monotone_to_floor(res, 1e-11)


# ---------------------------------------------------------------------------
# perturbed evaluator


def test_perturbed_evaluator_base(mixed_family, heat200):
    ev = perturbed_evaluator(mixed_family, 0.0)
    assert np.array_equal(ev.evaluate(0.3), heat200.evaluate(0.3))
    with pytest.raises(ValueError):
        perturbed_evaluator(mixed_family, 0.5, kappa_max=0.1)


def test_perturbed_evaluator_lipschitz(mixed_family):
    t0 = perturbed_evaluator(mixed_family, 0.0).evaluate(1.0)
    quotients = [np.linalg.norm(perturbed_evaluator(mixed_family, k).evaluate(1.0) - t0, 2) / abs(k)
                 for k in (0.1, 0.03, 0.01, -0.01, -0.05)]
    assert max(quotients) <= 2 * min(quotients)


def test_perturbed_evaluator_symmetric(mixed_family):
    ev = perturbed_evaluator(mixed_family, 0.3)
    assert semigroup_symmetry_residual(ev, 0.4) <= 1e-10


def test_nonsymmetric_family_uses_general_solver(delta_family):
    ev = perturbed_evaluator(delta_family, 0.25)
    dense = matrix_exp(delta_family.assemble(0.25), 0.4)
    assert np.linalg.norm(ev.evaluate(0.4) - dense, 2) <= 1e-10
    assert isinstance(delta_family, PerturbationFamily)


def test_shifted_evaluation(heat200, mixed_family):
    d = heat200.evaluate(0.7, shift=-0.3) - math.exp(0.21) * heat200.evaluate(0.7)
    assert np.max(np.abs(d)) <= 1e-12
    # a large growth bound would overflow without the shift
    ev = perturbed_evaluator(mixed_family, 1.0)
    spb = ev.spectral_bound()
    assert np.all(np.isfinite(ev.evaluate(2000.0 / spb, shift=spb)))
