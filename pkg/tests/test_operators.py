import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturblab import lattice
from perturblab.operators import (
    DiscreteOperator,
    PerturbationFamily,
    build_clamped_bilaplacian,
    build_delta_perturbation,
    build_dirichlet_laplacian,
    build_kernel_perturbation,
    build_nonlocal_robin,
    build_robin_laplacian,
    build_spectral_power,
    kernel_by_name,
    make_space,
    symmetry_residual,
)

from oracles import BEAM_GROUND, ROBIN_GROUND


def smallest(op, k=1):
    return np.sort(np.linalg.eigvals(op.matrix).real)[:k]


def test_operator_validation(space200):
    with pytest.raises(ValueError):
        DiscreteOperator(np.zeros((3, 3)), space200, "bad")
    m = np.zeros((space200.n, space200.n))
    m[0, 1] = np.inf
    with pytest.raises(ValueError):
        DiscreteOperator(m, space200, "bad")
    m = np.zeros((space200.n, space200.n))
    m[0, 1] = 1.0
    with pytest.raises(ValueError):
        DiscreteOperator(m, space200, "bad", is_symmetric_L2=True)
    with pytest.raises(ValueError):
        DiscreteOperator(1j * np.eye(space200.n), space200, "bad", is_real=True)


def test_operator_matrix_is_frozen(neumann200):
    with pytest.raises(ValueError):
        neumann200.matrix[0, 0] = 1.0


def test_family_assemble(mixed_family):
    assert mixed_family.assemble(0) is mixed_family.base.matrix
    k1, k2 = 0.3, -0.7
    d = (mixed_family.assemble(k1) + mixed_family.assemble(k2)
         - 2 * mixed_family.assemble(0.5 * (k1 + k2)))
    assert np.max(np.abs(d)) <= 1e-12 * np.max(np.abs(mixed_family.base.matrix))


def test_family_needs_one_grid(neumann200):
    other = build_robin_laplacian(make_space(50))
    with pytest.raises(ValueError):
        PerturbationFamily(neumann200, other)


def test_neumann_kills_constants(neumann200, space200):
    assert lattice.norm(neumann200.matrix @ space200.ones(), space200) <= 1e-10


def neumann_error(n):
    op = build_robin_laplacian(make_space(n))
    ev = smallest(op, 6)[1:]
    return np.max(np.abs(ev - (np.arange(1, 6) / 2.0) ** 2))


def test_neumann_eigenvalues_second_order():
    e1, e2 = neumann_error(101), neumann_error(201)
    assert e2 <= 1e-2
    assert e1 / e2 >= 3.5


def robin_error(n):
    return abs(smallest(build_robin_laplacian(make_space(n), beta_left=1.0, beta_right=1.0))[0]
               - ROBIN_GROUND)


def test_robin_ground_state_second_order():
    e1, e2 = robin_error(101), robin_error(201)
    assert e2 <= 1e-4
    assert e1 / e2 >= 3.5


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.5, 3.0))
def test_robin_is_symmetric_and_nonnegative(bl, br, amp):
    sp = make_space(40)
    op = build_robin_laplacian(sp, a=lambda x: 1.0 + 0.5 * amp * np.sin(x) ** 2,
                               beta_left=bl, beta_right=br)
    assert symmetry_residual(op.matrix, sp) <= 1e-10
    assert smallest(op)[0] >= -1e-10


def test_robin_rejects_degenerate_coefficient():
    with pytest.raises(ValueError):
        build_robin_laplacian(make_space(20), a=0.0)


def test_bilaplacian_positive_and_ground_state():
    sp1, sp2 = make_space(100, closed=False), make_space(200, closed=False)
    op = build_clamped_bilaplacian(sp2)
    vals = np.linalg.eigvalsh(op.matrix)
    assert vals.min() > 0
    e1 = abs(smallest(build_clamped_bilaplacian(sp1))[0] - BEAM_GROUND)
    e2 = abs(vals.min() - BEAM_GROUND)
    assert e2 <= 1e-3 * BEAM_GROUND
    assert e1 / e2 >= 3.5


def test_bilaplacian_on_quartic():
    sp = make_space(200, closed=False)
    op = build_clamped_bilaplacian(sp)
    f = (sp.x**2 - math.pi**2) ** 2
    d4 = op.matrix @ f
    assert np.max(np.abs(d4[2:-2] - 24.0)) <= 1e-6 * 24
    with pytest.raises(ValueError):
        build_clamped_bilaplacian(make_space(200))


def test_dirichlet_needs_open_grid():
    with pytest.raises(ValueError):
        build_dirichlet_laplacian(make_space(20))
    op = build_dirichlet_laplacian(make_space(200, closed=False))
    # ground eigenvalue (1/2)^2 on an interval of length 2 pi
    assert smallest(op)[0] == pytest.approx(0.25, rel=1e-4)


@pytest.fixture(scope="module")
def robin1():
    return build_robin_laplacian(make_space(120), beta_left=1.0, beta_right=1.0)


def test_spectral_power_limits(robin1):
    l = robin1.matrix
    s1 = build_spectral_power(robin1, 1 - 1e-8).matrix
    assert np.linalg.norm(s1 - l, 2) / np.linalg.norm(l, 2) <= 1e-6
    half = build_spectral_power(robin1, 0.5).matrix
    assert np.linalg.norm(half @ half - l, 2) <= 1e-10 * np.linalg.norm(l, 2)
    p3, p6 = build_spectral_power(robin1, 0.3).matrix, build_spectral_power(robin1, 0.6).matrix
    assert np.linalg.norm(p3 @ p3 - p6, 2) <= 1e-10 * np.linalg.norm(p6, 2)


def test_spectral_power_needs_positive(neumann200):
    with pytest.raises(ValueError):
        build_spectral_power(neumann200, 0.5)
    assert build_spectral_power(neumann200, 0.5, shift=1.0).order == 1.0
    with pytest.raises(ValueError):
        build_spectral_power(neumann200, 1.5, shift=1.0)


def test_delta_perturbation(space200, rng):
    j = 77
    b = build_delta_perturbation(space200, float(space200.x[j]), sign=-1)
    assert np.array_equal(b.matrix @ space200.ones(), -space200.ones())
    x = rng.standard_normal(space200.n)
    x[j] = 0.0
    assert np.all(b.matrix @ x == 0)
    assert np.sum(np.linalg.svd(b.matrix, compute_uv=False) > 1e-12) == 1
    with pytest.raises(ValueError):
        build_delta_perturbation(space200, 0.0, sign=2)


def test_delta_snaps_with_warning(space200):
    with pytest.warns(UserWarning):
        build_delta_perturbation(space200, 0.0)


def test_delta_norm_grows_like_inverse_root_h():
    norms = [lattice.op_norm(build_delta_perturbation(make_space(n), -math.pi).matrix,
                             make_space(n), "L2", "L2") for n in (101, 201, 401)]
    # the endpoint node keeps half weight, so the growth is exactly sqrt(2) per doubling
    assert norms[1] / norms[0] == pytest.approx(math.sqrt(2), rel=1e-2)
    assert norms[2] / norms[1] == pytest.approx(math.sqrt(2), rel=1e-2)


def test_kernel_perturbation(space200):
    zero = build_kernel_perturbation(space200, lambda x, y: 0 * x * y)
    assert not np.any(zero.matrix)
    one = build_kernel_perturbation(space200, kernel_by_name("constant"))
    assert np.allclose(one.matrix, lattice.rank_one_positive(space200.ones(), space200), atol=1e-15)
    mixed = build_kernel_perturbation(space200, kernel_by_name("mixed"))
    kk = kernel_by_name("mixed")(space200.x[:, None], space200.x[None, :])
    row_bound = np.max(np.sqrt((kk**2) @ space200.weights))
    assert lattice.op_norm(mixed.matrix, space200, "L2", "sup") <= row_bound * (1 + 1e-12)
    assert mixed.is_symmetric_L2
    assert np.min(kk) < 0 < np.max(kk)


def test_kernel_shape_and_symmetry(space200):
    with pytest.raises(ValueError):
        build_kernel_perturbation(space200, np.ones((3, 3)))
    with pytest.raises(ValueError):
        build_kernel_perturbation(space200, lambda x, y: x + 2 * y)
    with pytest.raises(ValueError):
        kernel_by_name("nope")


def test_nonlocal_robin(space200, neumann200, rng):
    op = build_nonlocal_robin(space200, 1.0, -1.0)
    assert lattice.norm(op.matrix @ space200.ones(), space200) <= 1e-10
    zero = build_nonlocal_robin(space200, 0.0, 0.0)
    assert np.array_equal(zero.matrix, neumann200.matrix)
    v = np.array([1.0, -1.0])
    n_block = np.outer(v, v)
    for f in rng.standard_normal((20, 2)):
        assert f @ n_block @ f == pytest.approx((v @ f) ** 2)
        assert f @ n_block @ f >= 0
    with pytest.raises(ValueError):
        build_nonlocal_robin(space200, 1.0, 1.0)


def test_generator_flips_sign(neumann200):
    g = neumann200.generator()
    assert np.array_equal(g.matrix, -neumann200.matrix)
    assert g.order == neumann200.order and g.is_symmetric_L2
