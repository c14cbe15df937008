import numpy as np
import pytest
from numpy.testing import assert_allclose

from choiforge.core.tensor_core import (
    HermitianOperator,
    SubsystemDims,
    eig_general,
    eigh,
    herm_to_real_embed,
    kron,
    matrix_exp,
    matrix_exp_derivative,
    max_ent_vector,
    partial_trace,
    partial_transpose,
    partial_transpose_permutation,
    permutation_operator,
    random_density,
    random_hermitian,
    reshuffle,
    reshuffle_adjoint,
    reshuffle_gradient,
    unreshuffle,
)
from choiforge.exceptions import DimensionError, InputError


def test_subsystem_dims_rejects_non_positive():
    with pytest.raises(DimensionError):
        SubsystemDims((2, 0))


def test_hermitian_operator_is_symmetrized_and_read_only(rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = HermitianOperator(m)
    assert np.array_equal(h.matrix, h.matrix.conj().T)
    with pytest.raises(ValueError):
        h.matrix[0, 0] = 1.0


def test_hermitian_operator_rejects_non_finite():
    with pytest.raises(InputError):
        HermitianOperator(np.array([[np.nan, 0], [0, 1]]))


def test_partial_trace_of_product(rng):
    a = random_density(2, rng)
    b = random_density(3, rng)
    ab = kron(a, b)
    assert_allclose(partial_trace(ab, (2, 3), [1]), a, atol=1e-12)
    assert_allclose(partial_trace(ab, (2, 3), [0]), b, atol=1e-12)


def test_partial_trace_three_parties(rng):
    a, b, c = (random_density(d, rng) for d in (2, 3, 2))
    abc = kron(kron(a, b), c)
    assert_allclose(partial_trace(abc, (2, 3, 2), [1]), kron(a, c), atol=1e-12)
    assert_allclose(partial_trace(abc, (2, 3, 2), [0, 2]), b, atol=1e-12)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(6), (2, 2), [0])


def test_partial_transpose_of_max_entangled_is_swap():
    psi = max_ent_vector(3)
    pt = partial_transpose(np.outer(psi, psi), (3, 3), [1])
    swap = np.eye(9).reshape(3, 3, 3, 3).transpose(0, 1, 3, 2).reshape(9, 9)
    assert_allclose(pt, swap)


def test_partial_transpose_both_sides_is_full_transpose(rng):
    x = random_hermitian(6, rng)
    assert_allclose(partial_transpose(x, (2, 3), [0, 1]), x.T)


def test_partial_transpose_permutation_matches_dense(rng):
    x = rng.normal(size=(6, 6))
    perm = partial_transpose_permutation((2, 3), [1])
    vec = x.flatten(order="F")
    expected = partial_transpose(x, (2, 3), [1]).flatten(order="F")
    assert_allclose(vec[perm], expected)


def test_eigh_sorted(rng):
    values, vectors = eigh(random_hermitian(5, rng))
    assert np.all(np.diff(values) >= 0)
    assert vectors.shape == (5, 5)


def test_eig_general_pairs_left_and_right(rng):
    m = rng.normal(size=(4, 4))
    values, right, left = eig_general(m)
    order = np.lexsort((values.imag, values.real))
    assert np.array_equal(order, np.arange(4))
    for i in range(4):
        assert_allclose(m @ right[:, i], values[i] * right[:, i], atol=1e-10)
        assert_allclose(left[:, i].conj() @ m, values[i] * left[:, i].conj(), atol=1e-10)


def test_reshuffle_roundtrip_and_shape(rng):
    c = random_hermitian(6, rng)
    m = reshuffle(c, 2, 3)
    assert m.shape == (9, 4)
    assert_allclose(unreshuffle(m, 2, 3), c)


def test_reshuffle_adjoint_is_adjoint(rng):
    dc = random_hermitian(6, rng)
    k = rng.normal(size=(4, 9)) + 1j * rng.normal(size=(4, 9))
    lhs = np.trace(k @ reshuffle(dc, 2, 3))
    rhs = np.trace(reshuffle_adjoint(k, 2, 3) @ dc)
    assert lhs == pytest.approx(rhs)
    assert_allclose(reshuffle_gradient(reshuffle_adjoint(k, 2, 3), 2, 3), k)


def test_transfer_matrix_of_identity_channel():
    psi = max_ent_vector(2)
    assert_allclose(reshuffle(np.outer(psi, psi), 2, 2), np.eye(4))


def test_herm_to_real_embed_spectrum(rng):
    h = random_hermitian(3, rng)
    doubled = np.sort(np.repeat(np.linalg.eigvalsh(h), 2))
    assert_allclose(np.linalg.eigvalsh(herm_to_real_embed(h)), doubled, atol=1e-12)


def test_permutation_operator_swaps_slots(rng):
    a, b1, b2 = (rng.normal(size=d) for d in (2, 3, 3))
    p = permutation_operator([1, 0], (2, 3, 3))
    assert_allclose(p @ np.kron(a, np.kron(b1, b2)), np.kron(a, np.kron(b2, b1)))
    assert_allclose(p @ p.T, np.eye(18))


def test_permutation_operator_rejects_bad_permutation():
    with pytest.raises(InputError):
        permutation_operator([0, 0], (2, 2, 2))


def test_matrix_exp_of_anti_hermitian_is_unitary(rng):
    h = random_hermitian(4, rng)
    u = matrix_exp(1j * h)
    assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)


def test_matrix_exp_derivative_matches_finite_difference(rng):
    a = rng.normal(size=(3, 3))
    e = rng.normal(size=(3, 3))
    t = 1e-6
    numeric = (matrix_exp(a + t * e) - matrix_exp(a - t * e)) / (2 * t)
    assert_allclose(matrix_exp_derivative(a, e), numeric, atol=1e-7)


def test_random_density_is_state(rng):
    rho = random_density(4, rng, rank=2)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.linalg.matrix_rank(rho) == 2
    assert np.linalg.eigvalsh(rho).min() > -1e-12
