"""
Labeled dense tensors: re-layout, pairwise contraction and factorization.
"""
import math

import numpy as np
import pytest

from TNZ_CORE.exceptions import FactorizationError, IndexMismatchError, NonFiniteError
from tensors.models import DenseTensor, Index
from tensors.services.factorize import qr_factorize, select_rank, thin_factorize, truncated_factorize
from tensors.services.ops import (
    contract_pair,
    delta_tensor,
    fuse_indices,
    inverse_permutation,
    matricize,
    permute,
    split_index,
)


def tensor(array, labels=None):
    array = np.asarray(array, dtype=np.float64)
    return DenseTensor.from_array(array, labels or [f"k{n}" for n in range(array.ndim)])


# ==================== DENSE TENSOR ====================

def test_tensor_rejects_duplicate_labels():
    with pytest.raises(IndexMismatchError):
        DenseTensor.from_array(np.zeros((2, 2)), ('a', 'a'))


def test_tensor_rejects_non_finite_values():
    with pytest.raises(NonFiniteError):
        DenseTensor.from_array(np.array([1.0, np.nan]), ('a',))


def test_tensor_rejects_data_of_wrong_length():
    with pytest.raises(IndexMismatchError):
        DenseTensor((Index('a', 3),), np.zeros(4))


def test_tensor_data_is_read_only():
    t = tensor(np.ones((2, 2)))
    with pytest.raises(ValueError):
        t.data[0, 0] = 5.0


def test_index_rejects_unknown_role():
    with pytest.raises(IndexMismatchError):
        Index('a', 2, 'weight')


def test_relabel_and_position():
    t = tensor(np.zeros((2, 3)), ['a', 'b']).relabel({'b': 'c'})
    assert t.labels == ('a', 'c')
    assert t.position('c') == 1
    with pytest.raises(IndexMismatchError):
        t.position('b')


# ==================== RE-LAYOUT ====================

def test_fuse_groups_positions(rng):
    t = tensor(rng.standard_normal((2, 3, 4)), ['a', 'b', 'c'])
    fused = fuse_indices(t, [[0], [1, 2]])
    assert fused.shape == (2, 12)
    assert fused.labels == ('a', 'b·c')
    np.testing.assert_array_equal(fused.data.reshape(-1), t.data.reshape(-1))


def test_fuse_single_index_is_identity(rng):
    t = tensor(rng.standard_normal(5))
    fused = fuse_indices(t, [[0]])
    assert fused.shape == (5,)
    np.testing.assert_array_equal(fused.data, t.data)


def test_fuse_then_split_restores_tensor(rng):
    t = tensor(rng.standard_normal((2, 3, 4)), ['a', 'b', 'c'])
    restored = split_index(fuse_indices(t, [[0], [1, 2]]), 1, [3, 4], ['b', 'c'])
    assert restored.labels == t.labels
    np.testing.assert_array_equal(restored.data, t.data)


def test_fuse_non_contiguous_groups_permutes_first(rng):
    t = tensor(rng.standard_normal((2, 3, 4)), ['a', 'b', 'c'])
    fused = fuse_indices(t, [[1], [0, 2]])
    np.testing.assert_array_equal(fused.data, np.transpose(t.data, (1, 0, 2)).reshape(3, 8))


def test_split_checks_product():
    with pytest.raises(IndexMismatchError):
        split_index(tensor(np.zeros(7)), 0, [2, 4], ['a', 'b'])


def test_split_singleton_into_two_singletons():
    t = tensor(np.array([[3.0]]), ['a', 'b'])
    split = split_index(t, 1, [1, 1], ['b0', 'b1'])
    assert split.shape == (1, 1, 1)
    assert split.data.reshape(-1)[0] == 3.0


def test_permute_identity_and_double_transpose(rng):
    t = tensor(rng.standard_normal((3, 4)))
    assert permute(t, [0, 1]) is t
    np.testing.assert_array_equal(permute(permute(t, [1, 0]), [1, 0]).data, t.data)


def test_permute_rejects_non_permutation():
    with pytest.raises(IndexMismatchError):
        permute(tensor(np.zeros((2, 2))), [0, 0])


def test_inverse_permutation_undoes_permute(rng):
    t = tensor(rng.standard_normal((2, 3, 4, 5)))
    order = [2, 0, 3, 1]
    back = permute(permute(t, order), inverse_permutation(order))
    np.testing.assert_array_equal(back.data, t.data)
    assert back.labels == t.labels


def test_permute_then_contract_matches_remapped_pairs(rng):
    a = tensor(rng.standard_normal((2, 3, 4)), ['a', 'b', 'c'])
    b = tensor(rng.standard_normal((4, 5)), ['c', 'd'])
    direct = contract_pair(a, b, [(2, 0)])
    permuted = contract_pair(permute(a, [2, 0, 1]), b, [(0, 0)])
    np.testing.assert_allclose(direct.data, permuted.data, atol=1e-12)


def test_matricize_row_and_column_groups(rng):
    t = tensor(rng.standard_normal((2, 3, 4)), ['i', 'j', 'k'])
    m = matricize(t, [0], [1, 2])
    assert m.shape == (2, 12)
    np.testing.assert_array_equal(m.data, t.data.reshape(2, 12))


def test_matricize_empty_column_group(rng):
    t = tensor(rng.standard_normal((2, 3)), ['i', 'j'])
    m = matricize(t, [0, 1], [])
    assert m.shape == (6, 1)
    assert m.labels == ('i·j', "()'")


def test_matricize_requires_partition():
    with pytest.raises(IndexMismatchError):
        matricize(tensor(np.zeros((2, 3, 4))), [0], [1])


# ==================== CONTRACTION ====================

def test_contract_pair_is_matrix_product(rng):
    a = tensor(rng.standard_normal((2, 3)), ['i', 'k'])
    b = tensor(rng.standard_normal((3, 4)), ['k', 'j'])
    c = contract_pair(a, b, [(1, 0)])
    assert c.labels == ('i', 'j')
    np.testing.assert_allclose(c.data, a.data @ b.data, atol=1e-12)


def test_contract_pair_without_pairs_is_outer_product(rng):
    a = tensor(rng.standard_normal(3), ['a'])
    b = tensor(rng.standard_normal(4), ['b'])
    np.testing.assert_allclose(contract_pair(a, b, []).data, np.outer(a.data, b.data), atol=1e-12)


def test_three_tensor_contraction_matches_loops(rng):
    p = rng.standard_normal((2, 3, 4))  # P_iac
    q = rng.standard_normal((3, 2, 2))  # Q_ajb
    r = rng.standard_normal((2, 4, 3))  # R_bck
    pq = contract_pair(tensor(p, ['i', 'a', 'c']), tensor(q, ['a', 'j', 'b']), [(1, 0)])  # i c j b
    s = contract_pair(pq, tensor(r, ['b', 'c', 'k']), [(1, 1), (3, 0)])  # i j k

    expected = np.zeros((2, 2, 3))
    for i in range(2):
        for j in range(2):
            for k in range(3):
                for a in range(3):
                    for b in range(2):
                        for c in range(4):
                            expected[i, j, k] += p[i, a, c] * q[a, j, b] * r[b, c, k]
    np.testing.assert_allclose(s.data, expected, atol=1e-12)


def test_contract_pair_rejects_dim_mismatch():
    with pytest.raises(IndexMismatchError):
        contract_pair(tensor(np.zeros((2, 3))), tensor(np.zeros((4, 2))), [(1, 0)])


def test_contract_pair_rejects_repeated_positions():
    with pytest.raises(IndexMismatchError):
        contract_pair(tensor(np.zeros((2, 2))), tensor(np.zeros((2, 2))), [(0, 0), (0, 1)])


def test_delta_two_indices_is_identity():
    np.testing.assert_array_equal(delta_tensor(2, 3).data, np.eye(3))


def test_delta_three_indices():
    d = delta_tensor(3, 2).data
    assert d[0, 0, 0] == 1.0 and d[1, 1, 1] == 1.0
    assert d.sum() == 2.0


def test_delta_with_vector_gives_diagonal_matrix(rng):
    v = rng.standard_normal(4)
    m = contract_pair(delta_tensor(3, 4), tensor(v, ['v']), [(2, 0)])
    np.testing.assert_allclose(m.data, np.diag(v), atol=1e-14)


# ==================== FACTORIZATION ====================

def test_identity_keeps_full_rank():
    result = truncated_factorize(tensor(np.eye(4)))
    assert result.rank == 4
    assert result.discarded_weight == 0.0


def test_rank_one_outer_product(rng):
    u, v = rng.standard_normal(5), rng.standard_normal(4)
    result = truncated_factorize(tensor(np.outer(u, v)), tol=1e-12)
    assert result.rank == 1
    np.testing.assert_allclose(result.reconstruct(), np.outer(u, v), atol=1e-12)


def test_truncation_error_equals_discarded_tail(rng):
    m = rng.standard_normal((6, 5))
    s = np.linalg.svd(m, compute_uv=False)
    result = truncated_factorize(tensor(m), chi_max=3)
    expected = math.sqrt(s[3] ** 2 + s[4] ** 2)
    assert result.rank == 3
    assert abs(result.discarded_weight - expected) <= 1e-10
    assert abs(np.linalg.norm(m - result.reconstruct()) - expected) <= 1e-10


def test_select_rank_rules():
    s = np.array([3.0, 2.0, 1.0])
    assert select_rank(s) == 3
    assert select_rank(s, chi_max=2) == 2
    # tail after rank 2 is 1.0, within 0.3 * sqrt(14)
    assert select_rank(s, tol=0.3) == 2
    assert select_rank(s, tol=10.0) == 1


def test_zero_matrix_keeps_rank_one():
    result = truncated_factorize(tensor(np.zeros((3, 3))))
    assert result.rank == 1
    assert result.singular_values[0] == 0.0


def test_truncated_factorize_validates_arguments():
    with pytest.raises(FactorizationError):
        truncated_factorize(tensor(np.eye(2)), tol=-1.0)
    with pytest.raises(FactorizationError):
        truncated_factorize(tensor(np.eye(2)), chi_max=0)
    with pytest.raises(IndexMismatchError):
        truncated_factorize(tensor(np.zeros((2, 2, 2))))


def test_thin_factorize_bond_label(rng):
    result = thin_factorize(tensor(rng.standard_normal((4, 3)), ['r', 'c']), bond_label='mid')
    assert result.left.labels == ('r', 'mid')
    assert result.right.labels == ('mid', 'c')
    assert result.rank == 3


@pytest.mark.parametrize('side', ['left', 'right'])
def test_qr_factorize_reconstructs(rng, side):
    m = tensor(rng.standard_normal((5, 3)), ['r', 'c'])
    left, right = qr_factorize(m, side)
    np.testing.assert_allclose(left.data @ right.data, m.data, atol=1e-12)
    q = left.data if side == 'left' else right.data.T
    np.testing.assert_allclose(q.T @ q, np.eye(q.shape[1]), atol=1e-12)


def test_qr_factorize_rejects_unknown_side():
    with pytest.raises(FactorizationError):
        qr_factorize(tensor(np.eye(2)), 'middle')
