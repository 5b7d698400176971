"""
Re-layout and contraction primitives over ``DenseTensor``.

All functions are pure: they return new tensors and never touch their inputs.
"""
from math import prod
from typing import List, Optional, Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import IndexMismatchError
from tensors.models import DenseTensor, Index


FUSE_SEPARATOR = '·'
EMPTY_GROUP_LABEL = '()'


def _check_positions(positions: Sequence[int], ndim: int, what: str) -> List[int]:
    positions = [int(p) for p in positions]
    for p in positions:
        if p < 0 or p >= ndim:
            raise IndexMismatchError(f"{what}: position {p} out of range for a {ndim}-index tensor")
    if len(set(positions)) != len(positions):
        raise IndexMismatchError(f"{what}: duplicated position in {positions}")
    return positions


def _fused_index(members: Sequence[Index], empty_label: str = EMPTY_GROUP_LABEL) -> Index:
    if not members:
        return Index(empty_label, 1, 'bond')
    if len(members) == 1:
        return members[0]
    roles = {index.role for index in members}
    role = roles.pop() if len(roles) == 1 else 'bond'
    label = FUSE_SEPARATOR.join(index.label for index in members)
    return Index(label, prod(index.dim for index in members), role)


def permute(t: DenseTensor, order: Sequence[int]) -> DenseTensor:
    """Reorder the indices of ``t``; ``order[k]`` is the old position of new index k."""
    order = [int(p) for p in order]
    if sorted(order) != list(range(t.ndim)):
        raise IndexMismatchError(f"{order} is not a permutation of 0..{t.ndim - 1}")
    if order == list(range(t.ndim)):
        return t
    indices = tuple(t.indices[p] for p in order)
    return DenseTensor(indices, np.ascontiguousarray(np.transpose(t.data, order)))


def inverse_permutation(order: Sequence[int]) -> List[int]:
    inverse = [0] * len(order)
    for new, old in enumerate(order):
        inverse[old] = new
    return inverse


def fuse_indices(t: DenseTensor, groups: Sequence[Sequence[int]]) -> DenseTensor:
    """
    Fuse each group of index positions into a single index.

    Groups need not be contiguous; the tensor is first permuted so that the
    groups are laid out one after another.

    Args:
        t: Tensor to fuse
        groups: Ordered partition of all index positions of ``t``

    Returns:
        Tensor with one index per group, labeled by the members joined with "·"
    """
    flat = []
    for group in groups:
        if len(group) == 0:
            raise IndexMismatchError("fuse_indices: empty group")
        flat.extend(group)
    flat = _check_positions(flat, t.ndim, 'fuse_indices')
    if len(flat) != t.ndim:
        raise IndexMismatchError(f"fuse_indices: groups {list(groups)} do not cover all {t.ndim} positions")

    permuted = permute(t, flat)
    fused = []
    start = 0
    for group in groups:
        fused.append(_fused_index(permuted.indices[start:start + len(group)]))
        start += len(group)
    return DenseTensor(tuple(fused), permuted.data.reshape(tuple(index.dim for index in fused)))


def split_index(
    t: DenseTensor,
    position: int,
    dims: Sequence[int],
    labels: Sequence[str],
    roles: Optional[Sequence[str]] = None,
) -> DenseTensor:
    """Split one index into several, row-major (last sub-index varies fastest)."""
    position = _check_positions([position], t.ndim, 'split_index')[0]
    dims = [int(d) for d in dims]
    if len(dims) != len(labels):
        raise IndexMismatchError(f"split_index: {len(dims)} dims but {len(labels)} labels")
    if any(d < 1 for d in dims) or prod(dims) != t.shape[position]:
        raise IndexMismatchError(
            f"split_index: product of {dims} does not equal dim {t.shape[position]} of '{t.labels[position]}'"
        )
    original = t.indices[position]
    roles = roles or [original.role] * len(dims)
    new = tuple(Index(label, dim, role) for label, dim, role in zip(labels, dims, roles))
    indices = t.indices[:position] + new + t.indices[position + 1:]
    return DenseTensor(indices, t.data.reshape(tuple(index.dim for index in indices)))


def matricize(t: DenseTensor, row_positions: Sequence[int], col_positions: Sequence[int]) -> DenseTensor:
    """
    Permute-then-fuse ``t`` into a (row group, column group) matrix.

    An empty group becomes a singleton index labeled "()" (rows) or "()'" (columns).
    """
    rows = list(row_positions)
    cols = list(col_positions)
    both = _check_positions(rows + cols, t.ndim, 'matricize')
    if len(both) != t.ndim:
        raise IndexMismatchError(
            f"matricize: rows {rows} and cols {cols} do not partition {t.ndim} positions"
        )
    permuted = permute(t, rows + cols)
    row_index = _fused_index(permuted.indices[:len(rows)])
    col_index = _fused_index(permuted.indices[len(rows):], EMPTY_GROUP_LABEL + "'")
    return DenseTensor((row_index, col_index), permuted.data.reshape(row_index.dim, col_index.dim))


def contract_pair(a: DenseTensor, b: DenseTensor, pairs: Sequence[Tuple[int, int]]) -> DenseTensor:
    """
    Sum over the paired indices of ``a`` and ``b``.

    Carried out as permute, matricize, matrix-multiply and split. Survivors
    keep their relative order: those of ``a`` first, then those of ``b``.
    An empty ``pairs`` list gives the tensor (outer) product.
    """
    a_summed = _check_positions([p for p, _ in pairs], a.ndim, 'contract_pair (a)')
    b_summed = _check_positions([q for _, q in pairs], b.ndim, 'contract_pair (b)')
    for p, q in zip(a_summed, b_summed):
        if a.shape[p] != b.shape[q]:
            raise IndexMismatchError(
                f"contract_pair: '{a.labels[p]}' (dim {a.shape[p]}) cannot pair with "
                f"'{b.labels[q]}' (dim {b.shape[q]})"
            )

    a_kept = [p for p in range(a.ndim) if p not in a_summed]
    b_kept = [q for q in range(b.ndim) if q not in b_summed]
    survivors = tuple(a.indices[p] for p in a_kept) + tuple(b.indices[q] for q in b_kept)

    left = matricize(a, a_kept, a_summed)
    right = matricize(b, b_summed, b_kept)
    product = left.data @ right.data
    return DenseTensor(survivors, product.reshape(tuple(index.dim for index in survivors)))


def delta_tensor(n_indices: int, dim: int, labels: Optional[Sequence[str]] = None) -> DenseTensor:
    """The n-index Kronecker delta: 1 where all indices agree, else 0."""
    if n_indices < 1 or dim < 1:
        raise IndexMismatchError(f"delta_tensor needs n_indices >= 1 and dim >= 1, got {n_indices}, {dim}")
    labels = labels or [f"k{n}" for n in range(n_indices)]
    data = np.zeros((dim,) * n_indices)
    diagonal = np.arange(dim)
    data[(diagonal,) * n_indices] = 1.0
    return DenseTensor.from_array(data, labels)
