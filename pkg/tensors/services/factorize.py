import logging
import math
from typing import Tuple

import numpy as np

from TNZ_CORE.exceptions import FactorizationError, IndexMismatchError
from tensors.models import DenseTensor, FactorResult, Index

logger = logging.getLogger(__name__)


def _require_matrix(m: DenseTensor, what: str):
    if m.ndim != 2:
        raise IndexMismatchError(f"{what} needs a 2-index tensor, got {m.ndim} indices")


def _svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"SVD did not converge for a {matrix.shape} matrix: {exc}") from exc


def _result(m: DenseTensor, u, s, vh, discarded: float, bond_label: str) -> FactorResult:
    bond = Index(bond_label, s.shape[0], 'bond')
    left = DenseTensor((m.indices[0], bond), u)
    right = DenseTensor((bond, m.indices[1]), vh)
    return FactorResult(left, s, right, discarded)


def thin_factorize(m: DenseTensor, bond_label: str = 'bond') -> FactorResult:
    """Untruncated thin SVD of a 2-index tensor."""
    _require_matrix(m, 'thin_factorize')
    u, s, vh = _svd(m.data)
    return _result(m, u, s, vh, 0.0, bond_label)


def select_rank(singular_values: np.ndarray, chi_max=math.inf, tol: float = 0.0) -> int:
    """
    Smallest rank k <= chi_max whose discarded weight is within ``tol`` times
    the Frobenius norm. At least 1 is always kept; ties keep the smaller rank.
    """
    s = np.asarray(singular_values, dtype=np.float64)
    squares = s ** 2
    norm = math.sqrt(float(np.sum(squares)))
    # tails[k] = sum of squares from k on
    tails = np.append(np.cumsum(squares[::-1])[::-1], 0.0)
    threshold = tol * norm
    k_tol = next(k for k in range(1, s.shape[0] + 1) if math.sqrt(tails[k]) <= threshold)
    return int(max(1, min(k_tol, chi_max)))


def truncated_factorize(
    m: DenseTensor,
    chi_max=math.inf,
    tol: float = 0.0,
    bond_label: str = 'bond',
) -> FactorResult:
    """
    Truncated SVD of a 2-index tensor.

    Args:
        m: Matrix to factorize
        chi_max: Largest rank to keep (``math.inf`` for no limit)
        tol: Relative tolerance on the discarded weight, ``>= 0``
        bond_label: Label of the new index shared by ``left`` and ``right``

    Returns:
        FactorResult whose discarded weight is the root-sum-square of the
        dropped singular values. A zero matrix gives rank 1 with value 0.
    """
    _require_matrix(m, 'truncated_factorize')
    if tol < 0:
        raise FactorizationError(f"tol must be >= 0, got {tol}", code='invalid_tolerance')
    if chi_max < 1:
        raise FactorizationError(f"chi_max must be >= 1, got {chi_max}", code='invalid_rank')

    u, s, vh = _svd(m.data)
    k = select_rank(s, chi_max, tol)
    discarded = math.sqrt(float(np.sum(s[k:] ** 2)))
    logger.debug("truncated_factorize %s -> rank %d of %d, discarded %.3e", m.shape, k, s.shape[0], discarded)
    return _result(m, u[:, :k], s[:k], vh[:k, :], discarded, bond_label)


def qr_factorize(m: DenseTensor, side: str = 'left', bond_label: str = 'bond') -> Tuple[DenseTensor, DenseTensor]:
    """
    QR (``side='left'``: orthonormal columns on the left factor) or LQ
    (``side='right'``: orthonormal rows on the right factor) of a matrix.
    """
    _require_matrix(m, 'qr_factorize')
    try:
        if side == 'left':
            q, r = np.linalg.qr(m.data)
            bond = Index(bond_label, q.shape[1], 'bond')
            return DenseTensor((m.indices[0], bond), q), DenseTensor((bond, m.indices[1]), r)
        if side == 'right':
            q, r = np.linalg.qr(m.data.T)
            bond = Index(bond_label, q.shape[1], 'bond')
            return DenseTensor((m.indices[0], bond), r.T), DenseTensor((bond, m.indices[1]), q.T)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"QR failed for a {m.shape} matrix: {exc}") from exc
    raise FactorizationError(f"side must be 'left' or 'right', got '{side}'", code='invalid_side')
