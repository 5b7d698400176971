"""
Matrix product operators and states: construction by truncated SVD sweeps,
contraction back to dense form, and recompression.
"""
import logging
import math
from math import prod
from typing import List, Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import DecompositionError, IndexMismatchError
from decompositions.models import MPO, MPS, bond_label
from networks.models import Bond, TensorNetwork
from networks.services.executor import contract_network
from tensors.models import DenseTensor, Index
from tensors.services.factorize import qr_factorize, thin_factorize, truncated_factorize
from tensors.services.ops import contract_pair, fuse_indices, matricize, permute, split_index

logger = logging.getLogger(__name__)

SWEEP_METHODS = ('svd', 'qr')


def _unfuse(t: DenseTensor, position: int, indices: Sequence[Index]) -> DenseTensor:
    return split_index(
        t, position,
        [index.dim for index in indices],
        [index.label for index in indices],
        [index.role for index in indices],
    )


def _sweep(t: DenseTensor, site_labels: Sequence[Sequence[str]], chi_max, tol):
    """
    Left-to-right truncated SVD sweep of ``t`` into a chain.

    At step n the remainder is matricized as ((b{n-1}, site labels of n), rest);
    the left factor becomes site n and diag(s)·right is carried on.
    """
    sites, spectra, errors = [], [], []
    rest = t
    for n in range(len(site_labels) - 1):
        row_labels = ([bond_label(n - 1)] if n > 0 else []) + list(site_labels[n])
        rows = [rest.position(label) for label in row_labels]
        cols = [p for p in range(rest.ndim) if p not in rows]
        row_indices = [rest.indices[p] for p in rows]
        col_indices = [rest.indices[p] for p in cols]

        result = truncated_factorize(matricize(rest, rows, cols), chi_max, tol, bond_label(n))
        sites.append(_unfuse(result.left, 0, row_indices))
        rest = _unfuse(DenseTensor(result.right.indices, result.absorb_right()), 1, col_indices)
        spectra.append(result.singular_values)
        errors.append(result.discarded_weight)
        logger.debug("sweep cut %d: bond %d, discarded %.3e", n, result.rank, result.discarded_weight)
    sites.append(rest)
    return sites, spectra, errors


def _check_sweep_args(chi_max, tol):
    if chi_max < 1:
        raise DecompositionError(f"chi_max must be >= 1, got {chi_max}", code='invalid_rank')
    if tol < 0:
        raise DecompositionError(f"tol must be >= 0, got {tol}", code='invalid_tolerance')


def matrix_to_mpo(w: DenseTensor, in_dims: Sequence[int], out_dims: Sequence[int], chi_max=math.inf, tol: float = 0.0) -> MPO:
    """
    Decompose a (rows = inputs, cols = outputs) matrix into an MPO.

    Args:
        w: 2-index tensor of shape (prod(in_dims), prod(out_dims))
        in_dims: Per-site input dims i_n
        out_dims: Per-site output dims j_n, same length as ``in_dims``
        chi_max: Largest bond dimension kept at each cut
        tol: Relative discarded-weight tolerance per cut

    Returns:
        MPO with ``cut_spectra`` and ``truncation_errors`` filled in
    """
    in_dims = [int(d) for d in in_dims]
    out_dims = [int(d) for d in out_dims]
    if w.ndim != 2:
        raise IndexMismatchError(f"matrix_to_mpo needs a 2-index tensor, got {w.ndim} indices")
    if not in_dims or len(in_dims) != len(out_dims):
        raise IndexMismatchError(f"in_dims {in_dims} and out_dims {out_dims} must be non-empty and of equal length")
    if prod(in_dims) != w.shape[0] or prod(out_dims) != w.shape[1]:
        raise IndexMismatchError(
            f"Matrix shape {w.shape} does not match dims {in_dims} x {out_dims}", code='dimension_mismatch'
        )
    _check_sweep_args(chi_max, tol)

    n_sites = len(in_dims)
    labels = [f"i{n}" for n in range(n_sites)] + [f"j{n}" for n in range(n_sites)]
    roles = ['input'] * n_sites + ['output'] * n_sites
    t = DenseTensor.from_array(w.data.reshape(in_dims + out_dims), labels, roles)
    # pair (i_n, j_n) per site
    t = permute(t, [p for n in range(n_sites) for p in (n, n_sites + n)])

    sites, spectra, errors = _sweep(t, [[f"i{n}", f"j{n}"] for n in range(n_sites)], chi_max, tol)
    mpo = MPO(tuple(sites), tuple(spectra), tuple(errors))
    logger.info("matrix_to_mpo %s -> bonds %s", w.shape, mpo.bond_dims)
    return mpo


def vector_to_mps(x: DenseTensor, dims: Sequence[int], chi_max=math.inf, tol: float = 0.0) -> MPS:
    """Decompose a vector into an MPS with site dims ``dims``."""
    dims = [int(d) for d in dims]
    if x.ndim != 1:
        raise IndexMismatchError(f"vector_to_mps needs a 1-index tensor, got {x.ndim} indices")
    if not dims or prod(dims) != x.size:
        raise IndexMismatchError(f"Vector length {x.size} does not match dims {dims}", code='dimension_mismatch')
    _check_sweep_args(chi_max, tol)

    labels = [f"d{n}" for n in range(len(dims))]
    t = DenseTensor.from_array(x.data.reshape(dims), labels, ['output'] * len(dims))
    sites, spectra, errors = _sweep(t, [[label] for label in labels], chi_max, tol)
    return MPS(tuple(sites), tuple(spectra), tuple(errors))


def chain_network(sites: Sequence[DenseTensor], prefix: str = 'W') -> TensorNetwork:
    """Tensor network of a chain whose neighbors share bond b{n}."""
    nodes = {f"{prefix}{n}": site for n, site in enumerate(sites)}
    bonds = [Bond(f"{prefix}{n}", bond_label(n), f"{prefix}{n + 1}", bond_label(n)) for n in range(len(sites) - 1)]
    return TensorNetwork.build(nodes, bonds)


def mpo_to_matrix(mpo: MPO) -> DenseTensor:
    """Contract all sites into the (i, j) matrix, rows = inputs."""
    dense = contract_network(chain_network(mpo.sites))
    n_sites = mpo.n_sites
    rows = [dense.position(f"i{n}") for n in range(n_sites)]
    cols = [dense.position(f"j{n}") for n in range(n_sites)]
    matrix = fuse_indices(dense, [rows, cols])
    return DenseTensor((Index('i', matrix.shape[0], 'input'), Index('j', matrix.shape[1], 'output')), matrix.data)


def mps_to_vector(mps: MPS) -> DenseTensor:
    """Contract all sites into a single index 'd'."""
    dense = contract_network(chain_network(mps.sites, prefix='A'))
    order = [dense.position(f"d{n}") for n in range(mps.n_sites)]
    return DenseTensor((Index('d', mps.size, 'output'),), permute(dense, order).data.reshape(-1))


# ==================== RECOMPRESSION ====================

def _orthogonalize_right(sites: List[DenseTensor], method: str) -> None:
    """Right-to-left sweep leaving sites 1..N-1 with orthonormal rows over (physical, right bond)."""
    for n in range(len(sites) - 1, 0, -1):
        site = sites[n]
        label = bond_label(n - 1)
        temp = f"{label}~"
        cols = list(range(1, site.ndim))
        col_indices = [site.indices[p] for p in cols]
        m = matricize(site, [0], cols)
        if method == 'qr':
            carry, q = qr_factorize(m, side='right', bond_label=temp)
        else:
            result = thin_factorize(m, bond_label=temp)
            carry = DenseTensor(result.left.indices, result.left.data * result.singular_values[None, :])
            q = result.right
        sites[n] = _unfuse(q, 1, col_indices).relabel({temp: label})
        left = sites[n - 1]
        sites[n - 1] = contract_pair(left, carry, [(left.position(label), 0)]).relabel({temp: label})


def _truncate_left(sites: List[DenseTensor], chi_max, tol) -> Tuple[list, list]:
    spectra, errors = [], []
    for n in range(len(sites) - 1):
        site = sites[n]
        label = bond_label(n)
        temp = f"{label}~"
        rows = list(range(site.ndim - 1))
        row_indices = [site.indices[p] for p in rows]
        result = truncated_factorize(matricize(site, rows, [site.ndim - 1]), chi_max, tol, temp)
        sites[n] = _unfuse(result.left, 0, row_indices).relabel({temp: label})
        carry = DenseTensor(result.right.indices, result.absorb_right())
        right = sites[n + 1]
        sites[n + 1] = contract_pair(carry, right, [(1, right.position(label))]).relabel({temp: label})
        spectra.append(result.singular_values)
        errors.append(result.discarded_weight)
    return spectra, errors


def _recompress_sites(sites: Sequence[DenseTensor], chi_max, tol, method: str):
    _check_sweep_args(chi_max, tol)
    if method not in SWEEP_METHODS:
        raise DecompositionError(f"method must be one of {SWEEP_METHODS}, got '{method}'", code='invalid_method')
    sites = list(sites)
    _orthogonalize_right(sites, method)
    spectra, errors = _truncate_left(sites, chi_max, tol)
    return sites, spectra, errors


def mps_recompress(m: MPS, chi_max=math.inf, tol: float = 0.0, method: str = 'svd') -> MPS:
    """
    Reduce the bond dimensions of an MPS.

    A right-to-left orthogonalization sweep (SVD or LQ per ``method``) is
    followed by a left-to-right truncated SVD sweep, so every cut is truncated
    against its true Schmidt spectrum.
    """
    sites, spectra, errors = _recompress_sites(m.sites, chi_max, tol, method)
    result = MPS(tuple(sites), tuple(spectra), tuple(errors))
    logger.debug("mps_recompress bonds %s -> %s", m.bond_dims, result.bond_dims)
    return result


def mpo_recompress(mpo: MPO, chi_max=math.inf, tol: float = 0.0, method: str = 'svd') -> MPO:
    """``mps_recompress`` applied to an MPO, each site's (i_n, j_n) acting as one physical index."""
    sites, spectra, errors = _recompress_sites(mpo.sites, chi_max, tol, method)
    result = MPO(tuple(sites), tuple(spectra), tuple(errors))
    logger.debug("mpo_recompress bonds %s -> %s", mpo.bond_dims, result.bond_dims)
    return result


# ==================== DIMENSION FACTORIZATION ====================

def _prime_factors(m: int) -> List[int]:
    factors = []
    p = 2
    while p * p <= m:
        while m % p == 0:
            factors.append(p)
            m //= p
        p += 1
    if m > 1:
        factors.append(m)
    return factors


def _candidates(m: int, n_factors: int, smallest: int):
    """Non-decreasing tuples of ``n_factors`` integers >= ``smallest`` with product ``m``."""
    if n_factors == 1:
        if m >= smallest:
            yield (m,)
        return
    f = smallest
    while f ** n_factors <= m:
        if m % f == 0:
            for tail in _candidates(m // f, n_factors - 1, f):
                yield (f,) + tail
        f += 1


def auto_factorize(m: int, n_factors: int) -> List[int]:
    """
    Most balanced split of ``m`` into ``n_factors`` factors, each at least 2.

    Balance is the ratio of the largest to the smallest factor; factors are
    returned smallest first and ties go to the lexicographically smaller list.
    A size with too few prime factors is rejected rather than padded.
    """
    m, n_factors = int(m), int(n_factors)
    if m < 1 or n_factors < 1:
        raise DecompositionError(f"auto_factorize needs m >= 1 and n_factors >= 1, got {m}, {n_factors}")
    if n_factors == 1:
        return [m]
    if len(_prime_factors(m)) < n_factors:
        raise DecompositionError(
            f"{m} cannot be split into {n_factors} factors >= 2", code='not_factorable'
        )
    best = min(_candidates(m, n_factors, 2), key=lambda c: (c[-1] / c[0], c))
    return list(best)


# ==================== RANDOM CHAINS ====================

def random_mpo(in_dims: Sequence[int], out_dims: Sequence[int], bond_dim: int, seed=None) -> MPO:
    """
    Seeded MPO with Gaussian cores and uniform inner bonds of ``bond_dim``.

    Cores are scaled by 1/sqrt(left bond * input dim) so the layer keeps
    unit-variance inputs at roughly unit variance.
    """
    if len(in_dims) != len(out_dims) or not in_dims:
        raise IndexMismatchError(f"in_dims {list(in_dims)} and out_dims {list(out_dims)} must be non-empty and of equal length")
    if bond_dim < 1:
        raise DecompositionError(f"bond_dim must be >= 1, got {bond_dim}", code='invalid_rank')
    rng = np.random.default_rng(seed)
    n_sites = len(in_dims)
    cores = []
    for n, (i, j) in enumerate(zip(in_dims, out_dims)):
        left = 1 if n == 0 else bond_dim
        right = 1 if n == n_sites - 1 else bond_dim
        cores.append(rng.standard_normal((left, i, j, right)) / math.sqrt(left * i))
    return MPO.from_cores(cores)
