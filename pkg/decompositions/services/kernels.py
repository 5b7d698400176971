"""
Tucker and CP decompositions of 4-index kernels with modes (x, y, w, h).
"""
import logging
from typing import Optional, Sequence

import numpy as np

from TNZ_CORE.exceptions import DecompositionError, IndexMismatchError
from decompositions.models import CPKernel, KERNEL_MODES, TuckerKernel
from tensors.models import DenseTensor, Index
from tensors.services.factorize import thin_factorize, truncated_factorize
from tensors.services.ops import contract_pair, delta_tensor, matricize

logger = logging.getLogger(__name__)

# Uniform perturbation of the ALS starting factors
ALS_INIT_NOISE = 1e-3

# Normal equations above this condition number are treated as singular
ALS_MAX_CONDITION = 1e12


def as_kernel(k: DenseTensor) -> DenseTensor:
    """Relabel a 4-index tensor to the kernel modes x, y, w, h."""
    if k.ndim != 4:
        raise IndexMismatchError(f"A kernel must have 4 indices, got {k.ndim}")
    return DenseTensor(tuple(Index(mode, dim) for mode, dim in zip(KERNEL_MODES, k.shape)), k.data)


def _mode_factor(k: DenseTensor, mode: int, rank: Optional[int], tol: Optional[float]) -> np.ndarray:
    others = [p for p in range(4) if p != mode]
    unfolding = matricize(k, [mode], others)
    dim = k.shape[mode]
    if rank is None:
        return truncated_factorize(unfolding, tol=tol).left.data
    if rank < 1 or rank > dim:
        raise DecompositionError(
            f"Rank {rank} for mode '{KERNEL_MODES[mode]}' must be between 1 and the mode dim {dim}",
            code='invalid_rank',
        )
    u = thin_factorize(unfolding).left.data
    if rank > u.shape[1]:
        # the unfolding has fewer columns than the rank; complete the basis
        u = np.linalg.svd(unfolding.data, full_matrices=True)[0]
    return u[:, :rank]


def tucker_decompose(k: DenseTensor, ranks: Optional[Sequence[int]] = None, tol: Optional[float] = None) -> TuckerKernel:
    """
    Higher-order SVD of a 4-index kernel.

    Args:
        k: Kernel to decompose
        ranks: Fixed Tucker ranks per mode
        tol: Relative per-mode discarded-weight tolerance, used when ``ranks``
            is not given. With neither, every mode keeps its full rank.
    """
    k = as_kernel(k)
    if ranks is not None and len(ranks) != 4:
        raise DecompositionError(f"Need four Tucker ranks, got {list(ranks)}", code='invalid_rank')
    if ranks is None and tol is not None and tol < 0:
        raise DecompositionError(f"tol must be >= 0, got {tol}", code='invalid_tolerance')
    if ranks is None and tol is None:
        ranks = k.shape

    factors = []
    for mode, label in enumerate(KERNEL_MODES):
        u = _mode_factor(k, mode, None if ranks is None else int(ranks[mode]), tol)
        factors.append(DenseTensor.from_array(u, (label, f"r_{label}")))

    # contracting mode 0 each time rotates the next mode to the front
    core = k
    for factor in factors:
        core = contract_pair(core, factor, [(0, 0)])
    logger.info("tucker_decompose %s -> ranks %s", k.shape, core.shape)
    return TuckerKernel(core, tuple(factors))


def tucker_reconstruct(t: TuckerKernel) -> DenseTensor:
    dense = t.core
    for factor in t.factors:
        dense = contract_pair(dense, factor, [(0, 1)])
    return dense


def _khatri_rao_einsum(n_modes: int, skip: int) -> str:
    letters = 'abcdefgh'[:n_modes]
    operands = [f"{letters[m]}r" for m in range(n_modes) if m != skip]
    return f"{letters},{','.join(operands)}->{letters[skip]}r"


def _cp_dense(weights: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    return np.einsum('r,ar,br,cr,dr->abcd', weights, *factors)


def _initial_factors(x: np.ndarray, rank: int, rng: np.random.Generator):
    factors = []
    for mode in range(x.ndim):
        unfolding = np.moveaxis(x, mode, 0).reshape(x.shape[mode], -1)
        u = np.linalg.svd(unfolding, full_matrices=False)[0][:, :rank]
        if u.shape[1] < rank:
            u = np.hstack([u, rng.standard_normal((x.shape[mode], rank - u.shape[1]))])
        factors.append(u + rng.uniform(-ALS_INIT_NOISE, ALS_INIT_NOISE, size=u.shape))
    return factors


def cp_decompose(
    k: DenseTensor,
    rank: int,
    max_iters: int = 500,
    conv_tol: float = 1e-12,
    seed: Optional[int] = None,
) -> CPKernel:
    """
    Rank-R CP decomposition by alternating least squares.

    Each mode's factor is solved from the normal equations against the mode
    unfolding, then its columns are normalized into the weights. Iteration
    stops once the relative fit changes by less than ``conv_tol``.
    Weights are returned in descending order.
    """
    if int(rank) != rank or rank < 1:
        raise DecompositionError(f"CP rank must be >= 1, got {rank}", code='invalid_rank')
    rank = int(rank)
    if max_iters < 1:
        raise DecompositionError(f"max_iters must be >= 1, got {max_iters}", code='invalid_iterations')
    k = as_kernel(k)
    x = k.data
    norm = np.linalg.norm(x)
    if norm == 0:
        raise DecompositionError("Cannot fit a CP model to a zero kernel")

    rng = np.random.default_rng(seed)
    factors = _initial_factors(x, rank, rng)
    weights = np.ones(rank)
    fit = previous = 0.0
    for iteration in range(1, max_iters + 1):
        for mode in range(4):
            others = [factors[m] for m in range(4) if m != mode]
            gram = np.ones((rank, rank))
            for factor in others:
                gram *= factor.T @ factor
            condition = np.linalg.cond(gram)
            if not np.isfinite(condition) or condition > ALS_MAX_CONDITION:
                raise DecompositionError(
                    f"ALS normal equations are singular for mode '{KERNEL_MODES[mode]}' "
                    f"(condition {condition:.3e}); try another seed",
                    code='singular_normal_equations',
                )
            mttkrp = np.einsum(_khatri_rao_einsum(4, mode), x, *others)
            updated = np.linalg.solve(gram, mttkrp.T).T
            weights = np.linalg.norm(updated, axis=0)
            weights[weights == 0] = 1.0
            factors[mode] = updated / weights

        fit = 1.0 - np.linalg.norm(x - _cp_dense(weights, factors)) / norm
        if abs(fit - previous) < conv_tol:
            break
        previous = fit
    logger.info("cp_decompose rank %d: fit %.3e after %d iterations", rank, fit, iteration)

    order = np.argsort(-weights, kind='stable')
    return CPKernel(
        weights[order],
        tuple(DenseTensor.from_array(f[:, order], (mode, 'r')) for mode, f in zip(KERNEL_MODES, factors)),
    )


def cp_reconstruct(c: CPKernel) -> DenseTensor:
    """Sum over r of weight r times the outer product of the four r-th columns."""
    data = _cp_dense(c.weights, [factor.data for factor in c.factors])
    return DenseTensor(tuple(Index(mode, dim) for mode, dim in zip(KERNEL_MODES, data.shape)), data)


def cp_as_tucker(c: CPKernel) -> TuckerKernel:
    """The CP kernel as a Tucker kernel whose core is a weighted delta tensor."""
    labels = tuple(f"r_{mode}" for mode in KERNEL_MODES)
    delta = delta_tensor(4, c.rank, labels)
    core = delta.data * c.weights[:, None, None, None]
    factors = tuple(factor.relabel({'r': f"r_{mode}"}) for mode, factor in zip(KERNEL_MODES, c.factors))
    return TuckerKernel(
        DenseTensor(delta.indices, core),
        factors,
        orthonormal=False,
    )
