import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import NonFiniteError, TensorNetworkError, TrainingDivergedError
from layers.models import Batch, BondGrowthPolicy, MpoLinearLayer
from layers.services.backward import mpo_backward
from layers.services.forward import mpo_forward
from layers.services.scaling import bond_inflate
from tensors.models import DenseTensor

logger = logging.getLogger(__name__)


def mse_loss(y_hat: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean squared error over all entries and its gradient."""
    diff = y_hat - y
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def _grow(layer: MpoLinearLayer, policy: BondGrowthPolicy, rng: np.random.Generator) -> MpoLinearLayer:
    mpo = layer.mpo
    for cut, dim in enumerate(mpo.bond_dims):
        new_dim = min(dim + policy.step, policy.max_bond)
        if new_dim > dim:
            mpo = bond_inflate(mpo, cut, new_dim, 'noise', policy.noise, int(rng.integers(2 ** 31)))
    return MpoLinearLayer(mpo, layer.bias)


def _step(layer, x, y, lr, freeze, strategy) -> Tuple[MpoLinearLayer, float]:
    y_hat, _ = mpo_forward(x, layer, strategy)
    loss, d_out = mse_loss(y_hat.array, y.array)
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"Loss became {loss}")
    _, d_sites, d_bias = mpo_backward(x, layer, Batch.from_array(d_out), strategy)
    sites = [
        site if frozen else DenseTensor(site.indices, site.data - lr * grad.data)
        for site, grad, frozen in zip(layer.mpo.sites, d_sites, freeze)
    ]
    bias = None if d_bias is None else layer.bias - lr * d_bias
    return layer.with_sites(sites, bias), loss


def train_mpo_regression(
    x: Batch,
    y: Batch,
    layer: MpoLinearLayer,
    lr: float,
    epochs: int,
    seed: Optional[int] = None,
    freeze: Optional[Sequence[bool]] = None,
    batch_size: Optional[int] = None,
    growth: Optional[BondGrowthPolicy] = None,
    strategy: str = 'greedy',
) -> Tuple[MpoLinearLayer, List[float]]:
    """
    Plain gradient descent of the layer on mean squared error.

    Args:
        x: Inputs (batch, in_size)
        y: Targets (batch, out_size)
        layer: Starting layer; never modified
        lr: Learning rate, ``>= 0``
        epochs: Number of passes over the data
        seed: Drives mini-batch shuffling and bond growth noise
        freeze: Per-site mask; frozen sites keep their values
        batch_size: Mini-batch size; the full batch when not given
        growth: Inflate every bond when the loss plateaus

    Returns:
        (trained layer, per-epoch loss averaged over the epoch's updates)
    """
    if lr < 0 or not np.isfinite(lr):
        raise TensorNetworkError(f"lr must be a finite value >= 0, got {lr}", code='invalid_lr')
    if x.batch_size != y.batch_size or y.features != layer.out_size:
        raise TensorNetworkError(
            f"Data shapes {x.data.shape} and {y.data.shape} do not fit the layer", code='dimension_mismatch'
        )
    freeze = [False] * layer.mpo.n_sites if freeze is None else [bool(f) for f in freeze]
    if len(freeze) != layer.mpo.n_sites:
        raise TensorNetworkError(f"freeze has {len(freeze)} entries for {layer.mpo.n_sites} sites", code='invalid_freeze')

    rng = np.random.default_rng(seed)
    size = x.batch_size if batch_size is None else int(batch_size)
    losses: List[float] = []
    best = np.inf
    stale = 0
    for epoch in range(epochs):
        if batch_size is None:
            batches = [np.arange(x.batch_size)]
        else:
            perm = rng.permutation(x.batch_size)
            batches = [perm[start:start + size] for start in range(0, x.batch_size, size)]
        total = 0.0
        try:
            for rows in batches:
                layer, loss = _step(
                    layer, Batch.from_array(x.array[rows]), Batch.from_array(y.array[rows]), lr, freeze, strategy
                )
                total += loss * len(rows)
        except (NonFiniteError, TrainingDivergedError) as exc:
            raise TrainingDivergedError(f"Training diverged at epoch {epoch}: {exc}") from exc
        losses.append(total / x.batch_size)
        if epoch % 100 == 0:
            logger.info("epoch %d: loss %.6e", epoch, losses[-1])

        if growth is not None:
            if losses[-1] < best * (1.0 - growth.min_improvement):
                best = losses[-1]
                stale = 0
            else:
                stale += 1
            if stale >= growth.patience and any(d < growth.max_bond for d in layer.mpo.bond_dims):
                layer = _grow(layer, growth, rng)
                logger.info("epoch %d: loss plateaued, bonds grown to %s", epoch, layer.mpo.bond_dims)
                stale = 0
    return layer, losses
