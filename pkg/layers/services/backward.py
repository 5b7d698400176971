import logging
from typing import List, Optional, Tuple

import numpy as np

from TNZ_CORE.exceptions import IndexMismatchError
from decompositions.services.chain import chain_network
from layers.models import Batch, MpoLinearLayer
from layers.services.forward import INPUT_NODE, forward_network, site_name
from networks.models import Bond, TensorNetwork
from networks.services.executor import contract_network
from tensors.models import DenseTensor

logger = logging.getLogger(__name__)

GRADIENT_NODE = 'dY'


def _gradient_tensor(d_out: Batch, layer: MpoLinearLayer) -> DenseTensor:
    mpo = layer.mpo
    labels = ['n'] + [f"j{n}" for n in range(mpo.n_sites)]
    roles = ['batch'] + ['output'] * mpo.n_sites
    return DenseTensor.from_array(d_out.array.reshape((d_out.batch_size,) + mpo.out_dims), labels, roles)


def site_gradient(x: Batch, layer: MpoLinearLayer, d_out: Batch, k: int, strategy: str = 'greedy') -> DenseTensor:
    """
    Gradient with respect to site k: the forward network with site k removed
    and the output gradient attached to the open output indices.
    """
    forward = forward_network(x, layer)
    hole = site_name(k)
    nodes = {name: tensor for name, tensor in forward.nodes if name != hole}
    nodes[GRADIENT_NODE] = _gradient_tensor(d_out, layer)
    bonds = [bond for bond in forward.bonds if hole not in (bond.node_a, bond.node_b)]
    bonds.append(Bond(INPUT_NODE, 'n', GRADIENT_NODE, 'n'))
    bonds.extend(
        Bond(site_name(n), f"j{n}", GRADIENT_NODE, f"j{n}") for n in range(layer.mpo.n_sites) if n != k
    )
    result = contract_network(TensorNetwork.build(nodes, bonds), strategy)

    site = layer.mpo.sites[k]
    order = [result.position(label) for label in site.labels]
    return DenseTensor(site.indices, np.transpose(result.data, order))


def input_gradient(layer: MpoLinearLayer, d_out: Batch, strategy: str = 'greedy') -> Batch:
    """The output gradient pulled back through the transposed map."""
    chain = chain_network(layer.mpo.sites, prefix='W')
    nodes = {GRADIENT_NODE: _gradient_tensor(d_out, layer)}
    nodes.update(dict(chain.nodes))
    bonds = [Bond(GRADIENT_NODE, f"j{n}", site_name(n), f"j{n}") for n in range(layer.mpo.n_sites)]
    bonds.extend(chain.bonds)
    result = contract_network(TensorNetwork.build(nodes, bonds), strategy)
    return Batch.from_array(result.data.reshape(d_out.batch_size, layer.in_size))


def mpo_backward(
    x: Batch,
    layer: MpoLinearLayer,
    d_out: Batch,
    strategy: str = 'greedy',
) -> Tuple[Batch, List[DenseTensor], Optional[np.ndarray]]:
    """
    Gradients of ``L = sum(d_out * Y)`` for ``Y = mpo_forward(x, layer)``.

    Returns:
        (d_x, one gradient per site shaped like that site, d_bias or None)
    """
    if x.features != layer.in_size or d_out.features != layer.out_size or x.batch_size != d_out.batch_size:
        raise IndexMismatchError(
            f"Shapes x={x.data.shape}, d_out={d_out.data.shape} do not fit a "
            f"{layer.in_size}x{layer.out_size} layer",
            code='dimension_mismatch',
        )
    d_sites = [site_gradient(x, layer, d_out, k, strategy) for k in range(layer.mpo.n_sites)]
    d_x = input_gradient(layer, d_out, strategy)
    d_bias = None if layer.bias is None else d_out.array.sum(axis=0)
    logger.debug("mpo_backward batch %d over %d sites", x.batch_size, layer.mpo.n_sites)
    return d_x, d_sites, d_bias
