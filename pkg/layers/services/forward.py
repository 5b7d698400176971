import logging
from typing import List, Optional, Sequence, Tuple

from TNZ_CORE.exceptions import IndexMismatchError
from decompositions.services.chain import chain_network, mpo_to_matrix
from layers.models import Batch, MpoLinearLayer
from networks.models import Bond, ContractionPlan, TensorNetwork
from networks.services.executor import execute_plan
from networks.services.planner import ContractionPlanner, plan_contraction
from tensors.models import DenseTensor

logger = logging.getLogger(__name__)

INPUT_NODE = 'X'


def site_name(n: int) -> str:
    return f"W{n}"


def sequential_order(n_sites: int) -> List[Tuple[str, str]]:
    """The order ((((X W0) W1) W2) ...) for the 'fixed' strategy."""
    order = [(INPUT_NODE, site_name(0))]
    order.extend((f"@{n - 1}", site_name(n)) for n in range(1, n_sites))
    return order


def _check_batch(x: Batch, layer: MpoLinearLayer):
    if x.features != layer.in_size:
        raise IndexMismatchError(
            f"Batch has {x.features} features, layer expects {layer.in_size}", code='dimension_mismatch'
        )


def forward_network(x: Batch, layer: MpoLinearLayer) -> TensorNetwork:
    """Network of the batch (indices n, i0, i1, ...) bonded to the MPO sites."""
    mpo = layer.mpo
    labels = ['n'] + [f"i{n}" for n in range(mpo.n_sites)]
    roles = ['batch'] + ['input'] * mpo.n_sites
    x_tensor = DenseTensor.from_array(x.array.reshape((x.batch_size,) + mpo.in_dims), labels, roles)

    chain = chain_network(mpo.sites, prefix='W')
    nodes = {INPUT_NODE: x_tensor}
    nodes.update(dict(chain.nodes))
    bonds = [Bond(INPUT_NODE, f"i{n}", site_name(n), f"i{n}") for n in range(mpo.n_sites)]
    bonds.extend(chain.bonds)
    return TensorNetwork.build(nodes, bonds)


def forward_plan(x: Batch, layer: MpoLinearLayer, strategy: str = 'greedy', order=None) -> ContractionPlan:
    """Plan for the forward network, cached on the layer per (batch size, strategy)."""
    key = (x.batch_size, strategy)
    if strategy == 'fixed' or key not in layer.plan_cache:
        plan = plan_contraction(forward_network(x, layer), strategy, order)
        if strategy != 'fixed':
            layer.plan_cache[key] = plan
        return plan
    return layer.plan_cache[key]


def mpo_forward(
    x: Batch,
    layer: MpoLinearLayer,
    strategy: str = 'greedy',
    order: Optional[Sequence[Tuple[str, str]]] = None,
) -> Tuple[Batch, int]:
    """
    Apply the layer to a batch by contracting the batch with every site.

    The batch index stays open through the contraction, so the planner
    amortizes its cost over the whole batch.

    Returns:
        (output batch, estimated FLOPs of the plan used)
    """
    _check_batch(x, layer)
    plan = forward_plan(x, layer, strategy, order)
    result = execute_plan(forward_network(x, layer), plan)
    y = result.data.reshape(x.batch_size, layer.out_size)
    if layer.bias is not None:
        y = y + layer.bias[None, :]
    logger.debug("mpo_forward batch %d via %s: %d flops", x.batch_size, plan.strategy, plan.est_flops)
    return Batch.from_array(y), plan.est_flops


def naive_forward_cost(layer: MpoLinearLayer, batch_size: int) -> int:
    """FLOPs of contracting the sites to a dense matrix first, then multiplying."""
    mpo = layer.mpo
    order = [(site_name(0), site_name(1))] if mpo.n_sites > 1 else []
    order.extend((f"@{n - 2}", site_name(n)) for n in range(2, mpo.n_sites))
    rebuild = ContractionPlanner(chain_network(mpo.sites, prefix='W')).fixed(order).est_flops
    return rebuild + batch_size * layer.in_size * layer.out_size


def dense_forward(x: Batch, layer: MpoLinearLayer) -> Batch:
    """Dense reference: rebuild W and multiply."""
    y = x.array @ mpo_to_matrix(layer.mpo).data
    if layer.bias is not None:
        y = y + layer.bias[None, :]
    return Batch.from_array(y)
