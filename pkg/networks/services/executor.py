import logging
from typing import Dict, Optional

from TNZ_CORE.exceptions import PlanError
from networks.models import ContractionPlan, TensorNetwork
from networks.services.planner import plan_contraction
from tensors.models import DenseTensor
from tensors.services.ops import contract_pair, permute

logger = logging.getLogger(__name__)

# Separates node name and label in the internal, network-unique labels
_SEP = '\x00'


def execute_plan(net: TensorNetwork, plan: ContractionPlan) -> DenseTensor:
    """
    Contract ``net`` following ``plan``.

    The result carries the network's open indices in ``net.open_labels``
    order, whichever plan was used.
    """
    partners = net.bonded()
    internal = {}
    open_names = {}
    for name, tensor in net.nodes:
        mapping = {label: f"{name}{_SEP}{label}" for label in tensor.labels}
        internal[name] = tensor.relabel(mapping)
        for label in tensor.labels:
            if (name, label) not in partners:
                open_names[mapping[label]] = label
    partner_labels = {
        f"{a[0]}{_SEP}{a[1]}": f"{b[0]}{_SEP}{b[1]}" for a, b in partners.items()
    }

    live: Dict[str, DenseTensor] = dict(internal)
    for step in plan.steps:
        if step.left == step.right or step.left not in live or step.right not in live:
            raise PlanError(f"Plan step {step} does not match the network")
        if step.result in live:
            raise PlanError(f"Plan step {step} reuses node id '{step.result}'")
        a = live.pop(step.left)
        b = live.pop(step.right)
        b_positions = {label: q for q, label in enumerate(b.labels)}
        pairs = [
            (p, b_positions[partner_labels[label]])
            for p, label in enumerate(a.labels)
            if partner_labels.get(label) in b_positions
        ]
        live[step.result] = contract_pair(a, b, pairs)
        logger.debug("%s <- (%s %s): shape %s", step.result, step.left, step.right, live[step.result].shape)
    if len(live) != 1:
        raise PlanError(f"Plan leaves {len(live)} tensors uncontracted")

    (result,) = live.values()
    result = result.relabel(open_names)
    order = [result.position(label) for label in net.open_labels]
    return permute(result, order)


def contract_network(net: TensorNetwork, strategy: str = 'greedy', plan: Optional[ContractionPlan] = None) -> DenseTensor:
    """Plan (unless a plan is given) and execute."""
    if plan is None:
        plan = plan_contraction(net, strategy)
    return execute_plan(net, plan)
