import logging
from collections import Counter
from math import prod
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

from TNZ_CORE.exceptions import PlanError
from networks.models import ContractionPlan, PlanStep, RESERVED_PREFIX, TensorNetwork

logger = logging.getLogger(__name__)

STRATEGIES = ('exhaustive', 'greedy', 'fixed')


def pairwise_cost(a_dims: Iterable[int], b_dims: Iterable[int], shared: Iterable[int]) -> int:
    """
    FLOPs of one pairwise contraction: the product of every distinct index
    dimension involved (a-only x shared x b-only).

    Args:
        a_dims: Dims of all indices of the first tensor
        b_dims: Dims of all indices of the second tensor
        shared: Dims of the contracted indices, a sub-multiset of both

    Returns:
        Upper-bound multiply-accumulate count
    """
    a_dims, b_dims, shared = Counter(a_dims), Counter(b_dims), Counter(shared)
    if shared - a_dims or shared - b_dims:
        raise PlanError(f"Shared dims {sorted(shared.elements())} are not contained in both operands")
    a_only = a_dims - shared
    b_only = b_dims - shared
    return prod(a_only.elements()) * prod(shared.elements()) * prod(b_only.elements())


class ContractionPlanner:
    """
    Searches pairwise contraction orders under the product-of-dimensions rule.

    Every index of the network becomes a "leg": a bond is one leg shared by two
    nodes, an open index is a leg owned by a single node. Contracting two
    groups of nodes leaves the symmetric difference of their legs.
    """

    # Exhaustive search enumerates all subsets of nodes
    EXHAUSTIVE_NODE_LIMIT = 10

    def __init__(self, net: TensorNetwork):
        if len(net) == 0:
            raise PlanError("Cannot plan an empty network")
        self.net = net
        self.names = list(net.names)
        self.sizes: Dict[Hashable, int] = {}
        self.legs: Dict[str, FrozenSet[Hashable]] = {}

        partners = net.bonded()
        for name, tensor in net.nodes:
            legs = set()
            for index in tensor.indices:
                end = (name, index.label)
                key = tuple(sorted((end, partners[end]))) if end in partners else end
                self.sizes[key] = index.dim
                legs.add(key)
            self.legs[name] = frozenset(legs)

    # ==================== COST MODEL ====================

    def step_cost(self, legs_a: FrozenSet, legs_b: FrozenSet) -> int:
        return prod(self.sizes[leg] for leg in legs_a | legs_b)

    def _finish(self, steps: List[PlanStep], flops: int, strategy: str) -> ContractionPlan:
        plan = ContractionPlan(tuple(steps), flops, strategy)
        logger.debug("%s plan over %d nodes: %d flops", strategy, len(self.names), flops)
        return plan

    # ==================== STRATEGIES ====================

    def fixed(self, order: Sequence[Tuple[str, str]]) -> ContractionPlan:
        """Validate and cost a caller-supplied order of (left, right) node ids."""
        live = dict(self.legs)
        steps = []
        flops = 0
        for k, pair in enumerate(order):
            left, right = (str(node) for node in pair)
            if left == right or left not in live or right not in live:
                raise PlanError(f"Step {k} ({left}, {right}) does not name two live nodes")
            result = f"{RESERVED_PREFIX}{k}"
            flops += self.step_cost(live[left], live[right])
            live[result] = live.pop(left) ^ live.pop(right)
            steps.append(PlanStep(left, right, result))
        if len(live) != 1:
            raise PlanError(f"Order leaves {len(live)} nodes uncontracted: {sorted(live)}")
        return self._finish(steps, flops, 'fixed')

    def greedy(self) -> ContractionPlan:
        """Repeatedly contract the cheapest pair; ties go to the lexicographically smallest ids."""
        live = dict(self.legs)
        steps = []
        flops = 0
        while len(live) > 1:
            ids = sorted(live)
            cost, left, right = min(
                (self.step_cost(live[a], live[b]), a, b)
                for i, a in enumerate(ids)
                for b in ids[i + 1:]
            )
            result = f"{RESERVED_PREFIX}{len(steps)}"
            flops += cost
            live[result] = live.pop(left) ^ live.pop(right)
            steps.append(PlanStep(left, right, result))
        return self._finish(steps, flops, 'greedy')

    def exhaustive(self) -> ContractionPlan:
        """
        Minimal-cost plan over all binary contraction trees, by dynamic
        programming over subsets of nodes.
        """
        n = len(self.names)
        if n > self.EXHAUSTIVE_NODE_LIMIT:
            raise PlanError(
                f"Exhaustive search supports at most {self.EXHAUSTIVE_NODE_LIMIT} nodes, got {n}",
                code='too_many_nodes',
            )
        full = (1 << n) - 1
        legs = {0: frozenset()}
        for mask in range(1, full + 1):
            low = mask & -mask
            legs[mask] = legs[mask ^ low] ^ self.legs[self.names[low.bit_length() - 1]]

        best: Dict[int, Tuple[int, Optional[int]]] = {}
        for k in range(n):
            best[1 << k] = (0, None)
        for mask in sorted(range(1, full + 1), key=lambda m: (bin(m).count('1'), m)):
            if mask in best:
                continue
            low = mask & -mask
            rest_bits = mask ^ low
            choice = None
            # sub always holds the lowest node, so each split is seen once
            sub = rest_bits
            while True:
                left = sub | low
                right = mask ^ left
                if right:
                    cost = best[left][0] + best[right][0] + self.step_cost(legs[left], legs[right])
                    if choice is None or cost < choice[0]:
                        choice = (cost, left)
                if sub == 0:
                    break
                sub = (sub - 1) & rest_bits
            best[mask] = choice

        steps: List[PlanStep] = []

        def build(mask: int) -> str:
            split = best[mask][1]
            if split is None:
                return self.names[mask.bit_length() - 1]
            left_id = build(split)
            right_id = build(mask ^ split)
            result = f"{RESERVED_PREFIX}{len(steps)}"
            steps.append(PlanStep(left_id, right_id, result))
            return result

        build(full)
        return self._finish(steps, best[full][0], 'exhaustive')


def plan_contraction(
    net: TensorNetwork,
    strategy: str = 'greedy',
    order: Optional[Sequence[Tuple[str, str]]] = None,
) -> ContractionPlan:
    """
    Plan the contraction of ``net``.

    Args:
        net: Network to contract
        strategy: 'exhaustive', 'greedy' or 'fixed'
        order: (left, right) node-id pairs, required for 'fixed'. Results of
            step k are named "@k".
    """
    planner = ContractionPlanner(net)
    if strategy == 'exhaustive':
        return planner.exhaustive()
    if strategy == 'greedy':
        return planner.greedy()
    if strategy == 'fixed':
        if order is None:
            raise PlanError("The 'fixed' strategy needs an order")
        return planner.fixed(order)
    raise PlanError(f"Unknown strategy '{strategy}', expected one of {STRATEGIES}", code='unknown_strategy')


def recompute_flops(net: TensorNetwork, plan: ContractionPlan) -> int:
    """Recost ``plan`` step by step with ``pairwise_cost`` on plain dims."""
    partners = net.bonded()
    live = {}
    for name, tensor in net.nodes:
        live[name] = {(name, label): dim for label, dim in zip(tensor.labels, tensor.shape)}
    total = 0
    for step in plan.steps:
        a, b = live.pop(step.left), live.pop(step.right)
        shared_keys = [end for end in a if partners.get(end) in b]
        shared_partner_keys = {partners[end] for end in shared_keys}
        total += pairwise_cost(a.values(), b.values(), [a[end] for end in shared_keys])
        merged = {end: dim for end, dim in a.items() if end not in shared_keys}
        merged.update({end: dim for end, dim in b.items() if end not in shared_partner_keys})
        live[step.result] = merged
    return total
