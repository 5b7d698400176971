"""
The stack view of an MPO: processing sites one at a time turns the MPO into
a sequence of sparse fully-connected layers whose hidden features include the
open bond indices.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import IndexMismatchError, ScheduleError
from decompositions.models import MPO, bond_label
from stacks.models import Stack, StackLayer
from tensors.services.ops import matricize

logger = logging.getLogger(__name__)


def _site_order(schedule: Sequence[int], n_sites: int) -> List[int]:
    """Sites in processing order from their per-site stage indices."""
    stages = [int(stage) for stage in schedule]
    if len(stages) != n_sites:
        raise ScheduleError(f"Schedule has {len(stages)} entries for {n_sites} sites", code='invalid_schedule')
    if sorted(stages) != list(range(n_sites)):
        raise ScheduleError(f"Stages {stages} collide or leave gaps; need a permutation of 0..{n_sites - 1}",
                            code='colliding_stages')
    order = [0] * n_sites
    for site, stage in enumerate(stages):
        order[stage] = site
    return order


def _legs(mpo: MPO, done: Sequence[bool]) -> List[Tuple[str, int]]:
    """Feature legs (label, dim) in chain order for a set of processed sites."""
    legs = []
    for n in range(mpo.n_sites):
        label = f"j{n}" if done[n] else f"i{n}"
        legs.append((label, mpo.sites[n].index(label).dim))
        if n < mpo.n_sites - 1 and done[n] != done[n + 1]:
            legs.append((bond_label(n), mpo.bond_dims[n]))
    return legs


def bond_routes(schedule: Sequence[int], n_sites: int) -> List[Tuple[bool, bool]]:
    """
    Per site, whether its (left, right) bond is already produced when the
    site is processed, so that the stage consumes it as an input.
    """
    stages = [int(stage) for stage in schedule]
    return [
        (n > 0 and stages[n - 1] < stages[n], n < n_sites - 1 and stages[n + 1] < stages[n])
        for n in range(n_sites)
    ]


def build_stack(mpo: MPO, schedule: Optional[Sequence[int]] = None, routes=None) -> Stack:
    """
    Stack view of ``mpo``.

    Args:
        mpo: The MPO
        schedule: Stage index of each site; the identity order when not given
        routes: Optional per-site (left bond incoming, right bond incoming)
            flags; rejected if they disagree with the schedule

    Returns:
        Stack whose composed layers equal the MPO's dense matrix
    """
    n_sites = mpo.n_sites
    schedule = list(range(n_sites)) if schedule is None else list(schedule)
    order = _site_order(schedule, n_sites)
    expected = bond_routes(schedule, n_sites)
    if routes is not None:
        routes = [tuple(bool(flag) for flag in route) for route in routes]
        for n, (declared, derived) in enumerate(zip(routes, expected)):
            if declared != derived:
                raise ScheduleError(
                    f"Site {n} routes its bonds as {declared}, the schedule implies {derived}",
                    code='invalid_routing',
                )

    done = [False] * n_sites
    stage_legs = [_legs(mpo, done)]
    layers = []
    for site in order:
        legs = stage_legs[-1]
        site_tensor = mpo.sites[site]
        left_in, right_in = expected[site]
        consumed = [label for label, flag in ((bond_label(site - 1), left_in), (f"i{site}", True),
                                              (bond_label(site), right_in)) if flag]
        produced = [label for label in site_tensor.labels if label not in consumed and not label.startswith('i')]

        labels = [label for label, _ in legs]
        start = labels.index(consumed[0])
        stop = start + len(consumed)
        if labels[start:stop] != consumed:
            raise ScheduleError(f"Stage for site {site} cannot consume non-adjacent legs {consumed}")
        site_matrix = matricize(
            site_tensor,
            [site_tensor.position(label) for label in consumed],
            [site_tensor.position(label) for label in produced],
        )
        layers.append(StackLayer(
            site_matrix,
            tuple(dim for _, dim in legs[:start]),
            tuple(dim for _, dim in legs[stop:]),
            site,
        ))
        done[site] = True
        stage_legs.append(_legs(mpo, done))

    logger.debug("build_stack order %s, stage dims %s", order, [[d for _, d in legs] for legs in stage_legs])
    return Stack(
        tuple(layers),
        tuple(tuple(dim for _, dim in legs) for legs in stage_legs),
        tuple(tuple(label for label, _ in legs) for legs in stage_legs),
        tuple(order),
    )


def intermediate_features(stack: Stack, x) -> List[np.ndarray]:
    """Activation after each stage, for one input vector or a (batch, in) array."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    features = x[None, :] if single else x
    if features.shape[1] != stack.in_size:
        raise IndexMismatchError(
            f"Input has {features.shape[1]} features, the stack expects {stack.in_size}", code='dimension_mismatch'
        )
    outputs = []
    for layer in stack.layers:
        features = layer.apply(features)
        outputs.append(features[0] if single else features)
    return outputs
