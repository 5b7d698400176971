import logging
from typing import List

import numpy as np

from TNZ_CORE.exceptions import GaugeError
from decompositions.models import MPO, bond_label
from stacks.models import GaugeTransform, Stack
from tensors.services.ops import contract_pair

logger = logging.getLogger(__name__)


def _check_cut(mpo: MPO, g: GaugeTransform):
    if g.cut < 0 or g.cut >= mpo.n_sites - 1:
        raise GaugeError(f"Cut {g.cut} out of range for a {mpo.n_sites}-site MPO", code='invalid_cut')
    if g.dim != mpo.bond_dims[g.cut]:
        raise GaugeError(f"Gauge dim {g.dim} does not match bond {g.cut} of dim {mpo.bond_dims[g.cut]}",
                         code='dimension_mismatch')


def apply_gauge(mpo: MPO, g: GaugeTransform) -> MPO:
    """
    Insert ``x⁻¹ · x`` on bond ``g.cut``: the left site absorbs ``x⁻¹``
    (a → a·x⁻¹) and the right site absorbs ``x`` (b → x·b). The dense
    matrix is unchanged.
    """
    _check_cut(mpo, g)
    if g.is_identity():
        return mpo
    label = bond_label(g.cut)
    sites = list(mpo.sites)
    left, right = sites[g.cut], sites[g.cut + 1]
    sites[g.cut] = contract_pair(left, g.x_inv, [(left.position(label), 0)]).relabel({'g_r': label})
    sites[g.cut + 1] = contract_pair(g.x, right, [(1, right.position(label))]).relabel({'g_l': label})
    logger.debug("apply_gauge on cut %d (dim %d)", g.cut, g.dim)
    return MPO(tuple(sites))


def gauge_feature_maps(stack: Stack, g: GaugeTransform) -> List[np.ndarray]:
    """
    Per-stage matrices ``T_t`` relating the features of ``stack`` to those of
    the stack built with the same schedule from the gauged MPO:
    ``gauged[t] = features[t] @ T_t``.

    The bond leg of the gauged cut picks up ``x⁻¹`` when the left site
    produced it and ``xᵀ`` when the right site did; other stages are unchanged.
    """
    label = bond_label(g.cut)
    first_left = stack.site_order.index(g.cut) < stack.site_order.index(g.cut + 1)
    leg_map = g.x_inv.data if first_left else g.x.data.T
    maps = []
    for labels, dims in zip(stack.stage_labels[1:], stack.stage_dims[1:]):
        size = int(np.prod(dims))
        if label not in labels:
            maps.append(np.eye(size))
            continue
        p = labels.index(label)
        left = int(np.prod(dims[:p]))
        right = int(np.prod(dims[p + 1:]))
        maps.append(np.kron(np.kron(np.eye(left), leg_map), np.eye(right)))
    return maps
