"""
Forward passes that keep activations as MPS from end to end.
"""
import logging
import math
from typing import Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import IndexMismatchError, NonFiniteError, TensorizedPassError
from decompositions.models import MPO, MPS, bond_label
from decompositions.services.chain import mps_recompress, mps_to_vector, vector_to_mps
from networks.services.planner import pairwise_cost
from tensorized.models import ActivationSpec, LayerTrace, PassTrace
from tensors.models import DenseTensor, Index
from tensors.services.ops import contract_pair, fuse_indices

logger = logging.getLogger(__name__)

ACTIVATIONS = {
    'relu': lambda v: np.maximum(v, 0.0),
    'tanh': np.tanh,
    'identity': lambda v: v,
}


def _apply_site(w: DenseTensor, a: DenseTensor, n: int, n_sites: int) -> DenseTensor:
    w = w.relabel({bond_label(n - 1): 'wl', bond_label(n): 'wr'})
    a = a.relabel({bond_label(n - 1): 'al', bond_label(n): 'ar'})
    product = contract_pair(w, a, [(w.position(f"i{n}"), a.position(f"d{n}"))])

    groups, indices = [], []
    if n > 0:
        groups.append([product.position('wl'), product.position('al')])
        indices.append(Index(bond_label(n - 1), product.index('wl').dim * product.index('al').dim, 'bond'))
    groups.append([product.position(f"j{n}")])
    indices.append(Index(f"d{n}", product.index(f"j{n}").dim, 'output'))
    if n < n_sites - 1:
        groups.append([product.position('wr'), product.position('ar')])
        indices.append(Index(bond_label(n), product.index('wr').dim * product.index('ar').dim, 'bond'))
    return DenseTensor(tuple(indices), fuse_indices(product, groups).data)


def _check_dims(layer: MPO, x: MPS):
    if layer.n_sites != x.n_sites or layer.in_dims != x.dims:
        raise IndexMismatchError(
            f"Layer input dims {layer.in_dims} do not match MPS dims {x.dims}", code='dimension_mismatch'
        )


def apply_mpo_to_mps(layer: MPO, x: MPS) -> MPS:
    """
    Contract each MPO site with the matching MPS site over the input index.

    The output bond at every cut is the product of the layer and input bonds.
    """
    _check_dims(layer, x)
    return MPS(tuple(_apply_site(w, a, n, x.n_sites) for n, (w, a) in enumerate(zip(layer.sites, x.sites))))


def application_cost(layer: MPO, x: MPS) -> int:
    """Summed pairwise cost of the site contractions in ``apply_mpo_to_mps``."""
    _check_dims(layer, x)
    return sum(pairwise_cost(w.shape, a.shape, [d]) for w, a, d in zip(layer.sites, x.sites, x.dims))


def local_activation(x: MPS, f: ActivationSpec) -> MPS:
    """
    Apply the activation to every site tensor on its own.

    Only for a single site does this equal the dense activation.
    """
    if f.application != 'local':
        raise TensorizedPassError("local_activation needs an activation with application 'local'",
                                  code='invalid_activation')
    if f.kind == 'identity':
        return x
    func = ACTIVATIONS[f.kind]
    return MPS(tuple(DenseTensor(site.indices, func(site.data)) for site in x.sites))


def dense_activation(x: MPS, f: ActivationSpec, chi_max=math.inf, tol: float = 0.0) -> MPS:
    """Contract to the dense vector, apply the activation and tensorize again."""
    if f.kind == 'identity':
        return x
    vector = mps_to_vector(x)
    activated = DenseTensor(vector.indices, ACTIVATIONS[f.kind](vector.data))
    return vector_to_mps(activated, x.dims, chi_max, tol)


def tensorize_input(vector, dims: Sequence[int]) -> MPS:
    """Lossless MPS of a dense input vector."""
    data = np.asarray(vector, dtype=np.float64).reshape(-1)
    return vector_to_mps(DenseTensor.from_array(data, ('d',), ('output',)), dims)


def tensorized_forward(
    layers: Sequence[Tuple[MPO, ActivationSpec]],
    x: MPS,
    chi_max=math.inf,
    tol: float = 0.0,
) -> Tuple[MPS, PassTrace]:
    """
    Run MPO layers on an MPS input without leaving MPS form.

    Each layer is applied, the result recompressed to (chi_max, tol), then
    the activation applied. The recorded truncation error is the norm of the
    change made by recompression.
    """
    records = []
    for index, (mpo, activation) in enumerate(layers):
        try:
            flops = application_cost(mpo, x)
            grown = apply_mpo_to_mps(mpo, x)
            compressed = mps_recompress(grown, chi_max, tol)
            error = float(np.linalg.norm(mps_to_vector(grown).data - mps_to_vector(compressed).data))
            if activation.application == 'local':
                x = local_activation(compressed, activation)
            else:
                x = dense_activation(compressed, activation, chi_max, tol)
        except NonFiniteError as exc:
            raise TensorizedPassError(f"Non-finite values in layer {index}: {exc}", code='non_finite') from exc
        records.append(LayerTrace(
            index, grown.bond_dims, x.bond_dims, error, flops, activation.kind, activation.experimental,
        ))
        logger.debug("layer %d: bonds %s -> %s, error %.3e", index, grown.bond_dims, x.bond_dims, error)
    return x, PassTrace(tuple(records))
