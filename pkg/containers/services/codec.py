"""
Mapping between in-memory objects and the (tensors, bonds, metadata) triple
stored for every container object.

Tensor names are ``<object>/<part>``.
"""
from typing import Dict, List, Tuple

import numpy as np

from TNZ_CORE.exceptions import ManifestMismatchError
from decompositions.models import KERNEL_MODES, MPO, MPS, CPKernel, TuckerKernel, bond_label
from layers.models import MpoLinearLayer
from networks.models import Bond, ContractionPlan, PlanStep, TensorNetwork
from stacks.models import Stack, StackLayer
from tensorized.models import PassTrace
from tensors.models import DenseTensor

Encoded = Tuple[List[Tuple[str, DenseTensor]], List[List[str]], dict]


def _vector(values, label: str) -> DenseTensor:
    return DenseTensor.from_array(np.asarray(values, dtype=np.float64).reshape(-1), (label,))


def _chain_bonds(names: List[str]) -> List[List[str]]:
    return [[names[n], bond_label(n), names[n + 1], bond_label(n)] for n in range(len(names) - 1)]


def _encode_chain(name: str, chain, part: str) -> Encoded:
    tensors = [(f"{name}/{part}{n}", site) for n, site in enumerate(chain.sites)]
    if chain.cut_spectra is not None:
        tensors.extend((f"{name}/s{n}", _vector(s, 'k')) for n, s in enumerate(chain.cut_spectra))
    metadata = {
        'n_sites': chain.n_sites,
        'has_spectra': chain.cut_spectra is not None,
        'truncation_errors': None if chain.truncation_errors is None else list(chain.truncation_errors),
    }
    return tensors, _chain_bonds([t for t, _ in tensors[:chain.n_sites]]), metadata


def _decode_chain(cls, name: str, tensors: Dict[str, DenseTensor], metadata: dict, part: str):
    n_sites = int(metadata['n_sites'])
    sites = tuple(tensors[f"{name}/{part}{n}"] for n in range(n_sites))
    spectra = None
    if metadata.get('has_spectra'):
        spectra = tuple(tensors[f"{name}/s{n}"].data for n in range(n_sites - 1))
    return cls(sites, spectra, metadata.get('truncation_errors'))


def encode(name: str, kind: str, value) -> Encoded:
    """(named tensors, bond quadruples, metadata) for one object."""
    if kind == 'dense':
        return [(name, value)], [], {}
    if kind == 'mpo':
        return _encode_chain(name, value, 'W')
    if kind == 'mps':
        return _encode_chain(name, value, 'A')
    if kind == 'layer':
        tensors, bonds, metadata = _encode_chain(name, value.mpo, 'W')
        metadata['has_bias'] = value.bias is not None
        if value.bias is not None:
            tensors.append((f"{name}/bias", _vector(value.bias, 'j')))
        return tensors, bonds, metadata
    if kind == 'tucker':
        tensors = [(f"{name}/core", value.core)]
        tensors.extend((f"{name}/U_{mode}", factor) for mode, factor in zip(KERNEL_MODES, value.factors))
        bonds = [[f"{name}/core", f"r_{mode}", f"{name}/U_{mode}", f"r_{mode}"] for mode in KERNEL_MODES]
        return tensors, bonds, {'orthonormal': value.orthonormal}
    if kind == 'cp':
        tensors = [(f"{name}/lambda", _vector(value.weights, 'r'))]
        tensors.extend((f"{name}/A_{mode}", factor) for mode, factor in zip(KERNEL_MODES, value.factors))
        return tensors, [], {'rank': value.rank}
    if kind == 'general':
        tensors = [(f"{name}/{node}", tensor) for node, tensor in value.nodes]
        bonds = [[f"{name}/{b.node_a}", b.label_a, f"{name}/{b.node_b}", b.label_b] for b in value.bonds]
        return tensors, bonds, {'nodes': list(value.names)}
    if kind == 'stack':
        tensors = [(f"{name}/M{t}", layer.site_matrix) for t, layer in enumerate(value.layers)]
        metadata = {
            'layers': [
                {'site': layer.site, 'left_identity_dims': list(layer.left_identity_dims),
                 'right_identity_dims': list(layer.right_identity_dims)}
                for layer in value.layers
            ],
            'stage_dims': [list(dims) for dims in value.stage_dims],
            'stage_labels': [list(labels) for labels in value.stage_labels],
            'site_order': list(value.site_order),
        }
        return tensors, [], metadata
    if kind == 'plan':
        return [], [], {
            'steps': [[step.left, step.right, step.result] for step in value.steps],
            'est_flops': value.est_flops,
            'strategy': value.strategy,
        }
    if kind == 'trace':
        return [], [], {'records': value.to_dicts()}
    raise ManifestMismatchError(f"Cannot encode object kind '{kind}'", errors={'kind': [kind]})


def decode(name: str, kind: str, tensors: Dict[str, DenseTensor], bonds: List[List[str]], metadata: dict):
    """Inverse of ``encode``; ``tensors`` holds this object's tensors by name."""
    if kind == 'dense':
        return tensors[name]
    if kind == 'mpo':
        return _decode_chain(MPO, name, tensors, metadata, 'W')
    if kind == 'mps':
        return _decode_chain(MPS, name, tensors, metadata, 'A')
    if kind == 'layer':
        mpo = _decode_chain(MPO, name, tensors, metadata, 'W')
        bias = tensors[f"{name}/bias"].data if metadata.get('has_bias') else None
        return MpoLinearLayer(mpo, bias)
    if kind == 'tucker':
        factors = tuple(tensors[f"{name}/U_{mode}"] for mode in KERNEL_MODES)
        return TuckerKernel(tensors[f"{name}/core"], factors, bool(metadata.get('orthonormal', True)))
    if kind == 'cp':
        factors = tuple(tensors[f"{name}/A_{mode}"] for mode in KERNEL_MODES)
        return CPKernel(tensors[f"{name}/lambda"].data, factors)
    if kind == 'general':
        prefix = f"{name}/"
        nodes = {node: tensors[prefix + node] for node in metadata['nodes']}
        return TensorNetwork.build(nodes, [
            Bond(a[len(prefix):], label_a, b[len(prefix):], label_b) for a, label_a, b, label_b in bonds
        ])
    if kind == 'stack':
        layers = tuple(
            StackLayer(tensors[f"{name}/M{t}"], tuple(record['left_identity_dims']),
                       tuple(record['right_identity_dims']), int(record['site']))
            for t, record in enumerate(metadata['layers'])
        )
        return Stack(
            layers,
            tuple(tuple(dims) for dims in metadata['stage_dims']),
            tuple(tuple(labels) for labels in metadata['stage_labels']),
            tuple(metadata['site_order']),
        )
    if kind == 'plan':
        steps = tuple(PlanStep(*step) for step in metadata['steps'])
        return ContractionPlan(steps, int(metadata['est_flops']), metadata.get('strategy', 'fixed'))
    if kind == 'trace':
        return PassTrace.from_dicts(metadata['records'])
    raise ManifestMismatchError(f"Cannot decode object kind '{kind}'", errors={'kind': [kind]})
