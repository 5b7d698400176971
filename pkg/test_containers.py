"""
Container files: byte layout, manifest validation, round trips of every
object kind and the checks recomputed by ``verify``.
"""
import json
import struct

import numpy as np
import pytest

from TNZ_CORE.exceptions import (
    BadMagicError,
    ContainerError,
    ManifestMismatchError,
    TruncatedContainerError,
    UnsupportedVersionError,
)
from containers.models import Container, Entry
from containers.services.checks import entry_checks
from containers.services.container import HEADER, MAGIC, VERSION, read_container, write_container
from decompositions.services.chain import matrix_to_mpo, random_mpo, vector_to_mps
from decompositions.services.kernels import cp_decompose, tucker_decompose
from layers.models import MpoLinearLayer
from networks.models import Bond, TensorNetwork
from networks.services.planner import plan_contraction
from stacks.services.stack import build_stack
from tensorized.models import ActivationSpec, PassTrace
from tensorized.services.pipeline import tensorize_input, tensorized_forward
from tensors.models import DenseTensor


def raw_container(manifest: dict, data: bytes = b'', version: int = VERSION) -> bytes:
    """Container bytes around a hand-written manifest."""
    text = json.dumps(manifest).encode('utf-8')
    text += b' ' * (-(HEADER.size + len(text)) % 8)
    return HEADER.pack(MAGIC, version, len(text)) + text + data


def dense_record(name, shape, offset=0):
    return {
        'name': name, 'shape': shape, 'labels': [f"k{n}" for n in range(len(shape))],
        'roles': ['bond'] * len(shape), 'dtype': 'f64', 'offset': offset, 'nbytes': 8 * int(np.prod(shape)),
    }


def all_kinds(rng):
    w = DenseTensor.from_array(rng.standard_normal((8, 8)), ('i', 'j'))
    mpo = matrix_to_mpo(w, [2, 2, 2], [2, 2, 2], chi_max=3)
    mps = vector_to_mps(DenseTensor.from_array(rng.standard_normal(8), ('d',)), [2, 2, 2])
    k = DenseTensor.from_array(rng.standard_normal((3, 2, 2, 2)), ('x', 'y', 'w', 'h'))
    net = TensorNetwork.build(
        {
            'A': DenseTensor.from_array(rng.standard_normal((2, 3)), ('a', 'b')),
            'B': DenseTensor.from_array(rng.standard_normal((3, 4)), ('b', 'c')),
        },
        [Bond('A', 'b', 'B', 'b')],
    )
    _, trace = tensorized_forward([(mpo, ActivationSpec('relu'))], tensorize_input(rng.standard_normal(8), [2, 2, 2]))
    return [
        Entry('w', 'dense', w),
        Entry('w_mpo', 'mpo', mpo),
        Entry('v', 'mps', mps),
        Entry('k_tucker', 'tucker', tucker_decompose(k, [2, 2, 2, 2])),
        Entry('k_cp', 'cp', cp_decompose(k, 2, 50, seed=0)),
        Entry('net', 'general', net),
        Entry('net_plan', 'plan', plan_contraction(net, 'exhaustive')),
        Entry('stack', 'stack', build_stack(mpo, [2, 0, 1])),
        Entry('layer', 'layer', MpoLinearLayer(mpo, rng.standard_normal(8))),
        Entry('trace', 'trace', trace),
    ]


# ==================== ROUND TRIPS ====================

def test_empty_container_round_trip():
    data = write_container([])
    assert data[:4] == MAGIC
    assert read_container(data).entries == ()
    assert write_container(read_container(data)) == data


def test_data_region_is_aligned():
    data = write_container([Entry('x', 'dense', DenseTensor.from_array(np.arange(3.0), ('k',)))])
    _, _, manifest_len = HEADER.unpack_from(data)
    assert (HEADER.size + manifest_len) % 8 == 0
    assert len(data) % 8 == 0


def test_mpo_round_trip_keeps_values():
    mpo = random_mpo([2, 2], [2, 2], 2, seed=0)
    entry = read_container(write_container([Entry('w', 'mpo', mpo)])).get('w')
    assert entry.kind == 'mpo'
    for a, b in zip(entry.value.sites, mpo.sites):
        assert a.indices == b.indices
        np.testing.assert_array_equal(a.data, b.data)


def test_every_kind_round_trips_byte_for_byte(rng):
    data = write_container(all_kinds(rng))
    container = read_container(data)
    assert [entry.kind for entry in container.entries] == [
        'dense', 'mpo', 'mps', 'tucker', 'cp', 'general', 'plan', 'stack', 'layer', 'trace',
    ]
    assert write_container(container) == data


def test_decoded_objects_keep_their_structure(rng):
    entries = all_kinds(rng)
    container = read_container(write_container(entries))
    assert container.get('w_mpo').value.truncation_errors == entries[1].value.truncation_errors
    assert container.get('net_plan').value.est_flops == entries[6].value.est_flops
    assert container.get('stack').value.site_order == (1, 2, 0)
    np.testing.assert_array_equal(container.get('layer').value.bias, entries[8].value.bias)
    assert container.get('trace').value == entries[9].value


def test_f32_payloads_widen_on_read(rng):
    values = rng.standard_normal((3, 4))
    data = write_container([Entry('x', 'dense', DenseTensor.from_array(values, ('a', 'b')))], f32=True)
    tensor = read_container(data).get('x').value
    assert tensor.data.dtype == np.float64
    np.testing.assert_array_equal(tensor.data, values.astype(np.float32).astype(np.float64))


def test_unknown_fields_are_written_back(rng):
    tensor = DenseTensor.from_array(rng.standard_normal(2), ('k',))
    container = Container(
        (Entry('x', 'dense', tensor, extra={'note': 'kept'}, tensor_extra={'x': {'units': 'volt'}}),),
        extra={'producer': 'elsewhere'},
    )
    data = write_container(container)
    again = read_container(data)
    assert again.extra == {'producer': 'elsewhere'}
    assert again.get('x').extra == {'note': 'kept'}
    assert again.get('x').tensor_extra == {'x': {'units': 'volt'}}
    assert write_container(again) == data


def test_unknown_metadata_and_trace_fields_are_written_back():
    mpo = random_mpo([2, 2], [2, 2], 2, seed=3)
    trace = PassTrace.from_dicts([
        {'layer': 0, 'bonds_before': [1], 'bonds_after': [1], 'truncation_error': 0.0, 'est_flops': 16,
         'wall_time': 0.25},
    ])
    container = Container((
        Entry('w', 'mpo', mpo, metadata_extra={'source': 'import', 'checkpoint': 7}),
        Entry('t', 'trace', trace),
    ))
    data = write_container(container)
    again = read_container(data)
    assert again.get('w').metadata_extra == {'source': 'import', 'checkpoint': 7}
    assert again.get('t').metadata_extra == {}
    assert again.get('t').value.records[0].extra == {'wall_time': 0.25}
    assert again.get('t').value.to_dicts()[0]['wall_time'] == 0.25
    assert write_container(again) == data


def test_hand_written_object_metadata_keeps_unknown_keys():
    manifest = {'version': 1, 'tensors': [dense_record('x', [2])], 'objects': [
        {'name': 'x', 'kind': 'dense', 'tensors': ['x'], 'bonds': [], 'metadata': {'origin': 'scanner'}},
    ]}
    container = read_container(raw_container(manifest, np.zeros(2).tobytes()))
    assert container.get('x').metadata_extra == {'origin': 'scanner'}
    data = write_container(container)
    _, _, manifest_len = HEADER.unpack_from(data)
    again = json.loads(data[HEADER.size:HEADER.size + manifest_len])
    assert again['objects'][0]['metadata']['origin'] == 'scanner'


def test_hand_written_manifest_is_read():
    manifest = {'version': 1, 'tensors': [dense_record('x', [2])], 'objects': [
        {'name': 'x', 'kind': 'dense', 'tensors': ['x'], 'bonds': [], 'future': 1},
    ]}
    container = read_container(raw_container(manifest, struct.pack('<2d', 1.0, 2.0)))
    np.testing.assert_array_equal(container.get('x').value.data, [1.0, 2.0])
    assert container.get('x').extra == {'future': 1}


# ==================== ERRORS ====================

def test_short_file_is_truncated():
    with pytest.raises(TruncatedContainerError) as exc:
        read_container(b'TNZ1')
    assert exc.value.code == 'truncated'


def test_missing_tensor_bytes_are_truncated(rng):
    data = write_container([Entry('x', 'dense', DenseTensor.from_array(rng.standard_normal(4), ('k',)))])
    with pytest.raises(TruncatedContainerError):
        read_container(data[:-8])


def test_bad_magic():
    data = write_container([])
    with pytest.raises(BadMagicError) as exc:
        read_container(b'ABCD' + data[4:])
    assert exc.value.code == 'bad_magic'


def test_newer_version_is_rejected():
    with pytest.raises(UnsupportedVersionError) as exc:
        read_container(raw_container({'version': 2, 'tensors': [], 'objects': []}, version=2))
    assert exc.value.code == 'unsupported_version'


def test_manifest_errors():
    with pytest.raises(ManifestMismatchError) as exc:
        read_container(raw_container({'version': 1, 'tensors': [dense_record('x', [3], offset=4)], 'objects': []},
                                     bytes(40)))
    assert exc.value.code == 'manifest_mismatch'
    assert 'offset' in str(exc.value.errors)

    record = dense_record('x', [3])
    record['nbytes'] = 16
    with pytest.raises(ManifestMismatchError):
        read_container(raw_container({'version': 1, 'tensors': [record], 'objects': []}, bytes(24)))

    objects = [{'name': 'x', 'kind': 'dense', 'tensors': ['missing'], 'bonds': []}]
    with pytest.raises(ManifestMismatchError):
        read_container(raw_container({'version': 1, 'tensors': [], 'objects': objects}))

    header = HEADER.pack(MAGIC, VERSION, 8)
    with pytest.raises(ManifestMismatchError):
        read_container(header + b'not json')


def test_container_rejects_bad_entries(rng):
    tensor = DenseTensor.from_array(np.zeros(1), ('k',))
    with pytest.raises(ContainerError):
        Entry('x', 'matrix', tensor)
    with pytest.raises(ContainerError):
        Container((Entry('x', 'dense', tensor), Entry('x', 'dense', tensor)))
    with pytest.raises(ContainerError):
        Container(()).get('nothing')


# ==================== CHECKS ====================

def test_checks_pass_for_a_lossless_mpo(rng):
    w = DenseTensor.from_array(rng.standard_normal((8, 8)), ('i', 'j'))
    entry = Entry('w', 'mpo', matrix_to_mpo(w, [2, 2, 2], [2, 2, 2]))
    checks = entry_checks(entry, w)
    names = {check.name for check in checks}
    assert {'bond_dimension_bound', 'reference_max_abs_diff', 'sweep_fidelity'} <= names
    assert all(check.passed for check in checks)


def test_truncated_mpo_stays_within_its_bound(rng):
    w = DenseTensor.from_array(rng.standard_normal((8, 8)), ('i', 'j'))
    entry = Entry('w', 'mpo', matrix_to_mpo(w, [2, 2, 2], [2, 2, 2], chi_max=2))
    checks = {check.name: check for check in entry_checks(entry, w, atol=10.0)}
    assert checks['sweep_fidelity'].passed
    assert checks['sweep_fidelity'].value > 0


def test_checks_flag_a_wrong_reference(rng):
    w = DenseTensor.from_array(rng.standard_normal((4, 4)), ('i', 'j'))
    entry = Entry('w', 'mpo', matrix_to_mpo(w, [2, 2], [2, 2]))
    other = DenseTensor.from_array(w.data + 1.0, ('i', 'j'))
    checks = {check.name: check for check in entry_checks(entry, other)}
    assert not checks['reference_max_abs_diff'].passed
    small = DenseTensor.from_array(np.zeros(3), ('k',))
    assert not {c.name: c for c in entry_checks(entry, small)}['reference_shape'].passed


def test_checks_for_every_kind_pass(rng):
    for entry in all_kinds(rng):
        checks = entry_checks(entry)
        assert checks, entry.kind
        assert all(check.passed for check in checks), (entry.kind, [c.to_dict() for c in checks])
