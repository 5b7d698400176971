"""
Single-file container for tensors and tensor networks.

Layout (little-endian)::

    b"TNZ1" | u32 version | u64 manifest_len | manifest (UTF-8 JSON) | data

The manifest is padded with spaces so the data region starts 8-byte aligned.
Tensor offsets are relative to the start of the data region; every block
starts 8-byte aligned and holds the tensor in row-major order.
"""
import io
import logging
import struct
from typing import Dict, Union

import numpy as np
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from TNZ_CORE.exceptions import (
    BadMagicError,
    ContainerError,
    ManifestMismatchError,
    TensorNetworkError,
    TruncatedContainerError,
    UnsupportedVersionError,
)
from containers.models import Container, Entry
from containers.serializers import (
    DATA_ALIGNMENT,
    ManifestSerializer,
    ObjectRecordSerializer,
    TensorRecordSerializer,
    unknown_fields,
)
from containers.services.codec import decode, encode
from tensors.models import DenseTensor, Index

logger = logging.getLogger(__name__)

MAGIC = b'TNZ1'
VERSION = 1
HEADER = struct.Struct('<4sIQ')

NUMPY_DTYPES = {'f64': '<f8', 'f32': '<f4'}


def _padding(length: int) -> int:
    return -length % DATA_ALIGNMENT


def write_container(container: Union[Container, list], f32: bool = False) -> bytes:
    """
    Serialize a container.

    Args:
        container: A ``Container`` or a list of ``Entry``
        f32: Store tensor payloads as 32-bit floats

    Returns:
        The container bytes
    """
    if not isinstance(container, Container):
        container = Container(tuple(container))
    dtype = 'f32' if f32 else 'f64'

    tensor_records, object_records, blocks = [], [], []
    offset = 0
    seen = set()
    for entry in container.entries:
        tensors, bonds, metadata = encode(entry.name, entry.kind, entry.value)
        for name, tensor in tensors:
            if name in seen:
                raise ContainerError(f"Tensor name '{name}' is used twice", errors={'tensors': [name]})
            seen.add(name)
            payload = np.ascontiguousarray(tensor.data, dtype=NUMPY_DTYPES[dtype]).tobytes()
            record = {
                'name': name,
                'shape': list(tensor.shape),
                'labels': list(tensor.labels),
                'roles': [index.role for index in tensor.indices],
                'dtype': dtype,
                'offset': offset,
                'nbytes': len(payload),
            }
            record.update(entry.tensor_extra.get(name, {}))
            tensor_records.append(record)
            blocks.append(payload + b'\x00' * _padding(len(payload)))
            offset += len(blocks[-1])
        record = {
            'name': entry.name,
            'kind': entry.kind,
            'tensors': [name for name, _ in tensors],
            'bonds': bonds,
            'metadata': dict(metadata, **entry.metadata_extra),
        }
        record.update(entry.extra)
        object_records.append(record)

    manifest = dict(container.extra)
    manifest.update({'version': VERSION, 'tensors': tensor_records, 'objects': object_records})
    manifest_bytes = JSONRenderer().render(manifest)
    manifest_bytes += b' ' * _padding(HEADER.size + len(manifest_bytes))
    data = b''.join(blocks)
    logger.debug("write_container: %d objects, %d tensors, %d data bytes",
                 len(object_records), len(tensor_records), len(data))
    return HEADER.pack(MAGIC, VERSION, len(manifest_bytes)) + manifest_bytes + data


def _parse_manifest(raw: bytes) -> dict:
    try:
        manifest = JSONParser().parse(io.BytesIO(raw))
    except ParseError as exc:
        raise ManifestMismatchError(f"Manifest is not valid JSON: {exc}", errors={'manifest': [str(exc)]}) from exc
    if not isinstance(manifest, dict):
        raise ManifestMismatchError("Manifest must be a JSON object", errors={'manifest': ['not an object']})
    return manifest


def read_container(data: bytes) -> Container:
    """
    Parse container bytes.

    Raises:
        BadMagicError, UnsupportedVersionError, TruncatedContainerError or
        ManifestMismatchError, each carrying its own ``code``
    """
    data = bytes(data)
    if len(data) < HEADER.size:
        raise TruncatedContainerError(f"Container has {len(data)} bytes, shorter than its header")
    magic, version, manifest_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"Bad magic {magic!r}, expected {MAGIC!r}")
    if version > VERSION or version < 1:
        raise UnsupportedVersionError(f"Container version {version} is not supported (max {VERSION})")
    data_start = HEADER.size + manifest_len
    if data_start > len(data):
        raise TruncatedContainerError(f"Manifest length {manifest_len} exceeds the {len(data)}-byte file")

    raw = _parse_manifest(data[HEADER.size:data_start])
    serializer = ManifestSerializer(data=raw)
    if not serializer.is_valid():
        raise ManifestMismatchError("Manifest does not match the schema", errors=serializer.errors)
    manifest = serializer.validated_data
    if manifest['version'] != version:
        raise ManifestMismatchError(
            f"Manifest version {manifest['version']} differs from header version {version}",
            errors={'version': [manifest['version']]},
        )

    region = memoryview(data)[data_start:]
    tensors: Dict[str, DenseTensor] = {}
    tensor_extra = {}
    for record, raw_record in zip(manifest['tensors'], raw['tensors']):
        end = record['offset'] + record['nbytes']
        if end > len(region):
            raise TruncatedContainerError(
                f"Tensor '{record['name']}' ends at byte {end} of a {len(region)}-byte data region"
            )
        values = np.frombuffer(region[record['offset']:end], dtype=NUMPY_DTYPES[record['dtype']])
        indices = tuple(Index(label, dim, role) for label, dim, role in
                        zip(record['labels'], record['shape'], record['roles']))
        try:
            tensors[record['name']] = DenseTensor(indices, values.astype(np.float64))
        except TensorNetworkError as exc:
            raise ManifestMismatchError(f"Tensor '{record['name']}': {exc}", errors={record['name']: [exc.code]}) from exc
        tensor_extra[record['name']] = unknown_fields(raw_record, TensorRecordSerializer)

    entries = []
    for record, raw_record in zip(manifest['objects'], raw['objects']):
        owned = {name: tensors[name] for name in record['tensors']}
        try:
            value = decode(record['name'], record['kind'], owned, record['bonds'], record['metadata'])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestMismatchError(
                f"Object '{record['name']}' ({record['kind']}) does not match its tensors: {exc}",
                errors={record['name']: [str(exc)]},
            ) from exc
        known = encode(record['name'], record['kind'], value)[2]
        entries.append(Entry(
            record['name'],
            record['kind'],
            value,
            unknown_fields(raw_record, ObjectRecordSerializer),
            {name: tensor_extra[name] for name in record['tensors'] if tensor_extra[name]},
            {key: item for key, item in record['metadata'].items() if key not in known},
        ))

    extra = unknown_fields(raw, ManifestSerializer)
    logger.debug("read_container: %d objects", len(entries))
    return Container(tuple(entries), extra)
