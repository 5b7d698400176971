from math import prod

from rest_framework import serializers

from containers.models import DTYPE_CHOICES, OBJECT_KINDS
from tensors.models import ROLE_CHOICES


DTYPE_WIDTH = {'f64': 8, 'f32': 4}

DATA_ALIGNMENT = 8


class TensorRecordSerializer(serializers.Serializer):
    name = serializers.CharField()
    shape = serializers.ListField(child=serializers.IntegerField(min_value=1), allow_empty=True)
    labels = serializers.ListField(child=serializers.CharField(), allow_empty=True)
    roles = serializers.ListField(child=serializers.ChoiceField(choices=ROLE_CHOICES), allow_empty=True)
    dtype = serializers.ChoiceField(choices=DTYPE_CHOICES)
    offset = serializers.IntegerField(min_value=0)
    nbytes = serializers.IntegerField(min_value=0)

    def validate(self, data):
        if not (len(data['shape']) == len(data['labels']) == len(data['roles'])):
            raise serializers.ValidationError(
                {'shape': ["shape, labels and roles must have the same length"]}
            )
        if data['offset'] % DATA_ALIGNMENT:
            raise serializers.ValidationError(
                {'offset': [f"Offset {data['offset']} is not {DATA_ALIGNMENT}-byte aligned"]}
            )
        expected = prod(data['shape']) * DTYPE_WIDTH[data['dtype']]
        if data['nbytes'] != expected:
            raise serializers.ValidationError(
                {'nbytes': [f"Expected {expected} bytes for shape {data['shape']}, got {data['nbytes']}"]}
            )
        return data


class ObjectRecordSerializer(serializers.Serializer):
    name = serializers.CharField()
    kind = serializers.ChoiceField(choices=OBJECT_KINDS)
    tensors = serializers.ListField(child=serializers.CharField(), allow_empty=True)
    bonds = serializers.ListField(
        child=serializers.ListField(child=serializers.CharField(), min_length=4, max_length=4),
        allow_empty=True,
    )
    metadata = serializers.DictField(required=False, default=dict)


class ManifestSerializer(serializers.Serializer):
    version = serializers.IntegerField(min_value=1)
    tensors = TensorRecordSerializer(many=True)
    objects = ObjectRecordSerializer(many=True)

    def validate(self, data):
        names = [record['name'] for record in data['tensors']]
        if len(set(names)) != len(names):
            raise serializers.ValidationError({'tensors': ["Tensor names must be unique"]})
        known = set(names)
        for record in data['objects']:
            missing = [name for name in record['tensors'] if name not in known]
            if missing:
                raise serializers.ValidationError(
                    {'objects': [f"Object '{record['name']}' refers to unknown tensors {missing}"]}
                )
        return data


def unknown_fields(raw: dict, serializer_class) -> dict:
    """Fields of ``raw`` the serializer does not declare."""
    declared = serializer_class().fields
    return {key: value for key, value in raw.items() if key not in declared}
