from dataclasses import dataclass, field
from math import prod
from typing import Mapping, Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import IndexMismatchError, NonFiniteError


ROLE_CHOICES = ('input', 'output', 'bond', 'batch')


def _frozen_array(values, shape=None) -> np.ndarray:
    array = np.array(values, dtype=np.float64, order='C', copy=True)
    if shape is not None:
        array = array.reshape(shape)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Index:
    """
    One labeled axis of a tensor.
    """
    label: str
    dim: int
    role: str = 'bond'

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise IndexMismatchError("Index label must be a non-empty string")
        if int(self.dim) != self.dim or self.dim < 1:
            raise IndexMismatchError(f"Index '{self.label}' must have dim >= 1, got {self.dim}")
        if self.role not in ROLE_CHOICES:
            raise IndexMismatchError(f"Index '{self.label}' has unknown role '{self.role}'")
        object.__setattr__(self, 'dim', int(self.dim))

    def renamed(self, label: str) -> 'Index':
        return Index(label, self.dim, self.role)


@dataclass(frozen=True)
class DenseTensor:
    """
    An n-index float64 array whose axes are labeled ``Index`` objects.

    ``data`` is stored with the shape of the index list; its row-major ravel is
    the flat element order. The array is read-only, so tensors can be shared
    freely.
    """
    indices: Tuple[Index, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        indices = tuple(self.indices)
        labels = [index.label for index in indices]
        if len(set(labels)) != len(labels):
            raise IndexMismatchError(f"Duplicate index labels in {labels}")

        shape = tuple(index.dim for index in indices)
        data = np.asarray(self.data, dtype=np.float64)
        if data.size != prod(shape):
            raise IndexMismatchError(
                f"Data length {data.size} does not match index dims {shape}"
            )
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("Tensor data contains NaN or Inf")

        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'data', _frozen_array(data, shape))

    @classmethod
    def from_array(cls, array, labels: Sequence[str], roles: Sequence[str] = None) -> 'DenseTensor':
        array = np.asarray(array, dtype=np.float64)
        if len(labels) != array.ndim:
            raise IndexMismatchError(
                f"Got {len(labels)} labels for an array with {array.ndim} axes"
            )
        roles = roles or ['bond'] * array.ndim
        indices = tuple(Index(label, dim, role) for label, dim, role in zip(labels, array.shape, roles))
        return cls(indices, array)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(index.dim for index in self.indices)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(index.label for index in self.indices)

    @property
    def ndim(self) -> int:
        return len(self.indices)

    @property
    def size(self) -> int:
        return prod(self.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise IndexMismatchError(f"Tensor has no index '{label}' (labels: {self.labels})")

    def index(self, label: str) -> Index:
        return self.indices[self.position(label)]

    def relabel(self, mapping: Mapping[str, str]) -> 'DenseTensor':
        indices = tuple(index.renamed(mapping.get(index.label, index.label)) for index in self.indices)
        return DenseTensor(indices, self.data)

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat))

    def __str__(self):
        dims = ', '.join(f"{index.label}={index.dim}" for index in self.indices)
        return f"DenseTensor({dims})"


@dataclass(frozen=True)
class FactorResult:
    """
    ``left · diag(singular_values) · right`` with the discarded tail weight.
    """
    left: DenseTensor
    singular_values: np.ndarray = field(repr=False)
    right: DenseTensor
    discarded_weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'singular_values', _frozen_array(self.singular_values))
        object.__setattr__(self, 'discarded_weight', float(self.discarded_weight))

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])

    def absorb_right(self) -> np.ndarray:
        """Return ``diag(s) · right`` as an array."""
        return self.singular_values[:, None] * self.right.data

    def reconstruct(self) -> np.ndarray:
        return (self.left.data * self.singular_values[None, :]) @ self.right.data
