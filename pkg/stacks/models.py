from dataclasses import dataclass
from math import prod
from typing import Tuple

import numpy as np

from TNZ_CORE.exceptions import GaugeError
from tensors.models import DenseTensor


@dataclass(frozen=True)
class StackLayer:
    """
    One stage of a stack: ``I_left ⊗ site_matrix ⊗ I_right``.

    ``site_matrix`` rows are the legs the stage consumes, columns the legs it
    produces (row-vector convention, features multiply from the left).
    """
    site_matrix: DenseTensor
    left_identity_dims: Tuple[int, ...]
    right_identity_dims: Tuple[int, ...]
    site: int = 0

    @property
    def left_size(self) -> int:
        return prod(self.left_identity_dims)

    @property
    def right_size(self) -> int:
        return prod(self.right_identity_dims)

    @property
    def in_size(self) -> int:
        return self.left_size * self.site_matrix.shape[0] * self.right_size

    @property
    def out_size(self) -> int:
        return self.left_size * self.site_matrix.shape[1] * self.right_size

    def dense(self) -> np.ndarray:
        """The induced sparse layer as a dense matrix; for checks on small stacks."""
        return np.kron(np.kron(np.eye(self.left_size), self.site_matrix.data), np.eye(self.right_size))

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Features (batch, in_size) through the stage without forming ``dense()``."""
        f = features.reshape(-1, self.left_size, self.site_matrix.shape[0], self.right_size)
        out = np.einsum('nlar,ab->nlbr', f, self.site_matrix.data)
        return out.reshape(features.shape[0], self.out_size)


@dataclass(frozen=True)
class Stack:
    """
    An MPO as a sequence of sparse fully-connected layers.

    ``stage_labels[t]`` / ``stage_dims[t]`` describe the feature space before
    stage t; the last entry is the output space.
    """
    layers: Tuple[StackLayer, ...]
    stage_dims: Tuple[Tuple[int, ...], ...]
    stage_labels: Tuple[Tuple[str, ...], ...]
    site_order: Tuple[int, ...]

    @property
    def in_size(self) -> int:
        return prod(self.stage_dims[0])

    @property
    def out_size(self) -> int:
        return prod(self.stage_dims[-1])

    def compose(self) -> np.ndarray:
        """Product of all induced dense layers."""
        dense = np.eye(self.in_size)
        for layer in self.layers:
            dense = dense @ layer.dense()
        return dense


@dataclass(frozen=True)
class GaugeTransform:
    """
    An invertible ``x`` inserted as ``x⁻¹ · x`` on bond ``cut``.
    """
    MAX_CONDITION = 1e6
    INVERSE_ATOL = 1e-10

    cut: int
    x: DenseTensor
    x_inv: DenseTensor

    def __post_init__(self):
        x, x_inv = self.x.data, self.x_inv.data
        if x.ndim != 2 or x.shape[0] != x.shape[1] or x_inv.shape != x.shape:
            raise GaugeError(f"Gauge matrices must be square and equal in shape, got {x.shape} and {x_inv.shape}")
        condition = np.linalg.cond(x)
        if not np.isfinite(condition) or condition > self.MAX_CONDITION:
            raise GaugeError(f"Gauge matrix condition number {condition:.3e} exceeds {self.MAX_CONDITION:g}",
                             code='ill_conditioned')
        residual = np.linalg.norm(x @ x_inv - np.eye(x.shape[0]))
        if residual > self.INVERSE_ATOL:
            raise GaugeError(f"x · x_inv differs from identity by {residual:.3e}", code='bad_inverse')

    @classmethod
    def from_matrix(cls, cut: int, x) -> 'GaugeTransform':
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise GaugeError(f"Gauge matrix must be square, got shape {x.shape}")
        try:
            x_inv = np.linalg.inv(x)
        except np.linalg.LinAlgError as exc:
            raise GaugeError(f"Gauge matrix is singular: {exc}", code='singular') from exc
        return cls(cut, DenseTensor.from_array(x, ('g_l', 'g_r')), DenseTensor.from_array(x_inv, ('g_l', 'g_r')))

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.x.data, np.eye(self.dim)))
