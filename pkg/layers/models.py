from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import IndexMismatchError, TensorNetworkError
from decompositions.models import MPO
from tensors.models import DenseTensor, Index


@dataclass(frozen=True)
class Batch:
    """
    Rows of a (batch, features) matrix, labeled ('n', 'f').
    """
    data: DenseTensor

    def __post_init__(self):
        if self.data.ndim != 2:
            raise IndexMismatchError(f"A batch needs a 2-index tensor, got {self.data.ndim} indices")
        n, f = self.data.shape
        indices = (Index('n', n, 'batch'), Index('f', f, 'bond'))
        if self.data.indices != indices:
            object.__setattr__(self, 'data', DenseTensor(indices, self.data.data))

    @classmethod
    def from_array(cls, array) -> 'Batch':
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 1:
            array = array[None, :]
        return cls(DenseTensor.from_array(array, ('n', 'f'), ('batch', 'bond')))

    @property
    def array(self) -> np.ndarray:
        return self.data.data

    @property
    def batch_size(self) -> int:
        return self.data.shape[0]

    @property
    def features(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MpoLinearLayer:
    """
    Fully-connected layer ``Y = X · W + bias`` with W held as an MPO.

    ``plan_cache`` maps (batch size, strategy) to a contraction plan for the
    forward network; it is shared by layers whose site shapes agree.
    """
    mpo: MPO
    bias: Optional[np.ndarray] = field(default=None, repr=False)
    plan_cache: Dict[Tuple[int, str], object] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.bias is not None:
            bias = np.array(self.bias, dtype=np.float64).reshape(-1)
            if bias.shape[0] != self.out_size:
                raise IndexMismatchError(f"Bias length {bias.shape[0]} does not match output size {self.out_size}")
            if not np.all(np.isfinite(bias)):
                raise TensorNetworkError("Bias contains NaN or Inf", code='non_finite')
            bias.flags.writeable = False
            object.__setattr__(self, 'bias', bias)

    @property
    def in_size(self) -> int:
        return self.mpo.shape[0]

    @property
    def out_size(self) -> int:
        return self.mpo.shape[1]

    def with_sites(self, sites: Sequence[DenseTensor], bias: Optional[np.ndarray] = None) -> 'MpoLinearLayer':
        """New layer with replaced sites (and bias, when given)."""
        mpo = MPO(tuple(sites))
        same_shapes = all(a.shape == b.shape for a, b in zip(mpo.sites, self.mpo.sites))
        return MpoLinearLayer(
            mpo,
            self.bias if bias is None else bias,
            self.plan_cache if same_shapes else {},
        )


@dataclass(frozen=True)
class CompressionReport:
    n_params_tn: int
    n_params_dense: int
    ratio: float
    per_site_counts: Tuple[int, ...]

    def to_dict(self):
        return {
            'n_params_tn': self.n_params_tn,
            'n_params_dense': self.n_params_dense,
            'ratio': self.ratio,
            'per_site_counts': list(self.per_site_counts),
        }


@dataclass(frozen=True)
class BondGrowthPolicy:
    """
    Grow every bond by ``step`` (up to ``max_bond``) when the training loss
    has not improved by ``min_improvement`` (relative) for ``patience`` epochs.
    New bond slices are filled with uniform noise of magnitude ``noise``.
    """
    patience: int = 50
    min_improvement: float = 1e-3
    step: int = 1
    max_bond: int = 8
    noise: float = 1e-6

    def __post_init__(self):
        if self.patience < 1 or self.step < 1 or self.max_bond < 1 or self.noise < 0:
            raise TensorNetworkError("Invalid bond growth policy", code='invalid_policy')
