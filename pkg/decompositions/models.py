from dataclasses import dataclass, field
from math import prod
from typing import List, Optional, Sequence, Tuple

import numpy as np

from TNZ_CORE.exceptions import DecompositionError, IndexMismatchError
from tensors.models import DenseTensor, Index


KERNEL_MODES = ('x', 'y', 'w', 'h')

ORTHONORMAL_ATOL = 1e-10


def bond_label(cut: int) -> str:
    return f"b{cut}"


def _frozen_spectra(spectra):
    if spectra is None:
        return None
    frozen = []
    for values in spectra:
        array = np.array(values, dtype=np.float64)
        array.flags.writeable = False
        frozen.append(array)
    return tuple(frozen)


def _chain_tensor(core: np.ndarray, n: int, n_sites: int, physical: Sequence[Index]) -> DenseTensor:
    """Drop the outer boundary bonds of a (left, *physical, right) core."""
    indices = list(physical)
    shape = list(core.shape)
    if n > 0:
        indices.insert(0, Index(bond_label(n - 1), shape[0], 'bond'))
    elif shape[0] != 1:
        raise IndexMismatchError(f"First site must have left bond 1, got {shape[0]}")
    if n < n_sites - 1:
        indices.append(Index(bond_label(n), shape[-1], 'bond'))
    elif shape[-1] != 1:
        raise IndexMismatchError(f"Last site must have right bond 1, got {shape[-1]}")
    return DenseTensor(tuple(indices), core.reshape(tuple(index.dim for index in indices)))


def _check_chain(sites: Sequence[DenseTensor], physical_labels: List[List[str]]):
    n_sites = len(sites)
    if n_sites < 1:
        raise IndexMismatchError("A chain needs at least one site")
    for n, site in enumerate(sites):
        expected = list(physical_labels[n])
        if n > 0:
            expected.insert(0, bond_label(n - 1))
        if n < n_sites - 1:
            expected.append(bond_label(n))
        if list(site.labels) != expected:
            raise IndexMismatchError(f"Site {n} has labels {site.labels}, expected {tuple(expected)}")
        if n > 0 and site.shape[0] != sites[n - 1].shape[-1]:
            raise IndexMismatchError(
                f"Bond {n - 1} dims disagree: {sites[n - 1].shape[-1]} vs {site.shape[0]}"
            )


class _Chain:
    """Shared accessors of MPO and MPS."""

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def bond_dims(self) -> Tuple[int, ...]:
        return tuple(site.shape[-1] for site in self.sites[:-1])

    def _core(self, n: int, physical_ndim: int) -> np.ndarray:
        site = self.sites[n]
        shape = list(site.shape)
        if n == 0:
            shape.insert(0, 1)
        if n == self.n_sites - 1:
            shape.append(1)
        assert len(shape) == physical_ndim + 2
        return site.data.reshape(shape)

    @property
    def n_params(self) -> int:
        return sum(site.size for site in self.sites)


@dataclass(frozen=True)
class MPO(_Chain):
    """
    Matrix product operator: site n has indices (b{n-1}, i{n}, j{n}, b{n}),
    with the first and last site lacking their outer bond.

    ``cut_spectra[n]`` holds the singular values kept at cut n when the MPO
    was built by a sweep, ``truncation_errors[n]`` the weight discarded there.
    """
    sites: Tuple[DenseTensor, ...]
    cut_spectra: Optional[Tuple[np.ndarray, ...]] = field(default=None, repr=False)
    truncation_errors: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        sites = tuple(self.sites)
        object.__setattr__(self, 'sites', sites)
        _check_chain(sites, [[f"i{n}", f"j{n}"] for n in range(len(sites))])
        for n, site in enumerate(sites):
            if site.index(f"i{n}").role != 'input' or site.index(f"j{n}").role != 'output':
                raise IndexMismatchError(f"Site {n} has wrong index roles")
        object.__setattr__(self, 'cut_spectra', _frozen_spectra(self.cut_spectra))
        if self.truncation_errors is not None:
            object.__setattr__(self, 'truncation_errors', tuple(float(e) for e in self.truncation_errors))

    @classmethod
    def from_cores(cls, cores: Sequence[np.ndarray], cut_spectra=None, truncation_errors=None) -> 'MPO':
        """Build from (left, in, out, right) arrays; boundary bonds must be 1."""
        cores = [np.asarray(core, dtype=np.float64) for core in cores]
        sites = []
        for n, core in enumerate(cores):
            if core.ndim != 4:
                raise IndexMismatchError(f"MPO core {n} must have 4 axes, got {core.ndim}")
            physical = [Index(f"i{n}", core.shape[1], 'input'), Index(f"j{n}", core.shape[2], 'output')]
            sites.append(_chain_tensor(core, n, len(cores), physical))
        return cls(tuple(sites), cut_spectra, truncation_errors)

    @property
    def in_dims(self) -> Tuple[int, ...]:
        return tuple(site.index(f"i{n}").dim for n, site in enumerate(self.sites))

    @property
    def out_dims(self) -> Tuple[int, ...]:
        return tuple(site.index(f"j{n}").dim for n, site in enumerate(self.sites))

    @property
    def shape(self) -> Tuple[int, int]:
        return prod(self.in_dims), prod(self.out_dims)

    def core(self, n: int) -> np.ndarray:
        """Site n as a (left, in, out, right) array."""
        return self._core(n, 2)

    def cores(self) -> List[np.ndarray]:
        return [self.core(n) for n in range(self.n_sites)]


@dataclass(frozen=True)
class MPS(_Chain):
    """
    Matrix product state: site n has indices (b{n-1}, d{n}, b{n}).
    """
    sites: Tuple[DenseTensor, ...]
    cut_spectra: Optional[Tuple[np.ndarray, ...]] = field(default=None, repr=False)
    truncation_errors: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        sites = tuple(self.sites)
        object.__setattr__(self, 'sites', sites)
        _check_chain(sites, [[f"d{n}"] for n in range(len(sites))])
        object.__setattr__(self, 'cut_spectra', _frozen_spectra(self.cut_spectra))
        if self.truncation_errors is not None:
            object.__setattr__(self, 'truncation_errors', tuple(float(e) for e in self.truncation_errors))

    @classmethod
    def from_cores(cls, cores: Sequence[np.ndarray], cut_spectra=None, truncation_errors=None) -> 'MPS':
        """Build from (left, site, right) arrays; boundary bonds must be 1."""
        cores = [np.asarray(core, dtype=np.float64) for core in cores]
        sites = []
        for n, core in enumerate(cores):
            if core.ndim != 3:
                raise IndexMismatchError(f"MPS core {n} must have 3 axes, got {core.ndim}")
            sites.append(_chain_tensor(core, n, len(cores), [Index(f"d{n}", core.shape[1], 'output')]))
        return cls(tuple(sites), cut_spectra, truncation_errors)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(site.index(f"d{n}").dim for n, site in enumerate(self.sites))

    @property
    def size(self) -> int:
        return prod(self.dims)

    def core(self, n: int) -> np.ndarray:
        """Site n as a (left, site, right) array."""
        return self._core(n, 1)

    def cores(self) -> List[np.ndarray]:
        return [self.core(n) for n in range(self.n_sites)]


@dataclass(frozen=True)
class TuckerKernel:
    """
    4-index kernel as a core contracted with one factor matrix per mode.

    Factor ``k`` has indices (mode, r_mode); the core has (r_x, r_y, r_w, r_h).
    """
    core: DenseTensor
    factors: Tuple[DenseTensor, ...]
    orthonormal: bool = True

    def __post_init__(self):
        factors = tuple(self.factors)
        object.__setattr__(self, 'factors', factors)
        if self.core.ndim != 4 or len(factors) != 4:
            raise IndexMismatchError("A Tucker kernel needs a 4-index core and four factors")
        for k, (mode, factor) in enumerate(zip(KERNEL_MODES, factors)):
            if factor.labels != (mode, f"r_{mode}"):
                raise IndexMismatchError(f"Factor {k} has labels {factor.labels}, expected ({mode}, r_{mode})")
            if factor.shape[1] != self.core.shape[k]:
                raise IndexMismatchError(f"Factor {k} rank {factor.shape[1]} does not match core dim {self.core.shape[k]}")
            if self.orthonormal:
                gram = factor.data.T @ factor.data
                if not np.allclose(gram, np.eye(gram.shape[0]), rtol=0, atol=ORTHONORMAL_ATOL):
                    raise DecompositionError(f"Factor {k} columns are not orthonormal")
        if self.core.labels != tuple(f"r_{mode}" for mode in KERNEL_MODES):
            raise IndexMismatchError(f"Core has labels {self.core.labels}")

    @property
    def ranks(self) -> Tuple[int, ...]:
        return self.core.shape

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(factor.shape[0] for factor in self.factors)

    @property
    def n_params(self) -> int:
        return self.core.size + sum(factor.size for factor in self.factors)


@dataclass(frozen=True)
class CPKernel:
    """
    4-index kernel as a weighted sum of R rank-1 terms with unit-norm factor
    columns. Factor ``k`` has indices (mode, r).
    """
    weights: np.ndarray = field(repr=False)
    factors: Tuple[DenseTensor, ...] = ()

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        weights.flags.writeable = False
        object.__setattr__(self, 'weights', weights)
        factors = tuple(self.factors)
        object.__setattr__(self, 'factors', factors)
        rank = weights.shape[0]
        if rank < 1:
            raise DecompositionError("A CP kernel needs R >= 1")
        if len(factors) != 4:
            raise IndexMismatchError("A CP kernel needs four factors")
        for k, (mode, factor) in enumerate(zip(KERNEL_MODES, factors)):
            if factor.labels != (mode, 'r') or factor.shape[1] != rank:
                raise IndexMismatchError(f"Factor {k} must be ({mode}, r) with R={rank} columns")
            norms = np.linalg.norm(factor.data, axis=0)
            if not np.allclose(norms, 1.0, rtol=0, atol=ORTHONORMAL_ATOL):
                raise DecompositionError(f"Factor {k} columns are not unit norm")

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(factor.shape[0] for factor in self.factors)

    @property
    def n_params(self) -> int:
        return self.rank + sum(factor.size for factor in self.factors)
