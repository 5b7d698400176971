import math
from typing import List, Union

import numpy as np

from TNZ_CORE.exceptions import DecompositionError
from decompositions.models import MPO, MPS
from decompositions.services.chain import mpo_recompress, mps_recompress


def bond_entropy(spectrum) -> float:
    """
    Von Neumann entropy (nats) of the singular values at one cut.

    p_k = s_k^2 / sum(s^2); zeros contribute nothing.
    """
    s = np.asarray(spectrum, dtype=np.float64).reshape(-1)
    if s.size == 0 or np.any(s < 0) or not np.all(np.isfinite(s)):
        raise DecompositionError("A spectrum must be a non-empty array of non-negative values", code='invalid_spectrum')
    total = float(np.sum(s ** 2))
    if total == 0:
        raise DecompositionError("Entropy of an all-zero spectrum is undefined", code='zero_spectrum')
    p = s[s > 0] ** 2 / total
    return max(0.0, float(-np.sum(p * np.log(p))))


def max_bond_entropy(bond_dim: int) -> float:
    return math.log(bond_dim)


def cut_entropies(chain: Union[MPO, MPS]) -> List[float]:
    """
    Entropy at every cut of a chain. Chains without recorded spectra are
    brought to canonical form first (no truncation).
    """
    spectra = chain.cut_spectra
    if spectra is None:
        recompress = mpo_recompress if isinstance(chain, MPO) else mps_recompress
        spectra = recompress(chain).cut_spectra
    return [bond_entropy(s) for s in spectra]
