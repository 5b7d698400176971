"""
Growing an MPO layer without changing the map it computes: wider bonds and
extra sites.
"""
import logging
from typing import Optional

import numpy as np

from TNZ_CORE.exceptions import DecompositionError, IndexMismatchError
from decompositions.models import MPO

logger = logging.getLogger(__name__)

INFLATE_INITS = ('zeros', 'noise')
INSERT_INITS = ('identity', 'random')


def bond_inflate(
    mpo: MPO,
    cut: int,
    new_dim: int,
    init: str = 'zeros',
    noise: float = 1e-3,
    seed: Optional[int] = None,
) -> MPO:
    """
    Pad bond ``cut`` (between sites cut and cut+1) to ``new_dim``.

    With ``init='zeros'`` the padded slices are zero and the dense matrix is
    unchanged; ``init='noise'`` fills them with uniform values in
    [-noise, noise].
    """
    if cut < 0 or cut >= mpo.n_sites - 1:
        raise IndexMismatchError(f"Cut {cut} out of range for a {mpo.n_sites}-site MPO", code='invalid_cut')
    if init not in INFLATE_INITS:
        raise DecompositionError(f"init must be one of {INFLATE_INITS}, got '{init}'", code='invalid_init')
    current = mpo.bond_dims[cut]
    if new_dim < current:
        raise DecompositionError(
            f"Cannot shrink bond {cut} from {current} to {new_dim}; recompress instead", code='shrinking_bond'
        )

    cores = [np.array(core) for core in mpo.cores()]
    extra = new_dim - current
    left = np.pad(cores[cut], ((0, 0), (0, 0), (0, 0), (0, extra)))
    right = np.pad(cores[cut + 1], ((0, extra), (0, 0), (0, 0), (0, 0)))
    if init == 'noise' and extra:
        rng = np.random.default_rng(seed)
        left[..., current:] = rng.uniform(-noise, noise, size=left[..., current:].shape)
        right[current:] = rng.uniform(-noise, noise, size=right[current:].shape)
    cores[cut], cores[cut + 1] = left, right
    logger.debug("bond_inflate cut %d: %d -> %d (%s)", cut, current, new_dim, init)
    return MPO.from_cores(cores)


def insert_site(
    mpo: MPO,
    position: int,
    new_in: int,
    new_out: int,
    init: str = 'identity',
    seed: Optional[int] = None,
) -> MPO:
    """
    Insert a new site so that it becomes site ``position`` (0..N).

    The identity init passes the surrounding bond straight through and acts
    as the identity on (new_in, new_out), so the new dense matrix is the old
    one with an identity factor at index position ``position``: ``W ⊗ I``
    when appending, ``I ⊗ W`` when prepending. The random init allows
    new_in != new_out and does not preserve the map.
    """
    if position < 0 or position > mpo.n_sites:
        raise IndexMismatchError(f"Position {position} out of range 0..{mpo.n_sites}", code='invalid_position')
    if init not in INSERT_INITS:
        raise DecompositionError(f"init must be one of {INSERT_INITS}, got '{init}'", code='invalid_init')
    if new_in < 1 or new_out < 1:
        raise IndexMismatchError(f"New site dims must be >= 1, got ({new_in}, {new_out})")

    boundary = position == 0 or position == mpo.n_sites
    chi = 1 if boundary else mpo.bond_dims[position - 1]
    if init == 'identity':
        if new_in != new_out:
            raise DecompositionError(
                f"An identity site needs new_in == new_out, got ({new_in}, {new_out})", code='not_square'
            )
        core = np.eye(chi)[:, None, None, :] * np.eye(new_in)[None, :, :, None]
    else:
        rng = np.random.default_rng(seed)
        core = rng.standard_normal((chi, new_in, new_out, chi)) / np.sqrt(chi * new_in)

    cores = mpo.cores()
    cores.insert(position, core)
    logger.debug("insert_site at %d: (%d, %d) %s", position, new_in, new_out, init)
    return MPO.from_cores(cores)
