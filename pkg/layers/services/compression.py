from math import prod

from decompositions.models import MPO
from layers.models import CompressionReport


def compression_report(mpo: MPO) -> CompressionReport:
    """Parameter counts of the MPO against the dense matrix it represents."""
    per_site = tuple(site.size for site in mpo.sites)
    n_dense = prod(mpo.in_dims) * prod(mpo.out_dims)
    n_tn = sum(per_site)
    return CompressionReport(n_tn, n_dense, n_tn / n_dense, per_site)
