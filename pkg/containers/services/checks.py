"""
Invariant checks recomputed by the ``verify`` command for each stored object.
"""
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from containers.models import Entry
from decompositions.models import MPO, MPS
from decompositions.services.chain import mpo_to_matrix, mps_to_vector
from decompositions.services.entropy import bond_entropy
from decompositions.services.kernels import cp_reconstruct, tucker_reconstruct
from layers.services.compression import compression_report
from networks.services.executor import execute_plan
from networks.services.planner import ContractionPlanner, plan_contraction, recompute_flops
from tensors.models import DenseTensor

# Absolute slack on the summed sweep truncation bound
SWEEP_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: Optional[float] = None
    detail: str = ''

    def to_dict(self):
        return {'check': self.name, 'passed': self.passed, 'value': self.value, 'detail': self.detail}


def _dense_of(entry: Entry) -> Optional[np.ndarray]:
    """Dense data an object stands for, as the reference container stores it."""
    value = entry.value
    if entry.kind == 'dense':
        return value.data
    if entry.kind == 'mpo':
        return mpo_to_matrix(value).data
    if entry.kind == 'layer':
        return mpo_to_matrix(value.mpo).data
    if entry.kind == 'mps':
        return mps_to_vector(value).data
    if entry.kind == 'tucker':
        return tucker_reconstruct(value).data
    if entry.kind == 'cp':
        return cp_reconstruct(value).data
    return None


def _chain_checks(chain) -> List[Check]:
    checks = []
    if isinstance(chain, MPO):
        site_sizes = [i * j for i, j in zip(chain.in_dims, chain.out_dims)]
    else:
        site_sizes = list(chain.dims)
    bound_ok = all(
        dim <= min(math.prod(site_sizes[:n + 1]), math.prod(site_sizes[n + 1:]))
        for n, dim in enumerate(chain.bond_dims)
    )
    checks.append(Check('bond_dimension_bound', bound_ok, detail=f"bonds {list(chain.bond_dims)}"))
    if chain.cut_spectra is not None:
        for n, spectrum in enumerate(chain.cut_spectra):
            if not np.any(spectrum):
                checks.append(Check(f'entropy_range[{n}]', False, detail='all-zero spectrum'))
                continue
            entropy = bond_entropy(spectrum)
            upper = math.log(len(spectrum))
            checks.append(Check(f'entropy_range[{n}]', -1e-12 <= entropy <= upper + 1e-12, entropy))
    return checks


def _sweep_bound_check(chain, dense: np.ndarray, reference: np.ndarray) -> Optional[Check]:
    if chain.truncation_errors is None:
        return None
    bound = math.sqrt(sum(e ** 2 for e in chain.truncation_errors)) + SWEEP_BOUND_SLACK
    error = float(np.linalg.norm(dense.reshape(-1) - reference.reshape(-1)))
    return Check('sweep_fidelity', error <= bound, error, f"bound {bound:.3e}")


def entry_checks(entry: Entry, reference: Optional[DenseTensor] = None, atol: float = 1e-10) -> List[Check]:
    """
    Checks for one object. With a dense ``reference`` of matching size, the
    object's dense form is also compared element-wise against it.
    """
    value = entry.value
    checks: List[Check] = []

    if entry.kind == 'dense':
        checks.append(Check('finite', bool(np.all(np.isfinite(value.data)))))
    elif entry.kind in ('mpo', 'mps'):
        checks.extend(_chain_checks(value))
    elif entry.kind == 'layer':
        checks.extend(_chain_checks(value.mpo))
        report = compression_report(value.mpo)
        checks.append(Check('compression_ratio_positive', report.ratio > 0, report.ratio))
        if value.bias is not None:
            checks.append(Check('bias_length', value.bias.shape[0] == value.out_size))
    elif entry.kind == 'tucker':
        gram_errors = [
            float(np.linalg.norm(f.data.T @ f.data - np.eye(f.shape[1]))) for f in value.factors
        ]
        if value.orthonormal:
            checks.append(Check('factors_orthonormal', max(gram_errors) <= 1e-10, max(gram_errors)))
        checks.append(Check('core_matches_ranks', tuple(f.shape[1] for f in value.factors) == value.ranks))
    elif entry.kind == 'cp':
        norms = np.concatenate([np.linalg.norm(f.data, axis=0) for f in value.factors])
        deviation = float(np.max(np.abs(norms - 1.0)))
        checks.append(Check('factor_columns_unit_norm', deviation <= 1e-10, deviation))
        checks.append(Check('rank_positive', value.rank >= 1, value.rank))
    elif entry.kind == 'general':
        if len(value) <= ContractionPlanner.EXHAUSTIVE_NODE_LIMIT:
            a = execute_plan(value, plan_contraction(value, 'greedy')).data
            b = execute_plan(value, plan_contraction(value, 'exhaustive')).data
            scale = max(float(np.linalg.norm(a)), 1e-300)
            diff = float(np.linalg.norm(a - b)) / scale
            checks.append(Check('plan_independence', diff <= 1e-10, diff))
        plan = plan_contraction(value, 'greedy')
        recomputed = recompute_flops(value, plan)
        checks.append(Check('cost_soundness', recomputed == plan.est_flops, recomputed))
    elif entry.kind == 'stack':
        composes = all(
            a.out_size == b.in_size for a, b in zip(value.layers, value.layers[1:])
        )
        checks.append(Check('stage_dims_compose', composes))
        if value.in_size * value.out_size <= 1 << 20:
            checks.append(Check('stack_shape', value.compose().shape == (value.in_size, value.out_size)))
    elif entry.kind == 'plan':
        checks.append(Check('est_flops_non_negative', value.est_flops >= 0, value.est_flops))
        results = {step.result for step in value.steps}
        checks.append(Check('unique_step_ids', len(results) == len(value.steps)))
    elif entry.kind == 'trace':
        errors = [record.truncation_error for record in value.records]
        checks.append(Check('truncation_errors_non_negative', all(e >= 0 for e in errors)))

    if reference is not None:
        dense = _dense_of(entry)
        if dense is not None:
            if dense.size != reference.size:
                checks.append(Check('reference_shape', False, detail=f"{dense.size} vs {reference.size} elements"))
            else:
                diff = float(np.max(np.abs(dense.reshape(-1) - reference.data.reshape(-1)))) if dense.size else 0.0
                checks.append(Check('reference_max_abs_diff', diff <= atol, diff))
                chain = value.mpo if entry.kind == 'layer' else value
                if isinstance(chain, (MPO, MPS)):
                    bound = _sweep_bound_check(chain, dense, reference.data)
                    if bound is not None:
                        checks.append(bound)
    return checks
