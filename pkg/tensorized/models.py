from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Tuple

from rest_framework.renderers import JSONRenderer

from TNZ_CORE.exceptions import TensorizedPassError


ACTIVATION_KINDS = ('relu', 'tanh', 'identity')
APPLICATIONS = ('dense-oracle', 'local')

TRACE_FIELDS = ('layer', 'bonds_before', 'bonds_after', 'truncation_error', 'est_flops', 'activation', 'experimental')


@dataclass(frozen=True)
class ActivationSpec:
    """Pointwise nonlinearity and where it is applied: the dense vector or each site."""
    kind: str = 'identity'
    application: str = 'dense-oracle'

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise TensorizedPassError(f"Unknown activation '{self.kind}', expected one of {ACTIVATION_KINDS}",
                                      code='invalid_activation')
        if self.application not in APPLICATIONS:
            raise TensorizedPassError(f"Unknown application '{self.application}', expected one of {APPLICATIONS}",
                                      code='invalid_activation')

    @property
    def experimental(self) -> bool:
        return self.application == 'local' and self.kind != 'identity'


@dataclass(frozen=True)
class LayerTrace:
    layer: int
    bonds_before: Tuple[int, ...]
    bonds_after: Tuple[int, ...]
    truncation_error: float
    est_flops: int
    activation: str = 'identity'
    experimental: bool = False
    # Row fields written by other versions, kept for the round trip
    extra: Dict[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class PassTrace:
    """Per-layer records of a fully tensorized forward pass."""
    records: Tuple[LayerTrace, ...] = ()

    def to_dicts(self) -> List[dict]:
        rows = []
        for record in self.records:
            row = asdict(record)
            row.update(row.pop('extra'))
            row['bonds_before'] = list(record.bonds_before)
            row['bonds_after'] = list(record.bonds_after)
            rows.append(row)
        return rows

    def to_lines(self) -> List[str]:
        """One JSON object per layer."""
        renderer = JSONRenderer()
        return [renderer.render(row).decode('utf-8') for row in self.to_dicts()]

    @classmethod
    def from_dicts(cls, rows) -> 'PassTrace':
        return cls(tuple(
            LayerTrace(
                int(row['layer']),
                tuple(row['bonds_before']),
                tuple(row['bonds_after']),
                float(row['truncation_error']),
                int(row['est_flops']),
                row.get('activation', 'identity'),
                bool(row.get('experimental', False)),
                {key: value for key, value in row.items() if key not in TRACE_FIELDS},
            )
            for row in rows
        ))
