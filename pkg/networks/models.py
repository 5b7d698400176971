from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Tuple

from TNZ_CORE.exceptions import IndexMismatchError, PlanError
from tensors.models import DenseTensor


RESERVED_PREFIX = '@'


@dataclass(frozen=True)
class Bond:
    node_a: str
    label_a: str
    node_b: str
    label_b: str

    def endpoints(self):
        return (self.node_a, self.label_a), (self.node_b, self.label_b)


@dataclass(frozen=True)
class TensorNetwork:
    """
    Named dense tensors joined by simple bonds (no hyper-edges).

    Any bond graph is allowed: chains, rings, trees or generic graphs.
    Index labels only need to be unique per node; the bonds name both
    endpoints explicitly. Unbonded indices are the open indices and their
    labels must be unique across the network.
    """
    nodes: Tuple[Tuple[str, DenseTensor], ...]
    bonds: Tuple[Bond, ...] = ()

    def __post_init__(self):
        nodes = tuple((str(name), tensor) for name, tensor in (
            self.nodes.items() if isinstance(self.nodes, Mapping) else self.nodes
        ))
        bonds = tuple(bond if isinstance(bond, Bond) else Bond(*bond) for bond in self.bonds)
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'bonds', bonds)

        names = [name for name, _ in nodes]
        if len(set(names)) != len(names):
            raise IndexMismatchError(f"Duplicate node names in {names}")
        for name in names:
            if not name or name.startswith(RESERVED_PREFIX):
                raise IndexMismatchError(f"Invalid node name '{name}'")

        by_name = dict(nodes)
        seen = set()
        for bond in bonds:
            if bond.node_a == bond.node_b:
                raise IndexMismatchError(f"Bond {bond} joins a node to itself")
            for node, label in bond.endpoints():
                if node not in by_name:
                    raise IndexMismatchError(f"Bond {bond} refers to unknown node '{node}'")
                by_name[node].position(label)
                if (node, label) in seen:
                    raise IndexMismatchError(f"Index '{label}' of node '{node}' is in more than one bond")
                seen.add((node, label))
            dim_a = by_name[bond.node_a].index(bond.label_a).dim
            dim_b = by_name[bond.node_b].index(bond.label_b).dim
            if dim_a != dim_b:
                raise IndexMismatchError(f"Bond {bond} joins dims {dim_a} and {dim_b}")

        open_labels = self.open_labels
        if len(set(open_labels)) != len(open_labels):
            raise IndexMismatchError(f"Open labels are not unique: {open_labels}")

    @classmethod
    def build(cls, nodes: Mapping[str, DenseTensor], bonds: Iterable = ()) -> 'TensorNetwork':
        return cls(tuple(nodes.items()), tuple(bonds))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.nodes)

    def node(self, name: str) -> DenseTensor:
        for node_name, tensor in self.nodes:
            if node_name == name:
                return tensor
        raise IndexMismatchError(f"Network has no node '{name}'")

    def bonded(self) -> Dict[Tuple[str, str], Tuple[str, str]]:
        """Map every bonded (node, label) to the (node, label) on the other end."""
        partners = {}
        for bond in self.bonds:
            a, b = bond.endpoints()
            partners[a] = b
            partners[b] = a
        return partners

    @property
    def open_labels(self) -> Tuple[str, ...]:
        partners = self.bonded()
        return tuple(
            label
            for name, tensor in self.nodes
            for label in tensor.labels
            if (name, label) not in partners
        )

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class PlanStep:
    left: str
    right: str
    result: str


@dataclass(frozen=True)
class ContractionPlan:
    """
    Ordered pairwise contractions that reduce a network to one tensor.

    ``est_flops`` is the sum of the product-of-dimensions cost of each step.
    """
    steps: Tuple[PlanStep, ...]
    est_flops: int
    strategy: str = 'fixed'

    def __post_init__(self):
        steps = tuple(step if isinstance(step, PlanStep) else PlanStep(*step) for step in self.steps)
        object.__setattr__(self, 'steps', steps)
        if self.est_flops < 0:
            raise PlanError(f"est_flops must be non-negative, got {self.est_flops}")
        object.__setattr__(self, 'est_flops', int(self.est_flops))

    @property
    def order(self) -> Tuple[Tuple[str, str], ...]:
        return tuple((step.left, step.right) for step in self.steps)

    def __str__(self):
        body = ', '.join(f"{step.result}=({step.left} {step.right})" for step in self.steps)
        return f"ContractionPlan[{self.strategy}, flops={self.est_flops}]({body})"
