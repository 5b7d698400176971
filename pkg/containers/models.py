from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

from TNZ_CORE.exceptions import ContainerError


OBJECT_KINDS = ('dense', 'mps', 'mpo', 'tucker', 'cp', 'general', 'stack', 'plan', 'layer', 'trace')

DTYPE_CHOICES = ('f64', 'f32')


@dataclass(frozen=True)
class Entry:
    """
    One named object in a container.

    ``extra`` holds manifest fields of the object this version does not
    know about; ``tensor_extra`` the same per tensor name and
    ``metadata_extra`` the same inside the object metadata. All are written
    back unchanged.
    """
    name: str
    kind: str
    value: Any
    extra: Dict[str, Any] = field(default_factory=dict)
    tensor_extra: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    metadata_extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise ContainerError(f"Unknown object kind '{self.kind}'", errors={'kind': [self.kind]})
        if not self.name or '/' in self.name:
            raise ContainerError(f"Invalid object name '{self.name}'", errors={'name': [self.name]})


@dataclass(frozen=True)
class Container:
    entries: Tuple[Entry, ...] = ()
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, 'entries', entries)
        names = [entry.name for entry in entries]
        if len(set(names)) != len(names):
            raise ContainerError(f"Duplicate object names in {names}", errors={'name': names})

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(entry.name for entry in self.entries)

    def get(self, name: str) -> Entry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise ContainerError(f"Container has no object '{name}'", errors={'name': [name]})

    def first(self, *kinds: str) -> Entry:
        """First entry of one of ``kinds``."""
        for entry in self.entries:
            if entry.kind in kinds:
                return entry
        raise ContainerError(f"Container has no object of kind {kinds}", errors={'kind': list(kinds)})
