"""Named, role-tagged parameter tensors.

Models expose their state as an ordered tuple of named tensors so that
weight-space operators (crossover, fusion, head-only updates) can be written
against names and roles instead of a specific network class.  Roles:

* ``trainable-weight`` / ``trainable-bias`` — updated by gradients, eligible
  for mutation noise;
* ``normalization-statistic`` / ``buffer`` — carried state, never mutated.

Each tensor also belongs to a group: ``body`` or ``head``.  The head tensors
must form a contiguous suffix of the tuple (the final classifier layer), which
is what head-only fine-tuning relies on.  Arrays are float64, copied on
construction and frozen read-only, so a ``NamedParamSet`` is a value.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TensorRole", "TensorGroup", "NamedTensor", "NamedParamSet"]


class TensorRole(str, enum.Enum):
    WEIGHT = "trainable-weight"
    BIAS = "trainable-bias"
    NORM_STAT = "normalization-statistic"
    BUFFER = "buffer"

    @property
    def trainable(self) -> bool:
        return self in (TensorRole.WEIGHT, TensorRole.BIAS)


class TensorGroup(str, enum.Enum):
    BODY = "body"
    HEAD = "head"


def _frozen_copy(values: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class NamedTensor:
    name: str
    shape: tuple[int, ...]
    values: np.ndarray
    role: TensorRole
    group: TensorGroup

    def __post_init__(self) -> None:
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "role", TensorRole(self.role))
        object.__setattr__(self, "group", TensorGroup(self.group))
        values = np.asarray(self.values, dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise ValueError(
                f"tensor {self.name!r}: {values.size} values for shape {shape}"
            )
        object.__setattr__(self, "values", _frozen_copy(values, shape))

    def with_values(self, values: np.ndarray) -> "NamedTensor":
        return NamedTensor(self.name, self.shape, values, self.role, self.group)

    @property
    def signature(self) -> str:
        dims = "x".join(str(s) for s in self.shape)
        return f"{self.name}:{dims}:{self.role.value}:{self.group.value}"


@dataclass(frozen=True)
class NamedParamSet:
    tensors: tuple[NamedTensor, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        tensors = tuple(self.tensors)
        if not tensors:
            raise ValueError("a parameter set needs at least one tensor")
        names = [t.name for t in tensors]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate tensor names: {names}")
        groups = [t.group for t in tensors]
        if TensorGroup.HEAD not in groups:
            raise ValueError("parameter set has no head tensors")
        first_head = groups.index(TensorGroup.HEAD)
        if any(g is TensorGroup.BODY for g in groups[first_head:]):
            raise ValueError("head tensors must form a contiguous trailing suffix")
        object.__setattr__(self, "tensors", tensors)

    @property
    def architecture_signature(self) -> str:
        """Order-sensitive identity of the layout: equal signatures mean the
        parameter sets are element-wise combinable."""
        return ";".join(t.signature for t in self.tensors)

    def tensor(self, name: str) -> NamedTensor:
        for t in self.tensors:
            if t.name == name:
                return t
        raise KeyError(name)

    def with_tensors(self, replacements: dict[str, np.ndarray]) -> "NamedParamSet":
        """Return a copy with the named tensors' values replaced."""
        unknown = set(replacements) - {t.name for t in self.tensors}
        if unknown:
            raise KeyError(f"unknown tensors: {sorted(unknown)}")
        return NamedParamSet(
            tensors=tuple(
                t.with_values(replacements[t.name]) if t.name in replacements else t
                for t in self.tensors
            )
        )

    @property
    def total_size(self) -> int:
        return sum(t.values.size for t in self.tensors)

    def allclose(self, other: "NamedParamSet", **kwargs) -> bool:
        if self.architecture_signature != other.architecture_signature:
            return False
        return all(
            np.allclose(a.values, b.values, **kwargs)
            for a, b in zip(self.tensors, other.tensors)
        )

    def equal_bits(self, other: "NamedParamSet") -> bool:
        if self.architecture_signature != other.architecture_signature:
            return False
        return all(
            np.array_equal(a.values, b.values)
            for a, b in zip(self.tensors, other.tensors)
        )
