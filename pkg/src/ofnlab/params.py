"""Named parameter collections backed by one flat float64 vector.

Optimizers and Polyak averaging then work on a single contiguous array per
component instead of a dict of small tensors, which keeps the per-update
numpy call count low enough for high update-to-data runs on a laptop.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation


class FlatParams:
    """Ordered (name, shape) entries viewing slices of one flat vector."""

    def __init__(self, entries: list[tuple[str, np.ndarray]]):
        self.names: list[str] = []
        self.shapes: dict[str, tuple] = {}
        self._slices: dict[str, slice] = {}
        offset = 0
        chunks = []
        for name, array in entries:
            array = np.asarray(array, dtype=np.float64)
            self.names.append(name)
            self.shapes[name] = array.shape
            self._slices[name] = slice(offset, offset + array.size)
            offset += array.size
            chunks.append(array.ravel())
        self.vector = np.concatenate(chunks) if chunks else np.zeros(0)

    @property
    def size(self) -> int:
        return self.vector.size

    def view(self, name: str) -> np.ndarray:
        """Zero-copy view of one named parameter, shaped."""
        return self.vector[self._slices[name]].reshape(self.shapes[name])

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: self.view(name).copy() for name in self.names}

    def set_vector(self, vector: np.ndarray) -> None:
        if vector.shape != self.vector.shape:
            raise ContractViolation(
                f"parameter vector shape {vector.shape} != {self.vector.shape}"
            )
        self.vector = np.asarray(vector, dtype=np.float64)

    def load_dict(self, values: dict[str, np.ndarray]) -> None:
        """Replace every entry from a name -> array map (checkpoint restore)."""
        chunks = []
        for name in self.names:
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != self.shapes[name]:
                raise ContractViolation(
                    f"{name}: shape {arr.shape} != expected {self.shapes[name]}"
                )
            chunks.append(arr.ravel())
        self.vector = np.concatenate(chunks) if chunks else np.zeros(0)

    def flatten_grads(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        """Assemble a gradient map into entry order; missing names are zero."""
        chunks = []
        for name in self.names:
            g = grads.get(name)
            if g is None:
                chunks.append(np.zeros(self.shapes[name]).ravel())
            else:
                chunks.append(np.asarray(g).ravel())
        return np.concatenate(chunks) if chunks else np.zeros(0)

    def locate(self, flat_index: int) -> str:
        """Name of the parameter owning a flat-vector coordinate."""
        for name in self.names:
            s = self._slices[name]
            if s.start <= flat_index < s.stop:
                return name
        raise ContractViolation(f"index {flat_index} out of range")

    def copy(self) -> "FlatParams":
        clone = FlatParams.__new__(FlatParams)
        clone.names = list(self.names)
        clone.shapes = dict(self.shapes)
        clone._slices = dict(self._slices)
        clone.vector = self.vector.copy()
        return clone
