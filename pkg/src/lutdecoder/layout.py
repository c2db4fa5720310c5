"""Rotated surface-code layouts.

Data qubits sit on a ``d x d`` grid, indexed row-major: qubit ``(r, c)`` has
index ``r * d + c``. Stabilizers live on the faces between data qubits. Face
``(i, j)`` with ``0 <= i, j <= d`` touches data qubits ``(i-1, j-1)``,
``(i-1, j)``, ``(i, j-1)`` and ``(i, j)`` (those that exist).

Checkerboard coloring: faces with ``i + j`` odd are X-type, ``i + j`` even are
Z-type. Weight-2 X stabilizers sit on the top and bottom edges, weight-2 Z
stabilizers on the left and right edges. For ``d = 4`` this yields 8 X and
7 Z stabilizers. Stabilizers of each type are indexed in raster order of their
face coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

StabType = Literal["X", "Z"]
STAB_TYPES: tuple[StabType, StabType] = ("X", "Z")


def check_stab_type(stab_type: str) -> StabType:
    t = stab_type.upper()
    if t not in STAB_TYPES:
        raise ValueError(f"stabilizer type must be 'X' or 'Z', got {stab_type!r}")
    return t  # type: ignore[return-value]


@dataclass(frozen=True)
class CodeLayout:
    """Immutable description of a distance-``d`` rotated surface code."""

    distance: int
    x_stabilizers: tuple[frozenset[int], ...]
    z_stabilizers: tuple[frozenset[int], ...]
    x_faces: tuple[tuple[int, int], ...]
    z_faces: tuple[tuple[int, int], ...]
    logical_z_support: frozenset[int]
    logical_x_support: frozenset[int]

    @property
    def data_qubits(self) -> int:
        return self.distance * self.distance

    @property
    def total_qubits(self) -> int:
        return self.data_qubits + len(self.x_stabilizers) + len(self.z_stabilizers)

    def stabilizers(self, stab_type: str) -> tuple[frozenset[int], ...]:
        return self.x_stabilizers if check_stab_type(stab_type) == "X" else self.z_stabilizers

    def num_stabilizers(self, stab_type: str) -> int:
        return len(self.stabilizers(stab_type))

    def check_matrix(self, stab_type: str) -> np.ndarray:
        """Parity-check matrix, shape ``(num_stabilizers, data_qubits)``, dtype uint8."""
        stabs = self.stabilizers(stab_type)
        h = np.zeros((len(stabs), self.data_qubits), dtype=np.uint8)
        for i, support in enumerate(stabs):
            h[i, sorted(support)] = 1
        return h

    def qubit_stabilizers(self, stab_type: str) -> list[list[int]]:
        """For every data qubit, the sorted stabilizer indices of ``stab_type`` touching it."""
        touching: list[list[int]] = [[] for _ in range(self.data_qubits)]
        for i, support in enumerate(self.stabilizers(stab_type)):
            for q in support:
                touching[q].append(i)
        return touching

    def boundary_qubits(self, stab_type: str) -> list[int]:
        """Data qubits whose error of the detected kind flips only one stabilizer of ``stab_type``."""
        return [q for q, stabs in enumerate(self.qubit_stabilizers(stab_type)) if len(stabs) == 1]

    @property
    def boundary_map(self) -> dict[str, list[int]]:
        return {t: self.boundary_qubits(t) for t in STAB_TYPES}


def build_layout(d: int) -> CodeLayout:
    """Build the rotated surface code of distance ``d`` (``d >= 2``)."""
    if d < 2:
        raise ValueError(f"distance must be >= 2, got {d}")

    def support(i: int, j: int) -> frozenset[int]:
        return frozenset(
            r * d + c
            for r in (i - 1, i)
            for c in (j - 1, j)
            if 0 <= r < d and 0 <= c < d
        )

    x_faces: list[tuple[int, int]] = []
    z_faces: list[tuple[int, int]] = []
    for i in range(d + 1):
        for j in range(d + 1):
            on_tb = i in (0, d)
            on_lr = j in (0, d)
            if on_tb and on_lr:
                continue  # corners touch a single qubit
            odd = (i + j) % 2 == 1
            if on_tb:
                if odd:
                    x_faces.append((i, j))
            elif on_lr:
                if not odd:
                    z_faces.append((i, j))
            elif odd:
                x_faces.append((i, j))
            else:
                z_faces.append((i, j))

    return CodeLayout(
        distance=d,
        x_stabilizers=tuple(support(i, j) for i, j in x_faces),
        z_stabilizers=tuple(support(i, j) for i, j in z_faces),
        x_faces=tuple(x_faces),
        z_faces=tuple(z_faces),
        # logical Z along the top row, logical X down the left column
        logical_z_support=frozenset(range(d)),
        logical_x_support=frozenset(r * d for r in range(d)),
    )


def syndrome_of(layout: CodeLayout, stab_type: str, data_errors) -> np.ndarray:
    """Syndrome of ``stab_type`` stabilizers for a bit-vector of data-qubit errors.

    For ``stab_type='Z'`` pass the X component of the errors, for ``'X'`` the
    Z component.
    """
    errors = np.asarray(data_errors, dtype=np.uint8)
    if errors.shape[-1] != layout.data_qubits:
        raise ValueError(
            f"expected {layout.data_qubits} data-qubit bits, got {errors.shape[-1]}"
        )
    h = layout.check_matrix(stab_type)
    return ((errors.astype(np.int64) @ h.T.astype(np.int64)) & 1).astype(np.uint8)
