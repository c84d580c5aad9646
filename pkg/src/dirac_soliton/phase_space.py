"""Phase-space states Y = (psi, q, p) of the coupled field-particle system.

The field is stored as a single complex spinor field; the canonical real
pair (psi1, psi2) of the Hamiltonian formulation is (Re psi, Im psi), and
the conversion is lossless by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field_grid import FOURIER, GridSpec, SpinorField, zero_field


@dataclass(frozen=True)
class PhaseState:
    """Full state Y = (psi, q, p). q and p are 3-vectors."""

    psi: SpinorField
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).copy())
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).copy())
        if self.q.shape != (3,) or self.p.shape != (3,):
            raise ValueError("q and p must be 3-vectors")

    @property
    def grid(self) -> GridSpec:
        return self.psi.grid

    def energy_norm(self) -> float:
        """||Y||_E = ||psi||_0 + |q| + |p|."""
        return (self.psi.norm() + float(np.linalg.norm(self.q))
                + float(np.linalg.norm(self.p)))

    def to_fourier(self) -> "PhaseState":
        return PhaseState(self.psi.to_fourier(), self.q, self.p)

    def to_position(self) -> "PhaseState":
        return PhaseState(self.psi.to_position(), self.q, self.p)

    def __add__(self, other: "PhaseState") -> "PhaseState":
        return PhaseState(self.psi + other.psi, self.q + other.q,
                          self.p + other.p)

    def __sub__(self, other: "PhaseState") -> "PhaseState":
        return PhaseState(self.psi - other.psi, self.q - other.q,
                          self.p - other.p)

    def __mul__(self, c: float) -> "PhaseState":
        return PhaseState(self.psi * c, c * self.q, c * self.p)

    __rmul__ = __mul__


def zero_state(grid: GridSpec, space: str = FOURIER) -> PhaseState:
    return PhaseState(zero_field(grid, space), np.zeros(3), np.zeros(3))
