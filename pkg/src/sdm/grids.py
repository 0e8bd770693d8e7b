"""Spatial and phase-space grids (FFT convention: endpoint excluded,
dx = (x_max - x_min) / n, so x -> -x maps the grid onto itself via
j -> (n - j) mod n)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid"]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """1D position grid, optionally with a momentum axis for phase space."""

    x_min: float
    x_max: float
    n: int
    p_min: float | None = None
    p_max: float | None = None
    n_p: int | None = None

    def __post_init__(self):
        if self.n < 2 or not _is_power_of_two(self.n):
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")
        if self.x_max <= self.x_min:
            raise ValueError("x_max must exceed x_min")
        p_fields = (self.p_min, self.p_max, self.n_p)
        if any(f is not None for f in p_fields):
            if any(f is None for f in p_fields):
                raise ValueError("p_min, p_max, n_p must be given together")
            if self.p_max <= self.p_min:
                raise ValueError("p_max must exceed p_min")
            if self.n_p < 2 or not _is_power_of_two(self.n_p):
                raise ValueError(f"n_p must be a power of two >= 2, got {self.n_p}")

    @property
    def has_momentum_axis(self) -> bool:
        return self.n_p is not None

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x.setflags(write=False)
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers conjugate to x, fft bin order; max pi/dx."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        k.setflags(write=False)
        return k

    @cached_property
    def k_odd(self) -> np.ndarray:
        """k with the unpaired Nyquist bin zeroed, for odd-order spectral
        operators on real fields (shift phases, first derivatives): the
        lone bin has no conjugate partner and would leak parity-breaking
        dust otherwise."""
        k = self.k.copy()
        k[self.n // 2] = 0.0
        k.setflags(write=False)
        return k

    @property
    def dp(self) -> float:
        self._require_momentum_axis()
        return (self.p_max - self.p_min) / self.n_p

    @cached_property
    def p(self) -> np.ndarray:
        self._require_momentum_axis()
        p = self.p_min + self.dp * np.arange(self.n_p)
        p.setflags(write=False)
        return p

    @cached_property
    def k_p(self) -> np.ndarray:
        """Angular wavenumbers conjugate to the momentum axis."""
        self._require_momentum_axis()
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_p, d=self.dp)
        k.setflags(write=False)
        return k

    @cached_property
    def k_p_odd(self) -> np.ndarray:
        """k_p with the unpaired Nyquist bin zeroed (see k_odd)."""
        k = self.k_p.copy()
        k[self.n_p // 2] = 0.0
        k.setflags(write=False)
        return k

    def _require_momentum_axis(self):
        if not self.has_momentum_axis:
            raise ValueError("grid has no momentum axis")

    def spatial(self) -> "Grid":
        """This grid with the momentum axis stripped."""
        return Grid(self.x_min, self.x_max, self.n)
