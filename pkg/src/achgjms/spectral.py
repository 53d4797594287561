"""Periodic grids and spectral differentiation on the three chart axes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [0, L_x) x [0, L_y) x [0, L_t)."""

    periods: tuple[float, float, float]
    resolution: tuple[int, int, int]

    def __post_init__(self):
        if len(self.periods) != 3 or len(self.resolution) != 3:
            raise ValueError("grid needs three periods and three resolutions")
        if any(n < 1 for n in self.resolution):
            raise ValueError("resolution entries must be positive")

    @property
    def shape(self):
        return tuple(int(n) for n in self.resolution)

    @cached_property
    def axes(self):
        return [np.arange(n) * (L / n) for L, n in zip(self.periods, self.resolution)]

    @cached_property
    def coords(self):
        return np.meshgrid(*self.axes, indexing="ij")

    @cached_property
    def wavenumbers(self):
        """i*k per axis, shaped for broadcasting; the Nyquist mode is dropped."""
        out = []
        for ax, (L, n) in enumerate(zip(self.periods, self.resolution)):
            k = np.fft.fftfreq(n, d=L / (2 * np.pi * n)) if n > 1 else np.zeros(1)
            if n % 2 == 0 and n > 1:
                k[n // 2] = 0.0
            shape = [1, 1, 1]
            shape[ax] = n
            out.append((1j * k).reshape(shape))
        return out

    @property
    def cell_volume(self) -> float:
        return float(np.prod([L / n for L, n in zip(self.periods, self.resolution)]))

    def with_resolution(self, resolution) -> "GridSpec":
        return GridSpec(self.periods, tuple(resolution))


def spectral_gradient(f: np.ndarray, grid: GridSpec) -> list[np.ndarray]:
    """Coordinate derivatives of ``f`` along the last three axes."""
    fh = np.fft.fftn(f, axes=(-3, -2, -1))
    return [np.fft.ifftn(fh * ik, axes=(-3, -2, -1)) for ik in grid.wavenumbers]


def spectral_derivative(f: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    fh = np.fft.fftn(f, axes=(-3, -2, -1))
    return np.fft.ifftn(fh * grid.wavenumbers[axis], axes=(-3, -2, -1))
