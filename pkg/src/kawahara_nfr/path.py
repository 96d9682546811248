"""Time-sampled trajectories of spectral states."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import FrequencyGrid, GridMismatchError, SpectralState


@dataclass(eq=False)
class TimeSampledPath:
    """States ``coeffs[m]`` at times ``times[m]`` on a single grid.

    ``direction`` is ``+1`` for forward paths and ``-1`` for paths running
    towards negative times.
    """

    grid: FrequencyGrid
    times: np.ndarray
    coeffs: np.ndarray
    reality_flag: bool = True
    direction: int = 1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.times.size, self.grid.n):
            raise ValueError(f"coeffs shape {self.coeffs.shape} does not match "
                             f"{self.times.size} times x {self.grid.n} modes")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    @classmethod
    def uniform(cls, grid, T, n_t, direction=1):
        times = direction * T * np.arange(n_t + 1) / n_t
        return cls(grid, times, np.zeros((n_t + 1, grid.n), dtype=np.complex128), True, direction)

    @classmethod
    def constant(cls, state: SpectralState, times, direction=1):
        times = np.asarray(times, dtype=float)
        coeffs = np.tile(state.coeffs, (times.size, 1))
        return cls(state.grid, times, coeffs, state.reality_flag, direction)

    def __len__(self):
        return self.times.size

    def state(self, m: int) -> SpectralState:
        return SpectralState(self.grid, self.coeffs[m], self.reality_flag)

    def states(self):
        return [self.state(m) for m in range(len(self))]

    def with_coeffs(self, coeffs) -> "TimeSampledPath":
        return TimeSampledPath(self.grid, self.times.copy(), coeffs, self.reality_flag, self.direction)

    def hs_norms(self, s: float = 0.0) -> np.ndarray:
        w = self.grid.japanese(2.0 * s)
        return np.sqrt(self.grid.spacing * np.sum(w * np.abs(self.coeffs) ** 2, axis=1))

    def sup_distance(self, other: "TimeSampledPath", s: float = 0.0) -> float:
        """``max_m ||self(t_m) - other(t_m)||_{H^s}`` (same time grid required)."""
        if other.grid != self.grid:
            raise GridMismatchError("paths live on different grids")
        if other.times.shape != self.times.shape or not np.allclose(other.times, self.times, rtol=0, atol=1e-12):
            raise ValueError("paths are sampled at different times")
        diff = self.with_coeffs(self.coeffs - other.coeffs)
        return float(np.max(diff.hs_norms(s)))

    def to_dict(self, stride: int = 1) -> dict:
        idx = np.arange(0, len(self), max(1, int(stride)))
        if idx[-1] != len(self) - 1:
            idx = np.append(idx, len(self) - 1)
        return {
            "L": self.grid.L,
            "n": self.grid.n,
            "direction": self.direction,
            "times": [float(t) for t in self.times[idx]],
            "coeffs": [[[float(z.real), float(z.imag)] for z in self.coeffs[m]] for m in idx],
        }
