"""Smooth periodic initial data scaled to a prescribed H^s size."""

from __future__ import annotations

import numpy as np

from .spectral import FrequencyGrid, SpectralState, forward_transform, hs_norm

__all__ = ["PROFILES", "initial_data"]


def _sech2(x, width=1.0, **_):
    return 1.0 / np.cosh(x / width) ** 2


def _gaussian(x, width=1.0, **_):
    return np.exp(-(x / width) ** 2)


def _trig(x, modes=(1,), L=None, **_):
    # modes are integer wavenumbers m, i.e. frequencies 2 pi m / L
    return sum(np.cos(2 * np.pi * m * x / L) for m in modes)


PROFILES = {"sech2": _sech2, "gaussian": _gaussian, "trig": _trig}


def initial_data(name: str, grid: FrequencyGrid, size: float, s: float = 0.0, **params) -> SpectralState:
    """Profile ``name`` sampled on ``grid`` and rescaled so ``||u0||_{H^s} = size``.

    The box is ``[-L/2, L/2)`` so the bump profiles sit at the centre.  ``size``
    of zero gives the zero state.
    """
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    if size < 0:
        raise ValueError("size must be non-negative")
    samples = PROFILES[name](grid.x, L=grid.L, **params)
    state = forward_transform(np.asarray(samples, dtype=float), grid)
    # keep the unpaired -n/2 slot empty, like every other state in the package
    coeffs = state.coeffs.copy()
    coeffs[0] = 0.0
    state = SpectralState(grid, coeffs, reality_flag=True)
    norm = hs_norm(state, s)
    if size == 0:
        return SpectralState.zeros(grid)
    if norm == 0:
        raise ValueError("profile vanishes on this grid")
    return state * (size / norm)
