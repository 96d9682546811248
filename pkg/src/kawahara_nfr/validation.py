"""Input checking shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .spectral import FrequencyGrid, SpectralState


def check_state(X, grid: FrequencyGrid | None = None, reality_flag: bool | None = None) -> SpectralState:
    """Coerce ``X`` to a finite :class:`SpectralState`.

    ``X`` may be a state, a JSON-style dict, or a coefficient array (then
    ``grid`` is required).
    """
    if isinstance(X, SpectralState):
        state = X
    elif isinstance(X, dict):
        state = SpectralState.from_dict(X, reality_flag)
    else:
        if grid is None:
            raise ValueError("a grid is required to interpret a bare coefficient array")
        arr = np.asarray(X)
        if arr.ndim == 2 and arr.shape[0] == 1:
            arr = arr[0]
        state = SpectralState(grid, arr, reality_flag=False)
        if reality_flag is None:
            reality_flag = state.is_real()
        state = SpectralState(grid, state.coeffs, reality_flag)
    if grid is not None and state.grid != grid:
        raise ValueError(f"state lives on {state.grid}, expected {grid}")
    if not np.all(np.isfinite(state.coeffs)):
        raise ValueError("state contains non-finite coefficients")
    return state


def check_positive(name, value, strict=True):
    value = float(value)
    if not np.isfinite(value) or (value <= 0 if strict else value < 0):
        raise ValueError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value}")
    return value
