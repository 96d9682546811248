"""Kawahara modulation function, its slice derivatives and level-set scans."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

__all__ = [
    "ModulationParams",
    "ModulationTrace",
    "PlaneConstraintError",
    "phi",
    "phi_unfactored",
    "phi_on_plane",
    "g_slice_derivative",
    "h_slice_derivative",
    "g_slice",
    "h_slice",
    "levelset_measure",
    "LevelSetResult",
    "levelset_csv",
]

PLANE_ATOL = 1e-9


class PlaneConstraintError(ValueError):
    """``phi`` was called off the plane ``xi = xi1 + xi2``."""


@dataclass(frozen=True)
class ModulationParams:
    """Dispersion coefficients after renormalisation (fifth-order term fixed to -1)."""

    beta: float = 0.0
    alpha_eq: float = -1.0

    def __post_init__(self):
        if self.alpha_eq != -1.0:
            raise ValueError("the fifth-order coefficient is normalised to -1")
        if not np.isfinite(self.beta):
            raise ValueError("beta must be finite")


@dataclass(frozen=True)
class ModulationTrace:
    """Per-generation modulations and their left-to-right prefix sums."""

    mu: tuple
    mu_tilde: tuple = field(init=False)

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "mu_tilde", tuple(accumulate(mu)))


def phi_on_plane(xi1, xi2, beta):
    """Factored modulation with ``xi = xi1 + xi2`` implied (no checks, vectorised)."""
    xi = xi1 + xi2
    return -xi * xi1 * xi2 * (5.0 * (xi1 * xi1 + xi1 * xi2 + xi2 * xi2) + 3.0 * beta)


def phi(xi, xi1, xi2, beta):
    """Modulation ``-xi xi1 xi2 (5(xi1^2 + xi1 xi2 + xi2^2) + 3 beta)``.

    Only valid on ``xi = xi1 + xi2``; anything further than ``1e-9`` from the
    plane raises :class:`PlaneConstraintError`.
    """
    xi, xi1, xi2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (xi, xi1, xi2)))
    off = np.abs(xi - xi1 - xi2)
    if np.any(off > PLANE_ATOL):
        raise PlaneConstraintError(f"xi != xi1 + xi2 (max offset {float(np.max(off)):.3e})")
    out = -xi * xi1 * xi2 * (5.0 * (xi1 * xi1 + xi1 * xi2 + xi2 * xi2) + 3.0 * beta)
    return out if out.ndim else float(out)


def phi_unfactored(xi, xi1, xi2, beta):
    """Literal ``xi1^5 + xi2^5 - xi^5 + beta (xi1^3 + xi2^3 - xi^3)``."""
    xi, xi1, xi2 = (np.asarray(a, dtype=float) for a in (xi, xi1, xi2))
    out = xi1**5 + xi2**5 - xi**5 + beta * (xi1**3 + xi2**3 - xi**3)
    return out if np.ndim(out) else float(out)


def g_slice(xi, xi1, beta):
    """Modulation along the fixed-``xi`` slice, ``xi2 = xi - xi1``."""
    return phi_unfactored(xi, xi1, np.asarray(xi) - np.asarray(xi1), beta)


def h_slice(xi1, xi2, beta):
    """Modulation along the fixed-``xi2`` slice, ``xi = xi1 + xi2``."""
    return phi_unfactored(np.asarray(xi1) + np.asarray(xi2), xi1, xi2, beta)


def g_slice_derivative(xi, xi1, beta):
    """``(xi1^2 - (xi - xi1)^2)(5(xi1^2 + (xi - xi1)^2) + 3 beta)``.

    Derivative in ``xi1`` of :func:`g_slice`.
    """
    xi, xi1 = np.asarray(xi, dtype=float), np.asarray(xi1, dtype=float)
    xi2 = xi - xi1
    out = (xi1**2 - xi2**2) * (5.0 * (xi1**2 + xi2**2) + 3.0 * beta)
    return out if out.ndim else float(out)


def h_slice_derivative(xi1, xi2, beta):
    """``-xi2 (xi + xi1)(5(xi1^2 + xi^2) + 3 beta)`` with ``xi = xi1 + xi2``.

    Derivative in ``xi1`` of :func:`h_slice`.
    """
    xi1, xi2 = np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float)
    xi = xi1 + xi2
    out = -xi2 * (xi + xi1) * (5.0 * (xi1**2 + xi**2) + 3.0 * beta)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LevelSetResult:
    slice_kind: str
    fixed_value: float
    alpha: float
    M: float
    window: tuple
    resolution: int
    measure: float
    beta: float = 0.0

    def row(self):
        return [self.slice_kind, self.fixed_value, self.alpha, self.M,
                self.window[0], self.window[1], self.resolution, self.measure]


_SLICES = {
    "fixed_xi": lambda fixed, xi1, beta: g_slice(fixed, xi1, beta),
    "fixed_xi2": lambda fixed, xi1, beta: h_slice(xi1, fixed, beta),
}


def levelset_measure(slice_kind, fixed_value, alpha, M, window, resolution, beta=0.0,
                     chunk=1 << 21) -> LevelSetResult:
    """Measure of ``{xi1 in window : |Phi_slice(xi1) - alpha| <= M}`` by midpoint sampling.

    ``slice_kind`` is ``"fixed_xi"`` (``xi2 = xi - xi1``) or ``"fixed_xi2"``
    (``xi = xi1 + xi2``); ``fixed_value`` is the frozen coordinate.
    """
    if slice_kind not in _SLICES:
        raise ValueError(f"unknown slice {slice_kind!r}; expected one of {sorted(_SLICES)}")
    a, b = (float(w) for w in window)
    if not b > a:
        raise ValueError(f"empty window {window!r}")
    if M < 1:
        raise ValueError("threshold M must be >= 1")
    resolution = int(resolution)
    if resolution < 10_000:
        raise ValueError("resolution must be at least 1e4")
    fn = _SLICES[slice_kind]
    step = (b - a) / resolution
    count = 0
    for start in range(0, resolution, chunk):
        idx = np.arange(start, min(start + chunk, resolution), dtype=float)
        pts = a + (idx + 0.5) * step
        vals = fn(fixed_value, pts, beta)
        count += int(np.count_nonzero(np.abs(vals - alpha) <= M))
    return LevelSetResult(slice_kind, float(fixed_value), float(alpha), float(M), (a, b),
                          resolution, count * step, float(beta))


def levelset_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["slice", "fixed_value", "alpha", "M", "window_lo", "window_hi",
                     "resolution", "measure"])
    for r in results:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])
    return buf.getvalue()
