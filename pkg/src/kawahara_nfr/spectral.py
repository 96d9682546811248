"""Frequency lattice, spectral states, norms and the interaction gauge.

The real line is modelled by a periodic box of length ``L`` sampled at ``n``
points.  Frequencies are stored in natural signed order

    xi_m = m * h,   m = -n/2, ..., n/2 - 1,   h = 2*pi/L,

so ``xi = 0`` sits at index ``n/2``.  Only the symmetric band
``|m| <= n/2 - 1`` takes part in nonlinear interactions; the lone ``m = -n/2``
slot has no conjugate partner and is never produced by a bilinear operator, which
keeps Hermitian symmetry exact under Galerkin truncation.

Transform convention (fixed here and nowhere else)::

    v_hat(xi) = (1 / 2 pi) * integral exp(-i x xi) v(x) dx

discretised with the rectangle rule on the periodic grid.  With this choice the
Fourier coefficients of a product are *exactly* ``h * sum_{xi1+xi2=xi}``, so
every frequency integral in the Duhamel/normal-form formulas becomes a lattice
sum with weight ``h``.  The price is a constant in Parseval::

    integral |v|^2 dx = 2 pi * h * sum |v_hat|^2 = 2 pi * hs_norm(v, 0)^2
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "FrequencyGrid",
    "SpectralState",
    "SobolevIndex",
    "GridMismatchError",
    "hs_norm",
    "flinf_norm",
    "linear_phase",
    "to_interaction",
    "from_interaction",
    "forward_transform",
    "inverse_transform",
]


class GridMismatchError(ValueError):
    """Raised when states living on different lattices are combined."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric frequency lattice approximating the line.

    Parameters
    ----------
    L : float
        Period length of the physical box.
    n : int
        Number of modes (even, at least 8).
    """

    L: float
    n: int

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"period length must be positive, got {self.L!r}")
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"mode count must be an even integer >= 8, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def max_frequency(self) -> float:
        return 0.5 * self.n * self.spacing

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def zero_index(self) -> int:
        return self.n // 2

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode numbers ``m`` in storage order."""
        m = np.arange(-self.n // 2, self.n // 2, dtype=np.int64)
        m.setflags(write=False)
        return m

    @cached_property
    def xi(self) -> np.ndarray:
        xi = self.modes * self.spacing
        xi.setflags(write=False)
        return xi

    @cached_property
    def x(self) -> np.ndarray:
        """Physical sample points, centred on the origin."""
        x = (np.arange(self.n) - self.n // 2) * self.dx
        x.setflags(write=False)
        return x

    def index_of(self, m):
        """Storage index of integer mode ``m`` (no range check)."""
        return np.asarray(m) + self.n // 2

    def contains_mode(self, m):
        m = np.asarray(m)
        return (m >= -self.n // 2) & (m < self.n // 2)

    def japanese(self, s: float = 1.0) -> np.ndarray:
        """``<xi>^s`` on the lattice."""
        return (1.0 + self.xi**2) ** (0.5 * s)


@dataclass(frozen=True)
class SobolevIndex:
    """Regularity exponents used by the weighted estimates."""

    s: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("negative Sobolev exponents are not supported")

    def check_weighted(self):
        """Raise unless ``0 <= s <= min(1, sigma)``."""
        if not (0.0 <= self.s <= min(1.0, self.sigma)):
            raise ValueError(
                f"weighted estimates need 0 <= s <= min(1, sigma); got s={self.s}, sigma={self.sigma}"
            )
        return self


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Fourier coefficients of a field on a :class:`FrequencyGrid`."""

    grid: FrequencyGrid
    coeffs: np.ndarray
    reality_flag: bool = field(default=True)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, copy=True)
        if c.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: FrequencyGrid) -> "SpectralState":
        return cls(grid, np.zeros(grid.n, dtype=np.complex128))

    @classmethod
    def single_mode(cls, grid: FrequencyGrid, m: int, value: complex = 1.0, reality_flag=False):
        c = np.zeros(grid.n, dtype=np.complex128)
        c[grid.index_of(m)] = value
        return cls(grid, c, reality_flag=reality_flag)

    def with_coeffs(self, coeffs) -> "SpectralState":
        return SpectralState(self.grid, coeffs, self.reality_flag)

    def reality_defect(self) -> float:
        """Largest relative violation of ``v(-xi) = conj(v(xi))``."""
        c = self.coeffs
        inner = c[1:]  # modes -n/2+1 .. n/2-1 are closed under negation
        defect = np.max(np.abs(inner - np.conj(inner[::-1]))) if inner.size else 0.0
        scale = max(np.max(np.abs(c)), np.finfo(float).tiny)
        return float(defect / scale)

    def is_real(self, rtol: float = 1e-12) -> bool:
        return self.reality_defect() <= rtol

    def __add__(self, other):
        _same_grid(self, other)
        return SpectralState(self.grid, self.coeffs + other.coeffs, self.reality_flag and other.reality_flag)

    def __sub__(self, other):
        _same_grid(self, other)
        return SpectralState(self.grid, self.coeffs - other.coeffs, self.reality_flag and other.reality_flag)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        keep = self.reality_flag and scalar.imag == 0
        return SpectralState(self.grid, self.coeffs * scalar, keep)

    __rmul__ = __mul__

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "L": self.grid.L,
            "n": self.grid.n,
            "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs],
        }

    @classmethod
    def from_dict(cls, payload: dict, reality_flag: bool | None = None) -> "SpectralState":
        grid = FrequencyGrid(payload["L"], payload["n"])
        pairs = np.asarray(payload["coeffs"], dtype=float)
        if pairs.shape != (grid.n, 2):
            raise ValueError(f"coeffs must be {grid.n} [re, im] pairs")
        state = cls(grid, pairs[:, 0] + 1j * pairs[:, 1], reality_flag=False)
        if reality_flag is None:
            reality_flag = state.is_real()
        return cls(grid, state.coeffs, reality_flag)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, reality_flag: bool | None = None) -> "SpectralState":
        return cls.from_dict(json.loads(text), reality_flag)


def _same_grid(a: SpectralState, b: SpectralState):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def hs_norm(state: SpectralState, s: float = 0.0) -> float:
    """``( h * sum <xi>^{2s} |v_hat|^2 )^{1/2}``."""
    grid = state.grid
    w = grid.japanese(2.0 * s)
    return float(np.sqrt(grid.spacing * np.sum(w * np.abs(state.coeffs) ** 2)))


def flinf_norm(state: SpectralState) -> float:
    """Largest Fourier coefficient modulus."""
    return float(np.max(np.abs(state.coeffs))) if state.coeffs.size else 0.0


def linear_phase(grid: FrequencyGrid, t: float, beta: float) -> np.ndarray:
    """``exp(i t (xi^5 + beta xi^3))``, the symbol of the linear propagator."""
    xi = grid.xi
    return np.exp(1j * t * (xi**5 + beta * xi**3))


def to_interaction(u_hat: SpectralState, t: float, beta: float) -> SpectralState:
    """Remove the linear flow: ``v_hat = exp(-i t (xi^5 + beta xi^3)) u_hat``."""
    phase = np.conj(linear_phase(u_hat.grid, t, beta))
    return SpectralState(u_hat.grid, u_hat.coeffs * phase, u_hat.reality_flag)


def from_interaction(v_hat: SpectralState, t: float, beta: float) -> SpectralState:
    """Inverse of :func:`to_interaction`."""
    phase = linear_phase(v_hat.grid, t, beta)
    return SpectralState(v_hat.grid, v_hat.coeffs * phase, v_hat.reality_flag)


def forward_transform(samples, grid: FrequencyGrid) -> SpectralState:
    """Physical samples at ``grid.x`` to Fourier coefficients."""
    w = np.asarray(samples)
    if w.shape != (grid.n,):
        raise ValueError(f"expected {grid.n} samples, got shape {w.shape}")
    coeffs = (grid.dx / (2.0 * np.pi)) * np.fft.fftshift(np.fft.fft(np.fft.ifftshift(w)))
    return SpectralState(grid, coeffs, reality_flag=bool(np.isrealobj(w)))


def inverse_transform(state: SpectralState) -> np.ndarray:
    """Fourier coefficients to physical samples at ``grid.x``.

    Real states return a real array (the imaginary round-off is dropped).
    """
    grid = state.grid
    w = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(state.coeffs))) * (2.0 * np.pi / grid.dx)
    if state.reality_flag:
        return w.real.copy()
    return w


def spectral_derivative_symbol(grid: FrequencyGrid, order: int = 1) -> np.ndarray:
    """``(i xi)^order``."""
    return (1j * grid.xi) ** order
