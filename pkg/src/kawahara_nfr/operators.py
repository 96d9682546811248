"""Modulation-restricted bilinear operators and chronicle-indexed multilinear terms.

Every frequency integral ``int_{xi = xi1 + xi2}`` is the lattice sum
``h * sum`` over pairs of active modes whose sum is again active (Galerkin
truncation; nothing wraps around).

The multilinear terms of the normal form expansion are evaluated by a
breadth-first descent over a chronicle: generation ``j`` splits the frequency
of the node expanded at step ``j`` in every admissible way, the accumulated
modulation is updated and the cutoff indicator for that generation is applied
immediately, so partial assignments that fail are dropped before they fan out.
Everything that does not depend on the state or the time (surviving index
tuples, the weights ``prod i xi^(j) / prod i mu_tilde_j`` and the phase
frequency) is stored in a :class:`TermPlan` and reused across calls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .dispersion import phi_on_plane
from .spectral import FrequencyGrid, GridMismatchError, SpectralState
from .trees import Chronicle, ChronicleError, enumerate_chronicles

logger = logging.getLogger(__name__)

__all__ = [
    "BilinearSpec",
    "CutoffChain",
    "PairTable",
    "TermPlan",
    "pair_table",
    "bilinear_coefficients",
    "apply_bilinear",
    "apply_bilinear_batch",
    "apply_H",
    "full_integrand",
    "build_plan",
    "level_plan",
    "eval_term",
    "eval_level",
    "VARIANTS",
    "DEFAULT_MAX_LEVEL",
]

KINDS = ("N_leq", "N_dyadic", "I_gt", "I_dyadic")
WEIGHTS = ("symbol_xi", "weighted")
VARIANTS = ("N0", "N1", "N2", "Nfull")
DEFAULT_MAX_LEVEL = 4

# children generated per expansion batch; bounds peak memory of plan building
_EXPAND_CHUNK = 1 << 21


@dataclass(frozen=True)
class BilinearSpec:
    """One localized bilinear operator.

    ``kind`` selects the restriction on ``|Phi - alpha|``: ``<= M`` (N_leq),
    ``> M`` with divisor ``Phi - alpha`` (I_gt), or the dyadic shell
    ``M < |Phi - alpha| <= 2M`` without/with divisor (N_dyadic / I_dyadic).
    ``weight`` is ``"symbol_xi"`` for the ``-i xi`` symbol or ``"weighted"``
    for ``|xi|^s |xi_j|^{1-s}``.
    """

    kind: str
    alpha: float = 0.0
    M: float = 1.0
    weight: str = "symbol_xi"
    j: int = 1
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.weight not in WEIGHTS:
            raise ValueError(f"unknown weight {self.weight!r}")
        if not self.M >= 1:
            raise ValueError(f"threshold M must be >= 1, got {self.M}")
        if self.weight == "weighted" and self.j not in (1, 2):
            raise ValueError("weighted operators need j in {1, 2}")
        if self.s < 0:
            raise ValueError("s must be non-negative")

    @property
    def has_divisor(self) -> bool:
        return self.kind.startswith("I")

    def mask(self, shifted):
        a = np.abs(shifted)
        if self.kind == "N_leq":
            return a <= self.M
        if self.kind == "I_gt":
            return a > self.M
        return (a > self.M) & (a <= 2.0 * self.M)


@dataclass(frozen=True)
class CutoffChain:
    """Thresholds of the cutoff sets ``C_0, C_1, ..., C_{k-1}``.

    ``C_0 = {|mu_tilde_1| > N}``; for ``j >= 2`` the set ``C_{j-1}`` is
    ``{|mu_tilde_j| <= (2j+1)^3 max(|mu_tilde_1|, |mu_tilde_{j-1}|)^(1-delta)}``.
    """

    N: float
    delta: float
    depth: int = DEFAULT_MAX_LEVEL

    def __post_init__(self):
        if not self.N > 1:
            raise ValueError(f"N must exceed 1, got {self.N}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.depth < 1:
            raise ValueError("depth must be positive")

    def threshold(self, j: int, mt1, mt_prev):
        """Cutoff for generation ``j >= 2`` given ``mu_tilde_1`` and ``mu_tilde_{j-1}``."""
        if j < 2:
            raise ValueError("generation-j thresholds start at j = 2")
        big = np.maximum(np.abs(mt1), np.abs(mt_prev))
        return (2 * j + 1) ** 3 * big ** (1.0 - self.delta)


# ---------------------------------------------------------------------------
# pair tables


@dataclass(frozen=True, eq=False)
class PairTable:
    """All active pairs ``(m1, m2)`` with ``m1 + m2`` active, sorted by output."""

    grid: FrequencyGrid
    i1: np.ndarray
    i2: np.ndarray
    io: np.ndarray
    offsets: np.ndarray
    counts: np.ndarray

    @property
    def size(self) -> int:
        return self.io.size

    @property
    def xi1(self):
        return self.grid.xi[self.i1]

    @property
    def xi2(self):
        return self.grid.xi[self.i2]

    @property
    def xi(self):
        return self.grid.xi[self.io]

    def scatter_matrix(self):
        return _scatter_matrix(self.grid)


@lru_cache(maxsize=32)
def pair_table(grid: FrequencyGrid) -> PairTable:
    half = grid.n // 2 - 1
    m = np.arange(-half, half + 1)
    mo, m1 = np.meshgrid(m, m, indexing="ij")
    m2 = mo - m1
    ok = np.abs(m2) <= half
    mo, m1, m2 = mo[ok], m1[ok], m2[ok]
    # meshgrid in "ij" order already sorts by output, then by m1
    io = grid.index_of(mo).astype(np.int32)
    counts = np.bincount(io, minlength=grid.n).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    table = PairTable(grid, grid.index_of(m1).astype(np.int32), grid.index_of(m2).astype(np.int32),
                      io, offsets, counts)
    for arr in (table.i1, table.i2, table.io, table.offsets, table.counts):
        arr.setflags(write=False)
    return table


@lru_cache(maxsize=32)
def _scatter_matrix(grid: FrequencyGrid):
    t = pair_table(grid)
    return sp.csr_matrix((np.ones(t.size), (np.arange(t.size), t.io)), shape=(t.size, grid.n))


@lru_cache(maxsize=64)
def _pair_phi(grid: FrequencyGrid, beta: float) -> np.ndarray:
    t = pair_table(grid)
    out = phi_on_plane(t.xi1, t.xi2, beta)
    out.setflags(write=False)
    return out


def pair_phi(grid: FrequencyGrid, beta: float) -> np.ndarray:
    """Modulation of every entry of :func:`pair_table`."""
    return _pair_phi(grid, float(beta))


def _scatter(grid, io, vals):
    return (np.bincount(io, weights=vals.real, minlength=grid.n)
            + 1j * np.bincount(io, weights=vals.imag, minlength=grid.n))


# ---------------------------------------------------------------------------
# bilinear operators


def bilinear_coefficients(spec: BilinearSpec, grid: FrequencyGrid, t: float, beta: float) -> np.ndarray:
    """Per-pair kernel of ``spec`` (including the lattice weight ``h``)."""
    table = pair_table(grid)
    ph = pair_phi(grid, beta)
    shifted = ph - spec.alpha
    keep = spec.mask(shifted)
    if spec.weight == "symbol_xi":
        w = -1j * table.xi
    else:
        xij = table.xi1 if spec.j == 1 else table.xi2
        w = np.abs(table.xi) ** spec.s * np.abs(xij) ** (1.0 - spec.s)
    coef = np.zeros(table.size, dtype=np.complex128)
    phase = np.exp(1j * t * ph[keep])
    if spec.has_divisor:
        coef[keep] = w[keep] * phase / shifted[keep]
    else:
        coef[keep] = w[keep] * phase
    return coef * grid.spacing


def _check_pair(v1: SpectralState, v2: SpectralState):
    if v1.grid != v2.grid:
        raise GridMismatchError(f"grid mismatch: {v1.grid} vs {v2.grid}")


def apply_bilinear(spec: BilinearSpec, v1: SpectralState, v2: SpectralState, t: float,
                   beta: float) -> SpectralState:
    """Evaluate the restricted bilinear operator ``spec`` at time ``t``."""
    _check_pair(v1, v2)
    grid = v1.grid
    table = pair_table(grid)
    coef = bilinear_coefficients(spec, grid, t, beta)
    vals = coef * v1.coeffs[table.i1] * v2.coeffs[table.i2]
    real = v1.reality_flag and v2.reality_flag and spec.weight == "symbol_xi"
    return SpectralState(grid, _scatter(grid, table.io, vals), reality_flag=real)


def apply_bilinear_batch(spec: BilinearSpec, V1, V2, grid: FrequencyGrid, t: float,
                         beta: float, coef=None) -> np.ndarray:
    """Row-wise :func:`apply_bilinear` on coefficient arrays of shape ``(S, n)``."""
    table = pair_table(grid)
    if coef is None:
        coef = bilinear_coefficients(spec, grid, t, beta)
    V1 = np.atleast_2d(V1)
    V2 = np.atleast_2d(V2)
    vals = coef[None, :] * V1[:, table.i1] * V2[:, table.i2]
    return np.asarray((table.scatter_matrix().T @ vals.T).T)


def _h_weight(xi, s):
    # sgn(0) |0|^s is taken to be 0 for every s >= 0
    return np.sign(xi) * np.abs(xi) ** s


def h_coefficients(grid: FrequencyGrid, s: float, t: float, beta: float) -> np.ndarray:
    table = pair_table(grid)
    ph = pair_phi(grid, beta)
    return grid.spacing * _h_weight(table.xi, s) * np.exp(1j * t * ph)


def apply_H(v1: SpectralState, v2: SpectralState, s: float, t: float, beta: float) -> SpectralState:
    """Unrestricted convolution with weight ``sgn(eta)|eta|^s exp(i t Phi)``."""
    _check_pair(v1, v2)
    if s < 0:
        raise ValueError("s must be non-negative")
    grid = v1.grid
    table = pair_table(grid)
    vals = h_coefficients(grid, s, t, beta) * v1.coeffs[table.i1] * v2.coeffs[table.i2]
    return SpectralState(grid, _scatter(grid, table.io, vals), reality_flag=False)


def full_integrand(v: SpectralState, t: float, beta: float) -> SpectralState:
    """The unrestricted Duhamel integrand ``N(v)`` via the physical-side product.

    Computed as ``-i xi exp(-i t p(xi)) h (u_hat * u_hat)`` with ``u_hat`` the
    propagated state; it never touches the modulation function, so it serves as
    an independent check of the pairwise-phase formulation.
    """
    grid = v.grid
    xi = grid.xi
    p = xi**5 + beta * xi**3
    u = v.coeffs * np.exp(1j * t * p)
    u_act = u[1:]  # active band: modes -n/2+1 .. n/2-1
    conv = np.convolve(u_act, u_act)  # modes -(n-2) .. n-2
    half = grid.n // 2 - 1
    centre = conv[half:half + 2 * half + 1]  # modes -half..half
    out = np.zeros(grid.n, dtype=np.complex128)
    out[1:] = grid.spacing * centre
    out *= -1j * xi * np.exp(-1j * t * p)
    return SpectralState(grid, out, reality_flag=v.reality_flag)


# ---------------------------------------------------------------------------
# multilinear terms


@dataclass(eq=False)
class TermPlan:
    """Precomputed support and static weights of a sum of multilinear terms.

    ``evaluate(c, t)`` returns ``sum coeff * exp(i t phase) * prod c[leaves]``
    scattered onto ``roots``.
    """

    grid: FrequencyGrid
    roots: np.ndarray
    leaves: np.ndarray
    coeff: np.ndarray
    phase: np.ndarray
    flagged: int = 0

    @property
    def size(self) -> int:
        return int(self.roots.size)

    @property
    def degree(self) -> int:
        return int(self.leaves.shape[1]) if self.leaves.ndim == 2 else 0

    def evaluate(self, coeffs, t: float, chunk: int = 1 << 20) -> np.ndarray:
        c = np.asarray(coeffs)
        out = np.zeros(self.grid.n, dtype=np.complex128)
        for lo in range(0, self.size, chunk):
            hi = min(lo + chunk, self.size)
            vals = self.coeff[lo:hi] * np.exp(1j * t * self.phase[lo:hi])
            for a in range(self.degree):
                vals *= c[self.leaves[lo:hi, a]]
            out += _scatter(self.grid, self.roots[lo:hi], vals)
        return out

    def products(self, coeffs, lo: int = 0, hi: int | None = None) -> np.ndarray:
        """Per-term ``coeff * prod c[leaves]`` without the time phase."""
        hi = self.size if hi is None else hi
        c = np.asarray(coeffs)
        vals = self.coeff[lo:hi].copy()
        for a in range(self.degree):
            vals *= c[self.leaves[lo:hi, a]]
        return vals

    def scatter(self, vals, lo: int = 0) -> np.ndarray:
        """Sum per-term values onto their root modes."""
        return _scatter(self.grid, self.roots[lo:lo + vals.size], vals)

    def evaluate_derivative(self, coeffs, t: float, chunk: int = 1 << 20) -> np.ndarray:
        """Explicit time derivative (phase only, leaves frozen)."""
        c = np.asarray(coeffs)
        out = np.zeros(self.grid.n, dtype=np.complex128)
        for lo in range(0, self.size, chunk):
            hi = min(lo + chunk, self.size)
            vals = self.coeff[lo:hi] * (1j * self.phase[lo:hi]) * np.exp(1j * t * self.phase[lo:hi])
            for a in range(self.degree):
                vals *= c[self.leaves[lo:hi, a]]
            out += _scatter(self.grid, self.roots[lo:hi], vals)
        return out

    @classmethod
    def concatenate(cls, grid, plans):
        plans = [p for p in plans]
        if not plans:
            raise ValueError("nothing to concatenate")
        return cls(
            grid,
            np.concatenate([p.roots for p in plans]),
            np.concatenate([p.leaves for p in plans]),
            np.concatenate([p.coeff for p in plans]),
            np.concatenate([p.phase for p in plans]),
            sum(p.flagged for p in plans),
        )


def _indicators(variant: str, level: int) -> tuple:
    """Per-generation restriction codes and the number of divisor generations."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "N0":
        if level < 2:
            raise ChronicleError("boundary terms start at level 2")
        g = level - 1
        return ("C0",) + ("Cc",) * (g - 1), g
    if level == 1:
        first = {"Nfull": None, "N1": "C0c", "N2": "C0"}[variant]
        return (first,), 0
    last = {"Nfull": None, "N1": "C", "N2": "Cc"}[variant]
    return ("C0",) + ("Cc",) * (level - 2) + (last,), level - 1


def _generations(variant: str, level: int) -> int:
    return level - 1 if variant == "N0" else level


def build_plan(grid: FrequencyGrid, chronicles, variant: str, level: int, chain: CutoffChain,
               beta: float) -> TermPlan:
    """Plan for ``sum_c term(c)`` over the given chronicles.

    ``N0`` at level ``k`` uses chronicles of ``k - 1`` generations; the other
    variants use ``k`` generations.
    """
    codes, n_div = _indicators(variant, level)
    g = len(codes)
    chronicles = list(chronicles)
    for c in chronicles:
        if c.depth != g:
            raise ChronicleError(f"{variant} at level {level} needs {g}-generation chronicles, got {c.depth}")
    table = pair_table(grid)
    ph = pair_phi(grid, beta)
    xi = grid.xi
    h = grid.spacing
    plans = []
    for c in chronicles:
        parts = []
        flagged = [0]
        positions = c.positions

        # generation 1: every admissible root split
        mu = ph
        keep = _first_mask(codes[0], mu, chain)
        state = {
            "roots": table.io[keep],
            "leaves": np.stack([table.i1[keep], table.i2[keep]], axis=1),
            "w": 1j * xi[table.io[keep]],
            "mt1": mu[keep],
            "mt": mu[keep],
        }
        if n_div >= 1:
            state["w"] = state["w"] / (1j * state["mt1"])
        _grow(state, 2, g, positions, codes, n_div, chain, table, ph, xi, parts, flagged)
        if parts:
            plan = TermPlan.concatenate(grid, parts)
        else:
            plan = TermPlan(grid, np.zeros(0, np.int32), np.zeros((0, g + 1), np.int32),
                            np.zeros(0, np.complex128), np.zeros(0), 0)
        plan.coeff *= -(h**g)
        plan.flagged = flagged[0]
        if plan.flagged:
            logger.warning("chronicle %s: %d tuples with a vanishing divisor excluded",
                           c.to_string(), plan.flagged)
        plans.append(plan)
    if not plans:
        raise ChronicleError("no chronicles given")
    return TermPlan.concatenate(grid, plans)


def _first_mask(code, mu, chain):
    if code is None:
        return np.ones(mu.shape, dtype=bool)
    if code == "C0":
        return np.abs(mu) > chain.N
    if code == "C0c":
        return np.abs(mu) <= chain.N
    raise ValueError(code)


def _grow(state, j, g, positions, codes, n_div, chain, table, ph, xi, parts, flagged):
    if j > g:
        parts.append(_finish(state, table.grid, flagged, n_div))
        return
    pos = positions[j - 2]
    b = state["leaves"][:, pos]
    cnt = table.counts[b]
    cum = np.cumsum(cnt)
    lo = 0
    P = b.size
    while lo < P:
        base = cum[lo - 1] if lo else 0
        hi = int(np.searchsorted(cum, base + _EXPAND_CHUNK, side="right"))
        hi = max(hi, lo + 1)
        child = _expand(state, lo, hi, pos, b, cnt, j, codes[j - 1], n_div, chain, table, ph, xi)
        if child["roots"].size:
            _grow(child, j + 1, g, positions, codes, n_div, chain, table, ph, xi, parts, flagged)
        lo = hi


def _expand(state, lo, hi, pos, b, cnt, j, code, n_div, chain, table, ph, xi):
    b = b[lo:hi]
    c = cnt[lo:hi]
    total = int(c.sum())
    rep = np.repeat(np.arange(hi - lo), c)
    first = np.cumsum(c) - c
    pid = table.offsets[b][rep] + (np.arange(total) - first[rep])
    mt1 = state["mt1"][lo:hi][rep]
    mt_prev = state["mt"][lo:hi][rep]
    mt = mt_prev + ph[pid]
    if code is None:
        keep = np.ones(total, dtype=bool)
    else:
        thr = chain.threshold(j, mt1, mt_prev)
        keep = np.abs(mt) <= thr if code == "C" else np.abs(mt) > thr
    rep, pid, mt1, mt = rep[keep], pid[keep], mt1[keep], mt[keep]
    old = state["leaves"][lo:hi][rep]
    leaves = np.concatenate(
        [old[:, :pos], table.i1[pid][:, None], table.i2[pid][:, None], old[:, pos + 1:]], axis=1)
    w = state["w"][lo:hi][rep] * (1j * xi[b[rep]])
    if j <= n_div:
        w = w / (1j * mt)
    return {"roots": state["roots"][lo:hi][rep], "leaves": leaves, "w": w, "mt1": mt1, "mt": mt}


def _finish(state, grid, flagged, n_div):
    w = state["w"]
    bad = ~np.isfinite(w)
    if n_div and np.any(bad):
        flagged[0] += int(bad.sum())
    ok = ~bad
    return TermPlan(grid, state["roots"][ok].astype(np.int32), state["leaves"][ok].astype(np.int32),
                    w[ok].astype(np.complex128), state["mt"][ok].astype(float), 0)


@lru_cache(maxsize=64)
def _cached_level_plan(grid, variant, level, N, delta, depth, beta):
    chain = CutoffChain(N, delta, depth)
    chronicles = enumerate_chronicles(_generations(variant, level))
    plan = build_plan(grid, chronicles, variant, level, chain, beta)
    logger.debug("plan %s^(%d) on n=%d: %d terms", variant, level, grid.n, plan.size)
    return plan


def _check_level(variant, level, max_level):
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    lo = 2 if variant == "N0" else 1
    if int(level) != level or not lo <= level <= max_level:
        raise ChronicleError(f"{variant} level must be in {lo}..{max_level}, got {level!r}")


def level_plan(grid: FrequencyGrid, variant: str, level: int, chain: CutoffChain, beta: float,
               max_level: int = DEFAULT_MAX_LEVEL) -> TermPlan:
    """Cached plan for ``variant^(level)`` summed over all chronicles."""
    _check_level(variant, level, max_level)
    return _cached_level_plan(grid, variant, int(level), float(chain.N), float(chain.delta),
                              int(chain.depth), float(beta))


def eval_term(c: Chronicle, variant: str, v: SpectralState, t: float, chain: CutoffChain,
              beta: float, level: int | None = None) -> SpectralState:
    """Single chronicle contribution to ``variant`` at the matching level."""
    if level is None:
        level = c.depth + 1 if variant == "N0" else c.depth
    if _generations(variant, level) != c.depth:
        raise ChronicleError(f"chronicle depth {c.depth} does not match {variant} at level {level}")
    plan = build_plan(v.grid, [c], variant, level, chain, beta)
    return SpectralState(v.grid, plan.evaluate(v.coeffs, t), reality_flag=v.reality_flag)


def eval_level(variant: str, k: int, v: SpectralState, t: float, chain: CutoffChain, beta: float,
               max_level: int = DEFAULT_MAX_LEVEL) -> SpectralState:
    """``variant^(k)(v)`` at time ``t``: the sum of :func:`eval_term` over chronicles."""
    plan = level_plan(v.grid, variant, k, chain, beta, max_level)
    return SpectralState(v.grid, plan.evaluate(v.coeffs, t), reality_flag=v.reality_flag)
