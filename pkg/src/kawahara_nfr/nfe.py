"""Picard solver for the depth-K truncated normal form equation.

In the interaction variable the truncated equation reads

    v(t) = u0 + sum_{k=2}^K [N0^(k)(v)(tau)]_{tau=0}^{tau=t}
              + int_0^t sum_{k=1}^K N1^(k)(v)(tau) dtau,

with the ``N2^(K)`` remainder dropped.  Paths are sampled on the uniform grid
``tau_m = m T / n_t`` (negated for backward solves).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator

from .operators import CutoffChain, TermPlan, level_plan
from .path import TimeSampledPath
from .spectral import FrequencyGrid, SpectralState, hs_norm
from .validation import check_state

logger = logging.getLogger(__name__)

__all__ = [
    "NfeConfig",
    "ContractionReport",
    "ContractionValidationError",
    "PicardNonConvergence",
    "PicardDiagnostics",
    "validate_contraction_params",
    "nfe_rhs",
    "picard_solve",
    "duhamel_residual",
    "time_integral",
    "NormalFormSolver",
    "MAX_DEPTH",
]

MAX_DEPTH = 4
QUADRATURES = ("trapezoid", "filon")


@dataclass(frozen=True)
class NfeConfig:
    """Parameters of the truncated normal form equation and its Picard solve.

    ``quadrature`` selects how the time integrals are approximated:
    ``"trapezoid"`` is the composite rule on the sample grid, ``"filon"``
    interpolates the leaf products linearly in time and integrates each
    term's phase ``exp(i tau mu)`` exactly, which stays accurate when
    ``|mu| T / n_t`` is not small.
    """

    r: float = 1.0
    s: float = 0.0
    delta: float = 0.1
    N: float = 100.0
    T: float = 0.01
    K: int = 3
    n_t: int = 32
    picard_tol: float = 1e-12
    max_picard_iters: int = 50
    C_est: float = 1.0
    quadrature: str = "trapezoid"

    def __post_init__(self):
        if not self.r >= 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if not self.s >= 0:
            raise ValueError("s must be non-negative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.N > 1:
            raise ValueError("N must exceed 1")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if int(self.K) != self.K or not 2 <= self.K <= MAX_DEPTH:
            raise ValueError(f"K must be an integer in 2..{MAX_DEPTH}")
        if int(self.n_t) != self.n_t or self.n_t < 8:
            raise ValueError("n_t must be an integer >= 8")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if int(self.max_picard_iters) != self.max_picard_iters or self.max_picard_iters < 1:
            raise ValueError("max_picard_iters must be a positive integer")
        if not self.C_est > 0:
            raise ValueError("C_est must be positive")
        if self.quadrature not in QUADRATURES:
            raise ValueError(f"quadrature must be one of {QUADRATURES}")

    @property
    def chain(self) -> CutoffChain:
        return CutoffChain(self.N, self.delta, int(self.K))

    def times(self, direction: int = 1) -> np.ndarray:
        return direction * self.T * np.arange(self.n_t + 1) / self.n_t

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# parameter validation


@dataclass(frozen=True)
class ContractionReport:
    """Outcome of the five smallness conditions.

    Each check is ``(name, lhs, rhs, passed)`` meaning ``lhs < rhs`` (or
    ``<=`` for the time-step condition).  ``binding`` names the failing check
    with the worst ratio, or the passing one with the least slack.
    """

    checks: tuple
    binding: str

    @property
    def passed(self) -> bool:
        return all(c[3] for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "binding": self.binding,
            "checks": [{"name": n, "lhs": a, "rhs": b, "passed": p} for n, a, b, p in self.checks],
        }


class ContractionValidationError(ValueError):
    def __init__(self, report: ContractionReport):
        failed = [c[0] for c in report.checks if not c[3]]
        super().__init__(f"contraction conditions fail: {', '.join(failed)}")
        self.report = report


def validate_contraction_params(cfg: NfeConfig) -> ContractionReport:
    r, N, d, C, T = cfg.r, cfg.N, cfg.delta, cfg.C_est, cfg.T
    checks = [
        ("2rN^(-(1-d)/2) < 1/2", 2 * r * N ** (-(1 - d) / 2), 0.5, None),
        ("15C/2 < N^(d/2)", 15 * C / 2, N ** (d / 2), None),
        ("T <= 1/(12CrN^(1/2))", T, 1.0 / (12 * C * r * math.sqrt(N)), None),
        ("(24Cr)^2 < N", (24 * C * r) ** 2, N, None),
        ("(4r)^(2/(1+d)) < N", (4 * r) ** (2 / (1 + d)), N, None),
    ]
    out = []
    for i, (name, lhs, rhs, _) in enumerate(checks):
        ok = lhs <= rhs if i == 2 else lhs < rhs
        out.append((name, float(lhs), float(rhs), bool(ok)))
    binding = max(out, key=lambda c: c[1] / c[2])[0]
    return ContractionReport(tuple(out), binding)


# ---------------------------------------------------------------------------
# combined plans and time quadrature


@lru_cache(maxsize=16)
def _combined_plans(grid: FrequencyGrid, N: float, delta: float, K: int, beta: float):
    chain = CutoffChain(N, delta, K)
    boundary = tuple(level_plan(grid, "N0", k, chain, beta, K) for k in range(2, K + 1))
    forcing = tuple(level_plan(grid, "N1", k, chain, beta, K) for k in range(1, K + 1))
    return boundary, forcing


def _evaluate(plans, coeffs, t):
    return sum(p.evaluate(coeffs, t) for p in plans)


def _plans(grid, cfg, beta):
    return _combined_plans(grid, float(cfg.N), float(cfg.delta), int(cfg.K), float(beta))


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _filon_weights(z):
    """``int_0^1 exp(i z th) (1 - th) dth`` and ``int_0^1 exp(i z th) th dth``."""
    z = np.asarray(z, dtype=float)
    w0 = np.empty(z.shape, dtype=np.complex128)
    w1 = np.empty(z.shape, dtype=np.complex128)
    small = np.abs(z) < 1e-2
    iz = 1j * z[small]
    # Taylor terms up to (iz)^5; truncation error below 1e-14
    e1 = 1 + iz / 2 + iz**2 / 6 + iz**3 / 24 + iz**4 / 120 + iz**5 / 720
    a1 = 1 / 2 + iz / 3 + iz**2 / 8 + iz**3 / 30 + iz**4 / 144 + iz**5 / 840
    w1[small], w0[small] = a1, e1 - a1
    iz = 1j * z[~small]
    ez = np.exp(iz)
    e1 = (ez - 1) / iz
    a1 = ez / iz - (ez - 1) / iz**2
    w1[~small], w0[~small] = a1, e1 - a1
    return w0, w1


def time_integral(plans, coeffs, times, quadrature="trapezoid", threads=1,
                  chunk=1 << 20) -> np.ndarray:
    """Cumulative integrals ``int_{times[0]}^{times[m]} sum_p p(v(tau), tau) dtau``.

    ``plans`` is a :class:`TermPlan` or a sequence of them.  ``coeffs``
    holds the samples ``v(times[m])`` row-wise.  Returns an array of shape ``(len(times), n)`` whose first row is zero.
    """
    times = np.asarray(times, dtype=float)
    coeffs = np.asarray(coeffs)
    plans = (plans,) if isinstance(plans, TermPlan) else tuple(plans)
    n_t = times.size - 1
    out = np.zeros((n_t + 1, coeffs.shape[1]), dtype=np.complex128)
    if n_t == 0:
        return out
    if quadrature == "trapezoid":
        vals = _map(lambda m: _evaluate(plans, coeffs[m], times[m]), range(n_t + 1), threads)
        for m in range(n_t):
            out[m + 1] = out[m] + 0.5 * (times[m + 1] - times[m]) * (vals[m] + vals[m + 1])
        return out
    if quadrature != "filon":
        raise ValueError(f"unknown quadrature {quadrature!r}")

    def piece(m):
        dt = times[m + 1] - times[m]
        acc = np.zeros(coeffs.shape[1], dtype=np.complex128)
        for plan in plans:
            for lo in range(0, plan.size, chunk):
                hi = min(lo + chunk, plan.size)
                ph = plan.phase[lo:hi]
                w0, w1 = _filon_weights(ph * dt)
                vals = w0 * plan.products(coeffs[m], lo, hi) + w1 * plan.products(coeffs[m + 1], lo, hi)
                vals *= dt * np.exp(1j * times[m] * ph)
                acc += plan.scatter(vals, lo)
        return acc

    pieces = _map(piece, range(n_t), threads)
    for m in range(n_t):
        out[m + 1] = out[m] + pieces[m]
    return out


# ---------------------------------------------------------------------------
# right-hand side and Picard iteration


def _check_path(path: TimeSampledPath, cfg: NfeConfig):
    expected = cfg.times(path.direction)
    if path.times.shape != expected.shape or not np.allclose(path.times, expected, rtol=0, atol=1e-14):
        raise ValueError("path is not sampled on the configured time grid")


def nfe_rhs(path: TimeSampledPath, u0: SpectralState, cfg: NfeConfig, beta: float,
            threads: int = 1) -> TimeSampledPath:
    """One application of the normal form map to ``path``."""
    _check_path(path, cfg)
    if u0.grid != path.grid:
        raise ValueError("u0 and path use different grids")
    boundary, forcing = _plans(path.grid, cfg, beta)
    times = path.times
    B = np.array(_map(lambda m: _evaluate(boundary, path.coeffs[m], times[m]), range(len(times)), threads))
    integral = time_integral(forcing, path.coeffs, times, cfg.quadrature, threads)
    out = u0.coeffs[None, :] + (B - B[0][None, :]) + integral
    out[0] = u0.coeffs
    return path.with_coeffs(out)


class PicardNonConvergence(RuntimeError):
    """Picard iteration hit ``max_picard_iters``; ``history`` holds the distances."""

    def __init__(self, history, tol):
        super().__init__(f"no convergence to {tol:g} after {len(history)} sweeps "
                         f"(last distance {history[-1]:.3e})")
        self.history = list(history)
        self.tol = tol


@dataclass
class PicardDiagnostics:
    distances: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    iterations: int = 0
    contraction_ratio: float = 0.0
    validation: dict | None = None
    overridden: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


# distances below this multiple of eps * ||u0|| are round-off, not contraction
_NOISE_FACTOR = 1e3


def picard_solve(u0: SpectralState, cfg: NfeConfig, beta: float, direction: int = 1,
                 override_validation: bool = False, threads: int = 1):
    """Iterate ``v <- nfe_rhs(v)`` from the constant path ``v = u0``.

    Returns ``(path, diagnostics)``.  ``contraction_ratio`` is the largest
    ratio of consecutive sweep distances, ignoring sweeps already at the
    round-off floor.
    """
    norm0 = hs_norm(u0, cfg.s)
    if norm0 > cfg.r * (1 + 1e-12):
        raise ValueError(f"||u0||_H^{cfg.s} = {norm0:.6g} exceeds r = {cfg.r}")
    report = validate_contraction_params(cfg)
    if not report.passed and not override_validation:
        raise ContractionValidationError(report)
    if not report.passed:
        logger.warning("running outside the validated regime (%s)", report.binding)
    diag = PicardDiagnostics(validation=report.to_dict(), overridden=not report.passed)
    path = TimeSampledPath.constant(u0, cfg.times(direction), direction)
    floor = _NOISE_FACTOR * np.finfo(float).eps * max(norm0, np.finfo(float).tiny)
    for it in range(1, int(cfg.max_picard_iters) + 1):
        new = nfe_rhs(path, u0, cfg, beta, threads)
        d = new.sup_distance(path, cfg.s)
        diag.distances.append(d)
        if len(diag.distances) > 1:
            prev = diag.distances[-2]
            ratio = d / prev if prev > 0 else 0.0
            diag.ratios.append(ratio)
            if prev > floor:
                diag.contraction_ratio = max(diag.contraction_ratio, ratio)
        path = new
        diag.iterations = it
        logger.debug("sweep %d: distance %.3e", it, d)
        if d <= cfg.picard_tol:
            return path, diag
    raise PicardNonConvergence(diag.distances, cfg.picard_tol)


def duhamel_residual(path: TimeSampledPath, u0: SpectralState, cfg: NfeConfig, beta: float,
                     threads: int = 1) -> float:
    """Sup over sample times of ``||v(t) - u0 - int_0^t N(v)||_{H^s}``.

    ``N`` is the full, unrestricted quadratic integrand; the time integral
    uses ``cfg.quadrature``.
    """
    chain = CutoffChain(cfg.N, cfg.delta, int(cfg.K))
    full = level_plan(path.grid, "Nfull", 1, chain, beta, int(cfg.K))
    integral = time_integral(full, path.coeffs, path.times, cfg.quadrature, threads)
    mismatch = path.coeffs - u0.coeffs[None, :] - integral
    return float(np.max(path.with_coeffs(mismatch).hs_norms(cfg.s)))


class NormalFormSolver(BaseEstimator):
    """Estimator wrapper around :func:`picard_solve`.

    ``fit(u0)`` stores ``path_`` (interaction variable), ``diagnostics_`` and
    ``report_``; ``transform(u0)`` returns the path coefficients, one row per
    sample time.
    """

    def __init__(self, r=1.0, s=0.0, delta=0.1, N=100.0, T=0.01, K=3, n_t=32, picard_tol=1e-12,
                 max_picard_iters=50, C_est=1.0, quadrature="trapezoid", beta=0.0, direction=1,
                 override_validation=False, threads=1):
        self.r = r
        self.s = s
        self.delta = delta
        self.N = N
        self.T = T
        self.K = K
        self.n_t = n_t
        self.picard_tol = picard_tol
        self.max_picard_iters = max_picard_iters
        self.C_est = C_est
        self.quadrature = quadrature
        self.beta = beta
        self.direction = direction
        self.override_validation = override_validation
        self.threads = threads

    def config(self) -> NfeConfig:
        return NfeConfig(self.r, self.s, self.delta, self.N, self.T, self.K, self.n_t,
                         self.picard_tol, self.max_picard_iters, self.C_est, self.quadrature)

    def fit(self, X, y=None):
        u0 = check_state(X)
        cfg = self.config()
        self.report_ = validate_contraction_params(cfg)
        self.path_, self.diagnostics_ = picard_solve(u0, cfg, self.beta, self.direction,
                                                     self.override_validation, self.threads)
        self.u0_ = u0
        return self

    def transform(self, X):
        return self.fit(X).path_.coeffs

    def residual(self) -> float:
        return duhamel_residual(self.path_, self.u0_, self.config(), self.beta, self.threads)
