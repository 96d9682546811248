"""Acceptance criteria 1-12.

Every test records one ``criterion k: PASS|FAIL  detail`` line; the lines are
printed as they are produced (visible with ``-s``) and again in the terminal
summary.  Tolerances are the pinned acceptance values.
"""

import math
import time

import numpy as np

from kawahara_nfr.data import initial_data
from kawahara_nfr.dispersion import (g_slice, g_slice_derivative, h_slice, h_slice_derivative, phi,
                                     phi_unfactored)
from kawahara_nfr.estimates import (ProbeConfig, calibrate_constant, probe_bilinear_scaling,
                                    probe_compositions, probe_ibp_identity, probe_level_decay,
                                    probe_partitions, probe_remainder, probe_weighted_scaling, reports_csv)
from kawahara_nfr.nfe import NfeConfig, _combined_plans, picard_solve, validate_contraction_params
from kawahara_nfr.operators import CutoffChain
from kawahara_nfr.reference import RefConfig, solve
from kawahara_nfr.spectral import FrequencyGrid, SpectralState, forward_transform, from_interaction, hs_norm
from kawahara_nfr.trees import enumerate_chronicles

from conftest import ACCEPTANCE_LINES

SEED = 0
BETA = 1.0
DELTA = 0.1

# criterion 12 reruns these and compares bytes
CSV_OUTPUTS = {}


def record(k, passed, detail):
    line = f"criterion {k:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    return passed


# ---------------------------------------------------------------------------
# 1. combinatorics


def test_criterion_01_combinatorics():
    t0 = time.perf_counter()
    counts = {}
    for k in range(1, 7):
        cs = enumerate_chronicles(k)
        assert all(c.replay() for c in cs)
        counts[k] = len(cs)
    elapsed = time.perf_counter() - t0
    ok = all(counts[k] == math.factorial(k) for k in counts) and elapsed < 1.0
    assert record(1, ok, f"counts {counts}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 2. modulation identity


def _five_point(f, x, h):
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)


def test_criterion_02_modulation_identity():
    rng = np.random.default_rng(SEED)
    worst_phi, worst_d = 0.0, 0.0
    for beta in (-1.0, 0.0, 1.0):
        a, b = rng.uniform(-10, 10, size=(2, 10**6))
        f, u = phi(a + b, a, b, beta), phi_unfactored(a + b, a, b, beta)
        worst_phi = max(worst_phi, float(np.max(np.abs(f - u) / np.abs(f))))
        x, y = rng.uniform(-10, 10, size=(2, 10**4))
        h = 1e-3
        dg = g_slice_derivative(x, y, beta)
        fg = _five_point(lambda t: g_slice(x, t, beta), y, h)
        dh = h_slice_derivative(y, x, beta)
        fh = _five_point(lambda t: h_slice(t, x, beta), y, h)
        worst_d = max(worst_d, float(np.max(np.abs(fg - dg) / np.abs(dg))),
                      float(np.max(np.abs(fh - dh) / np.abs(dh))))
    ok = worst_phi <= 1e-9 and worst_d <= 1e-6
    assert record(2, ok, f"Phi rel {worst_phi:.2e} (tol 1e-9), slice derivative rel {worst_d:.2e} (tol 1e-6)")


# ---------------------------------------------------------------------------
# 3. oracle integrity


def test_criterion_03_oracle_integrity():
    grid = FrequencyGrid(64 * np.pi, 256)
    u0 = _sech2_amplitude(grid, 0.1)
    lin = solve(u0, RefConfig(grid, 1e-2, 1.0, BETA, nonlinear=False)).u_path.coeffs[-1]
    lin_err = float(np.max(np.abs(lin - from_interaction(u0, 1.0, BETA).coeffs)) / np.max(np.abs(u0.coeffs)))
    res = solve(u0, RefConfig(grid, 1e-3, 1.0, BETA))
    diag = res.diagnostics()
    ends = [solve(u0, RefConfig(grid, dt, 1.0, BETA)).u_path.coeffs[-1] for dt in (1e-2, 5e-3, 2.5e-3)]
    order = float(np.log2(np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])))
    ok = lin_err <= 1e-12 and diag["l2_drift"] <= 1e-8 and diag["mean_drift"] <= 1e-12 and order >= 3.8
    assert record(3, ok, f"linear {lin_err:.1e}, L2 drift {diag['l2_drift']:.1e}, "
                         f"mean drift {diag['mean_drift']:.1e}, time order {order:.2f}")


def _sech2_amplitude(grid, amp):
    """``amp * sech^2(x)`` sampled on ``grid`` (a physical amplitude, not an H^s size)."""
    state = forward_transform(amp / np.cosh(grid.x) ** 2, grid)
    coeffs = state.coeffs.copy()
    coeffs[0] = 0.0
    return SpectralState(grid, coeffs)


def _slope_text(rep):
    return "n/a" if rep.slope is None else f"{rep.slope:+.2f}"


# ---------------------------------------------------------------------------
# 4. operator envelopes

ENVELOPE_GRID = FrequencyGrid(16 * np.pi, 128)


def run_criterion_04():
    reports = []
    for s in (0.0, 0.5, 1.0):
        cfg = ProbeConfig(ENVELOPE_GRID, seed=SEED, samples=200, s=s, beta=BETA)
        for kind in ("N_leq", "I_gt"):
            reports.append(probe_bilinear_scaling(kind, 0.0, cfg))
    return reports


def test_criterion_04_operator_envelopes():
    reports = run_criterion_04()
    CSV_OUTPUTS[4] = reports_csv(reports)
    ok = all(r.passed for r in reports)
    slopes = ", ".join(f"{r.name} {_slope_text(r)}" for r in reports)
    off = [r.name for r in reports if r.slope is None or abs(r.slope - r.target_exponent) > 0.15]
    assert record(4, ok, f"{sum(r.passed for r in reports)}/{len(reports)} envelopes dominate; "
                         f"slopes (diagnostic) {slopes}; outside +-0.15: {len(off)}")


# ---------------------------------------------------------------------------
# 5. weighted envelopes


def run_criterion_05():
    reports = []
    for s, sigma in ((0.0, 1.0), (0.5, 1.0)):
        cfg = ProbeConfig(ENVELOPE_GRID, seed=SEED, samples=200, s=s, sigma=sigma, beta=BETA)
        for j in (1, 2):
            for kind in ("N_leq", "I_gt"):
                reports.append(probe_weighted_scaling(j, cfg, kind))
    return reports


def test_criterion_05_weighted_envelopes():
    reports = run_criterion_05()
    CSV_OUTPUTS[5] = reports_csv(reports)
    ok = all(r.passed for r in reports)
    failed = [r.name for r in reports if not r.passed]
    assert record(5, ok, f"{len(reports) - len(failed)}/{len(reports)} envelopes dominate"
                         + (f"; failing {failed}" if failed else ""))


# ---------------------------------------------------------------------------
# 6, 7. composition and partition identities

IDENTITY_CFG = ProbeConfig(FrequencyGrid(4 * np.pi, 32), seed=SEED, samples=100, beta=BETA)


def test_criterion_06_compositions():
    worst = probe_compositions(IDENTITY_CFG, N=20.0, samples=100, t=0.3)
    ok = max(worst.values()) <= 1e-10
    assert record(6, ok, "worst relative " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
                         + " (tol 1e-10)")


def test_criterion_07_partitions():
    worst = probe_partitions(IDENTITY_CFG, N=20.0, samples=20, t=0.3)
    ok = max(worst.values()) <= 1e-12
    assert record(7, ok, "worst relative " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
                         + " (tol 1e-12)")


# ---------------------------------------------------------------------------
# 8. level decay


def run_criterion_08():
    cfg = ProbeConfig(FrequencyGrid(4 * np.pi, 64), seed=SEED, samples=200, beta=BETA, delta=DELTA,
                      N_list=(1e2, 1e3, 1e4), k_range=(2, 3))
    return probe_level_decay("N0", cfg) + probe_level_decay("N1", cfg)


def test_criterion_08_level_decay():
    reports = run_criterion_08()
    CSV_OUTPUTS[8] = reports_csv(reports)
    ok = all(r.passed for r in reports)
    detail = ", ".join(f"{r.name} {'ok' if r.passed else 'FAIL'} (C_hat {r.envelope:.2g}, "
                       f"monotone {r.extra['monotone']})" for r in reports)
    assert record(8, ok, detail)


# ---------------------------------------------------------------------------
# 9. remainder decay


def run_criterion_09():
    cfg = ProbeConfig(FrequencyGrid(2 * np.pi, 64), seed=SEED, samples=200, beta=BETA, delta=DELTA,
                      N_list=(1e2, 1e3, 1e4), k_range=(2, 3))
    return probe_remainder(cfg)


def test_criterion_09_remainder_decay():
    reports = run_criterion_09()
    CSV_OUTPUTS[9] = reports_csv(reports)
    step = next(e for e in reports[0].extra["step"] if e["N"] == 1e3)
    ok = step["passed"] and all(r.passed for r in reports)
    assert record(9, ok, f"N=1e3: k=3/k=2 ratio {step['ratio']:.3g} <= 4 N^(-(1-d)/2) = "
                         f"{step['predicted']:.3g}; envelopes "
                         + ", ".join(f"{r.name} {'ok' if r.passed else 'FAIL'}" for r in reports))


# ---------------------------------------------------------------------------
# 10. integration-by-parts identity


def test_criterion_10_ibp_identity():
    grid = FrequencyGrid(64 * np.pi, 128)
    u0 = initial_data("sech2", grid, 0.1)
    chain = CutoffChain(5.0, DELTA, 3)
    out = {}
    for dt in (2e-4, 1e-4):
        path = solve(u0, RefConfig(grid, dt, 0.01, BETA, dealias_mode="pad")).v_path
        out[dt] = probe_ibp_identity(2, chain, path, BETA, every=5)["relative_residual"]
    order = float(np.log2(out[2e-4] / out[1e-4]))
    ok = out[1e-4] <= 1e-4 and 1.8 <= order
    assert record(10, ok, f"relative residual {out[1e-4]:.2e} at dt=1e-4 (tol 1e-4), "
                          f"{out[2e-4]:.2e} at dt=2e-4, observed order {order:.2f}")


# ---------------------------------------------------------------------------
# 11. end-to-end


def test_criterion_11_end_to_end():
    grid = FrequencyGrid(8 * np.pi, 64)
    # calibrate C_est on the solve grid from the bilinear and level probes
    cfg = ProbeConfig(grid, seed=SEED, samples=200, beta=BETA, delta=DELTA, N_list=(25.0, 50.0, 100.0, 200.0))
    reports = [probe_bilinear_scaling(k, 0.0, cfg) for k in ("N_leq", "I_gt")]
    reports += probe_level_decay("N0", cfg) + probe_level_decay("N1", cfg)
    C = calibrate_constant(reports)
    # smallest N passing every condition (with 50% slack) and the largest T it allows
    r = 1.0
    N = 1.5 * max((24 * C * r) ** 2, (7.5 * C) ** (2 / DELTA), (4 * r) ** (2 / (1 + DELTA)),
                  (4 * r) ** (2 / (1 - DELTA)))
    T = 1.0 / (12 * C * r * math.sqrt(N))
    u0 = initial_data("sech2", grid, 0.1, width=0.5)
    oracle = solve(u0, RefConfig(grid, T / 32 / 64, T, BETA, dealias_mode="pad", sample_stride=64)).v_path
    dist, ratios = {}, {}
    for K in (2, 3):
        nfe = NfeConfig(r=r, s=0.0, delta=DELTA, N=N, T=T, K=K, n_t=32, C_est=C, quadrature="filon")
        assert validate_contraction_params(nfe).passed
        path, diag = picard_solve(u0, nfe, BETA)
        dist[K] = path.sup_distance(oracle, 0.0)
        ratios[K] = max(diag.ratios) if diag.ratios else 0.0
    size = hs_norm(u0, 0.0)
    # on this grid the generation-2 cutoff is never exceeded at this N, so the
    # degree-3 and degree-4 terms are empty and (c) can only hold with equality
    level3 = sum(p.size for plans in _combined_plans(grid, N, DELTA, 3, BETA) for p in plans[1:])
    level3 -= sum(p.size for plans in _combined_plans(grid, N, DELTA, 2, BETA) for p in plans[1:])
    a = all(x < 1 for x in ratios.values())
    b = dist[3] <= 1e-3 * size
    c = dist[3] <= dist[2]
    assert record(11, a and b and c,
                  f"C_est {C:.3g}, N {N:.3g}, T {T:.3g}; (a) max sweep ratio {ratios[3]:.2e}; "
                  f"(b) distance {dist[3]:.2e} <= {1e-3 * size:.1e}; (c) K=3 {dist[3]:.3e} vs K=2 {dist[2]:.3e} "
                  f"({level3} extra K=3 terms)")


def test_supplementary_override_run():
    """Not a criterion: outside the validated regime the K=3 terms are active and help."""
    grid = FrequencyGrid(8 * np.pi, 64)
    u0 = initial_data("sech2", grid, 0.1, width=0.5)
    T = 0.005
    # C_est near the calibrated value (about 0.21) puts N = 25 outside the validated regime
    oracle = solve(u0, RefConfig(grid, T / 32 / 64, T, BETA, dealias_mode="pad", sample_stride=64)).v_path
    dist, ratio = {}, {}
    for K in (2, 3):
        nfe = NfeConfig(r=1.0, s=0.0, delta=DELTA, N=25.0, T=T, K=K, n_t=32, C_est=0.2, quadrature="filon")
        assert not validate_contraction_params(nfe).passed
        path, diag = picard_solve(u0, nfe, BETA, override_validation=True)
        dist[K], ratio[K] = path.sup_distance(oracle, 0.0), diag.contraction_ratio
    print(f"supplementary (override, N=25, T={T}): K=2 {dist[2]:.2e}, K=3 {dist[3]:.2e}, "
          f"contraction {ratio[3]:.2e}")
    assert dist[3] < dist[2] and ratio[3] < 1


# ---------------------------------------------------------------------------
# 12. determinism


def test_criterion_12_determinism():
    reruns = {4: run_criterion_04, 5: run_criterion_05, 8: run_criterion_08, 9: run_criterion_09}
    same = {}
    for k, fn in reruns.items():
        first = CSV_OUTPUTS.get(k)
        if first is None:  # running this test on its own
            first = reports_csv(fn())
        same[k] = reports_csv(fn()) == first
    assert record(12, all(same.values()), "bit-identical CSV reruns: "
                  + ", ".join(f"criterion {k} {'yes' if v else 'NO'}" for k, v in same.items()))
