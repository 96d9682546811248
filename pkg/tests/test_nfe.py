import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from kawahara_nfr.data import initial_data
from kawahara_nfr.nfe import (ContractionValidationError, NfeConfig, NormalFormSolver, PicardNonConvergence,
                              _filon_weights, duhamel_residual, nfe_rhs, picard_solve, time_integral,
                              validate_contraction_params)
from kawahara_nfr.operators import CutoffChain, level_plan
from kawahara_nfr.path import TimeSampledPath
from kawahara_nfr.reference import RefConfig, solve
from kawahara_nfr.spectral import FrequencyGrid

GRID = FrequencyGrid(4 * np.pi, 16)
# N far above every modulation on GRID: the validated regime for small data
SAFE = dict(r=1.0, N=1e6, T=1e-4, C_est=0.2, n_t=16)


@settings(max_examples=50, deadline=None)
@given(z=st.floats(-1e3, 1e3))
def test_filon_weights_match_quadrature(z):
    th = (np.arange(20000) + 0.5) / 20000
    e = np.exp(1j * z * th)
    w0, w1 = _filon_weights(np.array([z]))
    if abs(z) < 50:
        assert abs(w0[0] - np.mean(e * (1 - th))) < 1e-6
        assert abs(w1[0] - np.mean(e * th)) < 1e-6
    # exact total int_0^1 exp(i z th) dth, in a form without cancellation
    total = np.exp(0.5j * z) * np.sinc(z / (2 * np.pi))
    assert abs(w0[0] + w1[0] - total) < 1e-13


def test_filon_branch_continuity():
    a = _filon_weights(np.array([1e-2 - 1e-12, 1e-2 + 1e-12]))
    assert abs(a[0][0] - a[0][1]) < 1e-12 and abs(a[1][0] - a[1][1]) < 1e-12


@pytest.mark.parametrize("quadrature", ["trapezoid", "filon"])
def test_time_integral_constant_path(quadrature):
    # constant leaves: every term integrates exp(i tau mu) exactly under filon
    u0 = initial_data("sech2", GRID, 0.3)
    plan = level_plan(GRID, "N1", 1, CutoffChain(50.0, 0.1, 2), 1.0)
    times = np.linspace(0, 0.05, 65)
    coeffs = np.repeat(u0.coeffs[None, :], times.size, axis=0)
    got = time_integral(plan, coeffs, times, quadrature)
    fine = np.linspace(0, 0.05, 20001)
    vals = np.array([plan.evaluate(u0.coeffs, t) for t in fine])
    exact = np.sum(0.5 * (vals[1:] + vals[:-1]), axis=0) * (fine[1] - fine[0])
    tol = 1e-9 if quadrature == "filon" else 1e-4
    assert np.abs(got[-1] - exact).max() <= tol * max(np.abs(exact).max(), 1e-12)
    assert np.all(got[0] == 0)


def test_contraction_checks():
    good = validate_contraction_params(NfeConfig(**SAFE))
    assert good.passed and len(good.checks) == 5
    bad = validate_contraction_params(NfeConfig(r=1.0, N=10.0, C_est=1.0))
    assert not bad.passed
    assert bad.binding in [c[0] for c in bad.checks]


@pytest.mark.parametrize("kw", [dict(r=0.5), dict(K=1), dict(K=5), dict(n_t=4), dict(delta=1.0),
                                dict(quadrature="simpson"), dict(C_est=0.0), dict(N=1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        NfeConfig(**kw)


def test_validation_gate_and_override():
    u0 = initial_data("sech2", GRID, 0.05)
    cfg = NfeConfig(r=1.0, N=30.0, T=1e-3, n_t=8, C_est=1.0)
    with pytest.raises(ContractionValidationError) as info:
        picard_solve(u0, cfg, 1.0)
    assert not info.value.report.passed
    path, diag = picard_solve(u0, cfg, 1.0, override_validation=True)
    assert diag.overridden and path.coeffs.shape == (9, GRID.n)


def test_data_larger_than_r_rejected():
    with pytest.raises(ValueError):
        picard_solve(initial_data("sech2", GRID, 2.0), NfeConfig(**SAFE), 1.0)


def test_non_convergence_reported():
    u0 = initial_data("sech2", GRID, 0.5)
    cfg = NfeConfig(r=1.0, N=30.0, T=1e-2, n_t=8, max_picard_iters=2, picard_tol=1e-15)
    with pytest.raises(PicardNonConvergence) as info:
        picard_solve(u0, cfg, 1.0, override_validation=True)
    assert len(info.value.history) == 2


@pytest.mark.parametrize("direction", [1, -1])
def test_validated_solve_matches_oracle(direction):
    u0 = initial_data("sech2", GRID, 0.1, width=0.5)
    cfg = NfeConfig(**SAFE, quadrature="filon")
    path, diag = picard_solve(u0, cfg, 1.0, direction)
    assert diag.contraction_ratio < 1 and diag.distances[-1] <= cfg.picard_tol
    ref = solve(u0, RefConfig(GRID, cfg.T / cfg.n_t / 8, cfg.T, 1.0, dealias_mode="pad", sample_stride=8),
                direction)
    assert path.sup_distance(ref.v_path) <= 1e-10
    assert duhamel_residual(path, u0, cfg, 1.0) <= 1e-10
    # the solution is a fixed point of the map
    again = nfe_rhs(path, u0, cfg, 1.0)
    assert again.sup_distance(path) <= 1e-11


def test_threads_do_not_change_result():
    u0 = initial_data("sech2", GRID, 0.1, width=0.5)
    cfg = NfeConfig(**SAFE)
    a, _ = picard_solve(u0, cfg, 1.0, threads=1)
    b, _ = picard_solve(u0, cfg, 1.0, threads=3)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)


def test_path_grid_checked():
    u0 = initial_data("sech2", GRID, 0.1)
    cfg = NfeConfig(**SAFE)
    wrong = TimeSampledPath.constant(u0, np.linspace(0, 1, 17))
    with pytest.raises(ValueError):
        nfe_rhs(wrong, u0, cfg, 1.0)


def test_estimator_api():
    est = NormalFormSolver(**SAFE, beta=1.0)
    assert clone(est).get_params() == est.get_params()
    u0 = initial_data("sech2", GRID, 0.1)
    out = est.transform(u0)
    assert out.shape == (17, GRID.n)
    assert est.report_.passed
    assert est.residual() < 1e-9
