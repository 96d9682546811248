import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kawahara_nfr.dispersion import (PlaneConstraintError, g_slice, g_slice_derivative, h_slice,
                                     h_slice_derivative, levelset_csv, levelset_measure, phi,
                                     phi_unfactored)

finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(a=finite, b=finite, beta=st.sampled_from([-1.0, 0.0, 1.0]))
def test_factored_matches_unfactored(a, b, beta):
    ref = phi_unfactored(a + b, a, b, beta)
    assert phi(a + b, a, b, beta) == pytest.approx(ref, rel=1e-9, abs=1e-6)


def test_plane_constraint_enforced():
    with pytest.raises(PlaneConstraintError):
        phi(1.0, 0.3, 0.3, 1.0)


def test_known_value():
    # xi1 = xi2 = 1, beta = 0: -(2)(1)(1)(5 * 3) = -30
    assert phi(2.0, 1.0, 1.0, 0.0) == pytest.approx(-30.0)
    assert phi_unfactored(2.0, 1.0, 1.0, 0.0) == pytest.approx(-30.0)


@pytest.mark.parametrize("beta", [-1.0, 0.0, 1.0])
def test_slice_derivatives_central_difference(beta):
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-5, 5, size=(2, 200))
    eps = 1e-5
    fd_g = (g_slice(x, y + eps, beta) - g_slice(x, y - eps, beta)) / (2 * eps)
    fd_h = (h_slice(y + eps, x, beta) - h_slice(y - eps, x, beta)) / (2 * eps)
    np.testing.assert_allclose(g_slice_derivative(x, y, beta), fd_g, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(h_slice_derivative(y, x, beta), fd_h, rtol=1e-6, atol=1e-6)


def test_levelset_measure_bounds_and_csv():
    r = levelset_measure("fixed_xi", 3.0, 0.0, 10.0, (-5.0, 5.0), 20_000, beta=1.0)
    assert 0 < r.measure <= 10.0
    wide = levelset_measure("fixed_xi", 3.0, 0.0, 1e9, (-5.0, 5.0), 20_000, beta=1.0)
    assert wide.measure == pytest.approx(10.0)
    assert levelset_csv([r, wide]).count("\n") == 3


@pytest.mark.parametrize("kw", [dict(slice_kind="nope"), dict(M=0.5), dict(resolution=10),
                                dict(window=(1.0, 1.0))])
def test_levelset_rejects_bad_input(kw):
    args = dict(slice_kind="fixed_xi2", fixed_value=1.0, alpha=0.0, M=2.0, window=(0, 1),
                resolution=10_000)
    args.update(kw)
    with pytest.raises(ValueError):
        levelset_measure(**args)
