import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kawahara_nfr.dispersion import phi
from kawahara_nfr.operators import (BilinearSpec, CutoffChain, apply_bilinear, eval_level, eval_term,
                                    full_integrand, level_plan, pair_table)
from kawahara_nfr.spectral import FrequencyGrid
from kawahara_nfr.trees import enumerate_chronicles

from conftest import hermitian_state


def brute_bilinear(spec, v1, v2, t, beta):
    """Double loop over the active band, straight from the definition."""
    g = v1.grid
    half = g.n // 2 - 1
    out = np.zeros(g.n, complex)
    for m in range(-half, half + 1):
        for m1 in range(-half, half + 1):
            m2 = m - m1
            if abs(m2) > half:
                continue
            xi, xi1, xi2 = m * g.spacing, m1 * g.spacing, m2 * g.spacing
            p = phi(xi, xi1, xi2, beta)
            a = abs(p - spec.alpha)
            keep = {"N_leq": a <= spec.M, "I_gt": a > spec.M,
                    "N_dyadic": spec.M < a <= 2 * spec.M, "I_dyadic": spec.M < a <= 2 * spec.M}[spec.kind]
            if not keep:
                continue
            w = -1j * xi if spec.weight == "symbol_xi" else \
                abs(xi) ** spec.s * abs(xi1 if spec.j == 1 else xi2) ** (1 - spec.s)
            if spec.has_divisor:
                w = w / (p - spec.alpha)
            out[g.index_of(m)] += g.spacing * w * np.exp(1j * t * p) * v1.coeffs[g.index_of(m1)] \
                * v2.coeffs[g.index_of(m2)]
    return out


GRID = FrequencyGrid(4 * np.pi, 16)


@pytest.mark.parametrize("spec", [BilinearSpec("N_leq", 0.0, 20.0), BilinearSpec("I_gt", 3.0, 20.0),
                                  BilinearSpec("N_dyadic", 0.0, 8.0), BilinearSpec("I_dyadic", -2.0, 8.0),
                                  BilinearSpec("N_leq", 0.0, 50.0, weight="weighted", j=2, s=0.5)])
def test_bilinear_matches_double_loop(spec, rng):
    v1, v2 = hermitian_state(GRID, rng), hermitian_state(GRID, rng)
    got = apply_bilinear(spec, v1, v2, 0.7, 1.0).coeffs
    np.testing.assert_allclose(got, brute_bilinear(spec, v1, v2, 0.7, 1.0), atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.floats(1.0, 1e4), t=st.floats(-1, 1))
def test_split_symmetry_and_reality(seed, M, t):
    r = np.random.default_rng(seed)
    v1, v2 = hermitian_state(GRID, r), hermitian_state(GRID, r)
    lo = apply_bilinear(BilinearSpec("N_leq", 0.0, M), v1, v2, t, 1.0)
    swapped = apply_bilinear(BilinearSpec("N_leq", 0.0, M), v2, v1, t, 1.0)
    np.testing.assert_allclose(lo.coeffs, swapped.coeffs, atol=1e-13)
    assert lo.is_real(1e-10)
    # N_leq plus (the divisor-free) shell pieces recovers the unrestricted product
    big = apply_bilinear(BilinearSpec("N_leq", 0.0, 1e12), v1, v1, t, 1.0).coeffs
    np.testing.assert_allclose(big, full_integrand(v1, t, 1.0).coeffs, atol=1e-12)


def test_pair_table_is_exact_convolution():
    t = pair_table(GRID)
    np.testing.assert_allclose(t.xi, t.xi1 + t.xi2)
    assert t.counts.sum() == t.size
    assert t.counts[0] == 0  # the unpaired -n/2 slot receives nothing


def test_cutoff_chain_validation():
    with pytest.raises(ValueError):
        CutoffChain(1.0, 0.1)
    with pytest.raises(ValueError):
        CutoffChain(10.0, 1.5)
    with pytest.raises(ValueError):
        BilinearSpec("N_leq", M=0.5)
    with pytest.raises(ValueError):
        BilinearSpec("other")


CHAIN = CutoffChain(20.0, 0.1, 3)
SMALL = FrequencyGrid(4 * np.pi, 32)


@pytest.mark.parametrize("variant,k", [("N1", 2), ("N2", 2), ("N0", 3), ("N1", 3)])
def test_level_is_sum_of_terms(variant, k, rng):
    v = hermitian_state(SMALL, rng)
    depth = k - 1 if variant == "N0" else k
    total = sum(eval_term(c, variant, v, 0.3, CHAIN, 1.0, level=k).coeffs
                for c in enumerate_chronicles(depth))
    np.testing.assert_allclose(eval_level(variant, k, v, 0.3, CHAIN, 1.0).coeffs, total, atol=1e-13)


def test_low_levels_reduce_to_bilinear(rng):
    v = hermitian_state(SMALL, rng)
    n1 = eval_level("N1", 1, v, 0.3, CHAIN, 1.0).coeffs
    nl = apply_bilinear(BilinearSpec("N_leq", 0.0, CHAIN.N), v, v, 0.3, 1.0).coeffs
    np.testing.assert_allclose(n1, nl, atol=1e-13)
    n0 = eval_level("N0", 2, v, 0.3, CHAIN, 1.0).coeffs
    ig = apply_bilinear(BilinearSpec("I_gt", 0.0, CHAIN.N), v, v, 0.3, 1.0).coeffs
    np.testing.assert_allclose(n0, -1j * ig, atol=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_partition_and_reality(k, rng):
    v = hermitian_state(SMALL, rng)
    parts = [eval_level(x, k, v, 0.3, CHAIN, 1.0) for x in ("N1", "N2", "Nfull")]
    scale = np.abs(parts[2].coeffs).max()
    assert np.abs(parts[0].coeffs + parts[1].coeffs - parts[2].coeffs).max() <= 1e-12 * scale
    assert all(p.is_real(1e-9) for p in parts)


def test_plan_derivative_matches_finite_difference(rng):
    v = hermitian_state(SMALL, rng)
    plan = level_plan(SMALL, "N1", 2, CHAIN, 1.0)
    eps = 1e-8  # phases reach ~1e4, so the O(eps^2) error needs a small step
    fd = (plan.evaluate(v.coeffs, 0.3 + eps) - plan.evaluate(v.coeffs, 0.3 - eps)) / (2 * eps)
    got = plan.evaluate_derivative(v.coeffs, 0.3)
    assert np.abs(got - fd).max() <= 1e-5 * max(np.abs(got).max(), 1.0)


def test_level_bounds():
    with pytest.raises(ValueError):
        level_plan(SMALL, "N1", 9, CHAIN, 1.0)
    with pytest.raises(ValueError):
        level_plan(SMALL, "bogus", 2, CHAIN, 1.0)
