import numpy as np
import pytest

from conftest import certified_grid, make_rng
from vsbdf3.bdf_kernels import assemble_B, bdf_coefficients
from vsbdf3.ratio_analysis import (
    CONSTANTS,
    GAMMA,
    KAPPA_MAX,
    KAPPA_MIN,
    LAMBDA_MAX,
    LAMBDA_MIN,
    MAX_CERTIFIED_RATIO,
    certify_positive_definite,
    envelope_transfer_factor,
    generating_function,
    lemma_functions,
    min_symmetric_eigenvalue,
    pivot_certificate_scales,
    pivot_lower_certificate,
    pivot_upper_certificate,
    spectral_norm,
    subdiagonal_certificate,
    subdiagonal_envelopes,
    sweep_lemma_bounds,
    sylvester_trace_A,
    sylvester_trace_A_from_ratios,
    sylvester_trace_shifted,
)
from vsbdf3.time_grid import build_from_ratios, build_uniform


def test_constants_are_the_published_values():
    assert GAMMA == 1 / 200
    assert (KAPPA_MIN, KAPPA_MAX) == (0.25, 1.4)
    assert (LAMBDA_MIN, LAMBDA_MAX) == (1.99, 3.99)
    assert MAX_CERTIFIED_RATIO == 1.405
    assert CONSTANTS.r_s == 1.405


def test_generating_function_hand_values():
    # equal ratios r=1 give the uniform weights, which sum to 1 at x=1
    assert generating_function(1.0, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert generating_function(1.732, 0.434) < 0.0
    assert generating_function(1.5, 0.0) > 0.0


def test_generating_function_vectorized():
    x = np.linspace(-1.0, 1.0, 11)
    out = generating_function(1.2, x)
    assert out.shape == x.shape
    assert out[5] == pytest.approx(generating_function(1.2, 0.0))


def test_sylvester_A_uniform_two_levels():
    tr = sylvester_trace_A(build_uniform(2, 2.0))
    assert tr.p == pytest.approx((2.0, 23 / 8))
    assert tr.q[1] == pytest.approx(-0.5)
    assert tr.first_negative is None
    assert tr.positive


def test_sylvester_A_grid_and_ratio_forms_agree():
    g = certified_grid(make_rng(0), 40)
    a = sylvester_trace_A(g)
    b = sylvester_trace_A_from_ratios(g.ratios)
    np.testing.assert_allclose(a.p, b.p, rtol=1e-15)
    np.testing.assert_allclose(a.q, b.q, rtol=1e-15)


def test_sylvester_A_constant_unit_ratio_stays_positive():
    tr = sylvester_trace_A_from_ratios([1.0] * 99)
    assert tr.first_negative is None
    assert min(tr.p) > 0.0


def test_sylvester_A_truncates_at_first_nonpositive_pivot():
    tr = sylvester_trace_A_from_ratios([1.732] * 119)
    assert tr.first_negative is not None
    assert len(tr.p) == tr.first_negative
    assert tr.p[-1] <= 0.0
    assert min(tr.p[:-1]) > 0.0
    assert not tr.positive


def test_shifted_trace_uniform_hand_values():
    tr = sylvester_trace_shifted(build_uniform(2, 2.0))
    assert tr.p[0] == pytest.approx(1.99)
    assert tr.q[1] == pytest.approx(-0.5)
    assert tr.p[1] == pytest.approx(2.99 - 0.25 / 1.99)


def test_shifted_diagonal_is_doubled_and_shifted_leading_weight():
    # the recursion's diagonal entries must equal 2*b0 - 2*gamma/tau at
    # every level; spot-check through p_1 and the level structure
    rng = make_rng(1)
    for _ in range(50):
        g = certified_grid(rng, int(rng.integers(1, 30)))
        tr = sylvester_trace_shifted(g)
        b0 = bdf_coefficients(g, 1).b0
        want = 2 * b0 - 2 * GAMMA / g.step(1)
        assert tr.p[0] == pytest.approx(want, rel=1e-13)


def test_envelope_formulas_hand_value():
    mu, nu = subdiagonal_envelopes(1.0, 1.0, 1.0)
    # common factor r_j^2 r_{j-1}^4 (1+r_j) / (tau (1+r_{j-1})^2 (1+r_{j-1}+r_j r_{j-1})) = 1/6
    assert mu == pytest.approx(0.25 / 6)
    assert nu == pytest.approx(1.4 / 6)
    assert mu <= nu


def test_certification_accepts_threshold_ratio_chain():
    ok, tr = certify_positive_definite(build_from_ratios([1.405] * 99, 1.0))
    assert ok
    assert tr.first_negative is None
    assert len(tr.p) == 100


def test_certification_rejects_steep_chain():
    ok, tr = certify_positive_definite(build_from_ratios([1.732] * 55, 1.0))
    assert not ok
    assert tr.first_negative == 30


def test_lemma_functions_hand_values():
    vals = lemma_functions(0.0, 0.0, 1.0)
    assert vals.transfer == pytest.approx(1.0, abs=1e-14)
    assert vals.pivot_upper == pytest.approx(-2.0, abs=1e-14)
    assert lemma_functions(1.0, 0.0, 1.0).subdiag == pytest.approx(-0.5, abs=1e-14)
    # the lower pivot certificate vanishes when the incoming ratio is zero
    scales = pivot_certificate_scales(0.0, 0.7)
    assert abs(lemma_functions(0.0, 0.7, 1.0).pivot_lower) <= 1e-12 * scales[0]


def test_lemma_functions_reject_points_outside_the_box():
    with pytest.raises(ValueError):
        lemma_functions(1.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        lemma_functions(0.0, -0.1, 1.0)
    with pytest.raises(ValueError):
        lemma_functions(0.0, 0.0, 2.0)


def test_lemma_functions_match_individual_evaluators():
    rng = make_rng(2)
    for _ in range(100):
        x, y = rng.uniform(0.0, 1.405, size=2)
        k = rng.uniform(0.25, 1.4)
        vals = lemma_functions(x, y, k)
        assert vals.transfer == envelope_transfer_factor(x, y, k)
        assert vals.subdiag == subdiagonal_certificate(x, y)
        assert vals.pivot_lower == pivot_lower_certificate(x, y)
        assert vals.pivot_upper == pivot_upper_certificate(x, y)


def test_quick_lemma_sweep_passes_at_coarse_resolution():
    res = sweep_lemma_bounds(resolution=0.05, kappas=(0.25, 1.4))
    assert res.passed
    assert res.transfer_min >= 1.0 - 1e-12
    assert res.transfer_max <= 2.7 + 1e-12
    assert res.subdiag_max <= 1e-12
    assert res.pivot_lower_scaled_min >= -1e-9
    assert res.pivot_upper_scaled_max <= 1e-9


def test_min_symmetric_eigenvalue_known_matrices():
    assert min_symmetric_eigenvalue(np.diag([3.0, -1.0, 2.0])) == pytest.approx(-1.0)
    assert min_symmetric_eigenvalue(np.zeros((4, 4))) == 0.0
    assert min_symmetric_eigenvalue(np.array([[5.0]])) == 5.0
    # asymmetric input is symmetrized first
    m = np.array([[1.0, 2.0], [0.0, 1.0]])
    assert min_symmetric_eigenvalue(m) == pytest.approx(0.0, abs=1e-12)


def test_min_symmetric_eigenvalue_matches_lapack():
    rng = make_rng(3)
    for _ in range(40):
        n = int(rng.integers(2, 25))
        x = rng.standard_normal((n, n))
        s = x + x.T
        mine = min_symmetric_eigenvalue(s)
        ref = float(np.linalg.eigvalsh(s).min())
        assert mine == pytest.approx(ref, abs=1e-10 * max(1.0, abs(ref)))


def test_min_symmetric_eigenvalue_handles_graded_scales():
    # kernel matrices of strongly graded grids mix entries over ~20 orders
    # of magnitude; the sweep must still terminate and agree with LAPACK
    g = build_from_ratios([0.15] * 25, 1.0)
    km = assemble_B(g)
    s = km.B + km.B.T - 2 * GAMMA * np.diag(1.0 / np.asarray(g.steps))
    mine = min_symmetric_eigenvalue(s)
    ref = float(np.linalg.eigvalsh(s).min())
    assert mine == pytest.approx(ref, rel=1e-8)


def test_spectral_norm_known_values():
    assert spectral_norm(np.diag([2.0, 3.0])) == pytest.approx(3.0)
    assert spectral_norm(np.zeros((3, 3))) == 0.0
    with pytest.raises(ValueError):
        spectral_norm(np.ones((2, 3)))


def test_spectral_norm_matches_svd():
    rng = make_rng(4)
    for _ in range(40):
        n = int(rng.integers(2, 30))
        m = rng.standard_normal((n, n))
        ref = float(np.linalg.svd(m, compute_uv=False)[0])
        assert spectral_norm(m) == pytest.approx(ref, rel=1e-8)
