import numpy as np
import pytest

from homogmc.field import (
    CosineBumpKernel,
    HolderBumpKernel,
    SquareKernel,
    correlation_model,
    empirical_correlation,
    make_field,
    sample_field,
    sample_field_dt,
    sample_field_dtt,
)


def brute_autocorr(kernel, lag, n=40001):
    """Independent oracle: trapezoid autocorrelation on a fine grid."""
    w = kernel.width
    u = np.linspace(-w, 2 * w, n)
    return float(np.trapezoid(kernel(u) * kernel(u + abs(lag)), u))


# --- kernels -----------------------------------------------------------------


def test_square_autocorr_is_triangle():
    k = SquareKernel(1.0)
    lags = np.array([-1.2, -0.5, 0.0, 0.3, 0.999, 1.0, 2.0])
    assert np.allclose(k.autocorr(lags), np.maximum(1.0 - np.abs(lags), 0.0))


@pytest.mark.parametrize(
    "kernel,tol",
    [(CosineBumpKernel(1.0), 5e-6), (HolderBumpKernel(1.0, theta=0.5), 5e-6),
     (SquareKernel(2.5), 5e-4)],  # trapezoid oracle is O(du) on the jump kernel
)
def test_autocorr_matches_brute_quadrature(kernel, tol):
    for lag in (0.0, 0.2, 0.7, kernel.width * 0.9):
        assert abs(float(kernel.autocorr(lag)) - brute_autocorr(kernel, lag)) < tol


def test_cosine_kernel_closed_moments():
    k = CosineBumpKernel(2.0)
    u = np.linspace(0, 2, 200001)
    assert abs(k.integral() - np.trapezoid(k(u), u)) < 1e-9
    assert abs(k.sq_integral() - np.trapezoid(k(u) ** 2, u)) < 1e-9


def test_cosine_kernel_derivatives_consistent():
    k = CosineBumpKernel(1.0)
    u = np.linspace(0.05, 0.95, 7)
    h = 1e-5
    fd1 = (k(u + h) - k(u - h)) / (2 * h)
    fd2 = (k(u + h) - 2 * k(u) + k(u - h)) / h**2
    assert np.allclose(fd1, k.deriv(u), atol=1e-8)
    assert np.allclose(fd2, k.deriv2(u), atol=1e-4)


# --- sampling ----------------------------------------------------------------


def test_zero_amplitude_law_gives_zero_field():
    spec = make_field("square", seed=1, amplitude_law="zero")
    t = np.linspace(0, 10, 23)
    assert np.all(sample_field(spec, t, t - 3.0) == 0.0)


def test_sampling_is_pure_and_deterministic():
    spec = make_field("c2t", seed=77)
    pts_t = np.array([0.0, 1.7, 123456.25])
    pts_x = np.array([-2.0, 0.3, -98765.5])
    v1 = sample_field(spec, pts_t, pts_x)
    v2 = sample_field(make_field("c2t", seed=77), pts_t, pts_x)
    assert np.array_equal(v1, v2)


def test_rescaled_evaluation_is_exact_coordinate_change():
    # evaluating at (t/eps^a, x/eps^b) is literally evaluation of the unscaled
    # field at transformed coordinates: identical floats give identical values
    spec = make_field("square", seed=5)
    eps, a, b = 0.2, 2.0, 1.0
    t = np.array([0.1, 0.37])
    x = np.array([0.9, -1.4])
    assert np.array_equal(
        sample_field(spec, t / eps**a, x / eps**b),
        sample_field(spec, np.array([0.1 / eps**a, 0.37 / eps**a]),
                     np.array([0.9 / eps**b, -1.4 / eps**b])),
    )


def test_field_bounded_by_sup_bound():
    for kind in ("square", "c2t", "holder"):
        spec = make_field(kind, seed=3, w_t=1.5, w_x=2.5)
        rng = np.random.default_rng(0)
        t = rng.uniform(0, 50, 4000)
        x = rng.uniform(-50, 50, 4000)
        assert np.max(np.abs(sample_field(spec, t, x))) <= spec.sup_bound + 1e-12


def test_constant_field_from_const_law_and_square_tiling():
    spec = make_field("square", seed=8, amplitude_law="const", amplitude=0.5)
    rng = np.random.default_rng(1)
    vals = sample_field(spec, rng.uniform(0, 20, 500), rng.uniform(-20, 20, 500))
    assert np.allclose(vals, 0.5)


def test_variance_at_point_matches_phi00():
    spec = make_field("square", seed=21)
    corr = correlation_model(spec)
    est, se = empirical_correlation(spec, [(0.0, 0.0)], 100_000)
    assert abs(est[0] - corr.phi00) <= max(3 * se[0], 1e-12)
    # uniform marks: variance of the marks is 1/3
    spec_u = make_field("square", seed=21, amplitude_law="uniform")
    corr_u = correlation_model(spec_u)
    est_u, se_u = empirical_correlation(spec_u, [(0.0, 0.0)], 100_000)
    assert abs(corr_u.phi00 - 1.0 / 3.0) < 1e-12
    assert abs(est_u[0] - corr_u.phi00) <= 3 * se_u[0]


def test_independence_beyond_dependence_range():
    spec = make_field("c2t", seed=33)
    rt, rx = spec.dependence_range
    est, se = empirical_correlation(spec, [(rt + 0.5, 0.0), (0.0, rx + 0.5), (rt, rx)], 100_000)
    assert np.all(np.abs(est) <= 4.0 / np.sqrt(100_000))
    assert np.all(np.abs(est) <= 4.0 * np.maximum(se, 1e-12))


# --- correlation model --------------------------------------------------------


def test_square_model_closed_forms(square_field, square_corr):
    tau = np.array([-0.6, 0.0, 0.25, 1.3])
    chi = np.array([0.4, -0.9, 0.0, 0.2])
    expect = np.maximum(1 - np.abs(tau), 0) * np.maximum(1 - np.abs(chi), 0)
    assert np.allclose(square_corr.phi(tau, chi), expect, atol=1e-12)
    r = np.array([-0.3, 0.0, 0.8, 1.5])
    assert np.allclose(square_corr.psi(r), np.maximum(1 - np.abs(r), 0), atol=1e-12)
    assert np.allclose(square_corr.r_of_x(r), np.maximum(1 - np.abs(r), 0), atol=1e-12)
    assert square_corr.r0 == pytest.approx(1.0, abs=1e-12)


def test_square_model_sigma_quadrature(square_corr):
    # one-sided integral of (1-|u|)+ over [0, inf) is 1/2
    assert square_corr.sigma_one_sided == pytest.approx(0.5, abs=1e-6)
    assert square_corr.sigma_two_sided == pytest.approx(1.0, abs=1e-6)


def test_psi_and_r_against_numeric_integration(smooth_corr):
    # independent oracle: integrate phi over the other variable on a fine grid
    y = np.linspace(-1.5, 1.5, 6001)
    for r in (0.0, 0.3, 0.8):
        oracle = np.trapezoid(smooth_corr.phi(r, y), y)
        assert smooth_corr.psi(r) == pytest.approx(oracle, abs=1e-7)
    u = np.linspace(-1.5, 1.5, 6001)
    for xx in (0.0, 0.5):
        oracle = np.trapezoid(smooth_corr.phi(u, xx), u)
        assert smooth_corr.r_of_x(xx) == pytest.approx(oracle, abs=1e-7)


def test_correlation_model_rejects_uncentered_law():
    with pytest.raises(ValueError):
        correlation_model(make_field("square", seed=1, amplitude_law="const"))


def test_empirical_correlation_examples(square_field, square_corr):
    zero = make_field("square", seed=4, amplitude_law="zero")
    est0, se0 = empirical_correlation(zero, [(0.0, 0.0)], 200)
    assert est0[0] == 0.0 and se0[0] == 0.0
    est, se = empirical_correlation(square_field, [(0.5, 0.0), (5.0, 0.0)], 100_000)
    assert abs(est[0] - 0.5) <= 3 * se[0]
    assert abs(est[1]) <= 3 * max(se[1], 1e-12)
    with pytest.raises(ValueError):
        empirical_correlation(square_field, [(0.0, 0.0)], 50)


def test_empirical_matches_model_at_mixed_lags(smooth_field, smooth_corr):
    lags = [(0.0, 0.0), (0.2, 0.1), (0.5, -0.3), (0.0, 0.6), (0.9, 0.0)]
    est, se = empirical_correlation(smooth_field, lags, 40_000)
    target = np.array([smooth_corr.phi(dt, dx) for dt, dx in lags])
    assert np.all(np.abs(est - target) <= 4 * np.maximum(se, 1e-12))


# --- time regularity ----------------------------------------------------------


def test_c2_field_finite_difference_rates(smooth_field):
    t = np.array([0.33, 1.18, 2.71])
    x = np.array([0.1, -0.7, 2.2])
    d1 = sample_field_dt(smooth_field, t, x)
    d2 = sample_field_dtt(smooth_field, t, x)
    errs1, errs2 = [], []
    for h in (0.02, 0.01):
        fd1 = (sample_field(smooth_field, t + h, x) - sample_field(smooth_field, t - h, x)) / (2 * h)
        fd2 = (sample_field(smooth_field, t + h, x) - 2 * sample_field(smooth_field, t, x)
               + sample_field(smooth_field, t - h, x)) / h**2
        errs1.append(np.max(np.abs(fd1 - d1)))
        errs2.append(np.max(np.abs(fd2 - d2)))
    # central differences converge at second order: halving h gains ~4x
    assert errs1[1] < errs1[0] / 3.0
    assert errs2[1] < errs2[0] / 2.5


def test_smoothness_class_labels():
    assert make_field("c2t", seed=0).smoothness_class == "C2_in_time"
    assert make_field("square", seed=0).smoothness_class == "C0"
    assert make_field("holder", seed=0, theta=0.5).smoothness_class == "Holder_theta(0.5)"
    assert make_field("square", seed=0).dependence_range == (2.0, 2.0)
