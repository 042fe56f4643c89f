import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from gfksd.density import (
    CustomDensity,
    GaussianDensity,
    KdeDensity,
    LinearPushforward,
    MixtureDensity,
    StudentTDensity,
    TemperedDensity,
    finite_difference_score,
    fit_gmm,
    fit_kde,
    fit_laplace,
    log_density_ratio,
    score,
    silverman_bandwidth,
)
from gfksd.errors import (
    ConvergenceError,
    DefinitenessError,
    DegenerateError,
    DimensionMismatchError,
    PreconditionError,
    UnsupportedOperationError,
)
from gfksd.experiments.targets import (
    four_component_mixture,
    student_t_mixture,
    three_component_mixture,
)


def _models():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3))
    cov = A @ A.T + 0.5 * np.eye(3)
    g3 = GaussianDensity([0.1, -0.3, 0.7], cov)
    return {
        "gauss3": g3,
        "mixture": three_component_mixture(),
        "mixture4": four_component_mixture(),
        "student_mix": student_t_mixture(),
        "student2": StudentTDensity(5.0, [0.0, 1.0], [1.0, 0.5]),
        "kde": KdeDensity(rng.standard_normal((15, 2)), 0.6),
        "pushforward": LinearPushforward(g3, np.diag([2.0, 0.5, 1.5]) + 0.1),
        "tempered": TemperedDensity(GaussianDensity([0.0], [[4.0]]), three_component_mixture(), 0.3),
    }


@pytest.mark.parametrize("name", list(_models()))
def test_score_matches_finite_differences(name):
    model = _models()[name]
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = 0.8 * rng.standard_normal(model.dim)
        s = model.score(x)
        fd = finite_difference_score(model.log_density, x, step=1e-6)
        assert np.linalg.norm(s - fd) <= 1e-5 * max(1.0, np.linalg.norm(s))


def test_gaussian_log_density_matches_scipy():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((4, 4))
    cov = A @ A.T + np.eye(4)
    mean = rng.standard_normal(4)
    g = GaussianDensity(mean, cov)
    x = rng.standard_normal((20, 4))
    np.testing.assert_allclose(g.log_density(x), stats.multivariate_normal(mean, cov).logpdf(x), rtol=1e-12)


def test_gaussian_covariance_forms_and_mode():
    assert np.allclose(GaussianDensity([0.0, 0.0], 2.0).covariance, 2 * np.eye(2))
    assert np.allclose(GaussianDensity([0.0, 0.0], [1.0, 3.0]).covariance, np.diag([1.0, 3.0]))
    g = GaussianDensity([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
    pts = g.mean + 0.1 * np.random.default_rng(3).standard_normal((50, 2))
    assert np.all(g.log_density(pts) <= g.log_density(g.mean))
    with pytest.raises(DefinitenessError):
        GaussianDensity([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_student_t_matches_scipy():
    t = StudentTDensity(10.0, [0.3], [0.2])
    x = np.linspace(-2, 2, 41)[:, None]
    np.testing.assert_allclose(t.log_density(x), stats.t(10.0, 0.3, 0.2).logpdf(x[:, 0]), rtol=1e-12)
    np.testing.assert_allclose(t.cdf(x[:, 0]), stats.t(10.0, 0.3, 0.2).cdf(x[:, 0]), rtol=1e-10)


def test_mixture_matches_direct_sum():
    m = three_component_mixture()
    x = np.linspace(-2, 2, 31)
    direct = (0.375 * stats.norm(-0.4, 0.2).pdf(x) + 0.5625 * stats.norm(0.3, 0.2).pdf(x)
              + 0.0625 * stats.norm(0.06, 0.9).pdf(x))
    np.testing.assert_allclose(np.exp(m.log_density(x[:, None])), direct, rtol=1e-12)


def test_mixture_does_not_overflow_far_out():
    m = MixtureDensity([0.5, 0.5], [GaussianDensity([-1.0], [[1.0]]), GaussianDensity([1.0], [[1.0]])])
    val = m.log_density([38.0])
    assert np.isfinite(val) and val < -600
    assert np.isfinite(m.score([38.0])).all()


def test_mixture_weights_validated():
    g = GaussianDensity([0.0], [[1.0]])
    with pytest.raises(PreconditionError):
        MixtureDensity([0.5, 0.6], [g, g])


def test_log_density_ratio_examples():
    q = GaussianDensity([0.0], [[1.0]])
    p = GaussianDensity([0.0], [[4.0]])
    assert log_density_ratio(q, q, [0.7]) == pytest.approx(0.0, abs=1e-15)
    assert log_density_ratio(q, p, [0.0]) == pytest.approx(np.log(2.0), rel=1e-14)
    assert log_density_ratio(q, p, [2.0]) == pytest.approx(np.log(2.0) - 2.0 + 0.5, rel=1e-14)
    with pytest.raises(DimensionMismatchError):
        log_density_ratio(q, GaussianDensity([0.0, 0.0], 1.0), [0.0])


def test_score_examples():
    assert score(GaussianDensity([0.0], [[1.0]]), [1.5])[0] == pytest.approx(-1.5)
    assert score(GaussianDensity([2.0], [[4.0]]), [0.0])[0] == pytest.approx(0.5)
    m = MixtureDensity([0.5, 0.5], [GaussianDensity([-1.0], [[1.0]]), GaussianDensity([1.0], [[1.0]])])
    assert score(m, [0.0])[0] == pytest.approx(0.0, abs=1e-15)
    no_score = CustomDensity(lambda x: -0.5 * x @ x, 2)
    with pytest.raises(UnsupportedOperationError):
        no_score.score([0.0, 0.0])


def test_kde_integrates_to_one_and_matches_scipy():
    pts = np.array([[-1.0], [0.2], [1.5]])
    kde = KdeDensity(pts, 0.5)
    total, _ = integrate.quad(lambda x: np.exp(kde.log_density([x])), -np.inf, np.inf)
    assert abs(total - 1.0) < 1e-3
    sd = 0.5 / np.sqrt(2.0)
    x = np.linspace(-3, 3, 13)
    direct = np.mean([stats.norm(c, sd).pdf(x) for c in pts[:, 0]], axis=0)
    np.testing.assert_allclose(np.exp(kde.log_density(x[:, None])), direct, rtol=1e-12)


def test_fit_kde_silverman():
    kde = fit_kde(np.array([[-1.0], [1.0]]))
    assert kde.bandwidth[0] == pytest.approx((4.0 / 6.0) ** 0.2, rel=1e-12)
    assert kde.bandwidth[0] == pytest.approx(0.9221, abs=1e-4)
    assert kde.score([0.0])[0] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(PreconditionError):
        fit_kde(np.array([[0.3]]))
    with pytest.raises(DegenerateError):
        fit_kde(np.ones((5, 1)))


def test_silverman_per_dimension():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((40, 2)) * [1.0, 3.0]
    bw = silverman_bandwidth(x)
    expected = (4.0 / (4 * 40)) ** (1 / 6) * x.std(axis=0)
    np.testing.assert_allclose(bw, expected, rtol=1e-12)


def test_tempered_gaussian_precision():
    p = GaussianDensity([0.0], [[1.0]])
    p0 = GaussianDensity([0.0], [[4.0]])
    t = TemperedDensity(p0, p, 0.5)
    x = np.linspace(-3, 3, 7)[:, None]
    # log-linear interpolation: precision 0.5 * 1 + 0.5 * 0.25
    np.testing.assert_allclose(t.score(x)[:, 0], -0.625 * x[:, 0], rtol=1e-12)
    np.testing.assert_allclose(TemperedDensity(p0, p, 0.0).log_density(x), p.log_density(x), rtol=0, atol=0)
    np.testing.assert_allclose(TemperedDensity(p0, p, 1.0).log_density(x), p0.log_density(x), rtol=0, atol=0)


def test_pushforward_is_the_change_of_variables_density():
    g = GaussianDensity([1.0, -1.0], [[2.0, 0.4], [0.4, 1.0]])
    M = np.array([[2.0, 0.3], [0.0, 0.5]])
    z = LinearPushforward(g, M)
    # z = M^{-1} x with x ~ g is Gaussian with mean M^{-1} m and covariance M^{-1} C M^{-T}
    Mi = np.linalg.inv(M)
    oracle = stats.multivariate_normal(Mi @ g.mean, Mi @ g.covariance @ Mi.T)
    pts = np.random.default_rng(5).standard_normal((10, 2))
    np.testing.assert_allclose(z.log_density(pts), oracle.logpdf(pts), rtol=1e-12)


def test_laplace_of_gaussian_is_itself():
    q = fit_laplace(GaussianDensity([3.0], [[0.25]]), [0.0])
    assert q.mean[0] == pytest.approx(3.0, abs=1e-6)
    assert q.covariance[0, 0] == pytest.approx(0.25, rel=1e-4)


def test_laplace_standard_gaussian_d8():
    q = fit_laplace(GaussianDensity(np.zeros(8), np.eye(8)), np.ones(8))
    assert np.max(np.abs(q.mean)) < 1e-4
    assert np.max(np.abs(q.covariance - np.eye(8))) < 1e-3


def test_laplace_on_three_component_mixture():
    q = fit_laplace(three_component_mixture(), [0.0])
    assert q.mean[0] == pytest.approx(0.3, abs=5e-3)
    assert np.sqrt(q.covariance[0, 0]) == pytest.approx(0.2041, abs=5e-4)
    assert q.info["n_grad_evals"] == q.info["n_grad_evals_path"] + q.info["n_grad_evals_hessian"]


def test_laplace_lbfgs_agrees_with_gradient_descent():
    target = GaussianDensity([1.0, -2.0], [[1.0, 0.5], [0.5, 2.0]])
    a = fit_laplace(target, [0.0, 0.0])
    b = fit_laplace(target, [0.0, 0.0], method="lbfgs")
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-5)
    np.testing.assert_allclose(a.covariance, b.covariance, rtol=1e-4)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 3.0), st.floats(-1, 1), st.floats(0.2, 3.0))
def test_laplace_recovers_any_gaussian(m1, s1, rho, s2):
    c = 0.9 * rho * s1 * s2
    cov = np.array([[s1 * s1, c], [c, s2 * s2]])
    q = fit_laplace(GaussianDensity([m1, -m1], cov), [0.0, 0.0])
    assert np.max(np.abs(q.mean - [m1, -m1])) < 1e-6 * max(1.0, np.max(np.sqrt(np.diag(cov))))
    assert np.linalg.norm(q.covariance - cov) <= 1e-4 * np.linalg.norm(cov)


def test_laplace_errors():
    # the origin is a stationary point of log p, but a local minimum
    dip = CustomDensity(lambda x: float(x @ x) - 0.1 * float(x @ x) ** 2, 1)
    with pytest.raises(DefinitenessError):
        fit_laplace(dip, [0.0])
    tilted = CustomDensity(lambda x: float(x[0]), 1)
    with pytest.raises(ConvergenceError) as err:
        fit_laplace(tilted, [0.0], max_iters=20)
    assert err.value.best is not None


def test_fit_gmm_selects_one_component_for_gaussian_data():
    x = np.random.default_rng(6).standard_normal((500, 1))
    g = fit_gmm(x, 3, rng=0)
    assert g.info["n_components"] == 1
    assert abs(g.components[0].mean[0]) < 0.1


def test_fit_gmm_two_components_on_mixture_target():
    from gfksd.sampling import make_rng

    x = three_component_mixture().sample(make_rng(1), 100)
    g = fit_gmm(x, 5, rng=make_rng(2))
    assert g.info["n_components"] == 2


def test_fit_gmm_loglik_non_decreasing_and_preconditions():
    rng = np.random.default_rng(7)
    x = np.concatenate([rng.normal(-2, 0.5, (100, 2)), rng.normal(2, 0.7, (100, 2))])
    g = fit_gmm(x, 3, rng=1)
    tr = np.asarray(g.info["loglik_trace"])
    assert np.all(np.diff(tr) >= -1e-9 * np.abs(tr[:-1]))
    assert g.info["n_components"] == 2
    with pytest.raises(PreconditionError):
        fit_gmm(np.empty((0, 1)), 2)
    with pytest.raises(DegenerateError):
        fit_gmm(np.zeros((10, 1)), 1)


def test_qmc_sampling_statistics():
    from gfksd.sampling import make_rng

    m = three_component_mixture()
    x = m.sample(make_rng(0), 20000)[:, 0]
    mean = 0.375 * -0.4 + 0.5625 * 0.3 + 0.0625 * 0.06
    assert x.mean() == pytest.approx(mean, abs=0.01)
