import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfksd.density import GaussianDensity
from gfksd.discrepancy import ParticleMeasure, gfksd_squared
from gfksd.errors import DimensionMismatchError, DivergenceError, PreconditionError
from gfksd.kernel import ImqKernel
from gfksd.sampling import make_rng
from gfksd.varinf import (
    AffineTransport,
    TemperingSchedule,
    clip_gradient,
    fit_transport,
    grad_estimate,
    temper_log_density,
    u_integrand,
    u_matrix,
    u_statistic,
)


def _g(mean, var):
    return GaussianDensity([mean], [[var]])


def test_affine_transport_basics():
    T = AffineTransport([np.log(2.0)], [1.0])
    assert T([3.0]) == pytest.approx([7.0])
    np.testing.assert_allclose(T.theta, [np.log(2.0), 1.0])
    assert AffineTransport.from_theta(T.theta).shift == pytest.approx([1.0])
    q = T.pushforward(_g(0.0, 1.0))
    assert q.mean == pytest.approx([1.0]) and q.covariance[0, 0] == pytest.approx(4.0)
    with pytest.raises(DimensionMismatchError):
        AffineTransport([0.0, 0.0], [0.0])
    with pytest.raises(PreconditionError):
        T.pushforward(object())


def test_u_integrand_examples():
    p = _g(0.0, 1.0)
    ker = ImqKernel()
    # p = q and x = y = 0: r = 1, k_q(0, 0) = 2 beta sigma^-3 = 1
    assert u_integrand(p, p, ker, [0.0], [0.0]) == pytest.approx(1.0)
    q = _g(0.0, 4.0)
    x, y = np.array([0.5]), np.array([-1.0])
    r = np.exp(q.log_density(np.vstack([x, y])) - p.log_density(np.vstack([x, y])))
    U = u_matrix(p, q, ker, np.vstack([x, y]))
    assert u_integrand(p, q, ker, x, y) == pytest.approx(U[0, 1], rel=1e-13)
    assert U[0, 1] == pytest.approx(U[1, 0], rel=1e-13)
    assert r.prod() > 0


def test_u_statistic_excludes_diagonal():
    rng = np.random.default_rng(0)
    p, q = _g(0.0, 1.0), _g(0.3, 2.0)
    pts = rng.normal(size=(8, 1))
    U = u_matrix(p, q, None, pts)
    off = [U[i, j] for i in range(8) for j in range(8) if i != j]
    assert u_statistic(p, q, None, pts) == pytest.approx(np.mean(off), rel=1e-13)
    # changing the diagonal leaves the U-statistic alone
    bumped = U + np.diag(np.full(8, 1e3))
    assert (bumped.sum() - np.trace(bumped)) / 56 == pytest.approx(np.mean(off), rel=1e-12)
    # the V-statistic is the GF-KSD of the uniform measure
    v = u_statistic(p, q, None, pts, include_diagonal=True)
    assert v == pytest.approx(gfksd_squared(p, q, None, ParticleMeasure.uniform(pts)).value_squared,
                              rel=1e-12)
    with pytest.raises(PreconditionError):
        u_statistic(p, q, None, pts[:1])


def test_u_statistic_is_unbiased_for_the_population_value():
    # average over many batches matches the Gauss-Hermite value of D^2
    p, q = _g(0.0, 1.0), _g(0.0, 1.44)
    nodes, w = np.polynomial.hermite_e.hermegauss(80)
    w = w / w.sum()
    exact = w @ u_matrix(p, q, None, 1.2 * nodes[:, None]) @ w
    rng = make_rng(1)
    est = [u_statistic(p, q, None, q.sample(rng, 16)) for _ in range(3000)]
    assert abs(np.mean(est) - exact) < 4 * np.std(est) / np.sqrt(len(est))


def test_grad_estimate_matches_finite_difference_of_u_statistic():
    p = _g(0.0, 1.0)
    R = _g(0.0, 1.0)
    T = AffineTransport([-0.2], [0.4])
    q = T.pushforward(R)
    batch = R.sample(make_rng(2), 20)
    g = grad_estimate(p, q, T, batch)
    h = 1e-6
    for k in range(2):
        e = np.eye(2)[k] * h
        up = u_statistic(p, q, None, AffineTransport.from_theta(T.theta + e)(batch))
        dn = u_statistic(p, q, None, AffineTransport.from_theta(T.theta - e)(batch))
        assert g[k] == pytest.approx((up - dn) / (2 * h), rel=1e-5)


def test_grad_estimate_is_second_order_in_step():
    p, R = _g(0.5, 0.7), _g(0.0, 1.0)
    T = AffineTransport([0.3], [-0.2])
    q = T.pushforward(R)
    batch = R.sample(make_rng(3), 16)
    ref = grad_estimate(p, q, T, batch, fd_step=1e-6)
    e1 = np.abs(grad_estimate(p, q, T, batch, fd_step=1e-2) - ref)
    e2 = np.abs(grad_estimate(p, q, T, batch, fd_step=5e-3) - ref)
    # halving the step should cut the error by about four
    assert np.all(e2 < 0.35 * e1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=6), st.floats(0.1, 50))
def test_clip_gradient(g, c):
    g = np.array(g)
    out = clip_gradient(g, c)
    assert np.linalg.norm(out) <= c * (1 + 1e-12) or np.allclose(out, g)
    if np.linalg.norm(g) > 0:
        cos = out @ g / (np.linalg.norm(out) * np.linalg.norm(g))
        assert cos == pytest.approx(1.0)


def test_tempering():
    p0, p = _g(0.0, 2.0), _g(2.0, 0.25)
    sched = TemperingSchedule([1.0, 0.5, 0.0], p0)
    x = np.array([[0.3], [1.7]])
    np.testing.assert_allclose(temper_log_density(sched, p, 0).log_density(x), p0.log_density(x))
    np.testing.assert_allclose(temper_log_density(sched, p, 2).log_density(x), p.log_density(x))
    mid = temper_log_density(sched, p, 1)
    np.testing.assert_allclose(mid.log_density(x), 0.5 * (p0.log_density(x) + p.log_density(x)))
    np.testing.assert_allclose(mid.score(x), 0.5 * (p0.score(x) + p.score(x)))
    with pytest.raises(PreconditionError):
        temper_log_density(sched, p, 3)
    with pytest.raises(PreconditionError):
        TemperingSchedule([1.2], p0)
    with pytest.raises(PreconditionError):
        TemperingSchedule([], p0)


def test_fit_transport_short_run_and_clipping(tmp_path):
    p, R = _g(1.0, 0.8), _g(0.0, 1.0)
    sched = TemperingSchedule(np.zeros(50), _g(0.0, 2.0))
    fit = fit_transport(p, sched, R, AffineTransport.identity(1), step=1e-2, clip_norm=1.0,
                        batch_n=16, seed=0)
    assert fit.trace.shape == (50, 4)
    assert np.all(fit.update_norms <= 1e-2 * 1.0 + 1e-15)
    # moves toward the target shift
    assert fit.transport.shift[0] > 0
    path = tmp_path / "trace.csv"
    fit.trace_to_csv(path)
    assert path.read_text().splitlines()[0] == "iteration,objective,log_scale1,shift1"
    again = fit_transport(p, sched, R, AffineTransport.identity(1), step=1e-2, clip_norm=1.0,
                          batch_n=16, seed=0)
    assert np.array_equal(again.trace, fit.trace)


@pytest.mark.filterwarnings("ignore:overflow encountered:RuntimeWarning",
                            "ignore:invalid value encountered:RuntimeWarning")
def test_fit_transport_divergence_reports_trace():
    p, R = _g(0.0, 1e-4), _g(0.0, 1.0)
    sched = TemperingSchedule(np.zeros(3), _g(0.0, 1.0))
    with pytest.raises(DivergenceError) as info:
        fit_transport(p, sched, R, AffineTransport([2.0], [5.0]), divergence_threshold=1.0)
    assert info.value.trace.shape[0] == 1
