import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predboot.empirical import ks_distance
from predboot.errors import DomainError
from predboot.limitdist import (ReferenceSpec, functional_draw, functional_draws, ito_left_sum,
                                ou_step_variance, reference_distribution, simulate_brownian,
                                simulate_ou, time_integral)
from predboot.rng import substream


def test_brownian_unit_variance_and_zero_path():
    p = simulate_brownian(1, substream(1), size=50000)
    assert 0.97 <= p.w[:, -1].var() <= 1.03
    z = simulate_brownian(8, increments=np.zeros(8))
    np.testing.assert_array_equal(z.w, 0.0)
    assert z.w.shape == (9,)
    with pytest.raises(DomainError):
        simulate_brownian(0)


def test_quadratic_variation_single_path():
    p = simulate_brownian(10000, substream(2))
    assert 0.96 <= (p.dw ** 2).sum() <= 1.04


@pytest.mark.parametrize("c", [-5.0, -1.0, -1e-10, 0.0, 1e-10, 0.5, 3.0])
@pytest.mark.parametrize("dt", [1e-3, 0.1])
def test_ou_step_variance(c, dt):
    exact = dt if c == 0 else np.expm1(2 * c * dt) / (2 * c)
    assert ou_step_variance(c, dt) == pytest.approx(exact, rel=1e-12)


def test_ou_step_variance_continuity():
    dt = 1e-3
    for c in (1e-7, 1e-9, -1e-9):
        assert ou_step_variance(c, dt) == pytest.approx(dt, rel=1e-6)


def test_ou_examples():
    p = simulate_brownian(500, substream(3))
    np.testing.assert_array_equal(simulate_ou(0.0, p), p.w)
    np.testing.assert_array_equal(simulate_ou(-2.0, simulate_brownian(20, increments=np.zeros(20))), 0.0)
    q = simulate_brownian(200, substream(4), size=50000)
    target = np.expm1(-2.0) / -2.0
    assert target == pytest.approx(0.43233, abs=1e-5)
    assert simulate_ou(-1.0, q)[:, -1].__pow__(2).mean() == pytest.approx(target, abs=0.01)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), N=st.integers(1, 500))
def test_ito_summation_by_parts(seed, N):
    p = simulate_brownian(N, substream(seed))
    lhs = ito_left_sum(p, p.w)
    rhs = 0.5 * (p.w[-1] ** 2 - (p.dw ** 2).sum())
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))
    assert ito_left_sum(p, np.ones(N + 1)) == pytest.approx(p.w[-1], abs=1e-12)
    assert ito_left_sum(p, np.zeros(N)) == 0.0


def test_grid_mismatch():
    p = simulate_brownian(10, substream(1))
    with pytest.raises(DomainError):
        ito_left_sum(p, np.zeros(5))
    with pytest.raises(DomainError):
        time_integral(p, np.zeros(3))


def test_reference_spec_validation():
    with pytest.raises(DomainError):
        ReferenceSpec(kind="x")
    with pytest.raises(DomainError):
        ReferenceSpec(N=8)
    with pytest.raises(DomainError):
        ReferenceSpec(M=0)
    with pytest.raises(DomainError):
        ReferenceSpec(kind="mixed_ivx", c_z=0.0)


def test_dfxi_sign_probability():
    d = functional_draws(ReferenceSpec("dfxi", N=1000), substream(5), 50000)
    assert np.mean(d < 0) == pytest.approx(0.6827, abs=0.01)


def test_v_over_u_cauchy_quartiles():
    d = functional_draws(ReferenceSpec("v_over_u"), substream(6), 50000)
    q = np.quantile(d, [0.25, 0.5, 0.75])
    np.testing.assert_allclose(q, [-1.0, 0.0, 1.0], atol=0.03)


def test_ouratio_zero_equals_dfratio():
    a = functional_draws(ReferenceSpec("ouratio", N=300, c=0.0), substream(7), 20)
    b = functional_draws(ReferenceSpec("dfratio", N=300), substream(7), 20)
    np.testing.assert_array_equal(a, b)


def test_reference_distribution_contracts():
    r1 = reference_distribution(ReferenceSpec("dfratio", N=100, M=1), substream(8))
    assert r1.size == 1
    a = reference_distribution(ReferenceSpec("dfratio", N=100, M=300), substream(9), chunk=64)
    b = reference_distribution(ReferenceSpec("dfratio", N=100, M=300), substream(9), chunk=64)
    np.testing.assert_array_equal(a.draws, b.draws)
    assert isinstance(functional_draw(ReferenceSpec("dfxi", N=50), substream(1)), float)


def test_mean_integrated_squared_brownian():
    vals = []
    g = substream(10)
    for _ in range(10):
        p = simulate_brownian(1000, g, size=5000)
        vals.append(time_integral(p, p.w ** 2))
    assert np.concatenate(vals).mean() == pytest.approx(0.5, abs=0.01)


def test_dfratio_two_ways():
    """Functional on the path versus n(rho_hat - 1) on a random walk with the same increments."""
    N, M = 2000, 20000
    g = substream(11)
    func, ar = [], []
    for _ in range(M // 2000):
        p = simulate_brownian(N, g, size=2000)
        func.append(ito_left_sum(p, p.w) / time_integral(p, p.w ** 2))
        x = np.sqrt(N) * p.w[:, 1:]
        xl = np.sqrt(N) * p.w[:, :-1]
        ar.append(N * ((xl * x).sum(-1) / (xl * xl).sum(-1) - 1.0))
    assert ks_distance(np.concatenate(func), np.concatenate(ar)) <= 0.02


def test_psigamma_weights_and_finite_gamma():
    for g in (0.5, 5.0, np.inf):
        d = functional_draws(ReferenceSpec("psigamma", N=400, gamma=g), substream(12), 200)
        assert np.isfinite(d).all()


def test_mixed_ivx_forms():
    spec = ReferenceSpec("mixed_ivx", N=200, c=-5.0)
    assert spec.analytic_cdf is not None
    un = ReferenceSpec("mixed_ivx", N=200, c=-5.0, studentized=False, omega_xx=2.0)
    d = functional_draws(un, substream(13), 500)
    assert np.isfinite(d).all() and un.analytic_cdf is None


def test_ks_distance_examples():
    from scipy import stats
    a = substream(14).standard_normal(100)
    assert ks_distance(a, a) == 0.0
    assert ks_distance([0.0], [1.0]) == 1.0
    assert ks_distance([0.0], stats.norm.cdf) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(a=st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=20),
       b=st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=20),
       c=st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=20))
def test_ks_metric_properties(a, b, c):
    ab = ks_distance(a, b)
    assert ab == pytest.approx(ks_distance(b, a))
    assert 0.0 <= ab <= 1.0
    assert ab <= ks_distance(a, c) + ks_distance(c, b) + 1e-12
    # brute force over the pooled support
    grid = np.array(sorted(set(a + b)))
    fa = (np.array(a)[None, :] <= grid[:, None]).mean(1)
    fb = (np.array(b)[None, :] <= grid[:, None]).mean(1)
    assert ab == pytest.approx(np.abs(fa - fb).max())
