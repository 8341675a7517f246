import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lobmix.mixtures import (DomainError, Family, MixtureForecast, component_pmf, component_quantile,
                             expected_move, head_forecast, head_shapes, inverse_softplus, loss_gradient,
                             negbin_logpmf, poisson_logpmf, sample_move, softplus, ztp_logpmf)

pos = st.floats(0.05, 30.0)


def forecast(family, pi, **params):
    return MixtureForecast(family, np.asarray(pi, float), {k: np.asarray(v, float) for k, v in params.items()})


def test_pmfs_match_scipy():
    n = np.arange(0, 60)
    np.testing.assert_allclose(np.exp(poisson_logpmf(n, 3.7)), stats.poisson.pmf(n, 3.7), rtol=1e-12)
    mu, alpha = 4.2, 0.7
    r = 1 / alpha
    np.testing.assert_allclose(np.exp(negbin_logpmf(n, mu, alpha)), stats.nbinom.pmf(n, r, r / (r + mu)),
                               rtol=1e-10)
    zt = stats.poisson.pmf(n, 2.5) / (1 - math.exp(-2.5))
    zt[0] = 0.0
    np.testing.assert_allclose(np.exp(ztp_logpmf(n, 2.5)), zt, rtol=1e-12)


def test_frozen_values():
    assert math.exp(poisson_logpmf(2, 1.5)) == pytest.approx(0.25102143016698353, rel=1e-14)
    assert math.exp(ztp_logpmf(1, 0.5)) == pytest.approx(0.7707470412683746, rel=1e-14)
    assert math.exp(negbin_logpmf(3, 2.0, 0.5)) == pytest.approx(0.125, rel=1e-12)


def test_ztp_zero_and_domain():
    assert ztp_logpmf(0, 1.3) == -np.inf
    with pytest.raises(DomainError):
        component_pmf("ztp", 0, {"lam": 1.0})
    with pytest.raises(DomainError):
        component_pmf("poisson", -1, {"lam": 1.0})


def test_softplus_inverse():
    x = np.array([-30.0, -2.0, 0.0, 1.5, 40.0])
    np.testing.assert_allclose(inverse_softplus(softplus(x))[1:], x[1:], rtol=1e-10)
    assert softplus(800.0) == 800.0


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(list(Family)), st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3), pos, pos, pos,
       pos)
def test_likelihood_normalizes(family, w, a, b, c, d):
    pi = np.asarray(w[:family.n_components])
    pi = pi / pi.sum()
    params = {"lam": [a, b]} if family is not Family.NEGBIN else {"mu": [a, b], "alpha": [c / 10, d / 10]}
    f = forecast(family, pi, **params)
    y = np.arange(-3000, 3001)
    total = np.exp(f.log_likelihood(y)).sum()
    assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(list(Family)), pos, pos, st.floats(0.01, 0.99))
def test_quantile_is_smallest_with_cdf_above(family, p1, p2, rho):
    params = {"lam": p1} if family is not Family.NEGBIN else {"mu": p1, "alpha": p2 / 10}
    q = component_quantile(family, params, rho)
    start = 1 if family is Family.ZTP else 0
    cdf = np.cumsum(np.exp([float(family_logpmf(family, k, params)) for k in range(start, q + 1)]))
    assert cdf[-1] >= rho
    assert q == start or cdf[-2] < rho


def family_logpmf(family, k, params):
    if family is Family.POISSON:
        return poisson_logpmf(k, params["lam"])
    if family is Family.ZTP:
        return ztp_logpmf(k, params["lam"])
    return negbin_logpmf(k, params["mu"], params["alpha"])


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(list(Family)), pos, st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_quantile_monotone_in_rho(family, lam, rho, step):
    params = {"lam": lam} if family is not Family.NEGBIN else {"mu": lam, "alpha": 0.3}
    assert component_quantile(family, params, rho) <= component_quantile(family, params, rho + step)


def test_quantile_frozen():
    assert component_quantile("poisson", {"lam": 3.0}, 0.5) == 3
    assert component_quantile("poisson", {"lam": 3.0}, 0.9) == 5
    assert component_quantile("ztp", {"lam": 0.2}, 0.5) == 1
    assert component_quantile("negbin", {"mu": 2.0, "alpha": 0.5}, 0.9) == 5
    with pytest.raises(DomainError):
        component_quantile("poisson", {"lam": 1.0}, 1.0)
    with pytest.raises(DomainError):
        component_quantile("poisson", {"lam": 0.0}, 0.5)


def test_negbin_poisson_limit():
    n = np.arange(0, 40)
    for lam in (0.3, 2.0, 9.0):
        diff = np.abs(np.exp(negbin_logpmf(n, lam, 1e-9)) - np.exp(poisson_logpmf(n, lam)))
        assert diff.max() < 1e-6


def test_expected_move_and_sampling():
    f = forecast("ztp", [0.3, 0.5, 0.2], lam=[0.5, 2.0])
    em = expected_move(f)
    np.testing.assert_allclose(em, [0.5 / (1 - math.exp(-0.5)), 2.0 / (1 - math.exp(-2.0))])
    rng = np.random.default_rng(0)
    draws = sample_move(f, rng, 200_000)
    assert np.mean(draws < 0) == pytest.approx(0.3, abs=0.005)
    assert np.mean(draws == 0) == pytest.approx(0.2, abs=0.005)
    assert np.abs(draws[draws > 0]).mean() == pytest.approx(em[1], rel=0.01)
    nb = forecast("negbin", [0.5, 0.5], mu=[3.0, 3.0], alpha=[0.5, 0.5])
    d = np.abs(sample_move(nb, rng, 200_000))
    assert d.var() == pytest.approx(3.0 + 0.5 * 9.0, rel=0.03)


def test_forecast_validation_and_roundtrip():
    with pytest.raises(ValueError):
        forecast("ztp", [0.5, 0.5], lam=[1, 1])
    with pytest.raises(ValueError):
        forecast("poisson", [0.5, 0.5], mu=[1, 1])
    f = forecast("negbin", [[0.2, 0.8]], mu=[[1.0, 2.0]], alpha=[[0.1, 0.2]])
    g = MixtureForecast.from_dict(f.to_dict())
    np.testing.assert_array_equal(g.pi, f.pi)
    assert g.family is Family.NEGBIN
    bad = forecast("poisson", [0.7, 0.7], lam=[1, 1])
    with pytest.raises(ValueError):
        bad.validate()


@pytest.mark.parametrize("family", list(Family))
def test_head_gradient_finite_difference(family):
    rng = np.random.default_rng(1)
    width, B = 5, 12
    w = {k: rng.normal(0, 0.5, s) for k, s in head_shapes(family, width).items()}
    z = rng.normal(size=(B, width))
    y = rng.integers(-4, 5, size=B)
    nll, dz, grads = loss_gradient(y, z, w, family)
    h = 1e-6

    def total(ww, zz):
        return loss_gradient(y, zz, ww, family)[0].sum()

    for k in w:
        it = np.nditer(w[k], flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            wp = {kk: v.copy() for kk, v in w.items()}
            wm = {kk: v.copy() for kk, v in w.items()}
            wp[k][i] += h
            wm[k][i] -= h
            assert (total(wp, z) - total(wm, z)) / (2 * h) == pytest.approx(grads[k][i], rel=1e-5, abs=1e-7)
    for i in range(B):
        for j in range(width):
            zp, zm = z.copy(), z.copy()
            zp[i, j] += h
            zm[i, j] -= h
            assert (total(w, zp) - total(w, zm)) / (2 * h) == pytest.approx(dz[i, j], rel=1e-5, abs=1e-7)


def test_head_forecast_shapes():
    rng = np.random.default_rng(0)
    w = {k: rng.normal(size=s) for k, s in head_shapes("ztp", 4).items()}
    f = head_forecast(rng.normal(size=(7, 4)), w, "ztp")
    assert f.pi.shape == (7, 3) and f.params["lam"].shape == (7, 2)
    np.testing.assert_allclose(f.pi.sum(1), 1.0)
    f.validate()
