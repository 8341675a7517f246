import warnings
from decimal import Decimal

import numpy as np
import pytest
from scipy.special import expit

from lobmix.benchmarks import (BirthDeathRates, ConvergenceWarning, EmpiricalForecast, FitError, GlmParams,
                               fit_birth_death, fit_glm, fit_glm_design, forecast_birth_death, forecast_glm,
                               load_benchmark, save_benchmark, simulate_moves, static_covariates,
                               window_covariates)
from lobmix.features import DatasetConfig, build_dataset
from lobmix.orderflow import (BookState, EventType, GeneratorConfig, OrderFlowEvent, OrderFlowGenerator, Side,
                              generate_stream, replay)

from .helpers import random_samples

D = Decimal


@pytest.fixture(scope="module")
def long_stream():
    return generate_stream(GeneratorConfig(seed=21), 3000.0)


def test_birth_death_recovers_generator_rates(long_stream):
    cfg = GeneratorConfig()
    r = fit_birth_death(long_stream, "0.01", cfg.n_levels)
    np.testing.assert_allclose(r.limit_rate[0], cfg.buy_limit_rates, rtol=0.1)
    np.testing.assert_allclose(r.limit_rate[1], cfg.sell_limit_rates, rtol=0.1)
    np.testing.assert_allclose(r.market_rate, [cfg.buy_market_rate, cfg.sell_market_rate], rtol=0.1)
    near = r.counts["exposure"] > 200
    np.testing.assert_allclose(r.cancel_rate[near], cfg.cancel_rate, rtol=0.15)
    assert r.observation_time == pytest.approx(3000.0, rel=1e-3)


def test_birth_death_errors_and_roundtrip(tmp_path, long_stream):
    with pytest.raises(FitError):
        fit_birth_death(long_stream[:1])
    r = fit_birth_death(long_stream[:2000])
    save_benchmark(tmp_path / "bd.json", r)
    back = load_benchmark(tmp_path / "bd.json")
    assert isinstance(back, BirthDeathRates)
    np.testing.assert_array_equal(back.limit_rate, r.limit_rate)
    np.testing.assert_array_equal(back.size_pool, r.size_pool)


def book_with_depth():
    b = BookState()
    k = 0
    for i in range(5):
        for side, px in ((Side.BUY, 9999 - i), (Side.SELL, 10001 + i)):
            for _ in range(2):
                k += 1
                b.apply(OrderFlowEvent(0, EventType.LIMIT_PLACE, side, D(px) / 100, D("0.02"), f"o{k}"))
    return b


def rates(limit=0.0, market=(0.0, 0.0), cancel=0.0, L=5):
    return BirthDeathRates(np.full((2, L), limit), np.asarray(market, float), np.full((2, L), cancel),
                           np.array([0.02]))


def test_simulation_trivial_cases():
    b = book_with_depth()
    assert np.all(simulate_moves(rates(), b, 5.0, 50, 1) == 0)
    assert np.all(simulate_moves(rates(1.0, (2.0, 2.0), 0.5), b, 0.0, 50, 1) == 0)
    up = simulate_moves(rates(market=(5.0, 0.0)), b, 2.0, 300, 3)
    assert np.all(up >= 0) and up.mean() > 0.5
    down = simulate_moves(rates(market=(0.0, 5.0)), b, 2.0, 300, 3)
    assert np.all(down <= 0)
    a = simulate_moves(rates(1.0, (1.5, 1.5), 0.4), b, 5.0, 200, 9)
    np.testing.assert_array_equal(a, simulate_moves(rates(1.0, (1.5, 1.5), 0.4), b, 5.0, 200, 9))
    assert not np.array_equal(a, simulate_moves(rates(1.0, (1.5, 1.5), 0.4), b, 5.0, 200, 10))


def test_simulation_matches_generator_continuations():
    """With no signal the generator is itself a birth-death process."""
    cfg = GeneratorConfig(seed=0)
    warm = generate_stream(cfg, 60.0)
    book = replay(warm)
    fitted = BirthDeathRates(np.array([cfg.buy_limit_rates, cfg.sell_limit_rates]),
                             np.array([cfg.buy_market_rate, cfg.sell_market_rate]),
                             np.full((2, cfg.n_levels), cfg.cancel_rate),
                             np.array([float(e.size) for e in warm]))
    tau = 3.0
    sim = simulate_moves(fitted, book, tau, 4000, 5)
    mid0 = (book.best_bid + book.best_ask) / 2
    direct = []
    for s in range(600):
        g = OrderFlowGenerator(cfg, book=book, seed=1000 + s)
        mid = mid0
        for _ in g.events(tau):
            if g.book.best_bid is not None and g.book.best_ask is not None:
                mid = (g.book.best_bid + g.book.best_ask) / 2
        direct.append(int(((mid - mid0) / D("0.01")).to_integral_value(rounding="ROUND_HALF_UP")))
    direct = np.array(direct)
    assert abs(np.mean(sim > 0) - np.mean(direct > 0)) < 0.07
    assert abs(np.mean(sim == 0) - np.mean(direct == 0)) < 0.07
    assert np.abs(sim).mean() == pytest.approx(np.abs(direct).mean(), rel=0.2)


def test_empirical_forecast():
    f = EmpiricalForecast.from_moves([[-2, -1, 0, 1, 1, 3, 3, 3]])
    np.testing.assert_allclose(f.pi, [[0.25, 0.625, 0.125]])
    np.testing.assert_allclose(f.expected_move(), [[1.5, 2.2]])
    assert f.quantile(2, 0.5) == 3 and f.quantile(2, 0.4) == 1 and f.quantile(1, 0.5) == 1
    g = EmpiricalForecast.from_moves([[0, 0], [2, 2]])
    np.testing.assert_allclose(g.expected_move(), [[0, 0], [0, 2]])
    with pytest.raises(ValueError):
        g[0].quantile(1, 0.5)
    h = EmpiricalForecast.from_dict(f.to_dict())
    np.testing.assert_array_equal(h.counts, f.counts)
    assert len(forecast_birth_death(rates(1.0, (1.0, 1.0), 0.5), book_with_depth(), 1.0, 20, 0)) == 1


def glm_data(n, seed, w_true, r_true):
    rng = np.random.default_rng(seed)
    S = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 3))])
    up = rng.random(n) < expit(S @ w_true)
    lam = np.exp(X @ r_true.T)
    mag = rng.poisson(np.where(up, lam[:, 1], lam[:, 0]))
    return np.where(up, mag, -mag), S, X


def test_glm_em_recovers_coefficients():
    w_true = np.array([0.3, -0.8, 0.5])
    r_true = np.array([[0.5, 0.3, -0.2, 0.0], [1.0, -0.4, 0.0, 0.25]])
    y, S, X = glm_data(20000, 0, w_true, r_true)
    w, r, trace, conv = fit_glm_design(y, S, X)
    assert conv
    assert np.all(np.diff(trace) >= -1e-9 * abs(trace[0]))
    np.testing.assert_allclose(w, w_true, atol=0.08)
    np.testing.assert_allclose(r, r_true, atol=0.06)
    pinned = np.array([0.0, 0.0, 0.0])
    w2, _, _, _ = fit_glm_design(y, S, X, pinned_weights=pinned)
    np.testing.assert_array_equal(w2, pinned)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        _, _, t1, c1 = fit_glm_design(y, S, X, max_iter=1)
    assert not c1 and len(t1) == 2
    with pytest.raises(FitError):
        fit_glm_design(np.array([], np.int64), S[:0], X[:0])


def test_glm_on_samples(tmp_path):
    tr = random_samples(500, 6, seed=2, normalized=False)
    p = fit_glm(tr)
    f = forecast_glm(p, tr)
    assert f.pi.shape == (500, 2)
    ll = f.log_likelihood(tr.target).sum()
    assert ll == pytest.approx(p.loglik[-1], rel=1e-9)
    save_benchmark(tmp_path / "g.json", p)
    q = load_benchmark(tmp_path / "g.json")
    assert isinstance(q, GlmParams)
    np.testing.assert_array_equal(forecast_glm(q, tr).pi, f.pi)
    assert static_covariates(tr).shape == (500, 3)
    wc = window_covariates(tr)
    assert wc.shape == (500, 6) and np.all((wc[:, :5] >= 0) & (wc[:, :5] <= 1))
    with pytest.raises(ValueError):
        window_covariates(random_samples(5, 6, normalized=True))


def test_glm_on_real_stream():
    events = generate_stream(GeneratorConfig(seed=4), 200.0)
    s = build_dataset(events, DatasetConfig(m=10, tau=1.0, stride=2))
    p = fit_glm(s)
    assert p.converged and np.isfinite(p.loglik[-1])


def test_glm_pinned_single_component_is_sample_mean():
    rng = np.random.default_rng(3)
    y = rng.poisson(3.0, 5000)
    ones = np.ones((len(y), 1))
    w, r, _, conv = fit_glm_design(y, ones, ones, pinned_weights=np.array([60.0]))
    assert conv and w[0] == 60.0
    assert np.exp(r[1, 0]) == pytest.approx(y.mean(), abs=1e-6)


def test_glm_forecast_link_arithmetic():
    s = random_samples(4, 6, seed=5, normalized=False)
    d_s, d_x = 4, 10
    zero = GlmParams(np.zeros(d_s), np.array([[0.3] + [0.0] * (d_x - 1), [-0.2] + [0.0] * (d_x - 1)]),
                     np.zeros(d_s - 1), np.ones(d_s - 1), np.zeros(d_x - 1), np.ones(d_x - 1))
    f = forecast_glm(zero, s)
    np.testing.assert_allclose(f.pi, 0.5)
    np.testing.assert_allclose(f.params["lam"], np.tile([np.exp(0.3), np.exp(-0.2)], (4, 1)))
    beta = 0.4
    shifted = GlmParams(zero.weight_coef, zero.rate_coef.copy(), zero.s_mean, zero.s_scale, zero.x_mean.copy(),
                        zero.x_scale)
    shifted.rate_coef[:, 3] = beta
    base = forecast_glm(shifted, s).params["lam"]
    shifted.x_mean[2] -= 1.0
    np.testing.assert_allclose(forecast_glm(shifted, s).params["lam"], base * np.exp(beta), rtol=1e-12)
    # hand computation for one row
    S = np.r_[1.0, static_covariates(s)[0]]
    X = np.r_[1.0, static_covariates(s)[0], window_covariates(s)[0]]
    wc = np.array([0.1, -0.3, 0.2, 0.5])
    rc = np.linspace(-0.2, 0.2, 2 * d_x).reshape(2, d_x)
    p = GlmParams(wc, rc, np.zeros(d_s - 1), np.ones(d_s - 1), np.zeros(d_x - 1), np.ones(d_x - 1))
    g = forecast_glm(p, s)
    assert g.pi[0, 1] == pytest.approx(expit(S @ wc), rel=1e-14)
    np.testing.assert_allclose(g.params["lam"][0], np.exp(rc @ X), rtol=1e-14)


def test_symmetric_birth_death_is_balanced():
    n = 4000
    moves = simulate_moves(rates(1.0, (1.5, 1.5), 0.4), book_with_depth(), 5.0, n, 17)
    f = EmpiricalForecast.from_moves(moves[None, :])
    p_up, p_down = f.pi[0, 1], f.pi[0, 0]
    sigma = np.sqrt((p_up + p_down - (p_up - p_down) ** 2) / n)
    assert abs(p_up - p_down) < 3 * sigma
    np.testing.assert_allclose(f.pi.sum(), 1.0, rtol=0, atol=0)
