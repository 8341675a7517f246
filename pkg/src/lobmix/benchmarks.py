"""Reference forecasters.

``birth-death``: a zero-intelligence order book with constant exponential
rates per level (measured in ticks from the opposite best quote), fitted by
maximum likelihood and simulated forward from the live book to get an
empirical distribution of the tick move.

``glm``: a two-component Poisson mixture with one component per direction;
mixture weights are a softmax over static covariates and rates are
log-linear in static covariates plus window summaries.  Fitted by EM.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

import numba
import numpy as np
from scipy.special import expit, gammaln

from .features import SampleSet, iter_books_at
from .mixtures import DOWN, UP, ZERO, Family, MixtureForecast
from .orderflow import BookState, EventType, OrderFlowEvent, Side

logger = logging.getLogger(__name__)


class FitError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# birth-death model


@dataclass
class BirthDeathRates:
    """Rates in events per second; arrays indexed [side (0 buy, 1 sell), level]."""

    limit_rate: np.ndarray
    market_rate: np.ndarray
    cancel_rate: np.ndarray
    size_pool: np.ndarray
    tick_size: str = "0.01"
    observation_time: float = 0.0
    counts: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return self.limit_rate.shape[1]

    def to_dict(self) -> dict:
        return {"kind": "birth_death", "limit_rate": self.limit_rate.tolist(),
                "market_rate": self.market_rate.tolist(), "cancel_rate": self.cancel_rate.tolist(),
                "size_pool": self.size_pool.tolist(), "tick_size": self.tick_size,
                "observation_time": self.observation_time,
                "counts": {k: np.asarray(v).tolist() for k, v in self.counts.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "BirthDeathRates":
        return cls(np.asarray(d["limit_rate"], float), np.asarray(d["market_rate"], float),
                   np.asarray(d["cancel_rate"], float), np.asarray(d["size_pool"], float),
                   d.get("tick_size", "0.01"), d.get("observation_time", 0.0),
                   {k: np.asarray(v) for k, v in d.get("counts", {}).items()})


def _side_index(side: Side) -> int:
    return 0 if side is Side.BUY else 1


def fit_birth_death(events: Sequence[OrderFlowEvent], tick_size: str | Decimal = "0.01",
                    n_levels: int = 5) -> BirthDeathRates:
    """Count-over-time MLEs from a replay of ``events``.

    Limit arrivals at ``d`` ticks from the opposite best fall in level
    ``d - 1``; deeper placements are not modelled.  Cancels are divided by
    the time-integrated number of resting orders at the same relative level,
    with everything at or beyond the last level pooled into it.
    """
    tick = Decimal(str(tick_size))
    if len(events) < 2 or events[-1].timestamp <= events[0].timestamp:
        raise FitError("stream spans no observation time")
    L = n_levels
    limit_n = np.zeros((2, L))
    market_n = np.zeros(2)
    cancel_n = np.zeros((2, L))
    exposure = np.zeros((2, L))
    sizes: list[float] = []
    book = BookState(tick)
    ref = [None, None]  # last known best bid / ask in ticks
    t_prev = events[0].timestamp

    def level_counts(side_i: int) -> np.ndarray:
        out = np.zeros(L)
        opp = ref[1 - side_i]
        if opp is None:
            return out
        levels = book.bids if side_i == 0 else book.asks
        for px, lvl in levels.items():
            d = opp - int(px / tick) if side_i == 0 else int(px / tick) - opp
            out[min(max(d - 1, 0), L - 1)] += len(lvl.orders)
        return out

    counts = [np.zeros(L), np.zeros(L)]
    for ev in events:
        dt = (ev.timestamp - t_prev) / 1e6
        if dt > 0:
            exposure[0] += counts[0] * dt
            exposure[1] += counts[1] * dt
        t_prev = ev.timestamp
        s = _side_index(ev.side)
        if ev.event_type is EventType.CANCEL:
            entry = book.orders.get(ev.order_id)
            if entry is not None and ref[1 - s] is not None:
                p = int(entry[1] / tick)
                d = ref[1] - p if s == 0 else p - ref[0]
                cancel_n[s, min(max(d - 1, 0), L - 1)] += 1
        elif ev.event_type is EventType.LIMIT_PLACE:
            sizes.append(float(ev.size))
            opp = ref[1 - s]
            if opp is not None:
                p = int(ev.price / tick)
                d = opp - p if s == 0 else p - opp
                if d <= 0:
                    market_n[s] += 1
                elif d <= L:
                    limit_n[s, d - 1] += 1
        else:
            sizes.append(float(ev.size))
            market_n[s] += 1
        book.apply(ev)
        if book.best_bid is not None:
            ref[0] = int(book.best_bid / tick)
        if book.best_ask is not None:
            ref[1] = int(book.best_ask / tick)
        counts = [level_counts(0), level_counts(1)]
    T = (events[-1].timestamp - events[0].timestamp) / 1e6
    with np.errstate(invalid="ignore", divide="ignore"):
        cancel = np.where(exposure > 0, cancel_n / exposure, 0.0)
    if not sizes:
        raise FitError("no order sizes observed")
    return BirthDeathRates(limit_n / T, market_n / T, cancel, np.asarray(sizes), str(tick), T,
                           {"limit": limit_n, "market": market_n, "cancel": cancel_n,
                            "exposure": exposure})


@numba.njit(cache=True)
def _bd_paths(bid_sz, bid_n, ask_sz, ask_n, base, ref_bid, ref_ask, ref0, last_trade,
              use_mid, limit_rate, market_rate, cancel_rate, pool, tau, n_paths, seed):
    G, C = bid_sz.shape
    L = limit_rate.shape[1]
    out = np.zeros(n_paths, np.int64)
    bs = np.empty_like(bid_sz)
    asz = np.empty_like(ask_sz)
    bn = np.empty_like(bid_n)
    an = np.empty_like(ask_n)
    for path in range(n_paths):
        np.random.seed((seed * 1000003 + path * 7919 + 17) % 4294967296)
        bs[:, :] = bid_sz
        asz[:, :] = ask_sz
        bn[:] = bid_n
        an[:] = ask_n
        rb = ref_bid
        ra = ref_ask
        ref = ref0
        lt = last_trade
        t = 0.0
        while True:
            bb = -1
            for g in range(G - 1, -1, -1):
                if bn[g] > 0:
                    bb = g
                    break
            ba = G
            for g in range(G):
                if an[g] > 0:
                    ba = g
                    break
            if bb >= 0:
                rb = base + bb
            if ba < G:
                ra = base + ba
            if use_mid:
                if bb >= 0 and ba < G:
                    ref = rb + ra
            elif lt >= 0:
                ref = 2 * lt
            # total rate
            total = 0.0
            for i in range(L):
                total += limit_rate[0, i] + limit_rate[1, i]
            mb = market_rate[0] if ba < G else 0.0
            ms = market_rate[1] if bb >= 0 else 0.0
            total += mb + ms
            canc = 0.0
            for g in range(G):
                if bn[g] > 0:
                    d = ra - (base + g)
                    lv = min(max(d - 1, 0), L - 1)
                    canc += cancel_rate[0, lv] * bn[g]
                if an[g] > 0:
                    d = (base + g) - rb
                    lv = min(max(d - 1, 0), L - 1)
                    canc += cancel_rate[1, lv] * an[g]
            total += canc
            if total <= 0.0:
                break
            t += np.random.exponential(1.0 / total)
            if t > tau:
                break
            u = np.random.random() * total
            size = pool[np.random.randint(0, pool.shape[0])]
            done = False
            for s in range(2):
                for i in range(L):
                    r = limit_rate[s, i]
                    if u < r and not done:
                        if s == 0:
                            g = ra - (i + 1) - base
                            if 0 <= g < G and bn[g] < C:
                                bs[g, bn[g]] = size
                                bn[g] += 1
                        else:
                            g = rb + (i + 1) - base
                            if 0 <= g < G and an[g] < C:
                                asz[g, an[g]] = size
                                an[g] += 1
                        done = True
                    if not done:
                        u -= r
            if done:
                continue
            if u < mb:
                rem = size
                while rem > 0 and an[ba] > 0:
                    k = an[ba] - 1
                    take = min(rem, asz[ba, k])
                    rem -= take
                    asz[ba, k] -= take
                    if asz[ba, k] <= 1e-12:
                        an[ba] -= 1
                lt = base + ba
                continue
            u -= mb
            if u < ms:
                rem = size
                while rem > 0 and bn[bb] > 0:
                    k = bn[bb] - 1
                    take = min(rem, bs[bb, k])
                    rem -= take
                    bs[bb, k] -= take
                    if bs[bb, k] <= 1e-12:
                        bn[bb] -= 1
                lt = base + bb
                continue
            u -= ms
            # cancel: locate slot, then a uniform order in it
            for g in range(G):
                if bn[g] > 0:
                    d = ra - (base + g)
                    r = cancel_rate[0, min(max(d - 1, 0), L - 1)] * bn[g]
                    if u < r:
                        k = min(int(u / r * bn[g]), bn[g] - 1)
                        bs[g, k] = bs[g, bn[g] - 1]
                        bn[g] -= 1
                        done = True
                        break
                    u -= r
                if an[g] > 0:
                    d = (base + g) - rb
                    r = cancel_rate[1, min(max(d - 1, 0), L - 1)] * an[g]
                    if u < r:
                        k = min(int(u / r * an[g]), an[g] - 1)
                        asz[g, k] = asz[g, an[g] - 1]
                        an[g] -= 1
                        done = True
                        break
                    u -= r
        # final reference after the horizon
        if use_mid:
            bb = -1
            for g in range(G - 1, -1, -1):
                if bn[g] > 0:
                    bb = g
                    break
            ba = G
            for g in range(G):
                if an[g] > 0:
                    ba = g
                    break
            if bb >= 0 and ba < G:
                ref = 2 * base + bb + ba
        elif lt >= 0:
            ref = 2 * lt
        h = ref - ref0
        out[path] = (1 if h > 0 else -1 if h < 0 else 0) * ((abs(h) + 1) // 2)
    return out


@dataclass(frozen=True)
class EmpiricalForecast:
    """Direction frequencies and per-direction magnitude counts from simulated paths.

    ``pi`` columns are (down, up, zero); ``counts[i, k, m]`` counts paths of
    sample i moving ``m`` ticks in direction k (0 down, 1 up).
    """

    pi: np.ndarray
    counts: np.ndarray

    family = "empirical"

    def __len__(self) -> int:
        return self.pi.shape[0]

    def __getitem__(self, idx) -> "EmpiricalForecast":
        pi, c = self.pi[idx], self.counts[idx]
        if pi.ndim == 1:
            pi, c = pi[None], c[None]
        return EmpiricalForecast(pi, c)

    @classmethod
    def from_moves(cls, moves) -> "EmpiricalForecast":
        moves = np.atleast_2d(np.asarray(moves, np.int64))
        n = moves.shape[1]
        width = int(np.abs(moves).max(initial=0)) + 1
        counts = np.zeros((moves.shape[0], 2, width), np.int64)
        pi = np.empty((moves.shape[0], 3))
        for i, row in enumerate(moves):
            counts[i, 0] = np.bincount(-row[row < 0], minlength=width)
            counts[i, 1] = np.bincount(row[row > 0], minlength=width)
            down, up = int((row < 0).sum()), int((row > 0).sum())
            pi[i] = (down / n, up / n, (n - down - up) / n)
        return cls(pi, counts)

    def quantile(self, k: int, rho: float) -> int:
        """Smallest magnitude whose empirical CDF in direction k reaches rho."""
        if len(self) != 1:
            raise ValueError("quantile needs a single forecast")
        if not 0.0 < rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        c = self.counts[0, k - 1]
        total = c.sum()
        if total == 0:
            raise ValueError(f"no simulated paths moved in direction {k}")
        return int(np.argmax(np.cumsum(c) >= rho * total))

    def expected_move(self) -> np.ndarray:
        """Mean magnitude per direction, shape (N, 2); 0 where no path moved that way."""
        m = np.arange(self.counts.shape[-1])
        tot = self.counts.sum(-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = (self.counts * m).sum(-1) / tot
        return np.where(tot > 0, mean, 0.0)

    def to_dict(self) -> dict:
        return {"family": "empirical", "pi": self.pi.tolist(), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalForecast":
        return cls(np.asarray(d["pi"], float), np.asarray(d["counts"], np.int64))


def _book_arrays(book: BookState, tick: Decimal, center: int, half_width: int, capacity: int):
    G = 2 * half_width + 1
    base = center - half_width
    out = []
    for levels in (book.bids, book.asks):
        sz = np.zeros((G, capacity))
        n = np.zeros(G, np.int64)
        for px, lvl in levels.items():
            g = int(px / tick) - base
            if 0 <= g < G:
                vals = [float(v) for v in lvl.orders.values()][:capacity]
                sz[g, :len(vals)] = vals
                n[g] = len(vals)
        out += [sz, n]
    return out, base


def simulate_moves(rates: BirthDeathRates, book: BookState, tau: float, n_paths: int = 2000,
                   seed: int = 0, price_reference: str = "mid", ref_half: int | None = None,
                   ref_bid: int | None = None, ref_ask: int | None = None,
                   half_width: int = 20, capacity: int = 96) -> np.ndarray:
    """Tick moves of the reference price over ``n_paths`` simulated continuations.

    ``ref_half`` is the current reference price in half ticks; it defaults
    to the book's mid (or last trade).  ``ref_bid``/``ref_ask`` stand in for
    an empty side when placing limit orders.  Only prices within
    ``half_width`` ticks of the current mid are simulated.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    tick = Decimal(rates.tick_size)
    bb = int(book.best_bid / tick) if book.best_bid is not None else ref_bid
    ba = int(book.best_ask / tick) if book.best_ask is not None else ref_ask
    if bb is None and ba is None:
        raise ValueError("empty book and no reference quotes")
    bb = bb if bb is not None else ba - 1
    ba = ba if ba is not None else bb + 1
    lt = int(book.last_trade_price / tick) if book.last_trade_price is not None else -1
    use_mid = price_reference == "mid"
    if ref_half is None:
        ref_half = bb + ba if use_mid or lt < 0 else 2 * lt
    (bsz, bn, asz, an), base = _book_arrays(book, tick, (bb + ba) // 2, half_width, capacity)
    return _bd_paths(bsz, bn, asz, an, base, bb, ba, int(ref_half), lt, use_mid,
                     np.ascontiguousarray(rates.limit_rate, float),
                     np.ascontiguousarray(rates.market_rate, float),
                     np.ascontiguousarray(rates.cancel_rate, float),
                     np.ascontiguousarray(rates.size_pool, float), float(tau), int(n_paths), int(seed))


def forecast_birth_death(rates: BirthDeathRates, book: BookState, tau: float, n_paths: int = 2000,
                         seed: int = 0, **kw) -> EmpiricalForecast:
    """Empirical move distribution from :func:`simulate_moves`."""
    return EmpiricalForecast.from_moves(simulate_moves(rates, book, tau, n_paths, seed, **kw))


def forecast_birth_death_dataset(rates: BirthDeathRates, streams: dict, samples: SampleSet, tau: float,
                                 n_paths: int = 2000, seed: int = 0,
                                 price_reference: str = "mid") -> EmpiricalForecast:
    """Birth-death forecasts aligned with each sample's anchor event.

    ``streams`` maps pair code to that pair's event list (the one the
    samples were built from).  Sample ``r`` uses seed ``(seed, r)``.
    """
    tick = Decimal(rates.tick_size)
    moves = np.zeros((len(samples), n_paths), np.int64)
    for pair, events in streams.items():
        rows = np.flatnonzero(np.asarray(samples.pair) == int(pair))
        by_anchor: dict[int, list[int]] = {}
        for r in rows:
            by_anchor.setdefault(int(samples.anchor_index[r]), []).append(int(r))
        ref_b = ref_a = None
        for idx, book in iter_books_at(events, by_anchor, tick):
            if book.best_bid is not None:
                ref_b = int(book.best_bid / tick)
            if book.best_ask is not None:
                ref_a = int(book.best_ask / tick)
            for r in by_anchor[idx]:
                ref_half = int(round(float(samples.price[r]) * 2 / float(tick)))
                moves[r] = simulate_moves(rates, book, tau, n_paths, (seed * 1_000_033 + r) % (2 ** 31),
                                          price_reference, ref_half, ref_b, ref_a)
    return EmpiricalForecast.from_moves(moves)


# --------------------------------------------------------------------------
# Poisson-mixture GLM

STATIC_FEATURES = ("hour_sin", "hour_cos", "pair_b")
WINDOW_FEATURES = ("frac_limit_buy", "frac_limit_sell", "frac_market_buy", "frac_market_sell",
                   "frac_cancel_buy", "log_mean_gap_ms")


def static_covariates(samples: SampleSet) -> np.ndarray:
    h = np.asarray(samples.hour, float)
    return np.stack([np.sin(2 * np.pi * h / 24), np.cos(2 * np.pi * h / 24),
                     (np.asarray(samples.pair) == 2).astype(float)], axis=-1)


def window_covariates(samples: SampleSet) -> np.ndarray:
    """Per-window event-mix fractions (one cell dropped) and log mean gap."""
    if samples.normalized:
        raise ValueError("window covariates need raw (unnormalized) samples")
    et = samples.temporal[:, :, 2]
    sd = samples.temporal[:, :, 3]
    cols = []
    for t, s in ((1, 1), (1, 2), (2, 1), (2, 2), (3, 1)):
        cols.append(((et == t) & (sd == s)).mean(axis=1))
    cols.append(np.log1p(samples.temporal[:, 1:, 0].mean(axis=1)) if samples.m > 1
                else np.zeros(len(samples)))
    return np.stack(cols, axis=-1)


@dataclass
class GlmParams:
    """Weights: softmax over ``[0, S @ weight_coef]``; rates ``exp(X @ rate_coef[k])``.

    ``S`` and ``X`` carry a leading intercept column and standardized
    features (``*_mean``/``*_scale``).
    """

    weight_coef: np.ndarray  # (d_s,)
    rate_coef: np.ndarray  # (2, d_x)
    s_mean: np.ndarray
    s_scale: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    loglik: list = field(default_factory=list)
    converged: bool = True
    pinned_weights: bool = False

    def to_dict(self) -> dict:
        return {"kind": "glm", "weight_coef": self.weight_coef.tolist(), "rate_coef": self.rate_coef.tolist(),
                "s_mean": self.s_mean.tolist(), "s_scale": self.s_scale.tolist(),
                "x_mean": self.x_mean.tolist(), "x_scale": self.x_scale.tolist(),
                "static_features": list(STATIC_FEATURES), "window_features": list(WINDOW_FEATURES),
                "loglik": list(self.loglik), "converged": self.converged,
                "pinned_weights": self.pinned_weights}

    @classmethod
    def from_dict(cls, d: dict) -> "GlmParams":
        arr = lambda k: np.asarray(d[k], float)
        return cls(arr("weight_coef"), arr("rate_coef"), arr("s_mean"), arr("s_scale"), arr("x_mean"),
                   arr("x_scale"), list(d.get("loglik", [])), d.get("converged", True),
                   d.get("pinned_weights", False))


def _standardize(a: np.ndarray):
    mean = a.mean(axis=0) if len(a) else np.zeros(a.shape[1])
    scale = a.std(axis=0) if len(a) else np.ones(a.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def _with_intercept(a: np.ndarray) -> np.ndarray:
    return np.concatenate([np.ones((a.shape[0], 1)), a], axis=1)


def glm_design(params: GlmParams, samples: SampleSet) -> tuple[np.ndarray, np.ndarray]:
    s = static_covariates(samples)
    x = np.concatenate([s, window_covariates(samples)], axis=1)
    return (_with_intercept((s - params.s_mean) / params.s_scale),
            _with_intercept((x - params.x_mean) / params.x_scale))


def glm_forecast_from_design(params: GlmParams, S: np.ndarray, X: np.ndarray) -> MixtureForecast:
    p_up = expit(S @ params.weight_coef)
    pi = np.stack([1.0 - p_up, p_up], axis=-1)
    lam = np.exp(X @ params.rate_coef.T)
    return MixtureForecast(Family.POISSON, pi, {"lam": lam})


def forecast_glm(params: GlmParams, samples: SampleSet) -> MixtureForecast:
    S, X = glm_design(params, samples)
    return glm_forecast_from_design(params, S, X)


def _glm_loglik(y, S, X, wcoef, rcoef):
    """Observed-data log-likelihood and zero-class responsibilities for component 2."""
    n = np.abs(y).astype(float)
    eta = X @ rcoef.T  # (N, 2)
    lam = np.exp(eta)
    sw = S @ wcoef
    logp2 = -np.logaddexp(0.0, -sw)
    logp1 = -np.logaddexp(0.0, sw)
    lp = n[:, None] * eta - lam - gammaln(n + 1.0)[:, None]
    a1 = logp1 + lp[:, 0]
    a2 = logp2 + lp[:, 1]
    ll = np.where(y < 0, a1, np.where(y > 0, a2, np.logaddexp(a1, a2)))
    r2 = np.where(y < 0, 0.0, np.where(y > 0, 1.0, expit(a2 - a1)))
    return float(ll.sum()), r2


def _newton_poisson(X, n, w, beta, tol=1e-10, max_iter=100):
    """Maximize sum w*(n*eta - exp(eta)) with step halving."""
    def obj(b):
        eta = X @ b
        return float(np.sum(w * (n * eta - np.exp(eta))))

    f = obj(beta)
    for _ in range(max_iter):
        mu = np.exp(X @ beta)
        g = X.T @ (w * (n - mu))
        Hm = (X * (w * mu)[:, None]).T @ X
        try:
            step = np.linalg.solve(Hm + 1e-12 * np.eye(len(beta)), g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Hm, g, rcond=None)[0]
        t = 1.0
        while t > 1e-8:
            nb = beta + t * step
            nf = obj(nb)
            if nf >= f - 1e-12 * abs(f):
                break
            t *= 0.5
        else:
            break
        done = abs(nf - f) <= tol * (1.0 + abs(f))
        beta, f = nb, nf
        if done:
            break
    return beta


def _newton_logistic(S, r, beta, tol=1e-10, max_iter=100):
    """Maximize sum r*log(p) + (1-r)*log(1-p) with p = sigmoid(S @ beta)."""
    def obj(b):
        s = S @ b
        return float(np.sum(-r * np.logaddexp(0.0, -s) - (1 - r) * np.logaddexp(0.0, s)))

    f = obj(beta)
    for _ in range(max_iter):
        p = expit(S @ beta)
        g = S.T @ (r - p)
        Hm = (S * (p * (1 - p))[:, None]).T @ S
        step = np.linalg.lstsq(Hm + 1e-12 * np.eye(len(beta)), g, rcond=None)[0]
        t = 1.0
        while t > 1e-8:
            nb = beta + t * step
            nf = obj(nb)
            if nf >= f - 1e-12 * abs(f):
                break
            t *= 0.5
        else:
            break
        done = abs(nf - f) <= tol * (1.0 + abs(f))
        beta, f = nb, nf
        if done:
            break
    return beta


def fit_glm_design(y, S, X, tol: float = 1e-8, max_iter: int = 500, pinned_weights: np.ndarray | None = None,
                   init: tuple | None = None):
    """EM on prepared design matrices; returns (weight_coef, rate_coef, loglik trace, converged)."""
    y = np.asarray(y, np.int64)
    if len(y) == 0:
        raise FitError("empty training set")
    n = np.abs(y).astype(float)
    if init is not None:
        w, r = np.array(init[0], float), np.array(init[1], float)
    else:
        w = np.zeros(S.shape[1])
        r = np.zeros((2, X.shape[1]))
        for k, sel in enumerate((y < 0, y > 0)):
            r[k, 0] = math.log(max(n[sel].mean() if sel.any() else 1.0, 1e-3))
        frac_up = ((y > 0).sum() + 0.5) / ((y != 0).sum() + 1.0)
        w[0] = math.log(frac_up / (1 - frac_up))
    if pinned_weights is not None:
        w = np.asarray(pinned_weights, float)
    ll, r2 = _glm_loglik(y, S, X, w, r)
    trace = [ll]
    converged = False
    for _ in range(max_iter):
        r1 = 1.0 - r2
        r = np.stack([_newton_poisson(X, n, r1, r[0]), _newton_poisson(X, n, r2, r[1])])
        if pinned_weights is None:
            w = _newton_logistic(S, r2, w)
        new_ll, r2 = _glm_loglik(y, S, X, w, r)
        if new_ll < ll - 1e-9 * max(1.0, abs(ll)):
            raise FitError(f"EM decreased the log-likelihood from {ll} to {new_ll}")
        trace.append(new_ll)
        if new_ll - ll < tol:
            converged = True
            ll = new_ll
            break
        ll = new_ll
    if not converged:
        warnings.warn(f"EM did not converge in {max_iter} iterations", ConvergenceWarning)
    return w, r, trace, converged


def fit_glm(train: SampleSet, tol: float = 1e-8, max_iter: int = 500,
            pinned_weights: np.ndarray | None = None) -> GlmParams:
    """Fit the direction-tied Poisson mixture GLM on raw training samples."""
    if len(train) == 0:
        raise FitError("empty training set")
    s = static_covariates(train)
    x = np.concatenate([s, window_covariates(train)], axis=1)
    if not np.all(np.isfinite(x)):
        raise FitError("non-finite covariates (negative inter-arrival gaps?)")
    s_mean, s_scale = _standardize(s)
    x_mean, x_scale = _standardize(x)
    S = _with_intercept((s - s_mean) / s_scale)
    X = _with_intercept((x - x_mean) / x_scale)
    w, r, trace, conv = fit_glm_design(np.asarray(train.target), S, X, tol, max_iter, pinned_weights)
    return GlmParams(w, r, s_mean, s_scale, x_mean, x_scale, trace, conv, pinned_weights is not None)


def save_benchmark(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh, sort_keys=True, indent=1)


def load_benchmark(path):
    with open(path) as fh:
        d = json.load(fh)
    kind = d.get("kind")
    if kind == "glm":
        return GlmParams.from_dict(d)
    if kind == "birth_death":
        return BirthDeathRates.from_dict(d)
    raise ValueError(f"{path}: unknown benchmark kind {kind!r}")


__all__ = ["BirthDeathRates", "EmpiricalForecast", "GlmParams", "FitError", "ConvergenceWarning",
           "fit_birth_death", "simulate_moves", "forecast_birth_death", "forecast_birth_death_dataset", "fit_glm",
           "fit_glm_design", "forecast_glm", "glm_design", "glm_forecast_from_design",
           "save_benchmark", "load_benchmark", "DOWN", "UP", "ZERO"]
