"""Kelly-sized trading simulation on held-out samples.

Each scenario walks forward through the timestamp-sorted test set, trading
one sample per iteration: the model's forecast sets the position, the
stored target move realizes the profit.  All models in an experiment see
the same sample sequence in a given scenario, as does a perfect-foresight
baseline whose final capital scales everyone else's.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import betainc


class DegenerateForecastError(ValueError):
    pass


class DegenerateTestError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    initial_capital: float = 10_000.0
    T: int = 500
    K: int = 10_000
    epsilon: float = 0.1
    tau: float = 15.0
    leverage: bool = True
    seed: int = 0
    tick_size: float = 0.01
    sampling: str = "uniform"  # or "sorted_subset"

    def __post_init__(self):
        if self.initial_capital <= 0:
            raise ValueError("initial capital must be positive")
        if self.T < 1 or self.K < 1:
            raise ValueError("T and K must be at least 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.sampling not in ("uniform", "sorted_subset"):
            raise ValueError("sampling must be 'uniform' or 'sorted_subset'")

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def kelly_fraction(price: float, pi, expected_ticks, epsilon: float, tick_size: float) -> float:
    """Bet fraction ``s * (pi2/Y2 - pi1/Y1) * epsilon`` with Y in price units.

    A direction with zero weight contributes nothing; one with positive
    weight and zero expected move is degenerate.
    """
    pi = np.asarray(pi, float)
    y = np.asarray(expected_ticks, float) * tick_size
    f = 0.0
    for k, sign in ((1, 1.0), (0, -1.0)):
        if pi[k] == 0:
            continue
        if not y[k] > 0:
            raise DegenerateForecastError(f"expected move of component {k + 1} is {y[k]}")
        f += sign * pi[k] / y[k]
    return float(price * f * epsilon)


def kelly_fractions(prices, pi, expected_ticks, epsilon: float, tick_size: float,
                    on_degenerate: str = "zero") -> np.ndarray:
    """Vectorized :func:`kelly_fraction`; degenerate rows give 0 (or raise)."""
    pi = np.asarray(pi, float)[:, :2]
    y = np.asarray(expected_ticks, float) * tick_size
    bad = (pi > 0) & ~(y > 0)
    if bad.any() and on_degenerate == "raise":
        raise DegenerateForecastError(f"{int(bad.any(axis=1).sum())} degenerate forecasts")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pi > 0, pi / np.where(y > 0, y, 1.0), 0.0)
    f = np.asarray(prices, float) * (terms[:, 1] - terms[:, 0]) * epsilon
    return np.where(bad.any(axis=1), 0.0, f)


def monotone_sample(n: int, previous: int, rng: np.random.Generator) -> int | None:
    """Uniform index in ``(previous, n)``, or None once the set is exhausted."""
    lo = previous + 1
    if lo >= n:
        return None
    return int(lo + rng.integers(n - lo))


def scenario_indices(n: int, config: SimConfig, scenario: int) -> np.ndarray:
    """Sample sequence for one scenario; identical for every model."""
    rng = np.random.default_rng([config.seed, scenario])
    if config.sampling == "sorted_subset":
        k = min(config.T, n)
        return np.sort(rng.choice(n, size=k, replace=False))
    out = []
    prev = -1
    for _ in range(config.T):
        nxt = monotone_sample(n, prev, rng)
        if nxt is None:
            break
        out.append(nxt)
        prev = nxt
    return np.asarray(out, np.int64)


@dataclass
class ScenarioResult:
    trajectory: np.ndarray
    trades: list  # (sample id, f, direction, move, pnl)
    final: float
    scaled_final: float | None = None
    bankrupt: bool = False


def run_trades(indices, fractions, prices, moves, config: SimConfig) -> ScenarioResult:
    """Compound capital over the given sample sequence."""
    cap = config.initial_capital
    traj = [cap]
    trades = []
    bankrupt = False
    for i in indices:
        f = float(fractions[i])
        if not config.leverage:
            f = max(-1.0, min(1.0, f))
        move = int(moves[i])
        pnl = f * cap * (move * config.tick_size / float(prices[i]))
        direction = int(np.sign(f))
        if cap + pnl <= 0:
            pnl = -cap
            bankrupt = True
        cap += pnl
        traj.append(cap)
        trades.append((int(i), f, direction, move, pnl))
        if bankrupt:
            break
    return ScenarioResult(np.asarray(traj), trades, cap, None, bankrupt)


@dataclass(frozen=True)
class OracleForecast:
    """Puts all weight on the realized direction and predicts its exact size."""

    moves: np.ndarray

    @property
    def pi(self) -> np.ndarray:
        m = np.asarray(self.moves)
        return np.stack([m < 0, m > 0, m == 0], axis=-1).astype(float)

    def expected_move(self) -> np.ndarray:
        return np.repeat(np.abs(np.asarray(self.moves, float))[:, None], 2, axis=1)

    def quantile(self, k: int, rho: float) -> int:
        return int(abs(np.asarray(self.moves).reshape(-1)[0]))

    def __len__(self) -> int:
        return len(self.moves)

    def __getitem__(self, idx) -> "OracleForecast":
        return OracleForecast(np.atleast_1d(np.asarray(self.moves)[idx]))


def oracle_fractions(prices, moves, config: SimConfig) -> np.ndarray:
    """Kelly fractions of a forecaster that knows each realized move."""
    return model_fractions(OracleForecast(np.asarray(moves)), prices, config)


def model_fractions(forecast, prices, config: SimConfig) -> np.ndarray:
    return kelly_fractions(prices, forecast.pi, forecast.expected_move(), config.epsilon, config.tick_size)


def run_scenario(forecast, samples, config: SimConfig, scenario: int = 0) -> ScenarioResult:
    """One scenario for one model, scaled against the perfect baseline."""
    prices = np.asarray(samples.price, float)
    moves = np.asarray(samples.target)
    idx = scenario_indices(len(moves), config, scenario)
    res = run_trades(idx, model_fractions(forecast, prices, config), prices, moves, config)
    base = run_trades(idx, oracle_fractions(prices, moves, config), prices, moves, config)
    res.scaled_final = res.final / base.final
    return res


@dataclass
class ExperimentResult:
    config: SimConfig
    finals: dict  # model -> (K,)
    scaled: dict  # model -> (K,)
    baseline_final: np.ndarray
    n_trades: np.ndarray
    trajectories: dict = field(default_factory=dict)  # model -> {scenario: array}
    meta: dict = field(default_factory=dict)


def run_experiment(forecasts: dict, samples, config: SimConfig, keep_trajectories: int = 5) -> ExperimentResult:
    """K shared-draw scenarios per model plus the perfect baseline."""
    if not forecasts:
        raise ValueError("need at least one model")
    prices = np.asarray(samples.price, float)
    moves = np.asarray(samples.target)
    fr = {name: model_fractions(fc, prices, config) for name, fc in forecasts.items()}
    base_f = oracle_fractions(prices, moves, config)
    finals = {name: np.empty(config.K) for name in fr}
    base = np.empty(config.K)
    n_trades = np.empty(config.K, np.int64)
    trajs = {name: {} for name in list(fr) + ["perfect"]}
    for k in range(config.K):
        idx = scenario_indices(len(moves), config, k)
        n_trades[k] = len(idx)
        b = run_trades(idx, base_f, prices, moves, config)
        base[k] = b.final
        if k < keep_trajectories:
            trajs["perfect"][k] = b.trajectory
        for name, f in fr.items():
            r = run_trades(idx, f, prices, moves, config)
            finals[name][k] = r.final
            if k < keep_trajectories:
                trajs[name][k] = r.trajectory
    scaled = {name: v / base for name, v in finals.items()}
    return ExperimentResult(config, finals, scaled, base, n_trades, trajs)


def paired_t_test(a, b) -> tuple[float, float]:
    """Paired Student t statistic and two-sided p-value."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    d = a - b
    n = len(d)
    if np.all(d == 0):
        return 0.0, 1.0
    sd = float(np.std(d, ddof=1))
    if sd == 0:
        raise DegenerateTestError("differences have zero variance")
    t = float(d.mean() / (sd / math.sqrt(n)))
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, p


# --------------------------------------------------------------------------
# outputs


def _header(meta: dict) -> str:
    return "".join(f"# {k}: {meta[k]}\n" for k in sorted(meta))


def scenarios_csv(res: ExperimentResult) -> str:
    buf = io.StringIO()
    buf.write(_header(res.meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "scenario", "final", "scaled_final", "n_trades"])
    for k in range(res.config.K):
        w.writerow(["perfect", k, repr(float(res.baseline_final[k])), repr(1.0), int(res.n_trades[k])])
    for name in res.finals:
        for k in range(res.config.K):
            w.writerow([name, k, repr(float(res.finals[name][k])), repr(float(res.scaled[name][k])),
                        int(res.n_trades[k])])
    return buf.getvalue()


def trajectories_csv(res: ExperimentResult) -> str:
    buf = io.StringIO()
    buf.write(_header(res.meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "scenario", "step", "capital"])
    for name, per in res.trajectories.items():
        for k in sorted(per):
            for step, cap in enumerate(per[k]):
                w.writerow([name, k, step, repr(float(cap))])
    return buf.getvalue()


def histogram_json(res: ExperimentResult, bins: int = 50) -> str:
    vals = np.concatenate([v for v in res.scaled.values()])
    finite = vals[np.isfinite(vals)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    out = {"meta": res.meta, "edges": edges.tolist(),
           "counts": {name: np.histogram(v, bins=edges)[0].tolist() for name, v in res.scaled.items()},
           "mean": {name: float(np.mean(v)) for name, v in res.scaled.items()}}
    return json.dumps(out, sort_keys=True, indent=1)


def t_test_table(res: ExperimentResult, benchmarks, models) -> list[dict]:
    """One row per (benchmark, model) pair; positive t favors the model."""
    rows = []
    for b in benchmarks:
        for m in models:
            try:
                t, p = paired_t_test(res.scaled[m], res.scaled[b])
                rows.append({"benchmark": b, "model": m, "t": t, "p": p,
                             "mean_model": float(np.mean(res.scaled[m])),
                             "mean_benchmark": float(np.mean(res.scaled[b]))})
            except DegenerateTestError as exc:
                rows.append({"benchmark": b, "model": m, "t": None, "p": None, "error": str(exc)})
    return rows


def t_test_json(res: ExperimentResult, benchmarks, models) -> str:
    return json.dumps({"meta": res.meta, "config": asdict(res.config),
                       "tests": t_test_table(res, benchmarks, models)}, sort_keys=True, indent=1)
