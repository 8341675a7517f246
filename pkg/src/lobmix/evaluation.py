"""Two-step forecast evaluation: direction by multiclass MCC, size by pinball loss.

A forecast here is anything exposing ``pi`` (N, K) with columns ordered
down, up[, zero], indexing by sample, and ``quantile(k, rho)`` on a single
sample.  :class:`~lobmix.mixtures.MixtureForecast` and the benchmark
forecasts both qualify.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mixtures import DOWN, UP, ZERO, DomainError

CLASS_NAMES = {DOWN: "down", UP: "up", ZERO: "zero"}
DEFAULT_RHOS = (0.5, 0.9)


def direction_point_forecast(pi) -> np.ndarray:
    """Most probable component as a class code (1 down, 2 up, 3 zero).

    Ties go to Zero when the forecast has a zero component, else to Down.
    """
    pi = np.atleast_2d(np.asarray(getattr(pi, "pi", pi), dtype=float))
    K = pi.shape[-1]
    best = pi.max(axis=-1, keepdims=True)
    at_max = pi == best
    out = np.where(at_max[:, 0], DOWN, UP)
    if K == 3:
        out = np.where(at_max[:, 2], ZERO, out)
    return out.astype(np.int64)


def true_class(y) -> np.ndarray:
    y = np.asarray(y)
    return np.where(y < 0, DOWN, np.where(y > 0, UP, ZERO)).astype(np.int64)


@dataclass(frozen=True)
class ConfusionMatrix:
    """3x3 counts, rows are true classes and columns predictions (down, up, zero)."""

    counts: np.ndarray

    @classmethod
    def from_labels(cls, truth, pred, n_classes: int = 3) -> "ConfusionMatrix":
        c = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(c, (np.asarray(truth) - 1, np.asarray(pred) - 1), 1)
        return cls(c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def mcc(confusion) -> float:
    """Multiclass (Gorodkin) Matthews correlation; 0 when the denominator vanishes."""
    c = np.asarray(getattr(confusion, "counts", confusion), dtype=float)
    n = c.sum()
    if n <= 0:
        raise DomainError("empty confusion matrix")
    t = c.sum(axis=1)
    p = c.sum(axis=0)
    cov = n * np.trace(c) - t @ p
    den = math.sqrt(n * n - p @ p) * math.sqrt(n * n - t @ t)
    return 0.0 if den == 0 else float(cov / den)


def quantile_loss(y, q, rho: float):
    """Pinball loss of quantile prediction ``q`` against outcome ``y``."""
    if not 0.0 < rho < 1.0:
        raise DomainError("rho must lie in (0, 1)")
    d = np.asarray(y, dtype=float) - np.asarray(q, dtype=float)
    out = np.where(d >= 0, rho * d, (rho - 1.0) * d)
    return float(out) if out.ndim == 0 else out


@dataclass
class PeriodScores:
    n: int
    n_scored: int
    mcc: float
    confusion: list
    losses: dict  # rho -> mean loss or None

    def to_dict(self) -> dict:
        return {"n": self.n, "n_scored": self.n_scored, "mcc": self.mcc, "confusion": self.confusion,
                "losses": {str(k): v for k, v in self.losses.items()}}


def score_period(forecast, y, rhos=DEFAULT_RHOS) -> PeriodScores:
    y = np.asarray(y)
    truth = true_class(y)
    pred = direction_point_forecast(forecast.pi)
    conf = ConfusionMatrix.from_labels(truth, pred)
    scored = np.flatnonzero((pred == truth) & (truth != ZERO))
    losses: dict = {}
    for rho in rhos:
        if scored.size == 0:
            losses[rho] = None
            continue
        total = 0.0
        for i in scored:
            q = forecast[int(i)].quantile(int(pred[i]), rho)
            total += quantile_loss(abs(int(y[i])), q, rho)
        losses[rho] = total / scored.size
    return PeriodScores(len(y), int(scored.size), mcc(conf), conf.counts.tolist(), losses)


def _scaled(value, base):
    if value is None or base is None:
        return None
    if base == 0:
        return 1.0 if value == 0 else math.inf
    return value / base


@dataclass
class EvalReport:
    """Per-model, per-period MCC and quantile losses, raw and scaled to a baseline."""

    baseline: str
    periods: list
    rhos: tuple
    scores: dict  # model -> period -> PeriodScores
    meta: dict = field(default_factory=dict)

    def scaled_loss(self, model: str, period: str, rho: float):
        return _scaled(self.scores[model][period].losses[rho],
                       self.scores[self.baseline][period].losses[rho])

    def rows(self) -> list[tuple]:
        out = []
        for model, per in self.scores.items():
            for period in self.periods:
                s = per[period]
                out.append((model, period, "mcc", s.mcc, None))
                for rho in self.rhos:
                    out.append((model, period, f"ql_{rho:g}", s.losses[rho], self.scaled_loss(model, period, rho)))
        return out

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "baseline": self.baseline,
            "periods": list(self.periods),
            "rhos": list(self.rhos),
            "models": {m: {p: s.to_dict() for p, s in per.items()} for m, per in self.scores.items()},
            "scaled": {m: {p: {str(r): self.scaled_loss(m, p, r) for r in self.rhos} for p in self.periods}
                       for m in self.scores},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k in sorted(self.meta):
            buf.write(f"# {k}: {self.meta[k]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "period", "metric", "value", "scaled_value"])
        for row in self.rows():
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
        return buf.getvalue()


def evaluate(forecasts: dict, y, baseline: str, periods=None, rhos=DEFAULT_RHOS,
             meta: dict | None = None) -> EvalReport:
    """Score every model on every period label.

    ``periods`` is an optional per-sample label array; periods with no
    samples are dropped.  Losses average only over samples whose direction
    was forecast correctly and is non-zero.
    """
    if baseline not in forecasts:
        raise KeyError(f"baseline model {baseline!r} not among {sorted(forecasts)}")
    y = np.asarray(y)
    labels = np.full(len(y), "all", dtype=object) if periods is None else np.asarray(periods, dtype=object)
    if len(labels) != len(y):
        raise ValueError("period labels and targets are not aligned")
    names = list(dict.fromkeys(labels.tolist()))
    scores = {}
    for model, fc in forecasts.items():
        if len(fc) != len(y):
            raise ValueError(f"{model}: {len(fc)} forecasts for {len(y)} targets")
        per = {}
        for p in names:
            idx = np.flatnonzero(labels == p)
            per[p] = score_period(fc[idx], y[idx], rhos)
        scores[model] = per
    return EvalReport(baseline, names, tuple(rhos), scores, dict(meta or {}))


def period_labels(anchor_ts, boundaries: dict | None) -> np.ndarray | None:
    """Label samples by named half-open ``[start, end)`` timestamp ranges."""
    if not boundaries:
        return None
    ts = np.asarray(anchor_ts)
    out = np.full(len(ts), None, dtype=object)
    for name, (lo, hi) in boundaries.items():
        out[(ts >= lo) & (ts < hi)] = name
    if any(v is None for v in out):
        raise ValueError("some samples fall outside every period")
    return out
