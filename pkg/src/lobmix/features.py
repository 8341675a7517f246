"""Model-ready samples from an order-flow stream.

Each sample is anchored at one event.  Its temporal block holds the ``m``
events ending at the anchor, its target is the tick move of the reference
price ``tau`` seconds after the anchor, and its autoregressive inputs are the
same tick move measured after each earlier event in the window.  Moves whose
horizon reaches past the anchor would leak the target period; they are zeroed
and flagged in ``ar_masked``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, replace
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import __version__
from ._binio import read_container, write_container
from .orderflow import BookState, OrderFlowEvent, Pair, half_ticks_to_ticks

logger = logging.getLogger(__name__)

US_PER_HOUR = 3_600_000_000
TEMPORAL_COLUMNS = ("inter_arrival_ms", "size", "order_type", "side", "price")
CONTINUOUS = (0, 1, 4)  # x1, x2, x5


@dataclass(frozen=True)
class DatasetConfig:
    m: int = 300
    tau: float = 15.0
    tick_size: str = "0.01"
    price_reference: str = "mid"
    # half-open [start, end) microsecond ranges for train / validation / test
    splits: tuple[tuple[int, int], ...] | None = None
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    stride: int = 1
    warmup: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.price_reference not in ("mid", "last_trade"):
            raise ValueError("price_reference must be 'mid' or 'last_trade'")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.splits is not None:
            check_splits(self.splits)

    @property
    def tau_us(self) -> int:
        return int(round(self.tau * 1e6))

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        if d.get("splits") is not None:
            d["splits"] = tuple(tuple(int(x) for x in r) for r in d["splits"])
        if "split_fractions" in d:
            d["split_fractions"] = tuple(float(x) for x in d["split_fractions"])
        return cls(**d)


def check_splits(splits) -> None:
    if len(splits) != 3:
        raise ValueError("need exactly three split ranges (train, validation, test)")
    prev_end = None
    for start, end in splits:
        if end <= start:
            raise ValueError(f"empty split range [{start}, {end})")
        if prev_end is not None and start < prev_end:
            raise ValueError("split ranges must be disjoint and chronologically ordered")
        prev_end = end


def resolve_splits(config: DatasetConfig, t_start: int, t_end: int) -> tuple[tuple[int, int], ...]:
    """Explicit ranges, or fractions of ``[t_start, t_end]`` turned into ranges."""
    if config.splits is not None:
        return config.splits
    fr = np.asarray(config.split_fractions, dtype=float)
    if len(fr) != 3 or np.any(fr <= 0):
        raise ValueError("split_fractions must be three positive numbers")
    edges = t_start + np.round(np.cumsum(np.r_[0.0, fr / fr.sum()]) * (t_end + 1 - t_start))
    edges = edges.astype(np.int64)
    edges[-1] = t_end + 1
    return tuple((int(edges[i]), int(edges[i + 1])) for i in range(3))


@dataclass(frozen=True)
class Sample:
    temporal: np.ndarray  # (m, 5)
    autoregressive: np.ndarray  # (m - 1,)
    ar_masked: np.ndarray  # (m - 1,) bool
    hour: int
    pair: int
    target: int
    anchor_timestamp: int
    price: float


@dataclass
class SampleSet:
    """Column store of samples (leading axis = sample)."""

    temporal: np.ndarray
    autoregressive: np.ndarray
    ar_masked: np.ndarray
    hour: np.ndarray
    pair: np.ndarray
    target: np.ndarray
    anchor_ts: np.ndarray
    price: np.ndarray
    anchor_index: np.ndarray
    normalized: bool = False

    COLUMNS = ("temporal", "autoregressive", "ar_masked", "hour", "pair", "target",
               "anchor_ts", "price", "anchor_index")

    def __len__(self) -> int:
        return int(self.target.shape[0])

    @property
    def m(self) -> int:
        return int(self.temporal.shape[1])

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.temporal[i], self.autoregressive[i], self.ar_masked[i],
                      int(self.hour[i]), int(self.pair[i]), int(self.target[i]),
                      int(self.anchor_ts[i]), float(self.price[i]))

    def take(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        return SampleSet(**{c: getattr(self, c)[idx] for c in self.COLUMNS},
                         normalized=self.normalized)

    @classmethod
    def empty(cls, m: int) -> "SampleSet":
        return cls(np.zeros((0, m, 5)), np.zeros((0, m - 1)), np.zeros((0, m - 1), bool),
                   np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64),
                   np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64))

    @classmethod
    def concat(cls, sets: Sequence["SampleSet"]) -> "SampleSet":
        sets = [s for s in sets if len(s)] or list(sets[:1])
        return cls(**{c: np.concatenate([getattr(s, c) for s in sets]) for c in cls.COLUMNS},
                   normalized=sets[0].normalized)

    def arrays(self) -> dict[str, np.ndarray]:
        return {c: getattr(self, c) for c in self.COLUMNS}


# --------------------------------------------------------------------------
# per-event table


@dataclass
class EventTable:
    ts: np.ndarray  # int64 us
    event_type: np.ndarray  # 1..3
    side: np.ndarray  # 1..2
    size: np.ndarray
    price: np.ndarray
    ref_half: np.ndarray  # reference price in half ticks after each event
    ref_valid: np.ndarray  # bool: a reference price has existed by this event
    pair: int


def event_table(events: Sequence[OrderFlowEvent], tick_size: str | Decimal = "0.01",
                price_reference: str = "mid") -> EventTable:
    """Replay ``events`` through the emulator and tabulate per-event values.

    One-sided moments carry the last defined reference price forward.
    """
    tick = Decimal(str(tick_size))
    book = BookState(tick)
    n = len(events)
    ts = np.empty(n, np.int64)
    et = np.empty(n, np.int8)
    sd = np.empty(n, np.int8)
    size = np.empty(n)
    price = np.empty(n)
    ref = np.zeros(n, np.int64)
    valid = np.zeros(n, bool)
    last = None
    use_mid = price_reference == "mid"
    for i, ev in enumerate(events):
        book.apply(ev)
        ts[i] = ev.timestamp
        et[i] = int(ev.event_type)
        sd[i] = int(ev.side)
        size[i] = float(ev.size)
        price[i] = float(ev.price)
        if use_mid:
            bb, ba = book.best_bid, book.best_ask
            if bb is not None and ba is not None:
                last = int((bb + ba) / tick)
        elif book.last_trade_price is not None:
            last = int(2 * book.last_trade_price / tick)
        if last is not None:
            ref[i] = last
            valid[i] = True
    pair = int(events[0].pair) if n else int(Pair.PAIR_A)
    return EventTable(ts, et, sd, size, price, ref, valid, pair)


def event_moves(table: EventTable, tau_us: int) -> tuple[np.ndarray, np.ndarray]:
    """Tick move tau after every event, and whether that move is observable."""
    j = np.searchsorted(table.ts, table.ts + tau_us, side="right") - 1
    observable = (table.ts + tau_us <= table.ts[-1]) & table.ref_valid if len(table.ts) else table.ref_valid
    moves = half_ticks_to_ticks(table.ref_half[j] - table.ref_half) if len(j) else np.zeros(0, np.int64)
    moves = np.where(observable, moves, 0)
    return moves, observable


def build_dataset(stream: Sequence[OrderFlowEvent] | EventTable, config: DatasetConfig) -> SampleSet:
    """Anchor one sample on every eligible ``stride``-th event of one pair's stream."""
    table = stream if isinstance(stream, EventTable) else event_table(
        stream, config.tick_size, config.price_reference)
    m = config.m
    n = len(table.ts)
    if n < m:
        logger.warning("stream has %d events, fewer than m=%d; dataset is empty", n, m)
        return SampleSet.empty(m)
    tau = config.tau_us
    moves, observable = event_moves(table, tau)
    first = max(m - 1, config.warmup)
    anchors = np.arange(first, n, config.stride)
    anchors = anchors[observable[anchors]]
    if len(anchors) == 0:
        logger.warning("no eligible anchors in stream of %d events", n)
        return SampleSet.empty(m)

    win = anchors[:, None] + np.arange(-m + 1, 1)[None, :]
    gaps = np.diff(table.ts, prepend=table.ts[0]).astype(float) / 1000.0
    temporal = np.stack([gaps[win], table.size[win], table.event_type[win].astype(float),
                         table.side[win].astype(float), table.price[win]], axis=-1)
    ar_idx = win[:, :-1]
    horizon = table.ts[ar_idx] + tau
    masked = (horizon > table.ts[anchors][:, None]) | ~observable[ar_idx]
    ar = np.where(masked, 0, moves[ar_idx]).astype(float)
    anchor_ts = table.ts[anchors]
    tick = float(Decimal(str(config.tick_size)))
    return SampleSet(
        temporal=temporal,
        autoregressive=ar,
        ar_masked=masked,
        hour=((anchor_ts // US_PER_HOUR) % 24).astype(np.int64),
        pair=np.full(len(anchors), table.pair, np.int64),
        target=moves[anchors].astype(np.int64),
        anchor_ts=anchor_ts.astype(np.int64),
        price=table.ref_half[anchors] * tick / 2.0,
        anchor_index=anchors.astype(np.int64),
    )


def build_joint_dataset(streams: Sequence[Sequence[OrderFlowEvent]], config: DatasetConfig) -> SampleSet:
    """Build per pair and interleave by anchor timestamp (pair breaks ties)."""
    parts = [build_dataset(s, config) for s in streams]
    joint = SampleSet.concat(parts)
    order = np.lexsort((joint.pair, joint.anchor_ts))
    return joint.take(order)


def split_by_date(samples: SampleSet, splits) -> tuple[SampleSet, SampleSet, SampleSet]:
    """Assign samples by anchor timestamp to half-open train/validation/test ranges."""
    if isinstance(splits, DatasetConfig):
        splits = splits.splits
    check_splits(splits)
    out = []
    for start, end in splits:
        sel = np.flatnonzero((samples.anchor_ts >= start) & (samples.anchor_ts < end))
        out.append(samples.take(sel))
    return tuple(out)


# --------------------------------------------------------------------------
# normalization


@dataclass
class NormalizationStats:
    mean: list[float]  # x1, x2, x5, autoregressive
    scale: list[float]

    def to_dict(self) -> dict:
        return {"mean": list(map(float, self.mean)), "scale": list(map(float, self.scale))}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(list(d["mean"]), list(d["scale"]))

    @classmethod
    def identity(cls) -> "NormalizationStats":
        return cls([0.0] * 4, [1.0] * 4)


def _mean_scale(values: np.ndarray, name: str) -> tuple[float, float]:
    if values.size == 0:
        logger.warning("no training values for %s; using identity scaling", name)
        return 0.0, 1.0
    mu = float(values.mean())
    sd = float(values.std())
    if not sd > 0:
        logger.warning("zero variance for %s; scale clamped to 1", name)
        sd = 1.0
    return mu, sd


def fit_normalization(train: SampleSet) -> NormalizationStats:
    stats = [_mean_scale(train.temporal[..., c], TEMPORAL_COLUMNS[c]) for c in CONTINUOUS]
    stats.append(_mean_scale(train.autoregressive[~train.ar_masked], "autoregressive"))
    return NormalizationStats([s[0] for s in stats], [s[1] for s in stats])


def apply_normalization(samples: SampleSet, stats: NormalizationStats) -> SampleSet:
    if samples.normalized:
        raise ValueError("samples are already normalized")
    temporal = samples.temporal.copy()
    for k, c in enumerate(CONTINUOUS):
        temporal[..., c] = (temporal[..., c] - stats.mean[k]) / stats.scale[k]
    ar = (samples.autoregressive - stats.mean[3]) / stats.scale[3]
    ar[samples.ar_masked] = 0.0
    return replace(samples, temporal=temporal, autoregressive=ar, normalized=True)


# --------------------------------------------------------------------------
# serialization

DATASET_VERSION = 1


def write_dataset(path: str | Path, samples: SampleSet, config: DatasetConfig,
                  stats: NormalizationStats | None = None, meta: dict | None = None) -> None:
    header = {
        "kind": "dataset",
        "version": DATASET_VERSION,
        "tool_version": __version__,
        "m": config.m,
        "tau": config.tau,
        "tick_size": str(config.tick_size),
        "config": asdict(config),
        "normalized": samples.normalized,
        "normalization": stats.to_dict() if stats is not None else None,
        "meta": meta or {},
    }
    arrays = samples.arrays()
    arrays["ar_masked"] = arrays["ar_masked"].astype(np.uint8)
    write_container(path, header, arrays)


def read_dataset(path: str | Path) -> tuple[SampleSet, dict]:
    header, arrays = read_container(path)
    if header.get("kind") != "dataset":
        raise ValueError(f"{path} is not a dataset file")
    arrays["ar_masked"] = arrays["ar_masked"].astype(bool)
    return SampleSet(**arrays, normalized=header["normalized"]), header


def export_csv(path: str | Path, samples: SampleSet, header_comment: str | None = None) -> None:
    """One row per sample: statics, target and the anchor event's covariates."""
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["anchor_ts", "pair", "hour", "target", "price", *TEMPORAL_COLUMNS,
                    "n_ar_unmasked"])
        for i in range(len(samples)):
            last = samples.temporal[i, -1]
            w.writerow([int(samples.anchor_ts[i]), int(samples.pair[i]), int(samples.hour[i]),
                        int(samples.target[i]), repr(float(samples.price[i])),
                        *(repr(float(v)) for v in last),
                        int((~samples.ar_masked[i]).sum())])


def iter_books_at(events: Sequence[OrderFlowEvent], indices: Iterable[int],
                  tick_size: str | Decimal = "0.01") -> Iterator[tuple[int, BookState]]:
    """Yield the live book right after each requested event index (ascending).

    The yielded book is mutated by later steps; copy it to keep it.
    """
    book = BookState(tick_size)
    pos = 0
    for idx in sorted(set(int(i) for i in indices)):
        while pos <= idx:
            book.apply(events[pos])
            pos += 1
        yield idx, book
