"""Order-flow messages, a price-time priority book emulator and a synthetic feed.

Messages are newline-delimited JSON objects in a minimal exchange schema::

    {"type": "limit", "side": "buy", "price": "100.00", "size": "1.5",
     "time": 1000000, "order_id": "a1", "product_id": "A"}

``time`` is microseconds since the epoch.  ``type`` is one of ``limit``
(resting order placement), ``market`` (marketable immediate-or-cancel order,
bounded by its ``price``) or ``cancel``.
"""

from __future__ import annotations

import bisect
import enum
import gzip
import io
import json
import logging
import math
import random
from collections import OrderedDict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)


class ParseError(ValueError):
    """Raised for text that is not a single JSON object."""


class SchemaError(ParseError):
    """Raised when a required message field is missing or mistyped."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class OrderingError(ValueError):
    """Raised when an event timestamp precedes the book's last event."""


class NoMidError(ValueError):
    """Raised when a mid price is requested from a one-sided book."""


class BookError(ValueError):
    """Raised for events the book cannot apply (e.g. duplicate order ids)."""


class DegenerateConfigError(ValueError):
    """Raised when a generator configuration has no active clock."""


class EventType(enum.IntEnum):
    LIMIT_PLACE = 1
    OPEN = 2
    CANCEL = 3


class Side(enum.IntEnum):
    BUY = 1
    SELL = 2

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class Pair(enum.IntEnum):
    PAIR_A = 1
    PAIR_B = 2


_TYPE_NAMES = {"limit": EventType.LIMIT_PLACE, "market": EventType.OPEN,
               "open": EventType.OPEN, "cancel": EventType.CANCEL}
_TYPE_CANON = {EventType.LIMIT_PLACE: "limit", EventType.OPEN: "market",
               EventType.CANCEL: "cancel"}
_SIDE_NAMES = {"buy": Side.BUY, "sell": Side.SELL}
_PAIR_NAMES = {"A": Pair.PAIR_A, "B": Pair.PAIR_B}
_PAIR_CANON = {v: k for k, v in _PAIR_NAMES.items()}


@dataclass(frozen=True, slots=True)
class OrderFlowEvent:
    timestamp: int
    event_type: EventType
    side: Side
    price: Decimal
    size: Decimal
    order_id: str
    pair: Pair = Pair.PAIR_A

    def __post_init__(self):
        if self.size <= 0:
            raise SchemaError("size", f"must be positive, got {self.size}")
        if self.price < 0:
            raise SchemaError("price", f"must be non-negative, got {self.price}")

    def to_json(self) -> str:
        """Canonical single-line serialization."""
        return json.dumps(
            {
                "type": _TYPE_CANON[self.event_type],
                "side": self.side.name.lower(),
                "price": str(self.price),
                "size": str(self.size),
                "time": self.timestamp,
                "order_id": self.order_id,
                "product_id": _PAIR_CANON[self.pair],
            },
            separators=(",", ":"),
        )


def _decimal_field(obj: dict, name: str) -> Decimal:
    value = obj[name]
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise SchemaError(name, f"expected decimal string, got {type(value).__name__}")
    try:
        out = Decimal(str(value))
    except InvalidOperation:
        raise SchemaError(name, f"not a decimal: {value!r}") from None
    if not out.is_finite():
        raise SchemaError(name, f"not finite: {value!r}")
    return out


def _enum_field(obj: dict, name: str, table: dict):
    value = obj[name]
    if not isinstance(value, str) or value.lower() not in {k.lower() for k in table}:
        raise SchemaError(name, f"unknown value {value!r}")
    for k, v in table.items():
        if k.lower() == value.lower():
            return v


_REQUIRED = ("type", "side", "price", "size", "time", "order_id", "product_id")


def parse_message(json_text: str) -> OrderFlowEvent:
    """Decode one JSON message; unknown extra fields are ignored."""
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError("message is not a JSON object")
    for name in _REQUIRED:
        if name not in obj:
            raise SchemaError(name, "missing required field")

    ts = obj["time"]
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise SchemaError("time", "expected integer microseconds")
    order_id = obj["order_id"]
    if not isinstance(order_id, str) or not order_id:
        raise SchemaError("order_id", "expected non-empty string")
    return OrderFlowEvent(
        timestamp=ts,
        event_type=_enum_field(obj, "type", _TYPE_NAMES),
        side=_enum_field(obj, "side", _SIDE_NAMES),
        price=_decimal_field(obj, "price"),
        size=_decimal_field(obj, "size"),
        order_id=order_id,
        pair=_enum_field(obj, "product_id", _PAIR_NAMES),
    )


def _open_text(path: Path, mode: str) -> IO[str]:
    if str(path).endswith(".gz"):
        # mtime=0 keeps compressed output byte-stable across runs
        raw = gzip.GzipFile(path, mode[0] + "b", mtime=0)
        return io.TextIOWrapper(raw, encoding="utf-8", newline="\n")
    return open(path, mode, encoding="utf-8", newline="\n")


def iter_stream(source: str | Path | IO[str]) -> Iterator[OrderFlowEvent]:
    """Parse newline-delimited messages, enforcing non-decreasing time."""
    if isinstance(source, (str, Path)):
        with _open_text(Path(source), "r") as fh:
            yield from iter_stream(fh)
        return
    last = None
    for lineno, line in enumerate(source, 1):
        line = line.strip()
        if not line:
            continue
        ev = parse_message(line)
        if last is not None and ev.timestamp < last:
            raise OrderingError(f"line {lineno}: time {ev.timestamp} < {last}")
        last = ev.timestamp
        yield ev


def read_stream(source: str | Path | IO[str]) -> list[OrderFlowEvent]:
    return list(iter_stream(source))


def write_stream(events: Iterable[OrderFlowEvent], dest: str | Path | IO[str]) -> int:
    """Write events as canonical NDJSON; ``.gz`` paths are gzip-compressed."""
    if isinstance(dest, (str, Path)):
        with _open_text(Path(dest), "w") as fh:
            return write_stream(events, fh)
    n = 0
    for ev in events:
        dest.write(ev.to_json())
        dest.write("\n")
        n += 1
    return n


# --------------------------------------------------------------------------
# book emulator


@dataclass
class PriceLevel:
    size: Decimal = Decimal(0)
    orders: OrderedDict = field(default_factory=OrderedDict)


@dataclass(frozen=True, slots=True)
class Fill:
    maker_id: str
    price: Decimal
    size: Decimal
    maker_remaining: Decimal


class BookState:
    """Aggregated limit order book with FIFO queues per price level."""

    def __init__(self, tick_size: Decimal | str = "0.01"):
        self.tick_size = Decimal(str(tick_size))
        if self.tick_size <= 0:
            raise ValueError("tick_size must be positive")
        self.bids: dict[Decimal, PriceLevel] = {}
        self.asks: dict[Decimal, PriceLevel] = {}
        self._bid_px: list[Decimal] = []  # ascending
        self._ask_px: list[Decimal] = []  # ascending
        self.orders: dict[str, tuple[Side, Decimal]] = {}
        self.last_event_time: int | None = None
        self.last_trade_price: Decimal | None = None

    def copy(self) -> "BookState":
        out = BookState(self.tick_size)
        for src, dst in ((self.bids, out.bids), (self.asks, out.asks)):
            for px, lvl in src.items():
                dst[px] = PriceLevel(lvl.size, OrderedDict(lvl.orders))
        out._bid_px = list(self._bid_px)
        out._ask_px = list(self._ask_px)
        out.orders = dict(self.orders)
        out.last_event_time = self.last_event_time
        out.last_trade_price = self.last_trade_price
        return out

    # -- queries --------------------------------------------------------

    @property
    def best_bid(self) -> Decimal | None:
        return self._bid_px[-1] if self._bid_px else None

    @property
    def best_ask(self) -> Decimal | None:
        return self._ask_px[0] if self._ask_px else None

    def side_levels(self, side: Side) -> dict[Decimal, PriceLevel]:
        return self.bids if side is Side.BUY else self.asks

    def prices(self, side: Side) -> list[Decimal]:
        """Level prices from best to worst."""
        return list(reversed(self._bid_px)) if side is Side.BUY else list(self._ask_px)

    def depth(self, side: Side, n: int | None = None) -> list[tuple[Decimal, Decimal]]:
        px = self.prices(side)[:n]
        levels = self.side_levels(side)
        return [(p, levels[p].size) for p in px]

    def snapshot(self) -> tuple:
        """Hashable content of both sides (prices, sizes and queue order)."""
        def side(levels, px):
            return tuple((p, levels[p].size, tuple(levels[p].orders.items())) for p in px)
        return side(self.bids, self._bid_px), side(self.asks, self._ask_px)

    def __len__(self) -> int:
        return len(self.orders)

    # -- mutation -------------------------------------------------------

    def _insert(self, side: Side, order_id: str, price: Decimal, size: Decimal) -> None:
        levels = self.side_levels(side)
        lvl = levels.get(price)
        if lvl is None:
            lvl = levels[price] = PriceLevel()
            bisect.insort(self._bid_px if side is Side.BUY else self._ask_px, price)
        lvl.orders[order_id] = size
        lvl.size += size
        self.orders[order_id] = (side, price)

    def _drop_level(self, side: Side, price: Decimal) -> None:
        levels = self.side_levels(side)
        del levels[price]
        px = self._bid_px if side is Side.BUY else self._ask_px
        del px[bisect.bisect_left(px, price)]

    def _cancel(self, order_id: str) -> bool:
        entry = self.orders.pop(order_id, None)
        if entry is None:
            return False
        side, price = entry
        lvl = self.side_levels(side)[price]
        lvl.size -= lvl.orders.pop(order_id)
        if not lvl.orders:
            self._drop_level(side, price)
        return True

    def _match(self, taker_side: Side, limit: Decimal, size: Decimal) -> tuple[list[Fill], Decimal]:
        """Consume opposite liquidity at prices no worse than ``limit``."""
        fills: list[Fill] = []
        maker_side = taker_side.opposite
        levels = self.side_levels(maker_side)
        px_list = self._ask_px if maker_side is Side.SELL else self._bid_px
        while size > 0 and px_list:
            best = px_list[0] if maker_side is Side.SELL else px_list[-1]
            if (taker_side is Side.BUY and best > limit) or (taker_side is Side.SELL and best < limit):
                break
            lvl = levels[best]
            while size > 0 and lvl.orders:
                maker_id, maker_size = next(iter(lvl.orders.items()))
                traded = min(size, maker_size)
                size -= traded
                remaining = maker_size - traded
                lvl.size -= traded
                if remaining > 0:
                    lvl.orders[maker_id] = remaining
                else:
                    del lvl.orders[maker_id]
                    del self.orders[maker_id]
                fills.append(Fill(maker_id, best, traded, remaining))
                self.last_trade_price = best
            if not lvl.orders:
                self._drop_level(maker_side, best)
        return fills, size

    def apply(self, event: OrderFlowEvent) -> list[Fill]:
        """Apply one event in place and return any executions it caused."""
        if self.last_event_time is not None and event.timestamp < self.last_event_time:
            raise OrderingError(
                f"event time {event.timestamp} precedes book time {self.last_event_time}")
        self.last_event_time = event.timestamp
        et = event.event_type
        if et is EventType.CANCEL:
            if not self._cancel(event.order_id):
                logger.warning("cancel for unknown order id %s ignored", event.order_id)
            return []
        if et is EventType.LIMIT_PLACE:
            if event.order_id in self.orders:
                raise BookError(f"duplicate order id {event.order_id}")
            fills, rest = self._match(event.side, event.price, event.size)
            if rest > 0:
                self._insert(event.side, event.order_id, event.price, rest)
            return fills
        fills, _ = self._match(event.side, event.price, event.size)
        return fills

    def check_invariants(self) -> None:
        """Raise AssertionError on any structural violation."""
        bb, ba = self.best_bid, self.best_ask
        if bb is not None and ba is not None:
            assert bb < ba, f"crossed book {bb} >= {ba}"
        n = 0
        for side, levels, px in ((Side.BUY, self.bids, self._bid_px),
                                 (Side.SELL, self.asks, self._ask_px)):
            assert sorted(levels) == px, "price index out of sync"
            for p, lvl in levels.items():
                assert lvl.orders, f"empty level {p}"
                assert all(s > 0 for s in lvl.orders.values()), f"non-positive queue entry at {p}"
                assert lvl.size == sum(lvl.orders.values()), f"aggregate mismatch at {p}"
                for oid in lvl.orders:
                    assert self.orders.get(oid) == (side, p), f"order map mismatch {oid}"
                n += len(lvl.orders)
        assert n == len(self.orders), "dangling order ids"


def apply_event(book: BookState, event: OrderFlowEvent) -> BookState:
    """Functional-style wrapper: mutates ``book`` and returns it."""
    book.apply(event)
    return book


def mid_price(book: BookState) -> Decimal:
    bb, ba = book.best_bid, book.best_ask
    if bb is None or ba is None:
        raise NoMidError("mid price undefined for a one-sided book")
    return (bb + ba) / 2


def tick_quantize(price_change, tick_size) -> int:
    """Nearest whole number of ticks, ties away from zero."""
    tick = Decimal(str(tick_size))
    if tick <= 0:
        raise ValueError("tick_size must be positive")
    ratio = Decimal(str(price_change)) / tick
    return int(ratio.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def half_ticks_to_ticks(n):
    """Quantize a move given in half ticks (ties away from zero); works on arrays."""
    import numpy as np

    n = np.asarray(n)
    return (np.sign(n) * ((np.abs(n) + 1) // 2)).astype(np.int64)


# --------------------------------------------------------------------------
# synthetic feed


@dataclass(frozen=True)
class GeneratorConfig:
    """Clock rates for the synthetic feed.

    Limit orders arrive at distance ``i + 1`` ticks from the opposite best
    quote with rate ``*_limit_rates[i]``.  Market orders hit the opposite
    best level only.  Every resting order cancels at ``cancel_rate``.

    With ``signal_strength`` k > 0 the generator tracks an order-flow
    imbalance S in [-1, 1], an exponentially weighted average (weight
    ``signal_decay``) of signed events, and scales buy-pressure clocks by
    (1 + k g) and sell-pressure clocks by (1 - k g) with
    g = tanh(S / signal_scale).  A small scale saturates the coupling, so
    modest imbalances already tilt the flow and regimes persist.

    ``large_market_size_mean`` > 0 adds a hidden size regime that switches
    at ``size_regime_rate`` per second; while it is on, market orders draw
    from this larger mean, which makes volatility cluster.
    """

    buy_limit_rates: tuple[float, ...] = (0.6, 0.8, 1.0, 1.0, 1.0)
    sell_limit_rates: tuple[float, ...] = (0.6, 0.8, 1.0, 1.0, 1.0)
    buy_market_rate: float = 1.5
    sell_market_rate: float = 1.5
    cancel_rate: float = 0.4
    limit_size_mean: float = 2.0  # lots, geometric
    market_size_mean: float = 2.0
    large_market_size_mean: float = 0.0
    size_regime_rate: float = 0.0
    lot_size: str = "0.01"
    signal_strength: float = 0.0
    signal_decay: float = 0.05
    signal_scale: float = 1.0
    tick_size: str = "0.01"
    initial_price: str = "100.00"
    initial_depth: int = 2
    start_time_us: int = 1_700_000_000_000_000
    pair: Pair = Pair.PAIR_A
    seed: int = 0

    def __post_init__(self):
        if len(self.buy_limit_rates) != len(self.sell_limit_rates):
            raise ValueError("buy and sell limit rate vectors differ in length")
        if len(self.buy_limit_rates) < 1:
            raise ValueError("need at least one price level")
        rates = (*self.buy_limit_rates, *self.sell_limit_rates, self.buy_market_rate,
                 self.sell_market_rate, self.cancel_rate)
        if any(r < 0 or not math.isfinite(r) for r in rates):
            raise ValueError("rates must be finite and non-negative")
        if not 0 <= self.signal_strength < 1:
            raise ValueError("signal_strength must lie in [0, 1)")
        if not 0 < self.signal_decay <= 1:
            raise ValueError("signal_decay must lie in (0, 1]")
        if not self.signal_scale > 0:
            raise ValueError("signal_scale must be positive")
        if self.large_market_size_mean < 0 or self.size_regime_rate < 0:
            raise ValueError("size regime parameters must be non-negative")
        if self.limit_size_mean < 1 or self.market_size_mean < 1:
            raise ValueError("size means are in lots and must be >= 1")

    @property
    def n_levels(self) -> int:
        return len(self.buy_limit_rates)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        for k in ("buy_limit_rates", "sell_limit_rates"):
            if k in d:
                d[k] = tuple(float(x) for x in d[k])
        if "pair" in d and not isinstance(d["pair"], Pair):
            d["pair"] = _PAIR_NAMES[d["pair"]] if isinstance(d["pair"], str) else Pair(d["pair"])
        return cls(**d)


class OrderFlowGenerator:
    """Gillespie simulation of independent exponential order-flow clocks.

    Events are applied to an internal :class:`BookState`, so replaying the
    emitted stream reproduces the generator's book exactly.
    """

    def __init__(self, config: GeneratorConfig, book: BookState | None = None,
                 start_time_us: int | None = None, seed: int | None = None):
        self.config = config
        self.rng = random.Random(config.seed if seed is None else seed)
        self.tick = Decimal(config.tick_size)
        self.lot = Decimal(config.lot_size)
        self.time_us = config.start_time_us if start_time_us is None else start_time_us
        self.signal = 0.0
        self.large_regime = False
        self._next_id = 0
        self._live: list[str] = []
        self._live_pos: dict[str, int] = {}
        init_ticks = int(Decimal(config.initial_price) / self.tick)
        self._ref_bid = init_ticks - 1
        self._ref_ask = init_ticks + 1
        if book is None:
            self.book = BookState(self.tick)
            self._pending = self._seed_events()
        else:
            self.book = book.copy()
            self._pending = []
            for side in (Side.BUY, Side.SELL):
                for px in self.book.prices(side):
                    for oid in self.book.side_levels(side)[px].orders:
                        self._add_live(oid)
            if self.book.best_bid is not None:
                self._ref_bid = int(self.book.best_bid / self.tick)
            if self.book.best_ask is not None:
                self._ref_ask = int(self.book.best_ask / self.tick)
            if self.book.last_event_time is not None:
                self.time_us = max(self.time_us, self.book.last_event_time)

    # -- bookkeeping ------------------------------------------------------

    def _new_id(self) -> str:
        self._next_id += 1
        return f"{self.config.pair.name[-1].lower()}{self.config.seed}-{self._next_id}"

    def _add_live(self, oid: str) -> None:
        self._live_pos[oid] = len(self._live)
        self._live.append(oid)

    def _remove_live(self, oid: str) -> None:
        pos = self._live_pos.pop(oid)
        last = self._live.pop()
        if last != oid:
            self._live[pos] = last
            self._live_pos[last] = pos

    def _draw_size(self, mean_lots: float) -> Decimal:
        if mean_lots <= 1:
            k = 1
        else:
            p = 1.0 / mean_lots
            u = 1.0 - self.rng.random()
            k = 1 + int(math.log(u) / math.log1p(-p))
        return self.lot * k

    def _price(self, ticks: int) -> Decimal:
        return (self.tick * ticks).quantize(self.tick)

    def _seed_events(self) -> list[OrderFlowEvent]:
        cfg = self.config
        out = []
        for i in range(cfg.n_levels):
            for side in (Side.BUY, Side.SELL):
                for _ in range(cfg.initial_depth):
                    ticks = self._ref_bid - i if side is Side.BUY else self._ref_ask + i
                    if ticks <= 0:
                        continue
                    out.append(OrderFlowEvent(self.time_us, EventType.LIMIT_PLACE, side,
                                              self._price(ticks),
                                              self._draw_size(cfg.limit_size_mean),
                                              self._new_id(), cfg.pair))
        return out

    def _emit(self, ev: OrderFlowEvent) -> OrderFlowEvent:
        fills = self.book.apply(ev)
        if ev.event_type is EventType.LIMIT_PLACE and ev.order_id in self.book.orders:
            self._add_live(ev.order_id)
        elif ev.event_type is EventType.CANCEL:
            self._remove_live(ev.order_id)
        for f in fills:
            if f.maker_remaining == 0:
                self._remove_live(f.maker_id)
        if self.book.best_bid is not None:
            self._ref_bid = int(self.book.best_bid / self.tick)
        if self.book.best_ask is not None:
            self._ref_ask = int(self.book.best_ask / self.tick)
        sign = 1.0 if ev.side is Side.BUY else -1.0
        if ev.event_type is EventType.CANCEL:
            sign = -sign
        w = self.config.signal_decay
        self.signal = (1.0 - w) * self.signal + w * sign
        return ev

    # -- simulation -------------------------------------------------------

    def _clock_rates(self) -> tuple[list[float], float]:
        cfg = self.config
        k = cfg.signal_strength * math.tanh(self.signal / cfg.signal_scale)
        up, down = 1.0 + k, 1.0 - k
        rates = [r * up for r in cfg.buy_limit_rates]
        rates += [r * down for r in cfg.sell_limit_rates]
        rates.append(cfg.buy_market_rate * up if self.book.best_ask is not None else 0.0)
        rates.append(cfg.sell_market_rate * down if self.book.best_bid is not None else 0.0)
        rates.append(cfg.cancel_rate * len(self._live))
        rates.append(cfg.size_regime_rate if cfg.large_market_size_mean > 0 else 0.0)
        return rates, sum(rates)

    def _static_total(self) -> float:
        cfg = self.config
        return (sum(cfg.buy_limit_rates) + sum(cfg.sell_limit_rates) + cfg.buy_market_rate
                + cfg.sell_market_rate + cfg.cancel_rate)

    def events(self, duration: float) -> Iterator[OrderFlowEvent]:
        """Yield events for ``duration`` seconds of simulated time."""
        if self._static_total() <= 0:
            raise DegenerateConfigError("all generator rates are zero")
        cfg = self.config
        n_lv = cfg.n_levels
        end_us = self.time_us + int(round(duration * 1e6))
        while self._pending:
            yield self._emit(self._pending.pop(0))
        if duration <= 0:
            return
        t = float(self.time_us)
        while True:
            rates, total = self._clock_rates()
            if total <= 0:
                return
            t += self.rng.expovariate(total) * 1e6
            ts = int(round(t))
            if ts > end_us:
                self.time_us = end_us
                return
            self.time_us = ts
            u = self.rng.random() * total
            idx = 0
            acc = rates[0]
            while acc <= u and idx < len(rates) - 1:
                idx += 1
                acc += rates[idx]
            while rates[idx] == 0.0:  # guard against float edge on the last bucket
                idx -= 1
            if idx < 2 * n_lv:
                side = Side.BUY if idx < n_lv else Side.SELL
                lvl = idx % n_lv
                ticks = self._ref_ask - 1 - lvl if side is Side.BUY else self._ref_bid + 1 + lvl
                if ticks <= 0:
                    continue
                ev = OrderFlowEvent(ts, EventType.LIMIT_PLACE, side, self._price(ticks),
                                    self._draw_size(cfg.limit_size_mean), self._new_id(), cfg.pair)
            elif idx < 2 * n_lv + 2:
                side = Side.BUY if idx == 2 * n_lv else Side.SELL
                best = self.book.best_ask if side is Side.BUY else self.book.best_bid
                ev = OrderFlowEvent(ts, EventType.OPEN, side, best,
                                    self._draw_size(cfg.large_market_size_mean if self.large_regime
                                                    else cfg.market_size_mean),
                                    self._new_id(), cfg.pair)
            elif idx == 2 * n_lv + 3:
                self.large_regime = not self.large_regime
                continue
            else:
                oid = self._live[self.rng.randrange(len(self._live))]
                side, px = self.book.orders[oid]
                size = self.book.side_levels(side)[px].orders[oid]
                ev = OrderFlowEvent(ts, EventType.CANCEL, side, px, size, oid, cfg.pair)
            yield self._emit(ev)


def generate_stream(config: GeneratorConfig, duration: float) -> list[OrderFlowEvent]:
    """Generate ``duration`` seconds of synthetic order flow (seeded, deterministic)."""
    return list(OrderFlowGenerator(config).events(duration))


def replay(events: Iterable[OrderFlowEvent], book: BookState | None = None,
           tick_size: Decimal | str = "0.01") -> BookState:
    book = BookState(tick_size) if book is None else book
    for ev in events:
        book.apply(ev)
    return book


def split_pairs(events: Sequence[OrderFlowEvent]) -> dict[Pair, list[OrderFlowEvent]]:
    out: dict[Pair, list[OrderFlowEvent]] = {}
    for ev in events:
        out.setdefault(ev.pair, []).append(ev)
    return out
