from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobmix.features import (DatasetConfig, NormalizationStats, apply_normalization, build_dataset,
                             build_joint_dataset, event_table, fit_normalization, iter_books_at,
                             read_dataset, resolve_splits, split_by_date, write_dataset, export_csv)
from lobmix.orderflow import (BookState, EventType, GeneratorConfig, OrderFlowEvent, Pair, Side,
                              generate_stream, mid_price, replay, tick_quantize)

D = Decimal


@pytest.fixture(scope="module")
def stream():
    return generate_stream(GeneratorConfig(seed=3, signal_strength=0.3), 120.0)


def brute_force_targets(events, tau_us):
    """Mid move tau after each event by direct replay, None when unobservable.

    A one-sided book keeps the last defined mid.
    """
    mids = []
    book = BookState()
    last = None
    for e in events:
        book.apply(e)
        try:
            last = mid_price(book)
        except ValueError:
            pass
        mids.append(last)
    ts = [e.timestamp for e in events]
    out = []
    for i, t in enumerate(ts):
        if t + tau_us > ts[-1] or mids[i] is None:
            out.append(None)
            continue
        j = max(k for k in range(i, len(ts)) if ts[k] <= t + tau_us)
        out.append(tick_quantize(mids[j] - mids[i], "0.01"))
    return out


def test_targets_match_replay(stream):
    cfg = DatasetConfig(m=4, tau=2.0)
    s = build_dataset(stream[:600], cfg)
    want = brute_force_targets(stream[:600], cfg.tau_us)
    for a, y in zip(s.anchor_index, s.target):
        assert want[a] == y
    eligible = [i for i in range(cfg.m - 1, 600) if want[i] is not None]
    assert list(s.anchor_index) == eligible


def test_window_contents(stream):
    cfg = DatasetConfig(m=5, tau=1.0, stride=7)
    s = build_dataset(stream, cfg)
    i = 3
    a = s.anchor_index[i]
    win = stream[a - 4:a + 1]
    assert np.all(np.diff(s.anchor_index) % 7 == 0)
    gaps = [(win[k].timestamp - stream[a - 4 + k - 1].timestamp) / 1000 for k in range(5)]
    np.testing.assert_allclose(s.temporal[i, :, 0], gaps)
    np.testing.assert_allclose(s.temporal[i, :, 1], [float(e.size) for e in win])
    assert list(s.temporal[i, :, 2]) == [int(e.event_type) for e in win]
    assert list(s.temporal[i, :, 3]) == [int(e.side) for e in win]
    assert s.hour[i] == (win[-1].timestamp // 3_600_000_000) % 24
    assert s.pair[i] == 1
    assert s.price[i] == pytest.approx(float(mid_price(replay(stream[:a + 1]))))


def test_autoregressive_masking(stream):
    cfg = DatasetConfig(m=40, tau=0.5)
    s = build_dataset(stream, cfg)
    want = brute_force_targets(stream, cfg.tau_us)
    for i in range(0, len(s), 25):
        a = s.anchor_index[i]
        for k in range(cfg.m - 1):
            e = a - cfg.m + 1 + k
            realized = stream[e].timestamp + cfg.tau_us <= stream[a].timestamp and want[e] is not None
            assert s.ar_masked[i, k] == (not realized)
            assert s.autoregressive[i, k] == (want[e] if realized else 0)


def test_short_stream_gives_empty_dataset():
    s = build_dataset(generate_stream(GeneratorConfig(), 0.0)[:3], DatasetConfig(m=10))
    assert len(s) == 0 and s.temporal.shape == (0, 10, 5)


def test_config_validation():
    for bad in ({"m": 1}, {"tau": 0}, {"price_reference": "vwap"}, {"stride": 0},
                {"splits": ((0, 5), (4, 9), (9, 10))}):
        with pytest.raises(ValueError):
            DatasetConfig(**bad)


def test_resolve_splits_fractions():
    r = resolve_splits(DatasetConfig(split_fractions=(0.5, 0.25, 0.25)), 0, 99)
    assert r[0][0] == 0 and r[-1][1] == 100
    assert r[0][1] == r[1][0] and r[1][1] == r[2][0]
    assert r[0][1] == 50


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200))
def test_split_partition_is_disjoint_and_ordered(c1, c2):
    s = build_dataset(generate_stream(GeneratorConfig(seed=1), 30.0), DatasetConfig(m=3, tau=1.0))
    t0, t1 = int(s.anchor_ts[0]), int(s.anchor_ts[-1]) + 1
    b1 = t0 + (t1 - t0) * min(c1, c2) // 401
    b2 = t0 + (t1 - t0) * (max(c1, c2) + 200) // 401
    parts = split_by_date(s, ((t0, b1), (b1, b2), (b2, t1)))
    assert sum(len(p) for p in parts) == len(s)
    for p, q in zip(parts, parts[1:]):
        if len(p) and len(q):
            assert p.anchor_ts.max() < q.anchor_ts.min()


def test_normalization_uses_training_moments(stream):
    s = build_dataset(stream, DatasetConfig(m=20, tau=0.2))
    tr, va, te = split_by_date(s, resolve_splits(DatasetConfig(), int(s.anchor_ts[0]), int(s.anchor_ts[-1])))
    stats = fit_normalization(tr)
    n = apply_normalization(tr, stats)
    for k, c in enumerate((0, 1, 4)):
        assert n.temporal[..., c].mean() == pytest.approx(0.0, abs=1e-9)
        assert n.temporal[..., c].std() == pytest.approx(1.0, rel=1e-9)
    np.testing.assert_array_equal(n.temporal[..., 2:4], tr.temporal[..., 2:4])
    assert np.all(n.autoregressive[tr.ar_masked] == 0)
    with pytest.raises(ValueError):
        apply_normalization(n, stats)
    nv = apply_normalization(va, stats)
    np.testing.assert_allclose(nv.temporal[..., 0], (va.temporal[..., 0] - stats.mean[0]) / stats.scale[0])


def test_dataset_roundtrip(tmp_path, stream):
    cfg = DatasetConfig(m=6, tau=1.0, stride=3)
    s = build_dataset(stream, cfg)
    stats = fit_normalization(s)
    write_dataset(tmp_path / "d.lmx", s, cfg, stats, {"note": "x"})
    back, header = read_dataset(tmp_path / "d.lmx")
    for c in s.COLUMNS:
        np.testing.assert_array_equal(getattr(back, c), getattr(s, c))
    assert header["m"] == 6 and header["meta"] == {"note": "x"}
    assert NormalizationStats.from_dict(header["normalization"]) == stats
    raw = (tmp_path / "d.lmx").read_bytes()
    write_dataset(tmp_path / "d.lmx", s, cfg, stats, {"note": "x"})
    assert (tmp_path / "d.lmx").read_bytes() == raw
    export_csv(tmp_path / "d.csv", s, "demo")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "# demo" and len(lines) == len(s) + 2


def test_joint_dataset_interleaves_pairs():
    a = generate_stream(GeneratorConfig(seed=1), 20.0)
    b = generate_stream(GeneratorConfig(seed=2, pair=Pair.PAIR_B), 20.0)
    s = build_joint_dataset([a, b], DatasetConfig(m=3, tau=1.0))
    assert set(s.pair.tolist()) == {1, 2}
    assert np.all(np.diff(s.anchor_ts) >= 0)


def test_iter_books_at_matches_prefix_replay(stream):
    idx = [5, 50, 51, 300]
    for i, book in iter_books_at(stream, idx):
        assert book.snapshot() == replay(stream[:i + 1]).snapshot()


def test_last_trade_reference():
    ev = [OrderFlowEvent(0, EventType.LIMIT_PLACE, Side.SELL, D("10.00"), D(1), "s"),
          OrderFlowEvent(1, EventType.OPEN, Side.BUY, D("10.00"), D(1), "m")]
    t = event_table(ev, "0.01", "last_trade")
    assert list(t.ref_valid) == [False, True]
    assert t.ref_half[1] == 2000
