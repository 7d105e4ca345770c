import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superpoint.addr import ip_to_int
from superpoint.oracle import ExactDrMap
from superpoint.trace import (
    PlantedHost,
    PlantSpec,
    PlantSpecError,
    Trace,
    TraceFormatError,
    TraceRecord,
    WindowConfig,
    build_layout,
    expected_cardinality,
    generate,
    iter_records,
    normalize_direction,
    read_trace,
    slice_bounds,
    slice_partition,
    write_trace,
)


def small_spec(**kw):
    opts = dict(n_a_hosts=200, n_b_hosts=5000, pairs_per_slice=2000, pool_cap=64,
                slice_seconds=10, n_slices=3, seed=1)
    opts.update(kw)
    return PlantSpec(**opts)


def test_csv_line(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("1508562000,10.1.2.3,8.8.8.8\n")
    assert list(iter_records(p)) == [TraceRecord(1508562000, ip_to_int("10.1.2.3"), ip_to_int("8.8.8.8"))]


def test_empty_file(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    assert len(read_trace(p)) == 0


@pytest.mark.parametrize("line, where", [
    ("1,10.0.0.1\n", "line 2"),
    ("x,10.0.0.1,8.8.8.8\n", "line 2"),
    ("1,10.0.0.300,8.8.8.8\n", "line 2"),
    ("1,10.0.0.1,8.8.8.8\n", "line 2"),  # regression: 1 < 5
])
def test_csv_errors_are_positioned(tmp_path, line, where):
    p = tmp_path / "bad.csv"
    p.write_text("5,10.0.0.1,8.8.8.8\n" + line)
    with pytest.raises(TraceFormatError) as exc:
        read_trace(p)
    assert exc.value.position == where


def test_binary_errors(tmp_path):
    trace = Trace([1, 2, 3], [1, 2, 3], [4, 5, 6])
    p = tmp_path / "t.bin"
    write_trace(p, trace)
    data = p.read_bytes()
    p.write_bytes(data[:-1])
    with pytest.raises(TraceFormatError, match="truncated"):
        read_trace(p, "binary")
    p.write_bytes(b"SRLT\x07" + data[5:])
    with pytest.raises(TraceFormatError):
        read_trace(p)
    back = Trace([3, 2], [1, 1], [2, 2])
    write_trace(p, back)
    with pytest.raises(TraceFormatError, match="regression"):
        read_trace(p)


records = st.lists(st.tuples(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1),
                             st.integers(0, 2**32 - 1)), max_size=40)


@given(records)
@settings(max_examples=50, deadline=None)
def test_round_trip_both_formats(tmp_path_factory, recs):
    recs = sorted(recs)
    trace = Trace.from_records(recs)
    d = tmp_path_factory.mktemp("rt")
    write_trace(d / "t.bin", trace)
    write_trace(d / "t.csv", trace)
    a, b = read_trace(d / "t.bin"), read_trace(d / "t.csv")
    assert a == trace and b == trace
    write_trace(d / "u.bin", a)
    assert (d / "u.bin").read_bytes() == (d / "t.bin").read_bytes()
    write_trace(d / "u.csv", b)
    assert (d / "u.csv").read_bytes() == (d / "t.csv").read_bytes()


def test_slice_floor_and_empty_slices():
    ts = np.array([600, 899, 900, 1850])
    got = list(slice_bounds(ts, 300))
    assert got == [(0, 0, 2), (1, 2, 3), (2, 3, 3), (3, 3, 3), (4, 3, 4)]
    assert [s for s, *_ in slice_bounds(ts, 300, t0=0)][-1] == 6
    assert list(slice_bounds(np.array([], dtype=np.uint32), 300)) == []
    with pytest.raises(ValueError):
        list(slice_bounds(ts, 300, t0=900))


def test_window_config_presets():
    WindowConfig(slice_seconds=300, k=1, z=1)
    WindowConfig(slice_seconds=1, k=300, z=16)
    with pytest.raises(ValueError):
        WindowConfig(slice_seconds=1, k=300, z=8)
    with pytest.raises(ValueError):
        WindowConfig(slice_seconds=0)


def test_partition_pairs_and_trace():
    trace = Trace([0, 1, 2, 5], [1, 2, 3, 4], [9, 9, 9, 9])
    parts = list(slice_partition(trace, WindowConfig(slice_seconds=2)))
    assert [len(p) for _, p in parts] == [2, 1, 1]


def test_normalize_direction():
    a1, a2 = ip_to_int("10.0.0.1"), ip_to_int("10.0.0.2")
    b1, b2 = ip_to_int("8.8.8.8"), ip_to_int("1.1.1.1")
    trace = Trace([0, 0, 0, 0], [a1, b1, a1, b1], [b2, a2, a2, b2])
    pairs = normalize_direction(trace, "10.0.0.0/8")
    assert pairs.aip.tolist() == [a1, a2]
    assert pairs.bip.tolist() == [b2, b1]
    assert (pairs.flipped, pairs.dropped) == (1, 2)


def test_generate_deterministic(tmp_path):
    spec = small_spec(planted=[PlantedHost(300)])
    write_trace(tmp_path / "a.bin", generate(spec))
    write_trace(tmp_path / "b.bin", generate(spec))
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert generate(small_spec(seed=2)) != generate(small_spec(seed=1))


def test_generated_trace_is_well_formed():
    spec = small_spec(planted=[PlantedHost(100)])
    trace = generate(spec)
    assert (np.diff(trace.ts.astype(np.int64)) >= 0).all()
    pairs = normalize_direction(trace, spec.a_network)
    assert pairs.dropped == 0 and len(pairs) == len(trace)
    assert 0 < pairs.flipped < len(trace)


def _window_cards(trace, spec, k):
    pairs = normalize_direction(trace, spec.a_network)
    m = ExactDrMap(z=8)
    cfg = WindowConfig(slice_seconds=spec.slice_seconds, k=k, z=8)
    out = {}
    for s, sl in slice_partition(pairs, cfg, t0=spec.start_time):
        m.observe_many(sl.aip, sl.bip)
        if s >= k - 1:
            out[s - k + 1] = m.cardinalities(s - k + 1, k)
        m.advance()
    return out


def test_planted_host_exact_cardinality():
    spec = small_spec(planted=[PlantedHost(1024, address="10.9.9.9")], n_b_hosts=1 << 14)
    cards = _window_cards(generate(spec), spec, 1)
    for t in range(3):
        assert cards[t][ip_to_int("10.9.9.9")] == 1024


@given(st.integers(1, 400), st.integers(0, 5), st.integers(1, 4), st.integers(1, 5))
@settings(max_examples=25, deadline=None)
def test_planted_patterns_match_oracle(card, start, period, k):
    n_slices = 8
    stop = min(n_slices, start + 1 + period)
    plant = PlantedHost(card, start=start, stop=stop, period=period)
    spec = small_spec(planted=[plant], n_slices=n_slices, pairs_per_slice=100)
    layout = build_layout(spec)
    host = int(layout.planted[0])
    cards = _window_cards(generate(spec, layout), spec, k)
    for t, c in cards.items():
        assert c.get(host, 0) == expected_cardinality(plant, t, k, n_slices)


def test_full_period_window_sees_target():
    plant = PlantedHost(1000, period=4)
    for t in range(5):
        assert expected_cardinality(plant, t, 4, 10) == 1000
    assert expected_cardinality(plant, 0, 2, 10) == 500


def test_infeasible_spec():
    with pytest.raises(PlantSpecError):
        generate(small_spec(planted=[PlantedHost(6000)]))
    with pytest.raises(PlantSpecError):
        generate(small_spec(planted=[PlantedHost(10, start=3)]))
    with pytest.raises(PlantSpecError):
        PlantSpec.from_dict({"bogus": 1})


def test_background_only_has_no_super_points():
    spec = small_spec(pool_cap=100, n_slices=2)
    for cards in _window_cards(generate(spec), spec, 2).values():
        assert max(cards.values()) < 128
        assert not {a for a, c in cards.items() if c >= 128}


def test_spec_json_round_trip():
    spec = small_spec(planted=[PlantedHost(5, start=1, stop=2, period=1, address="10.0.0.7")])
    import json

    assert PlantSpec.from_dict(json.loads(spec.to_json())) == spec
