import pytest

from oosplan.demand import (DemandStream, ServiceNeed, build_beta,
                            build_window, generate_deterministic,
                            generate_random, generate_stream, import_stream,
                            tool_flags, window_needs)
from oosplan.network import build_time_grid
from oosplan.scenario import CustomerSat

SATS = [CustomerSat("a", 10.0), CustomerSat("b", -50.0)]


def test_deterministic_spacing(multimodal):
    spec = multimodal.services["refueling"]
    needs = generate_deterministic(SATS, spec, horizon=9000.0, seed=1)
    per_sat = {}
    for n in needs:
        per_sat.setdefault(n.satellite, []).append(n.tau)
    for taus in per_sat.values():
        gaps = [b - a for a, b in zip(taus, taus[1:])]
        assert all(g == pytest.approx(spec.occurrence.interval) for g in gaps)
        assert 0.0 <= taus[0] < spec.occurrence.interval


def test_deterministic_reproducible(multimodal):
    spec = multimodal.services["refueling"]
    a = generate_deterministic(SATS, spec, horizon=9000.0, seed=3)
    b = generate_deterministic(SATS, spec, horizon=9000.0, seed=3)
    assert [(n.id, n.tau) for n in a] == [(n.id, n.tau) for n in b]
    c = generate_deterministic(SATS, spec, horizon=9000.0, seed=4)
    assert [n.tau for n in a] != [n.tau for n in c]


def test_random_poisson_mean(multimodal):
    spec = multimodal.services["repositioning"]
    sats = [CustomerSat(f"s{i}", float(i - 170)) for i in range(200)]
    needs = generate_random(sats, spec, horizon=50000.0, seed=5)
    rate = len(needs) / (200 * 50000.0)
    assert rate == pytest.approx(1.0 / spec.occurrence.interval, rel=0.1)


def test_kind_mismatch_raises(multimodal):
    with pytest.raises(ValueError):
        generate_deterministic(SATS, multimodal.services["repair"], 100.0, 0)
    with pytest.raises(ValueError):
        generate_random(SATS, multimodal.services["refueling"], 100.0, 0)


def _need(tau, duration=10):
    return ServiceNeed(id="n", satellite="a", service_type="x", tau=tau,
                       duration=duration, revenue=1.0)


def test_build_window():
    grid = build_time_grid(10, (2, 4), 30)
    built = build_window(_need(5.0), grid, 15.0)
    assert built.window == (10, 12, 14)
    assert built.tau_step == 10
    assert build_window(_need(29.0), grid, 0.5) is None
    assert build_window(_need(50.0), grid, 30.0) is None


def test_build_beta_coverage():
    grid = build_time_grid(10, (2, 4), 30)
    built = build_window(_need(0.0, duration=10), grid, 10.0)
    beta = build_beta(built, grid)
    assert beta[(0, 0)] == 1 and beta[(0, 4)] == 1
    assert (0, 10) not in beta
    assert beta[(4, 12)] == 1 and (4, 14) not in beta


def test_tool_flags(multimodal):
    flags = tool_flags("repair", multimodal)
    assert sum(flags.values()) == 1
    assert flags[multimodal.services["repair"].required_tool] == 1
    with pytest.raises(KeyError):
        tool_flags("nope", multimodal)


def test_stream_sorted_and_export(multimodal, tmp_path):
    stream = generate_stream(SATS, multimodal, horizon=5000.0, seed=11)
    taus = [n.tau for n in stream.needs]
    assert taus == sorted(taus)
    path = tmp_path / "needs.csv"
    stream.export_csv(path)
    again = import_stream(path, multimodal, horizon=5000.0, seed=11)
    assert [(n.id, n.tau, n.service_type) for n in again.needs] \
        == [(n.id, n.tau, n.service_type) for n in stream.needs]


def test_stream_rejects_unsorted():
    with pytest.raises(ValueError):
        DemandStream(needs=(_need(5.0), _need(1.0)), seed=0, horizon=10.0)


def test_window_needs_offset(multimodal):
    grid = build_time_grid(10, (2, 4), 30)
    spec = multimodal.services["refueling"]
    need = ServiceNeed(id="a/r/0", satellite="a", service_type="refueling",
                       tau=105.0, duration=spec.duration, revenue=spec.revenue)
    local = window_needs([need], multimodal, grid, day_offset=100.0)
    assert len(local) == 1
    assert local[0].tau == pytest.approx(5.0)
    assert local[0].window[0] == 10
    # fully in the past: dropped
    assert not window_needs([need], multimodal, grid, day_offset=300.0)
