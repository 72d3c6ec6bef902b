import pytest

from harvestsim import analysis
from harvestsim.harness import RunConfig, run
from harvestsim.harvest import HarvestParams


def harvest(**kw):
    return run(RunConfig(protocol="harvest", **kw))


def test_params_validation():
    with pytest.raises(ValueError):
        HarvestParams(colors=3, concurrency=2)


def test_seven_node_line_delivers_everything():
    res = harvest(topology="line", n=6, packets=10)
    assert res.ok and not res.censored
    assert res.report.delivery_ratio == 1.0
    got = analysis.base_receptions(res.trace)
    assert sorted((o, s) for _, o, s in got) == [(o, s) for o in range(1, 7) for s in range(10)]


def test_single_sender_sends_one_packet_per_period():
    res = harvest(topology="grid:1x2", n=1, packets=100)
    assert res.ok and res.report.delivered == 100
    times = [t for t, _, _ in analysis.base_receptions(res.trace)]
    assert {b - a for a, b in zip(times, times[1:])} == {124}
    assert res.report.convergence_samples == 4


def test_zero_packets():
    res = harvest(topology="grid:1x3", n=2, packets=0)
    assert res.ok and res.report.delivered == 0
    assert res.report.convergence_samples == 0
    assert res.report.latency_ms is None


def test_colours_and_children_bounded():
    res = harvest(topology="grid:4x5", n=19, packets=20, seed=3)
    assert res.ok
    assert all(nd.max_children <= 2 for nd in res.nodes)
    assert all(nd.max_buffered <= 1 for nd in res.nodes)
    claims = [r for r in res.trace.rows if r[2] == "color_claim"]
    assert claims and {r[4] for r in claims} <= {0, 1, 2, 3}
    assert analysis.fan_in(res.trace) <= 2


def test_alternating_children_with_one_buffer():
    # two arms off the base: each arm's first node has one child; the base alternates
    res = harvest(topology="line", n=4, packets=20)
    assert res.ok and res.report.delivery_ratio == 1.0
    counts = analysis.steady_state_window(res.trace, trim=8)
    assert counts and max(counts) <= 2


def test_larger_buffers_do_not_break_bounds():
    res = harvest(topology="grid:3x4", n=11, packets=20, buffers=3)
    assert res.ok and res.report.delivery_ratio == 1.0
    assert max(nd.max_buffered for nd in res.nodes) <= 3


def test_done_nodes_sleep_permanently():
    res = harvest(topology="grid:3x3", n=8, packets=10)
    for i in range(1, 9):
        rows = [r for r in res.trace.rows if r[1] == i and r[2] in ("sleep", "wake")]
        assert rows and rows[-1][2] == "sleep"
        assert not [r for r in res.trace.rows if r[1] == i and r[2] == "tx" and r[0] > rows[-1][0]]


def test_lossy_run_never_duplicates_and_stays_d2_valid():
    res = harvest(topology="lossy21", n=20, loss_model="lossy21", packets=30, seed=2)
    assert res.ok, (res.violations, res.d2_violations[:3])
    got = [(o, s) for _, o, s in analysis.base_receptions(res.trace)]
    assert len(got) == len(set(got))
