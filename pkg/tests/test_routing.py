import pytest

from conftest import cloud, frs, req, robot
from fogsim.errors import AlreadySpawned, Uncovered
from fogsim.model import Constant, Position, Role
from fogsim.routing import (
    CaseA, CaseB, CaseC, CloudOnly, LinkDefault, Resolution, SurgeMonitor, Topology, assign_frs,
    check_surge, handover, plan_route, spawn_sfrs,
)

DEFAULTS = (
    LinkDefault((Role.ROBOT, Role.FRS), Constant(1.0)),
    LinkDefault((Role.FRS, Role.CLOUD), Constant(50.0)),
    LinkDefault((Role.FRS, Role.FRS), Constant(2.0)),
    LinkDefault((Role.ROBOT, Role.ROBOT), Constant(0.25)),
    LinkDefault((Role.ROBOT, Role.CLOUD), Constant(100.0)),
)


def topo(nodes, adjacency=(), assign=True):
    t = Topology(nodes, (), DEFAULTS, adjacency)
    if assign:
        t.assign_all()
    return t


def test_assign_nearest():
    t = topo([robot("r", 0, 0), frs("f1", 0, 10), frs("f2", 0, 40)], assign=False)
    assert assign_frs("r", t) == "f1"


def test_assign_tie_breaks_by_id():
    t = topo([robot("r", 0, 0), frs("b", 10, 0), frs("a", -10, 0)], assign=False)
    assert assign_frs("r", t) == "a"


def test_assign_uncovered():
    t = topo([robot("r", 0, 0), frs("f", 0, 100)], assign=False)
    with pytest.raises(Uncovered):
        assign_frs("r", t)


def test_case_a_hit():
    t = topo([robot("r"), frs("f"), cloud()])
    t.caches["f"].put("k")
    plan = plan_route(req(0, "r"), t, CaseA())
    assert [(a, b) for a, b, _ in plan.hops] == [("r", "f"), ("f", "r")]
    assert plan.resolution is Resolution.FRS_CACHE_HIT
    assert "cloud" not in plan.walk


def test_case_a_miss_goes_to_cloud_and_fills_on_return():
    t = topo([robot("r"), frs("f"), cloud()])
    plan = plan_route(req(0, "r", up=10, down=99), t, CaseA())
    assert plan.walk == ("r", "f", "cloud", "f", "r")
    assert [b for _, _, b in plan.hops] == [10, 10, 99, 99]
    assert plan.resolution is Resolution.CLOUD_FETCH
    assert (plan.fill_at, plan.fill_node) == (2, "f")
    assert "k" not in t.caches["f"]  # filled by the engine on the way back


def test_case_b_peer_in_range():
    t = topo([robot("r", 0, 0), robot("p", 3, 0, holds=("k",)), frs("f"), cloud()])
    plan = plan_route(req(0, "r"), t, CaseB(5.0, 2.0))
    assert plan.resolution is Resolution.D2D
    assert plan.walk == ("r", "p", "r")
    assert plan.lag_ms == 2.0


def test_case_b_picks_nearest_then_id():
    t = topo([robot("r", 0, 0), robot("q", 3, 0, holds=("k",)), robot("p", -3, 0, holds=("k",)),
              robot("far", 1, 1, holds=("other",)), frs("f"), cloud()])
    assert plan_route(req(0, "r"), t, CaseB(5.0)).walk == ("r", "p", "r")


def test_case_b_falls_back_outside_range():
    t = topo([robot("r", 0, 0), robot("p", 6, 0, holds=("k",)), frs("f"), cloud()])
    plan = plan_route(req(0, "r"), t, CaseB(5.0))
    assert plan.resolution is Resolution.CLOUD_FETCH
    assert plan.lag_ms == 0.0


def test_case_c_adjacent_hit_avoids_cloud():
    t = topo([robot("r", 0, 0), frs("f1", 0, 0), frs("f2", 100, 0), cloud()], adjacency=[("f1", "f2")])
    t.caches["f2"].put("k")
    plan = plan_route(req(0, "r"), t, CaseC((("f1", "f2"),)))
    assert plan.resolution is Resolution.ADJACENT_FRS_HIT
    assert plan.walk == ("r", "f1", "f2", "f1", "r")
    assert "cloud" not in plan.walk


def test_case_c_one_hop_only():
    nodes = [robot("r", 0, 0), frs("f1", 0, 0), frs("f2", 100, 0), frs("f3", 200, 0), cloud()]
    adj = (("f1", "f2"), ("f2", "f3"))
    t = topo(nodes, adjacency=adj)
    t.caches["f3"].put("k")
    assert plan_route(req(0, "r"), t, CaseC(adj)).resolution is Resolution.CLOUD_FETCH


def test_case_c_uses_lowest_id_holder():
    nodes = [robot("r", 100, 0), frs("f1", 0, 0), frs("f2", 100, 0), frs("f3", 200, 0), cloud()]
    adj = (("f2", "f3"), ("f1", "f2"))
    t = topo(nodes, adjacency=adj)
    t.caches["f1"].put("k")
    t.caches["f3"].put("k")
    assert plan_route(req(0, "r"), t, CaseC(adj)).walk[2] == "f1"


def test_cloud_only_route():
    t = Topology([robot("r"), cloud("c")], (), DEFAULTS)
    plan = plan_route(req(0, "r"), t, CloudOnly())
    assert plan.walk == ("r", "c", "r")
    assert plan.serving_nodes == ("c",)


def test_hit_and_d2d_never_touch_cloud():
    t = topo([robot("r", 0, 0), robot("p", 1, 0, holds=("a",)), frs("f"), cloud()])
    t.caches["f"].put("b")
    for key in ("a", "b"):
        plan = plan_route(req(0, "r", key=key), t, CaseB(5.0))
        assert plan.resolution in (Resolution.D2D, Resolution.FRS_CACHE_HIT)
        assert not any(t.nodes[n].role is Role.CLOUD for n in plan.walk)


def test_case_policy_validation():
    with pytest.raises(ValueError):
        CaseB(-1.0)
    with pytest.raises(ValueError):
        CaseC((("a", "a"),))


def test_surge_examples():
    m = SurgeMonitor(1000.0, 10.0)
    assert check_surge(m, [1000.0 + i for i in range(15)], 1500.0)
    assert not check_surge(m, [], 1500.0)
    assert not check_surge(m, [1000.0 + i for i in range(10)], 1500.0)
    # arrivals at exactly now - window fall outside the window
    assert not check_surge(m, [500.0] * 11, 1500.0)


def _surge_topology(n):
    nodes = [frs("f", 0, 0, radius=100)]
    nodes += [robot(f"r{i}", float(i + 1), 0.0) for i in range(n)]
    return topo(nodes + [cloud()])


def test_spawn_takes_farthest_half():
    t = _surge_topology(8)
    spawn_sfrs("f", SurgeMonitor(reassignment_fraction=0.5), t)
    sub = t.spawned["f"]
    assert t.nodes[sub].role is Role.SUBFRS
    assert t.robots_of(sub) == ["r4", "r5", "r6", "r7"]
    assert t.robots_of("f") == ["r0", "r1", "r2", "r3"]
    assert t.has_link(sub, "cloud") and t.has_link(sub, "f")
    assert t.nodes[sub].position == Position(6.5, 0.0)


def test_spawn_rounds_up():
    t = _surge_topology(1)
    spawn_sfrs("f", SurgeMonitor(reassignment_fraction=0.5), t)
    assert t.robots_of(t.spawned["f"]) == ["r0"]


def test_second_spawn_rejected():
    t = _surge_topology(4)
    spawn_sfrs("f", SurgeMonitor(), t)
    with pytest.raises(AlreadySpawned):
        spawn_sfrs("f", SurgeMonitor(), t)


def _two_sites():
    return topo([robot("r", 0, 0), frs("a", 0, 0), frs("b", 80, 0), cloud()])


def test_handover_to_neighbour_after_leaving_coverage():
    t = _two_sites()
    t.positions["r"] = Position(70, 0)
    assert handover("r", "a", t) == "b"


def test_handover_hysteresis_keeps_current_server():
    t = _two_sites()
    t.positions["r"] = Position(42, 0)  # nearer b by 4 m
    assert handover("r", "a", t, hysteresis_m=5) is None
    t.positions["r"] = Position(43, 0)  # nearer b by 6 m
    assert handover("r", "a", t, hysteresis_m=5) == "b"


def test_handover_out_of_all_coverage():
    t = _two_sites()
    t.positions["r"] = Position(0, 500)
    with pytest.raises(Uncovered):
        handover("r", "a", t)
