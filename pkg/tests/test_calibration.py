from dataclasses import replace

import pytest

from conftest import CONFIGS
from fogsim.calibration import CalibrationTarget, Knob, apply_knob, calibrate, measure
from fogsim.config import load_config
from fogsim.errors import CalibrationError, NonMonotone, Unbracketable
from fogsim.model import Role

BASE = load_config(CONFIGS / "arch_a.example")  # five robots, one server, 1 ms one-way links


def one_robot():
    return replace(BASE, workloads=(replace(BASE.workloads[0], robots=("r1",)),))


def service_target(goal=8.58, tol=0.01):
    return CalibrationTarget("fr@1", lambda p: apply_knob(one_robot(), "nodes.frs.service_time_ms", p["svc"]),
                             goal, tol)


def test_single_robot_service_fit():
    res = calibrate([service_target()], [Knob("svc", 0.0, 20.0)])
    # a 2 ms round trip leaves 6.58 ms for service
    assert res.params["svc"] == pytest.approx(6.58, abs=1e-3)
    assert abs(res.achieved["fr@1"] - 8.58) <= 0.01 * 8.58


def test_five_robots_servers_then_interval():
    def build(p):
        sc = apply_knob(BASE, "nodes.frs.service_time_ms", 6.58)
        sc = apply_knob(sc, "nodes.frs.parallel_servers", p["servers"])
        return apply_knob(sc, "workload.interval_ms", p["interval"])

    t = CalibrationTarget("fr@5", build, 19.51, 0.05)
    res = calibrate([t], [Knob("servers", 1, 5, integer=True), Knob("interval", 2.0, 200.0, target="fr@5")],
                    {"interval": 20.0})
    assert res.params["servers"] in range(1, 6)
    assert abs(res.achieved["fr@5"] - 19.51) <= 0.05 * 19.51


def test_fixed_point_needs_no_iterations():
    t = service_target()
    start = {"svc": 6.58}
    res = calibrate([t], [Knob("svc", 0.0, 20.0)], start)
    assert res.params["svc"] == 6.58
    assert res.iterations["svc"] <= 1


def test_unreachable_target():
    with pytest.raises(Unbracketable):
        calibrate([service_target(goal=100.0)], [Knob("svc", 0.0, 20.0)])


def test_flat_knob_is_reported():
    t = CalibrationTarget("flat", lambda p: apply_knob(one_robot(), "nodes.frs.cache_capacity", p["cap"]), 50.0)
    with pytest.raises(NonMonotone):
        calibrate([t], [Knob("cap", 8, 16)])


def test_miss_is_never_silent():
    # an integer knob can only land on whole servers; a 0.1% band is out of reach
    def build(p):
        return apply_knob(BASE, "nodes.frs.parallel_servers", p["n"])

    t = CalibrationTarget("tight", build, 40.0, 0.001)
    with pytest.raises(CalibrationError) as info:
        calibrate([t], [Knob("n", 1, 5, integer=True)])
    assert "tight" in str(info.value)
    assert info.value.result.params["n"] in range(1, 6)


def test_measure_uses_metric():
    t = CalibrationTarget("hit", lambda p: one_robot(), 8.0, metric="FrsCacheHit")
    assert measure(t, {}) == pytest.approx(8.5795, abs=1e-3)
    with pytest.raises(CalibrationError):
        measure(replace(t, metric="D2D"), {})


def test_apply_knob_forms():
    sc = apply_knob(BASE, "role.FRS.service_time_ms", 3)
    assert [n.service_time_ms for n in sc.nodes if n.role is Role.FRS] == [3.0]
    sc = apply_knob(BASE, "workload.interval_ms", 10.0)
    old, new = BASE.workloads[0], sc.workloads[0]
    assert new.arrival.interval_ms == 10.0
    assert new.duration_ms / new.arrival.interval_ms == pytest.approx(old.duration_ms / old.arrival.interval_ms)
    with pytest.raises(KeyError):
        apply_knob(BASE, "nodes.ghost.service_time_ms", 1)
    with pytest.raises(KeyError):
        apply_knob(BASE, "nodes.frs.position", 1)
    with pytest.raises(KeyError):
        apply_knob(BASE, "bogus", 1)


def test_target_validation():
    with pytest.raises(ValueError):
        CalibrationTarget("x", lambda p: None, 0.0)
    with pytest.raises(ValueError):
        Knob("k", 2, 1)
