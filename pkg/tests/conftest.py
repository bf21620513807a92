import random
from pathlib import Path

import pytest

from fogsim.model import Constant, NodeSpec, Position, Request, Role
from fogsim.routing import CaseA, LinkDefault
from fogsim.scenario import Scenario

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


def robot(rid, x=0.0, y=0.0, **kw):
    return NodeSpec(rid, Role.ROBOT, Position(x, y), **kw)


def frs(fid, x=0.0, y=0.0, service=0.0, servers=1, capacity=4, radius=50.0):
    return NodeSpec(fid, Role.FRS, Position(x, y), service_time_ms=service, parallel_servers=servers,
                    cache_capacity=capacity, coverage_radius_m=radius)


def cloud(cid="cloud", service=0.0, servers=1):
    return NodeSpec(cid, Role.CLOUD, service_time_ms=service, parallel_servers=servers)


def req(i, origin, key="k", t=0.0, deadline=None, up=64, down=64):
    return Request(i, origin, key, up, down, t, deadline)


def simple_scenario(requests, service=5.0, one_way=1.0, servers=1, prewarm=True, **kw):
    """One robot per distinct origin, one FRS at the origin, one cloud."""
    origins = sorted({r.origin for r in requests}) or ["r1"]
    nodes = tuple(robot(o, float(i), 0.0) for i, o in enumerate(origins))
    nodes += (frs("frs", service=service, servers=servers), cloud())
    return Scenario(
        nodes=nodes, links=(), policy=kw.pop("policy", CaseA()), seed=kw.pop("seed", 1),
        requests=tuple(requests), prewarm=prewarm,
        link_defaults=(
            LinkDefault((Role.ROBOT, Role.FRS), Constant(one_way)),
            LinkDefault((Role.FRS, Role.CLOUD), Constant(kw.pop("cloud_one_way", 50.0))),
        ),
        **kw,
    )


@pytest.fixture
def rnd():
    return random.Random(12345)
