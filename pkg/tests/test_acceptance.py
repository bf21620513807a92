"""Acceptance checks. Each test prints one PASS/FAIL line, then asserts it."""

import hashlib
import time

import pytest

import oracles
from conftest import CONFIGS
from fogsim.cli import main
from fogsim.experiments import (
    AB_TARGETS, C_CLOUD_TARGETS, C_FR_TARGET, coefficient_of_variation, run_experiment_ab, run_experiment_c,
)
from fogsim.probe import DATAGRAM, EchoServer, ProbeConfig, probe
from test_probe import closed_port

CLOUD = ("Sydney", "Seoul", "SaoPaulo")


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, detail
    return emit


def _series(table, target, key):
    rows = [r for r in table.rows if r.target == target]
    return [getattr(r, key) for r in rows], [r.stats.mean_ms for r in rows]


def _near(value, goal, tol):
    return abs(value - goal) <= tol * goal


def test_robot_sweep_endpoints(verdict):
    t0 = time.perf_counter()
    table = run_experiment_ab()
    elapsed = time.perf_counter() - t0
    misses, parts = [], []
    for column, (lo, hi) in AB_TARGETS.items():
        tol = 0.01 if column in CLOUD else 0.05
        _, means = _series(table, column, "robots")
        parts.append(f"{column} {means[0]:.2f}->{means[-1]:.2f}")
        if not (_near(means[0], lo, tol) and _near(means[-1], hi, tol)):
            misses.append(column)
    ok = not misses and elapsed < 10.0
    verdict("robot sweep endpoints (fog/D2D ±5%, cloud ±1%, <10 s)", ok,
            f"{'; '.join(parts)} ms; {elapsed:.1f} s" + (f"; missed {misses}" if misses else ""))


def test_server_sweep(verdict):
    t0 = time.perf_counter()
    table = run_experiment_c()
    elapsed = time.perf_counter() - t0
    counts, fr = _series(table, "FR", "frs_count")
    cv = coefficient_of_variation(fr)
    problems = []
    if counts != [2, 5, 10, 15, 20]:
        problems.append(f"server counts {counts}")
    if cv >= 0.01 or not all(_near(m, C_FR_TARGET, 0.05) for m in fr):
        problems.append("fog latency not flat at 10.73")
    parts = [f"FR {min(fr):.2f}-{max(fr):.2f} cv {cv:.2e}"]
    for region, (lo, hi) in C_CLOUD_TARGETS.items():
        _, means = _series(table, region, "frs_count")
        parts.append(f"{region} {means[0]:.2f}->{means[-1]:.2f}")
        if not all(b > a for a, b in zip(means, means[1:])):
            problems.append(f"{region} not strictly increasing")
        if not (_near(means[0], lo, 0.10) and _near(means[-1], hi, 0.10)):
            problems.append(f"{region} endpoints")
    if elapsed >= 30.0:
        problems.append("too slow")
    verdict("server sweep (fog cv <1% at 10.73 ±5%, cloud rising, endpoints ±10%, <30 s)", not problems,
            f"{'; '.join(parts)} ms; {elapsed:.1f} s" + (f"; {problems}" if problems else ""))


def test_determinism(verdict, tmp_path, capsys):
    runs = {
        "simulate arch_a": ["simulate", "--config", str(CONFIGS / "arch_a.example")],
        "simulate arch_b": ["simulate", "--config", str(CONFIGS / "arch_b.example")],
        "simulate arch_c": ["simulate", "--config", str(CONFIGS / "arch_c.example")],
        "simulate rescue": ["simulate", "--config", str(CONFIGS / "rescue.example")],
        "experiment ab": ["experiment", "--kind", "ab"],
        "experiment c": ["experiment", "--kind", "c"],
        "experiment rescue": ["experiment", "--kind", "rescue"],
    }
    unstable = []
    for name, argv in runs.items():
        digests = set()
        for i in range(3):
            out = tmp_path / f"{name.replace(' ', '_')}_{i}.csv"
            assert main(argv + ["--out", str(out)]) == 0
            digests.add(hashlib.sha256(out.read_bytes()).hexdigest())
        if len(digests) != 1:
            unstable.append(name)
    capsys.readouterr()
    verdict("determinism (3 runs, byte-identical CSV)", not unstable,
            f"{len(runs) - len(unstable)}/{len(runs)} commands stable" + (f"; unstable {unstable}" if unstable else ""))


def test_oracle_equivalence(verdict):
    bad, first = oracles.oracle_violations(50)
    verdict("oracle equivalence (50 scenarios, exact)", bad == 0, f"{bad} mismatches" + (f"; {first}" if first else ""))


def test_conservation_and_fifo(verdict):
    bad, first = oracles.conservation_fifo_violations(1000)
    verdict("conservation and FIFO (1000 scenarios)", bad == 0, f"{bad} violations" + (f"; {first}" if first else ""))


def test_policy_degeneration(verdict):
    bad, first = oracles.degeneration_violations(1000)
    verdict("policy degeneration (B range 0, C no adjacency == A; 1000 requests)", bad == 0,
            f"{bad} differing plans" + (f"; {first}" if first else ""))


def test_lru_cache(verdict):
    bad, first = oracles.lru_violations(10_000)
    verdict("LRU cache (10000 ops vs recency list)", bad == 0, f"{bad} mismatches" + (f"; {first}" if first else ""))


def test_probe(verdict):
    t0 = time.perf_counter()
    with EchoServer(0, DATAGRAM, delay_ms=50) as srv:
        res = probe(ProbeConfig("127.0.0.1", srv.port, DATAGRAM, count=20))
    dead = probe(ProbeConfig("127.0.0.1", closed_port(), DATAGRAM, count=3, timeout_ms=100))
    elapsed = time.perf_counter() - t0
    mean = res.stats.mean_ms if res.stats.count else float("nan")
    absent = dead.stats.count == 0 and dead.stats.mean_ms is None and dead.stats.min_ms is None
    ok = res.lost == 0 and 50.0 <= mean <= 70.0 and dead.lost == 3 and absent and elapsed < 15.0
    verdict("probe (50 ms echo mean in [50, 70], lost 0; dead port all lost; <15 s)", ok,
            f"mean {mean:.2f} ms, lost {res.lost}; dead port lost {dead.lost}/3, "
            f"stats {'absent' if absent else 'present'}; {elapsed:.1f} s")


def test_latency_scaling(verdict):
    bad, first = oracles.scaling_violations(200, k=7.0, rel_tol=1e-12)
    verdict("latency scaling (k=7, rel tol 1e-12, 200 scenarios)", bad == 0,
            f"{bad} violations" + (f"; {first}" if first else ""))
