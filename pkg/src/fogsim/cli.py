"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 config or input error, 3 runtime error
(including a probe that got no replies at all), 4 calibration failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .calibration import CalibrationTarget, Knob, apply_knob, calibrate
from .config import load_config
from .engine import run
from .errors import CalibrationError, ConfigError, FormatError, ProbeError
from .experiments import (
    ABConfig, CConfig, ResultTable, Row, deadline_met_fraction, resolution_mix,
    run_experiment_ab, run_experiment_c, run_rescue,
)
from .probe import DATAGRAM, STREAM, EchoServer, ProbeConfig, probe
from .report import render
from .rng import ALGORITHM
from .routing import POLICY_NAMES

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CALIBRATION = 0, 1, 2, 3, 4

INTEGER_KNOBS = ("parallel_servers", "cache_capacity")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def simulate_table(scenario) -> ResultTable:
    trace, stats = run(scenario)
    arch = POLICY_NAMES[type(scenario.policy)]
    n_fog = sum(1 for n in scenario.nodes if n.role.is_fog)
    rows = [
        Row("simulate", arch, n_fog, len(scenario.robots()), target, stats[target],
            resolution_mix(trace), deadline_met_fraction(trace), scenario.seed)
        for target in stats
    ]
    meta = {"seed": str(scenario.seed), "config_hash": trace.config_hash, "prng": ALGORITHM}
    return ResultTable(rows, meta), trace


def cmd_simulate(args):
    scenario = load_config(args.config)
    table, trace = simulate_table(scenario)
    _write(args.out, table.to_csv())
    if args.trace:
        _write(args.trace, trace.serialize())
    return EXIT_OK


def _pairs(values):
    out = []
    for chunk in values:
        for item in chunk.split(","):
            if not item:
                continue
            name, _, rhs = item.partition("=")
            if not rhs:
                raise ValueError(f"expected NAME=VALUE, got {item!r}")
            out.append((name, rhs))
    return out


def cmd_calibrate(args):
    scenario = load_config(args.config)
    try:
        target_specs = [(label, float(ms)) for label, ms in _pairs(args.target)]
        knob_specs = []
        for name, rng in _pairs(args.knob):
            lo, _, hi = rng.partition(":")
            knob_specs.append(Knob(name, float(lo), float(hi), integer=name.endswith(INTEGER_KNOBS)))
    except ValueError as exc:
        print(f"calibrate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not target_specs or not knob_specs:
        print("calibrate: need at least one --target and one --knob", file=sys.stderr)
        return EXIT_USAGE

    def build(params):
        sc = scenario
        for name, value in params.items():
            sc = apply_knob(sc, name, value)
        return sc

    targets = [CalibrationTarget(label, build, ms, args.tolerance, metric=label) for label, ms in target_specs]
    try:
        for k in knob_specs:
            apply_knob(scenario, k.name, k.lo)  # reject unknown knobs before any run
        result = calibrate(targets, knob_specs)
    except KeyError as exc:
        print(f"calibrate: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    for name, value in result.params.items():
        print(f"{name} = {value:.6f}  ({result.iterations.get(name, 0)} iterations)")
    for label, ms in result.achieved.items():
        print(f"{label}: {ms:.4f} ms")
    return EXIT_OK


def cmd_experiment(args):
    if args.kind == "ab":
        table = run_experiment_ab(ABConfig(seed=args.seed, stochastic=args.stochastic))
    elif args.kind == "c":
        table = run_experiment_c(CConfig(seed=args.seed, stochastic=args.stochastic))
    else:
        table = run_rescue(seed=args.seed if args.seed_given else 7)
    _write(args.out, table.to_csv())
    return EXIT_OK


def cmd_probe(args):
    cfg = ProbeConfig(args.host, args.port, STREAM if args.stream else DATAGRAM, args.count,
                      args.size, args.interval, args.timeout)
    result = probe(cfg)
    s = result.stats
    print(f"--- {args.host}:{args.port} {cfg.transport} probe ---")
    print(f"{cfg.count} sent, {cfg.count - result.lost} received, {result.lost} lost")
    if s.count:
        print(f"rtt min/mean/median/p95/max = {s.min_ms:.3f}/{s.mean_ms:.3f}/"
              f"{s.median_ms:.3f}/{s.p95_ms:.3f}/{s.max_ms:.3f} ms")
        return EXIT_OK
    print("no replies")
    return EXIT_RUNTIME


def cmd_echo(args):
    server = EchoServer(args.port, STREAM if args.stream else DATAGRAM, args.delay, args.host)
    print(f"echo {server.transport} on {server.address[0]}:{server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server.server_close()
    return EXIT_OK


def cmd_report(args):
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read {args.input}: {exc}") from None
    sys.stdout.write(render(text))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="fogsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one scenario file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--trace")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="fit scenario knobs to target mean latencies")
    c.add_argument("--config", required=True)
    c.add_argument("--target", action="append", required=True, help="LABEL=MS[,...]; LABEL is a stats key such as all")
    c.add_argument("--knob", action="append", required=True, help="NAME=LO:HI[,...]")
    c.add_argument("--tolerance", type=float, default=0.05)
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("experiment", help="calibrate and run a paper experiment")
    e.add_argument("--kind", choices=("ab", "c", "rescue"), required=True)
    e.add_argument("--out", default="-")
    e.add_argument("--seed", type=int)
    e.add_argument("--stochastic", action="store_true", help="sample cloud links from measured min/avg/max")
    e.set_defaults(func=cmd_experiment)

    pr = sub.add_parser("probe", help="measure round trips to an echo endpoint")
    pr.add_argument("--host", required=True)
    pr.add_argument("--port", type=int, required=True)
    pr.add_argument("--count", type=int, default=20)
    pr.add_argument("--size", type=int, default=64)
    pr.add_argument("--interval", type=float, default=200.0)
    pr.add_argument("--timeout", type=float, default=1000.0)
    pr.add_argument("--stream", action="store_true")
    pr.set_defaults(func=cmd_probe)

    ec = sub.add_parser("echo", help="run the echo responder")
    ec.add_argument("--port", type=int, required=True)
    ec.add_argument("--host", default="0.0.0.0")
    ec.add_argument("--delay", type=float, default=0.0)
    ec.add_argument("--stream", action="store_true")
    ec.set_defaults(func=cmd_echo)

    r = sub.add_parser("report", help="print a result CSV as tables")
    r.add_argument("--in", dest="input", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) == "experiment":
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = 2020
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProbeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
