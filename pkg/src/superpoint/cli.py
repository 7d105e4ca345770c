"""Command-line entry point: generate / detect / oracle / evaluate / prob / bench.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import probmodel
from .config import ConfigError, RunConfig, workers_from_env
from .estimators import compute_tau, weight_threshold
from .oracle import truth_lines
from .pipeline import (
    Detector,
    UnmatchedWindowError,
    detect,
    evaluate,
    exact_windows,
    read_reports,
    read_truth,
    scores_csv,
    scores_table,
)
from .trace import (
    PlantSpecError,
    TraceFormatError,
    WindowConfig,
    generate,
    load_plant_spec,
    normalize_direction,
    read_trace,
    slice_partition,
    write_trace,
)

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("superpoint")


class InputError(Exception):
    pass


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--preset", choices=["discrete", "sliding"])
    for name, typ in [("theta", int), ("u", int), ("v", int), ("g", int), ("g-prime", int),
                      ("z", int), ("k", int), ("rho", float), ("slice-seconds", int),
                      ("t0", int), ("seed", int), ("workers", int), ("oracle-pair-limit", int)]:
        p.add_argument(f"--{name}", type=typ, default=None)
    p.add_argument("--a-network", default=None, help="CIDR of the monitored network")


def _config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    if args.preset:
        data["preset"] = args.preset
    cfg = RunConfig.from_dict(data)
    cfg = cfg.with_overrides(workers=workers_from_env())
    cfg = cfg.with_overrides(
        theta=args.theta, u=args.u, v=args.v, g=args.g, g_prime=args.g_prime, z=args.z,
        k=args.k, rho=args.rho, slice_seconds=args.slice_seconds, t0=args.t0,
        seed=args.seed, workers=args.workers, a_network=args.a_network,
        oracle_pair_limit=args.oracle_pair_limit,
    )
    return cfg.validate()


def _read(path):
    try:
        return read_trace(path)
    except OSError as exc:
        raise InputError(f"cannot read trace {path}: {exc}") from None


def cmd_generate(args) -> int:
    try:
        spec = load_plant_spec(args.spec)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        raise ConfigError(f"bad plant spec {args.spec}: {exc}") from None
    if args.seed is not None:
        spec.seed = args.seed
    trace = generate(spec)
    write_trace(args.out, trace, args.format)
    log.info("wrote %d records to %s", len(trace), args.out)
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    trace = _read(args.trace)
    timings = open(args.timings, "w") if args.timings else None
    try:
        with open(args.report, "w", newline="\n") as out:
            if timings:
                timings.write("window_t,c_u,c_e,candidates\n")
            for rep in detect(trace, cfg):
                out.write(rep.to_json() + "\n")
                if timings:
                    timings.write(f"{rep.t},{rep.c_u:.6f},{rep.c_e:.6f},{len(rep.entries)}\n")
    finally:
        if timings:
            timings.close()
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args)
    trace = _read(args.trace)
    if len(trace) > cfg.oracle_pair_limit:
        raise ConfigError(
            f"trace has {len(trace)} pairs, above the oracle guard {cfg.oracle_pair_limit}"
        )
    min_card = cfg.theta if args.min_cardinality is None else args.min_cardinality
    with open(args.truth, "w", newline="\n") as out:
        for t, cards in exact_windows(trace, cfg):
            for line in truth_lines(t, cards, min_card):
                out.write(line + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        with open(args.report) as fh:
            reports = read_reports(fh)
        with open(args.truth) as fh:
            truth = read_truth(fh)
    except OSError as exc:
        raise InputError(str(exc)) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    try:
        scores = evaluate(reports, truth, args.theta)
    except UnmatchedWindowError as exc:
        raise InputError(str(exc)) from None
    if args.csv:
        Path(args.csv).write_text(scores_csv(scores))
    print(scores_table(scores))
    return EXIT_OK


def cmd_prob(args) -> int:
    tau = compute_tau(args.theta, args.g) if args.tau is None else args.tau
    w = weight_threshold(args.rho, args.g) if args.w is None else args.w
    lines = ["n,detection_probability"]
    for n in range(args.n_min, args.n_max + 1, args.step):
        lines.append(f"{n},{probmodel.pr_weight_at_least(n, args.g, tau, w):.12g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    trace = _read(args.trace)
    pairs = normalize_direction(trace, cfg.a_network)
    det = Detector(cfg)
    c_u, c_e, c_s, n_reports = 0.0, 0.0, 0.0, 0
    wall = time.perf_counter()
    for _, sl in slice_partition(pairs, WindowConfig(cfg.slice_seconds, cfg.k, cfg.z), cfg.t0):
        t_slice = time.perf_counter()
        rep = det.process_slice(sl.aip, sl.bip)
        total = time.perf_counter() - t_slice
        if rep is not None:
            c_u += rep.c_u
            c_e += rep.c_e
            n_reports += 1
            c_s += total - rep.c_u - rep.c_e
    wall = time.perf_counter() - wall
    n = len(pairs)
    result = {
        "pairs": n,
        "slices": det.slice_id,
        "workers": cfg.workers,
        "wall_seconds": wall,
        "pairs_per_second": n / wall if wall > 0 else float("inf"),
        "scan_pairs_per_second": n / c_u if c_u > 0 else float("inf"),
        "mean_c_u": c_u / max(1, n_reports),
        "mean_c_e": c_e / max(1, n_reports),
        "mean_slide": c_s / max(1, n_reports),
    }
    print(json.dumps(result, indent=2))
    floor = 1e6
    print(f"pairs/sec {result['pairs_per_second']:.3g} "
          f"({'above' if result['pairs_per_second'] >= floor else 'below'} the 1e6 reference, not enforced)",
          file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superpoint", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a trace from a plant spec")
    p.add_argument("spec")
    p.add_argument("out")
    p.add_argument("--format", choices=["csv", "binary"])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="run sliding super point detection")
    p.add_argument("trace")
    p.add_argument("report", help="JSON-lines window reports")
    p.add_argument("--timings", help="optional CSV of per-window C_u/C_e")
    _add_config_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("oracle", help="exact per-window cardinalities")
    p.add_argument("trace")
    p.add_argument("truth")
    p.add_argument("--min-cardinality", type=int,
                   help="only emit hosts at or above this cardinality (default: theta)")
    _add_config_args(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("evaluate", help="FPR/FNR/TFR of a report against truth")
    p.add_argument("report")
    p.add_argument("truth")
    p.add_argument("--theta", type=int, default=1024)
    p.add_argument("--csv", help="write per-window metrics CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("prob", help="detection probability calibration table")
    p.add_argument("--theta", type=int, default=1024)
    p.add_argument("--g", type=int, default=8)
    p.add_argument("--tau", type=int)
    p.add_argument("--w", type=int, help="weight threshold (default ceil(rho*g))")
    p.add_argument("--rho", type=float, default=RunConfig.rho)
    p.add_argument("--n-min", type=int, default=128)
    p.add_argument("--n-max", type=int, default=4096)
    p.add_argument("--step", type=int, default=128)
    p.add_argument("--out")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("bench", help="throughput and per-phase timings")
    p.add_argument("trace")
    _add_config_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PlantSpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, TraceFormatError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssertionError, RuntimeError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
