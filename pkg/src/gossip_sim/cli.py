"""``gossip-sim`` command line: ``graph``, ``run`` and ``bounds``.

Exit codes: 0 success, 2 invalid arguments or config, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from gossip_sim.errors import ConfigError, GossipError
from gossip_sim.graph import (
    build_cycle,
    build_random_geometric,
    default_rgg_radius,
    save_graph,
    spectral_summary,
)
from gossip_sim.harness import bounds_csv, bounds_table, load_config, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def cmd_graph(args: argparse.Namespace) -> int:
    if args.type == "cycle":
        g = build_cycle(args.n)
        extra = ""
    else:
        r = default_rgg_radius(args.n) if args.r is None else args.r
        g = build_random_geometric(args.n, r, args.seed)
        extra = f"r {r:.17g}\n"
    spec = spectral_summary(g)
    if args.out:
        save_graph(g, args.out)
    sys.stdout.write(
        f"n {g.n}\nm {g.m}\n{extra}"
        f"alpha {spec.alpha:.17g}\nbeta {spec.beta:.17g}\nd_min {g.d_min}\n"
    )
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.output_dir = Path(args.output_dir)
    written = run_experiment(cfg)
    print(f"wrote {len(written)} files to {cfg.output_dir}")
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    text = bounds_csv(*bounds_table(cfg))
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gossip-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", help="build a graph and print its spectral summary")
    g.add_argument("--type", choices=("cycle", "rgg"), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=float, default=None, help="RGG radius (default sqrt(ln n / n))")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="write the graph here (.json for the document form)")
    g.set_defaults(func=cmd_graph)

    r = sub.add_parser("run", help="run the experiments described by a config")
    r.add_argument("config")
    r.add_argument("--output-dir", help="override output_dir from the config")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="tabulate theoretical bounds for a config")
    b.add_argument("config")
    b.add_argument("--out", help="also write the table as CSV")
    b.set_defaults(func=cmd_bounds)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, GossipError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
