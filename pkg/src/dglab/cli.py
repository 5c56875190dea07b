"""Command-line entry point ``dglab``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import ConfigError, DglabError, MissingReport, ProbeInadmissible, SolverError
from .pipeline import Run, emit_plots, run_all
from .scenario import Scenario, bundled, bundled_names, load_scenario

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_SOLVER, EXIT_PROBE, EXIT_REPORT = 0, 1, 2, 3, 4, 5

COMMANDS = {
    "solve": "solve the scenario and write solution.csv / solution.bin",
    "weights": "check the weight hypotheses and fit the class constants",
    "degiorgi": "itemise the energy inequality for the configured cutoffs",
    "harnack": "evaluate the Harnack probes and the expansion-of-positivity check",
    "holder": "fit oscillation-decay exponents",
    "sweep-eps": "solve the regularised family and report its convergence",
    "all": "run every enabled stage, then render the plots",
    "plot": "render the SVG plots from existing reports",
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dglab", description="Degenerate and forward-backward parabolic lab.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        if name != "plot":
            p.add_argument("--config", required=True,
                           help="scenario JSON file, or the name of a bundled scenario")
            p.add_argument("--parallel", type=int, default=1, metavar="N",
                           help="worker threads for probe batches (output order is fixed)")
            p.add_argument("--seed", type=int, default=None,
                           help="reserved; every computation is deterministic")
        p.add_argument("--out", default="dglab_out", help="output directory (DGLAB_OUT overrides)")
    sub.add_parser("list", help="list bundled scenarios")
    return ap


def _resolve(config: str) -> Scenario:
    path = Path(config)
    if not path.exists() and not config.endswith(os.sep) and config.replace(".json", "") in bundled_names():
        path = bundled(config)
    return load_scenario(path)


def _run(args: argparse.Namespace) -> int:
    if args.command == "list":
        print("\n".join(bundled_names()))
        return EXIT_OK
    out = Path(os.environ.get("DGLAB_OUT") or args.out)
    if args.command == "plot":
        for p in emit_plots(out):
            print(p)
        return EXIT_OK
    sc = _resolve(args.config)
    sc.validate()
    if args.command == "all":
        run_all(sc, out, args.parallel)
        print(f"{sc.name}: outputs in {out}")
        return EXIT_OK
    run = Run(sc, out, max(1, args.parallel))
    step = {"solve": run.solve, "weights": run.weights, "degiorgi": run.degiorgi,
            "harnack": run.harnack, "holder": run.holder, "sweep-eps": run.sweep}[args.command]
    step()
    print(f"{sc.name}: {args.command} written to {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"dglab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProbeInadmissible as exc:
        print(f"dglab: probe inadmissible, violated hypothesis: {exc}", file=sys.stderr)
        return EXIT_PROBE
    except SolverError as exc:
        print(f"dglab: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except MissingReport as exc:
        print(f"dglab: missing report: {exc}", file=sys.stderr)
        return EXIT_REPORT
    except DglabError as exc:
        print(f"dglab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
