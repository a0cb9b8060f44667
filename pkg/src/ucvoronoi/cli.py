"""Command line interface.

Exit codes: 0 success, 1 domain error or failed check, 2 usage or scene
schema error.  Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys

from .cells import build_cells
from .emanation import t_discontinuity_witness
from .errors import SchemaError, UCVError
from .render import render_svg
from .scene import json_ready, load_scene
from .stability import certify, certify_interior, counterexample, run_experiment

COUNTEREXAMPLES = ["linf_square", "eta_zero", "eta_zero_rectangle", "rho_unbounded"]
WITNESSES = ["linf_corners", "non_emanation", "zero_site_distance", "unbounded"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ucvoronoi", description="Voronoi cells in lp spaces and their stability.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scene_cmd(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scene", required=True, help="scene JSON file")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        return p

    p = scene_cmd("cells", "compute every cell as a fan of segments")
    p.add_argument("--directions", type=int)
    p.add_argument("--anchors", type=int)
    p.add_argument("--svg", help="also draw the cells")

    p = scene_cmd("render", "draw the scene and its cells as SVG")
    p.add_argument("--directions", type=int)
    p.add_argument("--anchors", type=int)
    p.add_argument("--svg", required=True)
    p.add_argument("--no-cells", action="store_true", help="draw world and sites only")

    p = scene_cmd("certify", "evaluate the stability radius")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--interior", action="store_true", help="use the linear-radius variant")

    p = scene_cmd("experiment", "perturb the sites and measure the cells")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--interior", action="store_true")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--directions", type=int)
    p.add_argument("--anchors", type=int)
    p.add_argument("--mode", choices=["jitter", "reshape"], default="jitter")

    p = sub.add_parser("counterexample", help="run an instability scenario")
    p.add_argument("name", choices=COUNTEREXAMPLES)
    p.add_argument("--beta", type=float)
    p.add_argument("--out")

    p = sub.add_parser("tcontinuity", help="reproduce a jump of T in the direction")
    p.add_argument("name", choices=WITNESSES)
    p.add_argument("--n", type=int)
    p.add_argument("--out")

    for p in sub.choices.values():
        if not any(a.dest == "seed" for a in p._actions):
            p.add_argument("--seed", type=int, default=0)
    return ap


def _emit(obj, out: str | None) -> None:
    text = json.dumps(json_ready(obj), indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")
    return code


def _run(args) -> int:
    cmd = args.command
    if cmd == "counterexample":
        report = counterexample(args.name, args.beta)
        _emit(report, args.out)
        return 0 if report["unstable"] else 1
    if cmd == "tcontinuity":
        report = t_discontinuity_witness(args.name, args.n)
        _emit(report, args.out)
        return 0 if report["discontinuous"] else 1

    scene = load_scene(args.scene)
    config = scene.configuration()
    if cmd in ("cells", "render"):
        cells = [] if getattr(args, "no_cells", False) else build_cells(config, args.directions, args.anchors,
                                                                        seed=args.seed)
        if args.svg:
            render_svg(config, cells, args.svg, scene.render)
        if cmd == "cells" or args.out:
            _emit({
                "directions": cells[0].n_directions if cells else 0,
                "resolution": [c.resolution for c in cells],
                "cells": [c.to_dict() for c in cells],
            }, args.out)
        return 0
    if cmd == "certify":
        cert = certify_interior(config, args.epsilon) if args.interior else certify(config, args.epsilon)
        _emit(cert.to_dict(), args.out)
        return 0
    if cmd == "experiment":
        report = run_experiment(config, args.epsilon, args.trials, args.seed, args.mode, args.interior,
                                args.directions, args.anchors)
        _emit(report.to_dict(), args.out)
        return 0 if report.passed else 1
    return _error("UsageError", f"unknown command {cmd}", 2)  # pragma: no cover


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _UsageError as exc:
        return _error("UsageError", str(exc), 2)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _run(args)
    except SchemaError as exc:
        return _error("SchemaError", exc.reason, 2, path=exc.path)
    except UCVError as exc:
        return _error(type(exc).__name__, str(exc), 1)
    except OSError as exc:
        return _error("IoError", str(exc), 1)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
