"""``hoim`` command line: solve, reduce, quadratize, resources, sweep and report.

Exit codes: 0 done, 10 done and some instance reached all-SAT, 2 unreadable
input, 3 parse error, 4 invalid configuration, 130 interrupted.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import load_family
from .cnf import CnfFormula, DimacsError, read_dimacs, reduce_to_3sat, write_dimacs
from .energy import build_energy, count_resources
from .quadratize import quadratize_3sat
from .report import write_report
from .solver import (HIGHER, SECOND, SWEEP_KEYS, Aggregate, BatchReport, TrialConfig, TrialResult,
                     parameter_sweep, run_batch)

log = logging.getLogger("hoim")

EXIT_OK = 0
EXIT_FOUND = 10
EXIT_UNREADABLE = 2
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_INTERRUPTED = 130

TRUNCATION_MARKER = "# truncated"


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors, not unreadable input
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest(argv, inputs, config: TrialConfig | None = None, **extra) -> dict:
    doc = {"tool": "hoim", "version": __version__, "command": list(argv),
           "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
           "inputs": [{"path": str(p), "sha256": sha256(p)} for p in inputs]}
    if config is not None:
        doc["config"] = config.to_json()
    doc.update(extra)
    return doc


def write_json(path, doc, indent=2) -> None:
    Path(path).write_text(json.dumps(doc, indent=indent) + "\n")


def load_input(path) -> CnfFormula:
    try:
        return read_dimacs(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_UNREADABLE) from exc
    except DimacsError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from exc


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_UNREADABLE) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}", EXIT_PARSE) from exc


def require_3sat(formula: CnfFormula, path) -> None:
    k = max(len(c) for c in formula.clauses)
    if k > 3:
        raise CliError(f"{path} has a {k}-literal clause; the second-order machine needs 3SAT. "
                       f"Run `hoim reduce` first.", EXIT_CONFIG)


# ---------------------------------------------------------------- config

def add_machine_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("machine")
    g.add_argument("--config", metavar="JSON", help="start from a config, best.json or manifest.json")
    g.add_argument("--order", choices=[HIGHER, SECOND], help="higher-order or quadratized machine")
    g.add_argument("--exponent", type=int, choices=[1, 2])
    g.add_argument("--trials", type=int, metavar="N")
    g.add_argument("--seed", type=int, metavar="S")
    g.add_argument("--t-end", type=float, metavar="CYCLES")
    g.add_argument("--q-max", type=float, metavar="Q")
    g.add_argument("--coupling", type=float, metavar="R")
    g.add_argument("--lambda", dest="lam", type=float, metavar="L")
    g.add_argument("--rho", type=float, metavar="RHO")
    g.add_argument("--omega", type=float, metavar="W")
    g.add_argument("--normalize", choices=["on", "off"])
    g.add_argument("--init-scale", type=float, metavar="A", help="radius of the initial-state disk")
    g.add_argument("--integrator", choices=["rk45", "rk4"])
    g.add_argument("--tol", type=float, metavar="T", help="absolute and relative tolerance (rk45)")
    g.add_argument("--step", type=float, metavar="H", help="fixed step (rk4) and first step (rk45)")
    g.add_argument("--max-steps", type=int, metavar="N")
    g.add_argument("--workers", type=int, default=1, metavar="W")


def config_from_doc(doc: dict) -> tuple[TrialConfig, int | None]:
    """Accepts a bare TrialConfig JSON, or any document with a ``config`` key."""
    trials = doc.get("trials")
    if "config" in doc:
        doc = doc["config"]
    return TrialConfig.from_json(doc), trials


def resolve_config(args) -> tuple[TrialConfig, int]:
    trials = 64
    try:
        cfg = TrialConfig()
        if args.config:
            cfg, t = config_from_doc(load_json(args.config))
            trials = t if t is not None else trials
        if args.trials is not None:
            trials = args.trials
        params = {k: getattr(args, k) for k in ("exponent", "t_end", "q_max", "coupling", "lam", "rho", "omega")
                  if getattr(args, k) is not None}
        if args.normalize is not None:
            params["normalize"] = args.normalize == "on"
        integ = {}
        if args.integrator:
            integ["method"] = args.integrator
        if args.tol is not None:
            integ.update(abs_tol=args.tol, rel_tol=args.tol)
        if args.step is not None:
            integ.update(fixed_step=args.step, initial_step=args.step)
        if args.max_steps is not None:
            integ["max_steps"] = args.max_steps
        top = {}
        if args.seed is not None:
            top["seed"] = args.seed
        if args.order:
            top["machine"] = args.order
        if args.init_scale is not None:
            top["init_scale"] = args.init_scale
        if integ:
            top["integrator"] = dataclasses.replace(cfg.integrator, **integ)
        if params:
            top["params"] = cfg.params.replace(**params)
        cfg = dataclasses.replace(cfg, **top) if top else cfg
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG) from exc
    if trials < 1:
        raise CliError("--trials must be at least 1", EXIT_CONFIG)
    if args.workers < 1:
        raise CliError("--workers must be at least 1", EXIT_CONFIG)
    return cfg, trials


def gather_inputs(args, doc_inputs=()) -> list[Path]:
    paths = [Path(p) for p in args.inputs]
    if not paths and doc_inputs:
        paths = [Path(d["path"]) for d in doc_inputs]
    if not paths:
        raise CliError("no input files given", EXIT_CONFIG)
    return paths


# --------------------------------------------------------------- commands

def cmd_solve(args, argv) -> int:
    doc_inputs = load_json(args.config).get("inputs", ()) if args.config else ()
    paths = gather_inputs(args, doc_inputs)
    formulas = [load_input(p) for p in paths]
    cfg, trials = resolve_config(args)
    if cfg.machine == SECOND:
        for p, f in zip(paths, formulas):
            require_3sat(f, p)
    if args.trace and args.workers > 1:
        raise CliError("--trace needs --workers 1", EXIT_CONFIG)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [p.stem for p in paths]
    trace = [] if args.trace else None
    results: list[TrialResult] = []

    with open(out / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["name", *TrialResult.CSV_FIELDS])
        writer.writeheader()

        def flush(part):
            for r in part:
                writer.writerow({"name": names[r.instance], **r.row()})
            fh.flush()
            results.extend(part)
            log.info("instance %s done (%d/%d)", names[part[0].instance], len(results) // trials, len(paths))

        truncated = False
        try:
            run_batch(formulas, cfg, trials, args.workers, names=names, on_instance=flush, trace=trace)
        except KeyboardInterrupt:
            truncated = True
            fh.write(f"{TRUNCATION_MARKER}: {len(results) // trials} of {len(paths)} instances completed\n")
            fh.flush()

    report = BatchReport.build(results, names)
    if truncated:
        done = {r.instance for r in results}
        report = BatchReport(report.results, names, [a if i in done else Aggregate.of([])
                                                     for i, a in enumerate(report.per_instance)], report.overall)
    agg = report.to_json(cfg)
    agg["trials_per_instance"] = trials
    agg["truncated"] = truncated
    write_json(out / "aggregates.json", agg)
    if trace is not None:
        write_trace(args.trace, trace)
    write_json(out / "manifest.json", manifest(argv, paths, cfg, trials=trials, workers=args.workers,
                                               truncated=truncated))
    if truncated:
        log.error("interrupted; partial results written to %s", out)
        return EXIT_INTERRUPTED
    found = report.instances_with_solution
    log.info("%d/%d instances reached all-SAT", found, len(paths))
    return EXIT_FOUND if found else EXIT_OK


def write_trace(path, trace) -> None:
    """Trajectory dump as ``.npz``: instance, trial, t and z (rows NaN-padded to the widest state)."""
    width = max((len(z) for *_, z in trace), default=0)
    z = np.full((len(trace), width), np.nan + 0j)
    for i, (*_, zi) in enumerate(trace):
        z[i, :len(zi)] = zi
    np.savez_compressed(path, instance=np.array([e[0] for e in trace], dtype=np.int64),
                        trial=np.array([e[1] for e in trace], dtype=np.int64),
                        t=np.array([e[2] for e in trace], dtype=float), z=z)


def cmd_reduce(args, argv) -> int:
    formula = load_input(args.input)
    try:
        reduced, rmap = reduce_to_3sat(formula)
    except ValueError as exc:
        raise CliError(f"{args.input}: {exc}", EXIT_CONFIG) from exc
    out = Path(args.output)
    out.write_bytes(write_dimacs(reduced))
    map_path = out.with_suffix(".map.json")
    write_json(map_path, rmap.to_json(), indent=None)
    write_json(out.with_suffix(".manifest.json"), manifest(argv, [args.input], outputs=[str(out), str(map_path)]))
    log.info("%d clauses -> %d clauses, %d auxiliary variables", formula.num_clauses, reduced.num_clauses,
             rmap.aux_vars)
    return EXIT_OK


def cmd_quadratize(args, argv) -> int:
    formula = load_input(args.input)
    require_3sat(formula, args.input)
    model = quadratize_3sat(formula)
    out = Path(args.output)
    fmt = args.format or ("json" if out.suffix == ".json" else "text")
    if fmt == "json":
        write_json(out, model.to_json())
    else:
        out.write_text(model.to_text())
    write_json(out.with_suffix(".manifest.json"), manifest(argv, [args.input], outputs=[str(out)]))
    return EXIT_OK


SCHEMES = {"all-to-all": "all-to-all", "hub": "hub-node", "hub-node": "hub-node"}


def cmd_resources(args, argv) -> int:
    formula = load_input(args.input)
    scheme = SCHEMES[args.scheme]
    orders = list(dict.fromkeys(args.order or [HIGHER]))
    reports = {}
    for order in orders:
        if order == SECOND:
            require_3sat(formula, args.input)
            reports[order] = count_resources(quadratize_3sat(formula), scheme).to_json()
        else:
            reports[order] = count_resources(build_energy(formula), scheme).to_json()
    if len(orders) == 1:
        doc = reports[orders[0]]
    else:
        hi, lo = reports[HIGHER], reports[SECOND]
        ratio = {k: (lo[k] / hi[k] if hi[k] else None)
                 for k in ("spins", "connections", "parameters", "coefficient_bits")}
        doc = {**reports, "ratio_second_to_higher": ratio}
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        write_json(Path(args.out).with_suffix(".manifest.json"), manifest(argv, [args.input], outputs=[args.out]))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args, argv) -> int:
    paths = gather_inputs(args)
    formulas = [load_input(p) for p in paths]
    grid = load_json(args.grid)
    if not isinstance(grid, dict):
        raise CliError(f"{args.grid}: expected a JSON object of parameter -> value list", EXIT_CONFIG)
    grid = {k: (v if isinstance(v, list) else [v]) for k, v in grid.items()}
    cfg, trials = resolve_config(args)
    if cfg.machine == SECOND:
        for p, f in zip(paths, formulas):
            require_3sat(f, p)
    try:
        result = parameter_sweep(formulas, grid, cfg, trials, args.workers)
    except ValueError as exc:
        raise CliError(f"invalid sweep: {exc}", EXIT_CONFIG) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    keys = list(grid)
    fields = ["rank", *keys, *(f.name for f in dataclasses.fields(Aggregate))]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for rank, row in enumerate(result.rows, 1):
            w.writerow({"rank": rank, **{k: ("" if v is None else v) for k, v in row.row().items()}})
    best = result.best
    write_json(out / "best.json", {"config": cfg.replace(**best.point).to_json(), "trials": trials,
                                   "point": best.point, "aggregate": best.aggregate.to_json(),
                                   "inputs": [{"path": str(p), "sha256": sha256(p)} for p in paths]})
    write_json(out / "manifest.json", manifest(argv, paths, cfg, trials=trials, grid=grid))
    log.info("best point %s: p_sat=%.3f energy=%.3f", best.point, best.aggregate.all_sat_prob,
             best.aggregate.mean_energy)
    return EXIT_OK


def cmd_report(args, argv) -> int:
    paths = [Path(p) for p in args.inputs]
    formulas = [load_input(p) for p in paths]
    for fam in args.family or ():
        try:
            formulas.extend(f for _, f in load_family(fam, args.instances))
        except (FileNotFoundError, KeyError) as exc:
            raise CliError(f"unknown or incomplete family {fam!r}: {exc}", EXIT_UNREADABLE) from exc
    if not formulas:
        raise CliError("no input files or families given", EXIT_CONFIG)
    cfg, trials = resolve_config(args)
    orders = list(dict.fromkeys(args.orders or [cfg.machine]))
    if SECOND in orders:
        for f in formulas:
            require_3sat(f, "input")
    written = write_report(args.out, formulas, cfg, trials, orders, args.t_end_values or (), args.workers,
                           figures=not args.no_figures)
    write_json(Path(args.out) / "manifest.json",
               manifest(argv, paths, cfg, trials=trials, families=args.family or [], instances=args.instances,
                        orders=orders, t_end_values=args.t_end_values or [],
                        outputs=[str(p) for p in written]))
    return EXIT_OK


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="errors only")
    p = _Parser(prog="hoim", description="Oscillator Ising machines for SAT and MaxSAT.")
    p.add_argument("--version", action="version", version=f"hoim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common], help="run seeded trials on DIMACS instances")
    s.add_argument("inputs", nargs="*", help="DIMACS files (default: the inputs of --config, if any)")
    add_machine_flags(s)
    s.add_argument("--trace", metavar="PATH", help="write every accepted state to an .npz file")
    s.add_argument("--out", default="hoim-out", metavar="DIR")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("reduce", parents=[common], help="reduce kSAT to 3SAT")
    r.add_argument("input")
    r.add_argument("output")
    r.set_defaults(func=cmd_reduce)

    q = sub.add_parser("quadratize", parents=[common], help="write the second-order model of a 3SAT instance")
    q.add_argument("input")
    q.add_argument("output")
    q.add_argument("--format", choices=["json", "text"], help="default: json for *.json, else text")
    q.set_defaults(func=cmd_quadratize)

    c = sub.add_parser("resources", parents=[common], help="count spins, connections and parameters")
    c.add_argument("input")
    c.add_argument("--scheme", choices=sorted(SCHEMES), default="hub")
    c.add_argument("--order", choices=[HIGHER, SECOND], action="append",
                   help="repeat to compare both orders")
    c.add_argument("--out", metavar="FILE", help="write JSON here instead of standard output")
    c.set_defaults(func=cmd_resources)

    w = sub.add_parser("sweep", parents=[common], help="rank a grid of machine parameters")
    w.add_argument("inputs", nargs="+")
    w.add_argument("--grid", required=True, metavar="JSON",
                   help=f"map of parameter to value list; keys: {', '.join(SWEEP_KEYS)}")
    add_machine_flags(w)
    w.add_argument("--out", default="hoim-sweep", metavar="DIR")
    w.set_defaults(func=cmd_sweep)

    e = sub.add_parser("report", parents=[common], help="tables and figures versus problem size and annealing slope")
    e.add_argument("inputs", nargs="*")
    e.add_argument("--family", action="append", metavar="NAME", help="bundled family, e.g. uf20-91")
    e.add_argument("--instances", type=int, default=16, metavar="K", help="instances per family")
    e.add_argument("--orders", choices=[HIGHER, SECOND], nargs="+")
    e.add_argument("--t-end-values", type=float, nargs="+", metavar="CYCLES",
                   help="annealing durations for the slope table")
    e.add_argument("--no-figures", action="store_true")
    add_machine_flags(e)
    e.add_argument("--out", default="hoim-report", metavar="DIR")
    e.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.INFO
    logging.basicConfig(format="%(levelname)s %(message)s", stream=sys.stderr)
    log.setLevel(level)
    try:
        return args.func(args, ["hoim", *argv])
    except CliError as exc:
        log.error("%s", exc)
        return exc.code
    except KeyboardInterrupt:
        log.error("interrupted")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
