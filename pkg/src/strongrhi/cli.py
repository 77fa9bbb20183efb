"""Command line interface.

Exit codes: 0 when every pass/fail verdict passed, 1 when at least one failed
(the report is still written), 2 for input or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np
import yaml

from . import constants as C
from .campaign import make_instance, resolve_config, run_campaign
from .errors import StrongRHIError
from .maximal import strong_maximal
from .measure import Rect
from .report import emit_report, make_report, write_bytes
from .risingsun import rising_sun_1d, rising_sun_nd
from .specfile import parse_spec, serialize_spec, spec_from_arrays
from .theorems import THEOREMS, Instance, applicable, rhi_worst_ratio, run_theorem

COMMANDS = ("gen", "constants", "maximal", "rising-sun", "verify", "suite", "export-plot")
CONSTANT_NAMES = ("ap", "a1", "ainf-exp", "ainf-fw", "doubling")
PLOT_KINDS = ("rhi-epsilon", "constant-refinement")


class UsageError(StrongRHIError):
    pass


def _parser():
    ap = argparse.ArgumentParser(prog="strongrhi", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--spec", help="instance spec (YAML); for suite, a campaign config")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--p", type=float, default=None)
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--depth", type=int, default=None)
    ap.add_argument("--variant", default=None)
    ap.add_argument("--lam", type=float, default=None, help="level for rising-sun")
    ap.add_argument("--out", default=None)
    ap.add_argument("--csv", default=None)
    ap.add_argument("--deterministic", action="store_true")
    ap.add_argument("--max-cells", type=int, default=None)
    ap.add_argument("--slack", type=float, default=None)
    return ap


def _load_spec(args):
    if not args.spec:
        raise UsageError(f"{args.command} needs --spec")
    try:
        with open(args.spec, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.spec}: {exc.strerror}") from exc
    spec = parse_spec(text)
    kw = {} if args.max_cells is None else {"max_cells": args.max_cells}
    grid, mu, w = spec.build(**kw)
    return spec, grid, mu, w


def _tasks(spec, kind, from_flags):
    tasks = [t for t in spec.tasks if t["kind"] == kind]
    if from_flags is not None or not tasks:
        return [from_flags or {}]
    return tasks


def _flag_task(args, **fields):
    given = {k: v for k, v in fields.items() if v is not None}
    return given or None


def cmd_constants(args):
    spec, grid, mu, w = _load_spec(args)
    flags = _flag_task(args, constant=args.variant, p=args.p, tol=args.tol)
    results = []
    for task in _tasks(spec, "constants", flags):
        name = task.get("constant", "ap")
        if name not in CONSTANT_NAMES:
            raise UsageError(f"unknown constant {name!r}; expected one of {CONSTANT_NAMES}")
        p = task.get("p", 2.0)
        if name == "ap" and not p > 1:
            raise UsageError("p must exceed 1 for A_p*; use a1 task for A_1*")
        tol = task.get("tol", 1e-6)
        kw = {"budget": task["budget"]} if "budget" in task else {}
        results.append(C.constant_by_name(name, w, mu, p=p, tol=tol, **kw))
    return results, None, False


def cmd_maximal(args):
    spec, grid, mu, w = _load_spec(args)
    flags = _flag_task(args, depth=args.depth, operator=args.variant)
    results = []
    for task in _tasks(spec, "maximal", flags):
        field = strong_maximal(
            w, mu, depth=task.get("depth", 0), mode=task.get("mode", "certified"),
            operator=task.get("operator", "strong"),
        )
        results.append(field)
    return results, None, False


def cmd_rising_sun(args):
    spec, grid, mu, w = _load_spec(args)
    flags = _flag_task(args, lam=args.lam)
    results = []
    for task in _tasks(spec, "rising-sun", flags):
        if "lam" not in task:
            raise UsageError("rising-sun needs a level: --lam or a task with 'lam'")
        rect = Rect(task["rect"]) if "rect" in task else grid.domain_rect()
        fn = rising_sun_1d if grid.dim == 1 else rising_sun_nd
        results.append(fn(w, mu, rect, task["lam"]))
    return results, None, False


def _theorem_ids(variant):
    if variant is None:
        return sorted(THEOREMS)
    if variant in THEOREMS:
        return [variant]
    ids = [t for t in sorted(THEOREMS) if t.split("/")[-1] == variant]
    if not ids:
        raise UsageError(f"unknown variant {variant!r}")
    return ids


def cmd_verify(args):
    spec, grid, mu, w = _load_spec(args)
    flags = _flag_task(args, theorems=None if args.variant is None else _theorem_ids(args.variant),
                       p=args.p, slack=args.slack)
    results = []
    for task in _tasks(spec, "verify", flags):
        p = task.get("p", 2.0)
        slack = task.get("slack", 1e-12)
        kw = {} if args.tol is None else {"tol": args.tol}
        inst = Instance(w, mu, p, fingerprint={"seed": args.seed, "spec": args.spec, "grid": list(grid.shape)},
                        seed=args.seed, **kw)
        ids = task.get("theorems") or _theorem_ids(None)
        explicit = args.variant is not None or "theorems" in task
        for tid in ids:
            if tid not in THEOREMS:
                raise UsageError(f"unknown theorem {tid!r}")
            if not explicit and not applicable(tid, inst):
                continue
            results.append(run_theorem(tid, inst, slack=slack))
    failed = any(r.status == "fail" for r in results)
    summary = {"verdicts": len(results), "failures": sum(r.status == "fail" for r in results)}
    return results, summary, failed


def cmd_suite(args):
    config = {}
    if args.spec:
        try:
            with open(args.spec, encoding="utf-8") as fh:
                config = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise UsageError(f"cannot read {args.spec}: {exc.strerror}") from exc
        except yaml.YAMLError as exc:
            raise UsageError(f"malformed campaign config: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("campaign config must be a mapping")
    if args.slack is not None:
        config["slack"] = args.slack
    result = run_campaign(config, seed=args.seed)
    return result.verdicts, result.summary, result.failed, result.config


def cmd_gen(args):
    cfg = resolve_config({})
    if args.max_cells is not None:
        cap = max(1, args.max_cells)
        cfg["sizes"] = {d: [s for s in v if s ** d <= cap] or [1] for d, v in cfg["sizes"].items()}
    inst = make_instance(cfg, args.seed, 0)
    p = inst.p if args.p is None else args.p
    tasks = [{"kind": "constants", "constant": "ap", "p": p}, {"kind": "verify", "p": p}]
    spec = spec_from_arrays(inst.mu.grid, inst.mu, inst.w, tasks)
    return serialize_spec(spec)


def _series_csv(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([format(float(x), ".17g") for x in r])
    return buf.getvalue()


def cmd_export_plot(args):
    spec, grid, mu, w = _load_spec(args)
    kind = args.variant or "rhi-epsilon"
    p = 2.0 if args.p is None else args.p
    if kind == "rhi-epsilon":
        U = C.ap_star_constant(w, mu, p, tol=args.tol or 1e-6).upper
        eps0 = 1.0 / (2.0 ** (p + 2) * U)
        rows = []
        for eps in eps0 * np.geomspace(0.25, 64, 17):
            worst, _, _ = rhi_worst_ratio(w, mu, eps)
            rows.append((eps, worst))
        return _series_csv(["epsilon", "worst_ratio"], rows)
    if kind == "constant-refinement":
        rows = []
        for f in (1, 2, 4, 8):
            c = C.ap_star_constant(w.refine(f), mu.refine(f), p, tol=args.tol or 1e-6)
            rows.append((f, c.lower, c.upper))
        return _series_csv(["refinement", "lower", "upper"], rows)
    raise UsageError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")


def _emit(args, command, config, results, summary):
    report = make_report(command, config, results, summary, deterministic=args.deterministic)
    data = emit_report(report, "json")
    if args.out:
        write_bytes(args.out, data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    if args.csv:
        write_bytes(args.csv, emit_report(report, "csv"))


def _text_out(args, text):
    if args.out:
        write_bytes(args.out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def dispatch(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.command == "gen":
            _text_out(args, cmd_gen(args))
            return 0
        if args.command == "export-plot":
            _text_out(args, cmd_export_plot(args))
            return 0
        config = {k: v for k, v in vars(args).items() if v is not None and k not in ("out", "csv")}
        if args.command == "suite":
            results, summary, failed, cfg = cmd_suite(args)
            config["campaign"] = cfg
        else:
            handler = {"constants": cmd_constants, "maximal": cmd_maximal,
                       "rising-sun": cmd_rising_sun, "verify": cmd_verify}[args.command]
            results, summary, failed = handler(args)
        _emit(args, args.command, config, results, summary)
        if failed:
            print("strongrhi: at least one verdict failed", file=sys.stderr)
        return 1 if failed else 0
    except (StrongRHIError, OSError) as exc:
        print(f"strongrhi: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
