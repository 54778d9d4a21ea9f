"""Command-line front end.

Subcommands: lax-check, linearize, verify, solve, hierarchy.  Exit codes:
0 on PASS / solutions found, 1 on FAIL / no solutions, 2 on error.  With
--json a single machine-readable document is printed instead of the
human rendering; both carry the same data.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import sympy as sp

from . import engine, lax
from .linearize import linearize as linearize_equation
from .engine import SLOTS, AnsatzBasis, PartialResultError, TwistRelations
from .problem import Problem, ProblemSyntaxError, fmt, fmt_operator, parse_problem


class CliError(Exception):
    pass


@contextmanager
def _time_limit(seconds: int | None):
    if not seconds:
        yield
        return

    def on_alarm(_sig, _frame):
        raise TimeoutError(f"computation exceeded {seconds} s (ROP_TIMEOUT_SECS)")

    old = signal.signal(signal.SIGALRM, on_alarm)
    signal.alarm(seconds)
    try:
        yield
    finally:
        signal.alarm(0)
        signal.signal(signal.SIGALRM, old)


def _load(path: str, max_order: int | None) -> Problem:
    text = Path(path).read_text()
    return parse_problem(text, max_order=max_order)


def _orientations(problem: Problem, flag: str | None) -> list[str]:
    choice = flag or problem.orientation or "both"
    if choice == "both":
        return ["forward", "swapped"]
    return [choice]


def _twist_for(problem: Problem, orientation: str) -> TwistRelations:
    if problem.twist is None:
        raise CliError("problem file has no twist block; 'verify' needs one")
    return problem.twist.with_orientation(orientation)


def _basis_for(problem: Problem, basis_arg: str) -> AnsatzBasis:
    default = engine.default_ansatz(problem.F, problem.lax, problem.space)
    slots = dict(default.slots)
    explicit = problem.ansatz
    if basis_arg not in (None, "auto"):
        explicit = _load(basis_arg, None).ansatz if basis_arg.endswith(".rop") else None
        if explicit is None:
            other = parse_problem(Path(basis_arg).read_text())
            explicit = other.ansatz
    if explicit:
        for slot, terms in explicit.items():
            slots[slot] = terms
    return AnsatzBasis(slots, default.fallback)


def cmd_lax_check(problem: Problem, args) -> dict:
    t0 = time.monotonic()
    report = lax.check_lax(problem.lax, problem.F, problem.space)
    doc = {
        "verdict": "PASS" if report.passed else "FAIL",
        "residuals": [fmt(r) for r in report.residuals],
        "multipliers": [fmt(m) for m in report.multipliers] if report.multipliers else None,
        "assumptions": [fmt(a) for a in report.assumptions],
        "notes": report.note,
        "timings": {"total": time.monotonic() - t0},
    }
    return doc


def cmd_linearize(problem: Problem, args) -> dict:
    op = linearize_equation(problem.F, problem.space)
    terms = [{"index": list(idx), "coefficient": fmt(c)} for idx, c in op.coeffs]
    return {
        "verdict": "PASS",
        "linearization": terms,
        "applied_to_seed": fmt(op.apply_to("U", problem.space)),
        "timings": {},
    }


def cmd_verify(problem: Problem, args) -> dict:
    results = []
    assumptions: list[str] = []
    for orientation in _orientations(problem, args.orientation):
        twist = _twist_for(problem, orientation)
        rep = engine.verify(problem.F, problem.lax, twist, problem.space)
        for a in rep.assumptions:
            if fmt(a) not in assumptions:
                assumptions.append(fmt(a))
        results.append({
            "orientation": orientation,
            "verdict": "PASS" if rep.passed else "FAIL",
            "compatibility_residual": fmt(rep.compatibility),
            "symmetry_residual": fmt(rep.symmetry),
            "retried": rep.retried,
            "timings": rep.timings,
        })
    passed = any(r["verdict"] == "PASS" for r in results)
    return {
        "verdict": "PASS" if passed else "FAIL",
        "results": results,
        "residuals": [r["compatibility_residual"] for r in results]
                     + [r["symmetry_residual"] for r in results],
        "assumptions": assumptions,
        "timings": {},
    }


def cmd_solve(problem: Problem, args) -> dict:
    out_solutions = []
    warnings = list(problem.warnings)
    t0 = time.monotonic()
    for orientation in _orientations(problem, args.orientation):
        space = problem.space
        basis = _basis_for(problem, args.basis)
        if basis.fallback:
            warnings.append("no first-derivative denominators in the Lax "
                            "coefficients; using the fallback ansatz basis")
        ds = engine.derive_determining_system(problem.F, problem.lax, basis,
                                              orientation, space)
        try:
            sols = engine.solve_determining(ds, branch_bound=args.branch_bound)
        except PartialResultError as exc:
            warnings.append(str(exc) + "; solutions may be missing")
            sols = exc.solutions
        for sol in sols:
            fs = sol.twist_functions(ds)
            twist = TwistRelations(fs, orientation)
            rep = engine.verify(problem.F, problem.lax, twist, space)
            out_solutions.append({
                "orientation": orientation,
                "twist": {f"f{i}_{s}": fmt(fs[(i, s)]) for (i, s) in SLOTS},
                "free_constants": [str(c) for c in sol.free],
                "reverified": rep.passed,
            })
        ntotal = len(sols)
        nok = sum(1 for s in out_solutions
                  if s["orientation"] == orientation and s["reverified"])
        warnings.append(f"orientation {orientation}: {len(ds.equations)} "
                        f"determining equations, {len(ds.unknowns)} unknowns, "
                        f"{ntotal} branch(es), {nok} reverified")
    kept = [s for s in out_solutions if s["reverified"]]
    return {
        "verdict": "PASS" if kept else "FAIL",
        "solutions": kept,
        "rejected": [s for s in out_solutions if not s["reverified"]],
        "warnings": warnings,
        "timings": {"total": time.monotonic() - t0},
    }


def cmd_hierarchy(problem: Problem, args) -> dict:
    levels = engine.hierarchy_relations(problem.lax, args.k, problem.space)
    space = problem.space
    rels = []
    for lv in levels:
        for i in (0, 1):
            lhs = problem.lax.x1[i].apply_to_unknown("Ut", space)
            rhs = problem.lax.x0[i].apply_to_unknown("U", space)
            ren = {}
            for s in space.jets_in(lhs) + space.jets_in(rhs):
                jv = space.jet_var(s)
                if jv.unknown == "Ut":
                    ren[s] = sp.Symbol(s.name.replace("Ut", lv.target, 1))
                elif jv.unknown == "U":
                    ren[s] = sp.Symbol(s.name.replace("U", lv.source, 1))
            rels.append(f"{fmt(lhs.xreplace(ren))} = {fmt(rhs.xreplace(ren))}")
    return {"verdict": "PASS", "relations": rels, "levels": args.k, "timings": {}}


COMMANDS = {
    "lax-check": cmd_lax_check,
    "linearize": cmd_linearize,
    "verify": cmd_verify,
    "solve": cmd_solve,
    "hierarchy": cmd_hierarchy,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rop",
        description="Derive and verify twisted recursion operators for "
                    "second-order multidimensional PDEs with lambda-linear "
                    "Lax pairs.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("file")
        p.add_argument("--orientation", choices=["forward", "swapped", "both"],
                       default=None)
        p.add_argument("--max-order", type=int, default=None)
        p.add_argument("--branch-bound", type=int, default=64)
        p.add_argument("--json", action="store_true")
        p.add_argument("--basis", default="auto",
                       help="'auto' or a path to a file with ansatz lines")
        if name == "hierarchy":
            p.add_argument("--k", type=int, default=1)
    return ap


def render_human(doc: dict) -> str:
    lines = [f"problem: {doc['problem']}", f"command: {doc['command']}",
             f"verdict: {doc['verdict']}"]
    for r in doc.get("results", []):
        lines.append(f"  [{r['orientation']}] {r['verdict']}"
                     + ("  (retried with raised order bound)" if r.get("retried") else ""))
        lines.append(f"    compatibility residual: {r['compatibility_residual']}")
        lines.append(f"    symmetry residual:      {r['symmetry_residual']}")
    for t in doc.get("linearization", []):
        idx = "".join(t["index"]) or "(zeroth order)"
        lines.append(f"  D_{idx}: {t['coefficient']}")
    for s in doc.get("solutions", []):
        lines.append(f"  solution [{s['orientation']}]"
                     + (f" free: {', '.join(s['free_constants'])}" if s["free_constants"] else ""))
        for slot, val in s["twist"].items():
            lines.append(f"    {slot} = {val}")
    for r in doc.get("relations", []):
        lines.append(f"  {r}")
    if doc.get("residuals"):
        nonzero = [r for r in doc["residuals"] if r != "0"]
        if nonzero:
            lines.append("nonzero residuals:")
            lines.extend(f"  {r}" for r in nonzero)
    if doc.get("multipliers"):
        lines.append(f"multipliers: a = {doc['multipliers'][0]}, "
                     f"b = {doc['multipliers'][1]}")
    if doc.get("assumptions"):
        lines.append("assuming nonzero: " + ", ".join(doc["assumptions"]))
    for w in doc.get("warnings", []):
        lines.append(f"warning: {w}")
    if doc.get("notes"):
        lines.append(f"note: {doc['notes']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    timeout = int(os.environ.get("ROP_TIMEOUT_SECS", "0") or 0)
    try:
        problem = _load(args.file, args.max_order)
        with _time_limit(timeout):
            doc = COMMANDS[args.command](problem, args)
    except (ProblemSyntaxError, CliError, TimeoutError, OSError, ValueError) as exc:
        msg = f"error: {exc}"
        if args.json:
            print(json.dumps({"command": args.command, "verdict": "ERROR",
                              "error": str(exc)}))
        else:
            print(msg, file=sys.stderr)
        return 2
    doc = {"problem": problem.name, "command": args.command, **doc,
           "warnings": doc.get("warnings", problem.warnings)}
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        print(render_human(doc))
    return 0 if doc["verdict"] == "PASS" else 1


if __name__ == "__main__":
    sys.exit(main())
