"""Command-line entry point: read a problem document, solve, export CSV.

A problem document is JSON::

    {
      "prior": 0.5,
      "cost": 0.05,
      "payoffs": {"R_r": 1, "L_l": 1},
      "signals": ["r", "l", "null"],
      "consultants": [{"id": "j2", "probs": {"r": ["16/50", "1/50", "33/50"],
                                             "l": ["1/50", "16/50", "33/50"]}}],
      "exact": true,
      "solver": {"grid_size": 4001, "tol": 1e-10}
    }

Likelihoods may be numbers or ``"a/b"`` strings. With ``exact`` set they are
kept as fractions, otherwise converted to floats.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid_solver import GridConfig, Solution, solve_grid, thresholds
from .lattice_solver import (LATTICE_TOL, LatticeTooLarge, build_lattice, detect_rational_ratio, piecewise_extract,
                             piecewise_thresholds, solve_lattice)
from .model import Consultant, Payoffs, Problem, validate_problem
from .montecarlo import decomposition_check, simulate_policy
from .theory import brute_force_value, revealing_cost_threshold, verify_revealer_usage

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3

_TOP_FIELDS = {"prior", "cost", "payoffs", "signals", "consultants", "exact", "solver"}
_REQUIRED = ("prior", "cost", "signals", "consultants")
_SOLVER_FIELDS = {"grid_size", "tol", "max_iters"}


class DocumentError(ValueError):
    """The problem document is malformed or describes an invalid problem."""


@dataclass
class ProblemDocument:
    problem: Problem
    exact: bool = False
    solver: dict = field(default_factory=dict)

    def grid_config(self, **overrides) -> GridConfig:
        kw = {k: v for k, v in self.solver.items()}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return GridConfig(**kw)


# --------------------------------------------------------------------------
# Parsing and serialisation
# --------------------------------------------------------------------------

def _number(value, where: str, exact: bool):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise DocumentError(f"{where}: expected a number or 'a/b' string, got {value!r}")
    try:
        x = Fraction(value) if isinstance(value, str) else value
    except (ValueError, ZeroDivisionError):
        raise DocumentError(f"{where}: cannot parse {value!r} as a number") from None
    if exact:
        return Fraction(x) if not isinstance(x, float) else Fraction(str(x))
    return float(x)


def document_from_dict(data: dict) -> ProblemDocument:
    """Build and validate a document from already-decoded JSON."""
    if not isinstance(data, dict):
        raise DocumentError("top level must be an object")
    unknown = set(data) - _TOP_FIELDS
    if unknown:
        raise DocumentError(f"unknown field(s): {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise DocumentError(f"missing field(s): {missing}")
    exact = data.get("exact", False)
    if not isinstance(exact, bool):
        raise DocumentError("exact: must be true or false")

    signals = data["signals"]
    if not isinstance(signals, list) or not all(isinstance(s, str) for s in signals):
        raise DocumentError("signals: must be a list of strings")

    pay = data.get("payoffs", {"R_r": 1, "L_l": 1})
    if not isinstance(pay, dict) or set(pay) != {"R_r", "L_l"}:
        raise DocumentError("payoffs: must be an object with exactly R_r and L_l")
    payoffs = Payoffs(_number(pay["R_r"], "payoffs.R_r", False), _number(pay["L_l"], "payoffs.L_l", False))

    cons_raw = data["consultants"]
    if not isinstance(cons_raw, list):
        raise DocumentError("consultants: must be a list")
    consultants = []
    for i, c in enumerate(cons_raw):
        where = f"consultants[{i}]"
        if not isinstance(c, dict) or set(c) != {"id", "probs"}:
            raise DocumentError(f"{where}: must have exactly the fields id and probs")
        cid = c["id"]
        if not isinstance(cid, str):
            raise DocumentError(f"{where}.id: must be a string")
        probs = c["probs"]
        if not isinstance(probs, dict) or set(probs) != {"r", "l"}:
            raise DocumentError(f"consultant {cid!r}: probs must have exactly the rows r and l")
        rows = {}
        for state in ("r", "l"):
            row = probs[state]
            if not isinstance(row, list) or len(row) != len(signals):
                n = len(row) if isinstance(row, list) else "non-list"
                raise DocumentError(f"consultant {cid!r}: row {state} has {n} entries, "
                                    f"expected {len(signals)} (one per signal)")
            rows[state] = tuple(_number(x, f"consultant {cid!r} row {state}[{k}]", exact)
                                for k, x in enumerate(row))
        consultants.append(Consultant(cid, tuple(signals), rows["r"], rows["l"]))

    solver = data.get("solver", {})
    if not isinstance(solver, dict):
        raise DocumentError("solver: must be an object")
    unknown = set(solver) - _SOLVER_FIELDS
    if unknown:
        raise DocumentError(f"solver: unknown field(s) {sorted(unknown)}")
    try:
        GridConfig(**solver)
    except (TypeError, ValueError) as e:
        raise DocumentError(f"solver: {e}") from None

    problem = Problem(_number(data["prior"], "prior", False), tuple(consultants),
                      _number(data["cost"], "cost", False), payoffs)
    errors = [v for v in validate_problem(problem) if v.severity == "error"]
    if errors:
        raise DocumentError("; ".join(f"[{v.code}] {v.message}" for v in errors))
    return ProblemDocument(problem, exact, dict(solver))


def parse_problem(path) -> ProblemDocument:
    """Read and validate a problem document; errors carry line or field context."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    try:
        return document_from_dict(data)
    except DocumentError as e:
        raise DocumentError(f"{path}: {e}") from None


def _render(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return x


def document_to_dict(doc: ProblemDocument) -> dict:
    p = doc.problem
    signals = list(p.consultants[0].signals) if p.consultants else []
    out = {
        "prior": p.prior,
        "cost": p.cost,
        "payoffs": {"R_r": p.payoffs.u_Rr, "L_l": p.payoffs.u_Ll},
        "signals": signals,
        "consultants": [{"id": j.id, "probs": {"r": [_render(x) for x in j.probs_r],
                                               "l": [_render(x) for x in j.probs_l]}}
                        for j in p.consultants],
    }
    if doc.exact:
        out["exact"] = True
    if doc.solver:
        out["solver"] = dict(doc.solver)
    return out


def serialize(doc: ProblemDocument) -> str:
    return json.dumps(document_to_dict(doc), indent=2)


# --------------------------------------------------------------------------
# Exports
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _value_rows(solution: Solution):
    for p, v, d, t in zip(solution.grid, solution.values, solution.policy, solution.ties):
        yield [_fmt(p), _fmt(v), str(d), "|".join(str(x) for x in t)]


def export_value_csv(solution: Solution, path) -> None:
    """Write ``p,value,decision,ties`` with one row per table belief, ascending."""
    with open(path, "w", newline="") as fh:
        _write_value_csv(solution, fh)


def _write_value_csv(solution: Solution, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["p", "value", "decision", "ties"])
    w.writerows(_value_rows(solution))


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def _solve(doc: ProblemDocument, args, problem: Problem | None = None) -> Solution:
    problem = problem or doc.problem
    cfg = doc.grid_config(grid_size=args.grid_size, tol=args.tol)
    choice = args.solver
    if choice == "grid":
        return solve_grid(problem, cfg)
    spec = detect_rational_ratio(problem.consultants)
    if spec is None:
        if choice == "lattice":
            raise DocumentError("lattice solver requested but the consultants have no rational ratio")
        return solve_grid(problem, cfg)
    try:
        return solve_lattice(problem, build_lattice(problem, spec), tol=min(cfg.tol, LATTICE_TOL),
                             max_iters=doc.solver.get("max_iters"))
    except LatticeTooLarge:
        if choice == "lattice":
            raise
        return solve_grid(problem, cfg)


def _open_out(args):
    return open(args.out, "w", newline="") if args.out else sys.stdout


def cmd_solve(doc, args, out) -> int:
    sol = _solve(doc, args)
    _write_value_csv(sol, out)
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_thresholds(doc, args, out) -> int:
    # a lattice only holds the beliefs reachable from the prior, so exact
    # thresholds come from the value curve over all priors instead
    spec = None if args.solver == "grid" else detect_rational_ratio(doc.problem.consultants)
    found = None
    if spec is not None:
        try:
            pw = piecewise_extract(doc.problem, spec, np.linspace(0.001, 0.999, args.points))
            found = piecewise_thresholds(doc.problem, pw)
        except LatticeTooLarge:
            pass
    if found is None and args.solver == "lattice":
        raise DocumentError("thresholds are not resolved by the lattice sweep; use --solver grid")
    if found is not None:
        p_L, p_R, converged = *found, True
    else:
        sol = solve_grid(doc.problem, doc.grid_config(grid_size=args.grid_size, tol=args.tol))
        th = thresholds(sol)
        p_L, p_R, converged = th.p_L, th.p_R, sol.converged
    print(f"p_L={_fmt(p_L)}", file=out)
    print(f"p_R={_fmt(p_R)}", file=out)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_sweep(doc, args, out) -> int:
    if not args.costs:
        raise DocumentError("sweep needs --costs c1,c2,...")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["cost", "p", "value", "decision", "ties"])
    ok = True
    for c in args.costs:
        sol = _solve(doc, args, doc.problem.replace(cost=c))
        ok &= sol.converged
        for row in _value_rows(sol):
            w.writerow([_fmt(c)] + row)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_piecewise(doc, args, out) -> int:
    spec = detect_rational_ratio(doc.problem.consultants)
    if spec is None:
        raise DocumentError("piecewise extraction needs consultants with a rational ratio")
    pw = piecewise_extract(doc.problem, spec, np.linspace(0.001, 0.999, args.points))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["segment", "start", "end", "slope", "intercept", "breakpoint_after"])
    for i in range(pw.n_segments):
        bp = _fmt(pw.breakpoints[i]) if i < len(pw.breakpoints) else ""
        w.writerow([i, _fmt(pw.starts[i]), _fmt(pw.ends[i]), _fmt(pw.slopes[i]), _fmt(pw.intercepts[i]), bp])
    print(f"# segments={pw.n_segments} max_residual={pw.max_residual:.3g}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(doc, args, out) -> int:
    sol = _solve(doc, args)
    report = simulate_policy(doc.problem, sol, runs=args.runs, seed=args.seed)
    data = asdict(report)
    data["solver_value"] = float(np.interp(doc.problem.prior, sol.grid, sol.values))
    data["decomposition_residual"] = decomposition_check(report, doc.problem)
    print(json.dumps(data, indent=2), file=out)
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_oracle(doc, args, out) -> int:
    value, first = brute_force_value(doc.problem, args.horizon)
    print(f"value={value:.12g}", file=out)
    print("first=" + "|".join(sorted(str(d) for d in first)), file=out)
    return EXIT_OK


def cmd_theorem1(doc, args, out) -> int:
    revealers = [j for j in doc.problem.consultants if j.is_revealing]
    if not revealers:
        raise DocumentError("theorem1 needs a consultant with a revealing signal in each state")
    analyses = [(revealing_cost_threshold(doc.problem, j, form=args.form), j) for j in revealers]
    analysis, j_star = max(analyses, key=lambda a: a[0].epsilon)
    costs = [analysis.C * f for f in (0.1, 0.5, 0.9)]
    verdicts = verify_revealer_usage(doc.problem, j_star, costs, doc.grid_config(grid_size=args.grid_size))
    print(f"revealer={j_star.id}", file=out)
    print(f"epsilon={analysis.epsilon:.12g}", file=out)
    print(f"C={analysis.C:.12g} form={analysis.form}", file=out)
    for c, used in verdicts.items():
        print(f"c={c:.6g} revealer_used={used}", file=out)
    print("verdict=" + ("verified" if all(verdicts.values()) else "violated"), file=out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "thresholds": cmd_thresholds,
    "sweep": cmd_sweep,
    "piecewise": cmd_piecewise,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "theorem1": cmd_theorem1,
}


def _costs(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad cost list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="consultant-dp",
                                 description="Solve two-state investment problems with costly consultants.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("document", help="problem document (JSON)")
    ap.add_argument("--solver", choices=("grid", "lattice", "auto"), default="auto")
    ap.add_argument("--grid-size", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--costs", type=_costs, default=None, help="comma-separated costs for sweep")
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--horizon", type=int, default=4)
    ap.add_argument("--points", type=int, default=2001, help="prior samples for piecewise")
    ap.add_argument("--form", choices=("sound", "literal"), default="sound",
                    help="non-revealer bound used by theorem1")
    ap.add_argument("--out", default=None, help="output file (default stdout)")
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = parse_problem(args.document)
        out = _open_out(args)
        try:
            return COMMANDS[args.command](doc, args, out)
        finally:
            if out is not sys.stdout:
                out.close()
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
