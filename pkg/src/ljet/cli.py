"""
``ljet`` command-line front end.

Exit status: 0 on success, 1 when the mathematics fails (not a symmetry,
chi unsolved, residuals too large), 2 on unusable input.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import sympy as sp

from . import lambda_sym as ls
from .expr import EvaluationError, ParseError, simplify, to_text
from .fields import apply, check_commutation, lambda_prolong
from .numeric import SamplingExhausted, verify_residual, verify_solution
from .problem import ProblemError, load_problem
from .reduction import (ReductionError, auxiliary_ode, derived_invariants,
                        find_invariant_ansatz, reduce, verify_invariant)

SCHEMA_VERSION = 1

OK, FAILED, BAD_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _numeric_tangency(prob, U, tol):
    """Unrestricted ``U(Delta)`` evaluated on sampled manifold points."""
    needed = {str(f) for f in prob.ctx.functions} - set(prob.instantiations)
    if needed:
        return {"skipped": "uninstantiated functions: " + ", ".join(sorted(needed))}
    raw = apply(U, prob.ode.residual)
    try:
        return verify_residual(raw, prob.plan, ode=prob.ode, tol=tol).as_dict()
    except (EvaluationError, SamplingExhausted) as exc:
        return {"skipped": str(exc)}


def cmd_check(prob, opts):
    sym = ls.is_lambda_symmetry(prob.ode, prob.lp)
    comm = check_commutation(prob.lp, prob.ode.order)
    U = lambda_prolong(prob.lp, prob.ode.order)
    numeric = _numeric_tangency(prob, U, opts.tol)
    ok = sym.ok and comm.ok and numeric.get("ok", True)
    report = {
        "prolonged_field": U.to_dict(),
        "symmetry": {"ok": sym.ok, "status": sym.status, "residual": to_text(sym.residual)},
        "commutation": {"ok": comm.ok, "mu": to_text(comm.mu),
                        "residuals": [to_text(r) for r in comm.residuals if r != 0]},
        "numeric": numeric,
    }
    return ok, report


def cmd_cover(prob, opts):
    cover = ls.build_covering(prob.ode, prob.lp.lam)
    ctx = cover.ctx
    k = prob.ode.order
    D = {str(ctx.t): "1"}
    for i in range(k - 1):
        D[str(ctx.jet(i))] = to_text(ctx.jet(i + 1))
    D[str(ctx.jet(k - 1))] = to_text(prob.ode.rhs)
    D[str(ctx.wjet(0))] = to_text(cover.H)
    report = {
        "equations": {str(ctx.jet(k)): to_text(prob.ode.rhs), str(ctx.wjet(1)): to_text(cover.H)},
        "total_derivative": D,
    }
    return True, report


def _chi_result(prob):
    if prob.chi is not None:
        return ls.verify_chi(prob.ode, prob.lp, prob.chi)
    return ls.solve_chi_ansatz(prob.ode, prob.lp)


def cmd_chi(prob, opts):
    eq = ls.chi_pde(prob.ode, prob.lp)
    res = _chi_result(prob)
    ok = res.chi is not None and res.status in (ls.SOLVED, ls.VERIFIED_ONLY)
    return ok, {"equation": eq.to_dict(), **res.to_dict()}


def cmd_reconstruct(prob, opts):
    res = _chi_result(prob)
    if res.chi is None:
        return False, {"chi": res.to_dict(), "error": "no chi available"}
    try:
        Y = ls.reconstruct_nonlocal(prob.ode, prob.lp, res.chi, check=False)
    except ls.ReconstructionError as exc:
        return False, {"chi": res.to_dict(), "error": str(exc)}
    cover = ls.build_covering(prob.ode, prob.lp.lam)
    check = ls.verify_nonlocal_symmetry(cover, Y)
    back = ls.extract_lambda_from_nonlocal(Y, cover)
    same = all(simplify(a - b) == 0 for a, b in (
        (back.rho, prob.lp.rho), (back.psi, prob.lp.psi), (back.lam, prob.lp.lam)))
    report = {
        "chi": to_text(res.chi),
        "nonlocal_symmetry": Y.to_dict(),
        "verification": check.to_dict(),
        "round_trip": {"rho": to_text(back.rho), "psi": to_text(back.psi),
                       "lambda": to_text(back.lam), "matches_input": same},
    }
    return check.ok and same, report


def cmd_reduce(prob, opts):
    ctx = prob.ctx
    U1 = lambda_prolong(prob.lp, 1)
    report = {}
    x, zeta0 = prob.x, prob.zeta0
    if x is None or zeta0 is None:
        basis = find_invariant_ansatz(prob.lp, opts.degree_bound)
        report["ansatz_basis"] = [to_text(b) for b in basis]
        if x is None:
            if verify_invariant(U1, ctx.t):
                x = ctx.t
            else:
                point = [b for b in basis if ctx.max_order(b) <= 0]
                if not point:
                    return False, {**report, "error": "no invariant x(t, v) found"}
                x = point[0]
        if zeta0 is None:
            first = [b for b in basis if sp.diff(b, ctx.jet(1)) != 0]
            if not first:
                return False, {**report, "error": "no first-order invariant found"}
            zeta0 = first[0]
    report["invariants"] = {
        "x": to_text(x), "zeta0": to_text(zeta0),
        "x_invariant": verify_invariant(U1, x),
        "zeta0_invariant": verify_invariant(U1, zeta0),
    }
    if not (report["invariants"]["x_invariant"] and report["invariants"]["zeta0_invariant"]):
        return False, report
    report["derived"] = [to_text(z) for z in derived_invariants(prob.ode, x, zeta0)]
    try:
        chain = reduce(prob.ode, x, zeta0)
    except ReductionError as exc:
        return False, {**report, "error": str(exc)}
    report["reduction"] = chain.to_dict()
    if prob.auxiliary_rhs is not None:
        aux = auxiliary_ode(zeta0, prob.auxiliary_rhs, x, ctx)
        report["auxiliary"] = {"rhs": to_text(prob.auxiliary_rhs),
                               "residual": to_text(aux), "equation": f"{to_text(aux)} = 0"}
    return True, report


def cmd_verify_solution(prob, opts):
    sol = prob.solution
    text = opts.solution or sol.get("expression")
    if not text:
        raise InputError("solution: no candidate given on the command line or in the file")
    try:
        cand = prob.ctx.parse(text)
    except ParseError as exc:
        raise InputError(f"solution: {exc}") from exc
    lo, hi = sol.get("t_range", [-1.0, 1.0])
    points = np.linspace(float(lo), float(hi), int(sol.get("points", 50)))
    values = {**prob.plan.values, **sol.get("values", {})}
    tol = opts.tol if opts.tol_given else float(sol.get("tolerance", opts.tol))
    try:
        rep = verify_solution(prob.ode, cand, points, values=values,
                              functions=prob.instantiations, tol=tol)
    except EvaluationError as exc:
        return False, {"solution": to_text(cand), "error": str(exc)}
    return rep.ok, {"solution": to_text(cand), "t_range": [float(lo), float(hi)],
                    "values": values, **rep.as_dict()}


COMMANDS = {
    "check": cmd_check,
    "cover": cmd_cover,
    "chi": cmd_chi,
    "reconstruct": cmd_reconstruct,
    "reduce": cmd_reduce,
    "verify-solution": cmd_verify_solution,
}


def _text(value, indent=0):
    pad = "  " * indent
    lines = []
    if isinstance(value, dict):
        for k, v in value.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {v}")
    elif isinstance(value, list):
        for v in value:
            if isinstance(v, (dict, list)):
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {v}")
    else:
        lines.append(f"{pad}{value}")
    return lines


def build_parser():
    p = argparse.ArgumentParser(prog="ljet", description="lambda-symmetry jet calculus")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("file", help="problem file, or the name of a bundled example")
    p.add_argument("solution", nargs="?", help="candidate solution v(t) for verify-solution")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--degree-bound", type=int, default=3)
    return p


def run(argv=None, out=None):
    """Run one command; returns the exit status."""
    out = out or sys.stdout
    opts = build_parser().parse_args(argv)
    report = {"schema_version": SCHEMA_VERSION, "command": opts.command}
    try:
        if opts.solution and opts.command != "verify-solution":
            raise InputError("a solution argument only makes sense with verify-solution")
        if opts.degree_bound < 1:
            raise InputError("--degree-bound must be at least 1")
        prob = load_problem(opts.file)
        if opts.seed is not None:
            prob.plan.seed = opts.seed
        opts.tol_given = opts.tol is not None
        if not opts.tol_given:
            opts.tol = prob.tolerance
        report["problem"] = prob.name
        ok, body = COMMANDS[opts.command](prob, opts)
        report.update(body)
        report["ok"] = bool(ok)
        code = OK if ok else FAILED
    except (ProblemError, InputError) as exc:
        report["ok"] = False
        report["error"] = str(exc)
        report["location"] = getattr(exc, "location", None)
        code = BAD_INPUT
    if opts.format == "json":
        out.write(json.dumps(report, indent=2, default=str) + "\n")
    else:
        out.write("\n".join(_text(report)) + "\n")
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
