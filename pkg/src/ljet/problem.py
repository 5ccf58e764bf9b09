"""
JSON problem files.

A problem file fixes an ODE, a candidate lambda-symmetry and, optionally,
the data used further down the pipeline (a chi, invariants, a candidate
solution, numeric settings).  Expressions are strings in the grammar of
:mod:`ljet.expr`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .expr import ParseError
from .fields import LambdaPair
from .jets import JetContext, OdeProblem
from .numeric import SamplePlan

__all__ = ["ProblemError", "Problem", "load_problem", "bundled_problems"]


class ProblemError(ValueError):
    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


@dataclass
class Problem:
    name: str
    ode: OdeProblem
    lp: LambdaPair
    chi: object = None
    x: object = None
    zeta0: object = None
    auxiliary_rhs: object = None
    solution: dict = field(default_factory=dict)
    plan: SamplePlan = field(default_factory=SamplePlan)
    tolerance: float = 1e-9
    instantiations: dict = field(default_factory=dict)

    @property
    def ctx(self):
        return self.ode.ctx


def bundled_problems():
    folder = resources.files("ljet") / "problems"
    return sorted(p.name for p in folder.iterdir() if p.name.endswith(".json"))


def _resolve_path(path):
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix else p.name + ".json"
    bundled = resources.files("ljet") / "problems" / name
    if bundled.is_file():
        return bundled
    raise ProblemError(f"no such problem file: {path}")


def _get(data, key, where, kind=None, required=True):
    if key not in data:
        if required:
            raise ProblemError("missing field", f"{where}{key}")
        return None
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        raise ProblemError(f"expected {getattr(kind, '__name__', kind)}", f"{where}{key}")
    return value


def _parse(text, ctx, location):
    if not isinstance(text, str):
        raise ProblemError("expected an expression string", location)
    try:
        return ctx.parse(text)
    except ParseError as exc:
        raise ProblemError(str(exc), location) from exc


def load_problem(source):
    """Load a problem from a path, a bundled name (``example4``) or a dict."""
    if isinstance(source, dict):
        data, name = source, source.get("name", "problem")
    else:
        path = _resolve_path(source)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ProblemError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})")
        if not isinstance(data, dict):
            raise ProblemError("top level must be an object")
        name = data.get("name", Path(str(path)).stem)

    order = _get(data, "order", "", int)
    if order < 1:
        raise ProblemError("order must be at least 1", "order")
    parameters = _get(data, "parameters", "", list, required=False) or []
    constants = _get(data, "constants", "", list, required=False) or []
    functions = _get(data, "functions", "", list, required=False) or []
    fnames, inst = [], {}
    for i, f in enumerate(functions):
        if isinstance(f, str):
            fnames.append(f)
            continue
        if not isinstance(f, dict) or "name" not in f:
            raise ProblemError("expected {name, instantiation?}", f"functions[{i}]")
        fnames.append(f["name"])
        if f.get("instantiation") is not None:
            inst[f["name"]] = f["instantiation"]
    try:
        ctx = JetContext(order=order, parameters=parameters, constants=constants,
                         functions=fnames)
    except ValueError as exc:
        raise ProblemError(str(exc), "parameters")

    eq = _get(data, "equation", "", dict)
    rhs = delta = None
    if "rhs" in eq:
        rhs = _parse(eq["rhs"], ctx, "equation.rhs")
        if ctx.max_order(rhs) >= order:
            raise ProblemError(f"right-hand side involves jets of order >= {order}", "equation.rhs")
    if "delta" in eq:
        delta = _parse(eq["delta"], ctx, "equation.delta")
        if ctx.max_order(delta) != order:
            raise ProblemError(f"highest jet in the equation must be of order {order}",
                               "equation.delta")
    if rhs is None and delta is None:
        raise ProblemError("need 'rhs' or 'delta'", "equation")
    try:
        ode = OdeProblem(ctx, order, rhs=rhs, delta=delta)
    except ValueError as exc:
        raise ProblemError(str(exc), "equation")

    lam = _parse(_get(data, "lambda", ""), ctx, "lambda")
    vf = _get(data, "vector_field", "", dict)
    rho = _parse(vf.get("rho", "0"), ctx, "vector_field.rho")
    psi = _parse(_get(vf, "psi", "vector_field."), ctx, "vector_field.psi")
    try:
        lp = LambdaPair(ctx, rho, psi, lam)
    except ValueError as exc:
        raise ProblemError(str(exc), "vector_field")

    prob = Problem(name, ode, lp, instantiations={
        k: _parse(v, ctx, f"functions.{k}.instantiation") for k, v in inst.items()})
    if data.get("chi") is not None:
        prob.chi = _parse(data["chi"], ctx, "chi")
    inv = data.get("invariants")
    if inv is not None:
        if not isinstance(inv, dict):
            raise ProblemError("expected an object", "invariants")
        prob.x = _parse(inv.get("x", ctx.independent), ctx, "invariants.x")
        if "zeta0" in inv:
            prob.zeta0 = _parse(inv["zeta0"], ctx, "invariants.zeta0")
    aux = data.get("auxiliary")
    if aux is not None:
        actx = ctx.with_parameters("x")
        prob.auxiliary_rhs = _parse(_get(aux, "rhs", "auxiliary."), actx, "auxiliary.rhs")
    sol = data.get("solution")
    if sol is not None:
        if not isinstance(sol, dict):
            raise ProblemError("expected an object", "solution")
        prob.solution = dict(sol)

    num = data.get("numeric") or {}
    if not isinstance(num, dict):
        raise ProblemError("expected an object", "numeric")
    try:
        prob.plan = SamplePlan(
            ranges={k: tuple(v) for k, v in (num.get("ranges") or {}).items()},
            count=int(num.get("count", 100)),
            seed=int(num.get("seed", 0)),
            values=dict(num.get("values") or {}),
            functions=dict(prob.instantiations),
        )
    except (TypeError, ValueError) as exc:
        raise ProblemError(str(exc), "numeric")
    prob.tolerance = float(num.get("tolerance", 1e-9))
    return prob
