"""
Numeric evaluation, manifold sampling and residual checks.

Everything here is deterministic for a fixed seed: samples come from
``numpy.random.default_rng(seed)`` and nothing is cached across calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .expr import (
    EvaluationError, Magnitude, SymbolKind, Verdict, atomize, compile_numeric, evaluate,
    instantiate, simplify,
)
from .expr import NUMERIC, MISMATCH, SYMBOLIC

__all__ = [
    "SamplePlan",
    "ResidualReport",
    "Trajectory",
    "SamplingExhausted",
    "eval_expr",
    "is_zero",
    "sample_manifold",
    "verify_residual",
    "integrate_ode",
    "verify_solution",
]

DEFAULT_TOL = 1e-9
ABS_FLOOR = 1e-12
DENOMINATOR_FLOOR = 1e-3

eval_expr = evaluate


class SamplingExhausted(RuntimeError):
    pass


def default_range(ctx, sym):
    """``(low, high, signed)``; signed draws the magnitude then a sign."""
    kind, order = ctx.classify(sym) if ctx is not None else (None, None)
    if kind is SymbolKind.INDEPENDENT:
        return (-1.0, 1.0, False)
    if kind is SymbolKind.JET:
        return (0.5, 2.0, True) if order == 0 else (-2.0, 2.0, False)
    if kind is SymbolKind.NONLOCAL_JET:
        return (-1.0, 1.0, False) if order == 0 else (-2.0, 2.0, False)
    return (0.5, 2.0, False)


@dataclass
class SamplePlan:
    """Where to draw sample points.

    ``ranges`` maps symbol names to ``(low, high)`` or ``(low, high, signed)``;
    ``values`` pins symbols (typically parameters) to fixed numbers;
    ``functions`` instantiates uninterpreted functions, e.g. ``{"g": t}``.
    """

    ranges: dict = field(default_factory=dict)
    exclude: tuple = ()
    count: int = 100
    seed: int = 0
    values: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be at least 1")

    def range_for(self, ctx, sym):
        r = self.ranges.get(str(sym))
        if r is None:
            return default_range(ctx, sym)
        if len(r) == 2:
            return (float(r[0]), float(r[1]), False)
        return (float(r[0]), float(r[1]), bool(r[2]))


@dataclass
class ResidualReport:
    max_abs: float
    max_rel: float
    points_tested: int
    failures: list
    tolerance: float

    @property
    def ok(self):
        return not self.failures

    def __bool__(self):
        return self.ok

    def as_dict(self):
        return {
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "points_tested": self.points_tested,
            "failures": len(self.failures),
            "tolerance": self.tolerance,
            "ok": self.ok,
        }


def _draw(rng, lo, hi, signed):
    x = rng.uniform(lo, hi)
    if signed and rng.random() < 0.5:
        x = -x
    return x


def _scale_expr(e):
    """Magnitude the value of ``e`` should be compared against: the sum of
    absolute numerator terms over the absolute denominator."""
    num, den = sp.fraction(sp.together(e))
    terms = sp.Add.make_args(sp.expand(num))
    return sp.Add(*[Magnitude(term) for term in terms]) / Magnitude(den)


def _relative(value, scale):
    err = abs(value)
    if err <= ABS_FLOOR:
        return 0.0
    return err / max(1.0, scale)


def _prepare(e, plan, t):
    e = sp.sympify(e)
    if plan is not None and plan.values:
        e = e.xreplace({sp.Symbol(k): sp.sympify(v) for k, v in plan.values.items()})
    if plan is not None and plan.functions:
        e = instantiate(e, {k: sp.sympify(v) for k, v in plan.functions.items()}, t)
    return e


def is_zero(e, ctx=None, tol=DEFAULT_TOL, count=100, seed=0, plan=None, retries=200):
    """Zero test: canonical form first, then random points.

    Uninterpreted functions that are not instantiated by ``plan`` are
    treated as independent unknowns.
    """
    if simplify(e) == 0:
        return Verdict(True, SYMBOLIC)
    t = ctx.t if ctx is not None else sp.Symbol("t")
    e = _prepare(e, plan, t)
    e, kernels = atomize(e)
    syms = sorted(e.free_symbols, key=sp.default_sort_key)
    raw = sp.lambdify(syms, [e, _scale_expr(e)], modules=[{"Magnitude": abs}, "math"])
    rng = np.random.default_rng(seed)
    kernel_syms = set(kernels.values())
    worst = 0.0
    for _ in range(count):
        for _attempt in range(retries):
            point = []
            for s in syms:
                if s in kernel_syms:
                    point.append(rng.uniform(0.5, 2.0))
                else:
                    point.append(_draw(rng, *(plan.range_for(ctx, s) if plan else
                                             default_range(ctx, s))))
            try:
                val, scale = raw(*point)
                val = float(val)
                scale = float(scale)
            except (ZeroDivisionError, ValueError, OverflowError, TypeError):
                continue
            if math.isfinite(val) and math.isfinite(scale):
                break
        else:
            raise SamplingExhausted("no regular sample point found")
        rel = _relative(val, scale)
        worst = max(worst, rel)
        if rel > tol:
            return Verdict(False, MISMATCH, worst)
    return Verdict(True, NUMERIC, worst)


def _coordinates(ode, cover):
    ctx = cover.ctx if cover is not None else ode.ctx
    coords = [ctx.t] + [ctx.jet(i) for i in range(ode.order)]
    if cover is not None:
        coords.append(ctx.wjet(0))
    return ctx, coords


def sample_manifold(ode, cover=None, plan=None, extra_orders=0):
    """Draw points of the equation manifold.

    Free coordinates ``t, v, ..., v_{k-1}`` (and ``w``) and every parameter
    are drawn from the plan; ``v_k, ..., v_{k+extra_orders}`` (and
    ``w_1, ...``) are then computed from the equations.  Points where a
    listed denominator is below ``1e-3`` in magnitude, or where anything
    fails to evaluate, are rejected.
    """
    from .jets import _jet_values

    plan = plan or SamplePlan()
    ctx, coords = _coordinates(ode, cover)
    values = _jet_values(ode, cover, ode.order + extra_orders, 1 + extra_orders)
    dependent = list(values.items())
    dependent.sort(key=lambda kv: str(kv[0]))
    exprs = [_prepare(rhs, plan, ctx.t) for _, rhs in dependent]
    excl = [_prepare(d, plan, ctx.t) for d in plan.exclude]
    free = set(coords)
    for e in exprs + excl:
        free |= e.free_symbols
    if any(e.atoms(sp.core.function.AppliedUndef) for e in exprs + excl):
        raise EvaluationError("instantiate uninterpreted functions in the sample plan")
    free = sorted(free, key=sp.default_sort_key)
    dep_fns = [compile_numeric(e, free) for e in exprs]
    excl_fns = [compile_numeric(e, free) for e in excl]
    rng = np.random.default_rng(plan.seed)
    points = []
    attempts = 0
    max_attempts = 100 * plan.count
    while len(points) < plan.count:
        attempts += 1
        if attempts > max_attempts:
            raise SamplingExhausted(
                f"rejection rate above 99% ({len(points)} of {plan.count} points)")
        draw = [_draw(rng, *plan.range_for(ctx, s)) for s in free]
        try:
            if any(abs(f(*draw)) <= DENOMINATOR_FLOOR for f in excl_fns):
                continue
            computed = [f(*draw) for f in dep_fns]
        except EvaluationError:
            continue
        point = dict(zip(free, draw))
        for (sym, _), val in zip(dependent, computed):
            point[sym] = val
        points.append(point)
    return points


def verify_residual(e, plan=None, ode=None, cover=None, ctx=None, tol=DEFAULT_TOL):
    """Evaluate ``e`` on sample points and report the worst deviation from 0.

    With an ODE the points lie on its manifold; otherwise the free
    symbols of ``e`` are drawn directly from the plan.
    """
    plan = plan or SamplePlan()
    if ode is not None:
        ctx = cover.ctx if cover is not None else ode.ctx
    t = ctx.t if ctx is not None else sp.Symbol("t")
    e = _prepare(e, plan, t)
    if e.atoms(sp.core.function.AppliedUndef):
        raise EvaluationError("instantiate uninterpreted functions in the sample plan")
    scale = _scale_expr(e) if e != 0 else sp.Integer(0)
    if ode is not None:
        points = sample_manifold(ode, cover, plan, extra_orders=max(
            0, ctx.max_order(e) - ode.order))
        syms = sorted(set().union(*(p.keys() for p in points)) | e.free_symbols,
                      key=sp.default_sort_key)
        missing = e.free_symbols - set(points[0])
        if missing:
            raise EvaluationError("residual has symbols the manifold sample does not fix: "
                                  + ", ".join(map(str, missing)))
    else:
        syms = sorted(e.free_symbols, key=sp.default_sort_key)
        rng = np.random.default_rng(plan.seed)
        points = []
        excl = [compile_numeric(_prepare(d, plan, t), syms) for d in plan.exclude]
        attempts = 0
        while len(points) < plan.count:
            attempts += 1
            if attempts > 100 * plan.count:
                raise SamplingExhausted("rejection rate above 99%")
            p = {s: _draw(rng, *plan.range_for(ctx, s)) for s in syms}
            try:
                if any(abs(f(*[p[s] for s in syms])) <= DENOMINATOR_FLOOR for f in excl):
                    continue
            except EvaluationError:
                continue
            points.append(p)
    fv = compile_numeric(e, syms)
    fs = compile_numeric(scale, syms)
    max_abs = max_rel = 0.0
    failures = []
    for p in points:
        args = [p[s] for s in syms]
        val = fv(*args)
        rel = _relative(val, fs(*args))
        max_abs = max(max_abs, abs(val))
        max_rel = max(max_rel, rel)
        if rel > tol:
            failures.append(({str(k): v for k, v in p.items()}, val))
    return ResidualReport(max_abs, max_rel, len(points), failures, tol)


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    names: tuple

    def column(self, name):
        return self.y[:, self.names.index(str(name))]

    def final(self):
        return dict(zip(self.names, self.y[-1]))


def integrate_ode(ode, initial, t_span, step, cover=None, functions=None, values=None):
    """Fixed-step classical RK4 on the first-order system ``(v, ..., v_{k-1})``.

    ``initial`` maps coordinate names (``v``, ``v1``, ... and ``w`` with a
    covering) to their values at ``t_span[0]``.
    """
    ctx, coords = _coordinates(ode, cover)
    state = coords[1:]
    rhs = [ctx.jet(i + 1) for i in range(ode.order - 1)] + [ode.rhs]
    if cover is not None:
        rhs.append(cover.H)
    plan = SamplePlan(values=dict(values or {}), functions=dict(functions or {}))
    rhs = [_prepare(r, plan, ctx.t) for r in rhs]
    fns = [compile_numeric(r, coords) for r in rhs]

    def field_(tt, y):
        return np.array([f(tt, *y) for f in fns])

    t0, t1 = map(float, t_span)
    n = int(round((t1 - t0) / step))
    if n < 1:
        raise ValueError("time span shorter than one step")
    h = (t1 - t0) / n
    init = {str(k): v for k, v in initial.items()}
    y = np.array([float(init[str(s)]) for s in state])
    ts = np.empty(n + 1)
    ys = np.empty((n + 1, len(state)))
    ts[0], ys[0] = t0, y
    for i in range(n):
        tt = t0 + i * h
        k1 = field_(tt, y)
        k2 = field_(tt + h / 2, y + h / 2 * k1)
        k3 = field_(tt + h / 2, y + h / 2 * k2)
        k4 = field_(tt + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ts[i + 1], ys[i + 1] = t0 + (i + 1) * h, y
    return Trajectory(ts, ys, tuple(str(s) for s in state))


def verify_solution(ode, candidate, t_points, values=None, functions=None, tol=DEFAULT_TOL):
    """Substitute ``v = candidate(t)`` and its derivatives into the ODE.

    The residual used is ``Delta`` when the problem carries one, else
    ``v_k - f``; its size is judged against its own numerator terms.
    """
    ctx = ode.ctx
    plan = SamplePlan(values=dict(values or {}), functions=dict(functions or {}))
    cand = _prepare(candidate, plan, ctx.t)
    residual = _prepare(ode.residual, plan, ctx.t)
    scale = _scale_expr(residual)
    derivs = {ctx.jet(0): cand}
    d = cand
    for i in range(1, ode.order + 1):
        d = sp.diff(d, ctx.t)
        derivs[ctx.jet(i)] = d
    value = residual.xreplace(derivs)
    scale = scale.xreplace(derivs)
    leftover = value.free_symbols - {ctx.t}
    if leftover:
        raise EvaluationError("unbound symbols in candidate: " + ", ".join(map(str, leftover)))
    fv = compile_numeric(value, [ctx.t])
    fs = compile_numeric(scale, [ctx.t])
    max_abs = max_rel = 0.0
    failures = []
    for tt in t_points:
        val = fv(float(tt))
        rel = _relative(val, fs(float(tt)))
        max_abs = max(max_abs, abs(val))
        max_rel = max(max_rel, rel)
        if rel > tol:
            failures.append(({"t": float(tt)}, val))
    return ResidualReport(max_abs, max_rel, len(t_points), failures, tol)
