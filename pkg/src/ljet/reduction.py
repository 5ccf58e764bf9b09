"""
Order reduction by differential invariants of a lambda-symmetry.

Given invariants ``x(t, v)`` and ``zeta0(t, v, v1)`` of ``X^[lambda,k]``,
the derived invariants ``zeta_i = D0(zeta_{i-1}) / D0(x)`` let the ODE be
rewritten as ``Delta_red(x, zeta0, ..., zeta_{k-1}) = 0``, one order lower.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from sympy.polys.matrices import DomainMatrix

from .expr import simplify, to_text
from .fields import apply, lambda_prolong
from .jets import restrict_to_manifold, total_derivative, restricted_total_derivative
from .numeric import is_zero

__all__ = [
    "InvariantChain",
    "ReductionError",
    "verify_invariant",
    "find_invariant_ansatz",
    "derived_invariants",
    "reduce",
    "auxiliary_ode",
]


class ReductionError(ValueError):
    def __init__(self, message, expression=None):
        self.expression = expression
        if expression is not None:
            message = f"{message}: {to_text(expression)}"
        super().__init__(message)


def verify_invariant(V, I):
    """True when ``V(I)`` vanishes (symbolically or on random samples)."""
    r = apply(V, I)
    return r == 0 or bool(is_zero(r, V.ctx))


# --------------------------------------------------------------------------
# ansatz search

def _monomial_key(exps):
    a, b, c = exps
    return (abs(a) + abs(b) + abs(c), c, b, a)


def find_invariant_ansatz(lp, degree_bound=3):
    """Invariants of ``X^[lambda,1]`` spanned by Laurent monomials.

    Candidates are ``sum c_m t^a v^b v1^c`` with ``|a|, |b|, |c| <=
    degree_bound`` (the constant excluded).  Requiring the field to
    annihilate the combination gives a linear system in the ``c_m``; its
    null space is returned as a list of expressions, each normalised so
    that its leading monomial has coefficient 1, lowest degree first.
    """
    if degree_bound < 1:
        raise ValueError("degree bound must be at least 1")
    ctx = lp.ctx
    t, v, v1 = ctx.t, ctx.jet(0), ctx.jet(1)
    X1 = lambda_prolong(lp, 1)
    rho, psi, psi1 = X1.xi, X1.eta[0], X1.eta[1]
    # X(t^a v^b v1^c) = m * (a rho / t + b psi / v + c psi1 / v1)
    parts = [simplify(rho / t), simplify(psi / v), simplify(psi1 / v1)]
    den = sp.lcm_list([sp.fraction(sp.together(p))[1] for p in parts])
    polys = []
    for p in parts:
        q = simplify(p * den)
        try:
            poly = sp.Poly(q, t, v, v1)
        except sp.PolynomialError:
            return []
        if poly.free_symbols - {t, v, v1} and any(
                c.has(sp.core.function.AppliedUndef) for c in poly.coeffs()):
            return []
        polys.append(poly.as_dict())

    rng = range(-degree_bound, degree_bound + 1)
    monomials = [m for m in itertools.product(rng, rng, rng) if m != (0, 0, 0)]
    monomials.sort(key=_monomial_key, reverse=True)
    rows = {}
    columns = []
    for j, m in enumerate(monomials):
        col = {}
        for weight, poly in zip(m, polys):
            if weight == 0:
                continue
            for exps, coeff in poly.items():
                key = tuple(e + s for e, s in zip(exps, m))
                col[key] = col.get(key, 0) + weight * coeff
        columns.append({k: c for k, c in col.items() if c != 0})
        for k in columns[-1]:
            rows.setdefault(k, len(rows))
    if not rows:
        return []
    matrix = [[sp.Integer(0)] * len(monomials) for _ in range(len(rows))]
    for j, col in enumerate(columns):
        for k, c in col.items():
            matrix[rows[k]][j] = sp.sympify(c)
    M = DomainMatrix.from_list_sympy(len(rows), len(monomials), matrix)
    M = M.to_field()
    null = M.nullspace()
    if null.shape[0] == 0:
        return []
    # reduced echelon form over columns ordered highest monomial first:
    # every basis vector then has its own leading monomial with coefficient 1
    basis, pivots = null.rref()
    out = []
    for i, p in enumerate(pivots):
        row = basis.to_Matrix().row(i)
        expr = sum((row[j] * t ** a * v ** b * v1 ** c
                    for j, (a, b, c) in enumerate(monomials) if row[j] != 0), sp.Integer(0))
        out.append((_monomial_key(monomials[p]), simplify(expr)))
    out.sort(key=lambda kv: kv[0])
    return [e for _, e in out]


# --------------------------------------------------------------------------
# reduction

def _chain(ode, x, zeta0, restricted):
    ctx = ode.ctx
    Dx = restricted_total_derivative(x, ode)
    if Dx == 0:
        raise ReductionError("D0(x) vanishes", x)
    out = [simplify(zeta0)]
    for _ in range(1, ode.order):
        prev = out[-1]
        if restricted:
            nxt = restricted_total_derivative(prev, ode)
        else:
            nxt = total_derivative(prev, ctx)
        out.append(simplify(nxt / Dx))
    return out


def derived_invariants(ode, x, zeta0, restricted=True):
    """``zeta_1 .. zeta_{k-1}`` with ``zeta_i = D0bar(zeta_{i-1}) / D0bar(x)``.

    With ``restricted=False`` the plain total derivative is used, so that
    ``zeta_i`` keeps its dependence on ``v_{i+1}`` even at ``i = k - 1``.
    """
    return _chain(ode, x, zeta0, restricted)[1:]


@dataclass(frozen=True)
class InvariantChain:
    x: object
    zeta: tuple
    reduced: object
    symbols: tuple
    jets: dict = field(default_factory=dict)
    status: str = "symbolic"

    def to_dict(self):
        names = [str(s) for s in self.symbols]
        return {
            "x": to_text(self.x),
            "zeta": [to_text(z) for z in self.zeta],
            "reduced": to_text(self.reduced),
            "reduced_equation": f"{to_text(self.reduced)} = 0",
            "symbols": names,
            "eliminated": {str(k): to_text(v) for k, v in self.jets.items()},
            "independence": self.status,
        }


def _affine_solve(expr, target, var):
    """Solve ``expr = target`` for ``var`` when ``expr`` is affine in it."""
    slope = simplify(sp.diff(expr, var))
    if slope == 0:
        raise ReductionError(f"invariant does not depend on {var}", expr)
    if simplify(sp.diff(slope, var)) != 0:
        raise ReductionError(f"invariant is not affine in {var}", expr)
    intercept = simplify(expr - slope * var)
    return simplify((target - intercept) / slope)


def reduce(ode, x, zeta0, lp=None, names=("x", "zeta")):
    """Rewrite the ODE in the invariants ``x, zeta0, ..., zeta_{k-1}``.

    ``v1, ..., v_k`` are eliminated one at a time (each ``zeta_i`` is affine
    in ``v_{i+1}``), then ``t`` or ``v`` via ``x``.  What is left must not
    depend on the remaining coordinate; the result is normalised to
    ``zeta_{k-1} - G(x, zeta0, ..., zeta_{k-2})``.
    """
    ctx = ode.ctx
    k = ode.order
    t, v = ctx.t, ctx.jet(0)
    x = simplify(x)
    zeta0 = simplify(zeta0)
    if ctx.max_order(x) > 0:
        raise ReductionError("x must depend on (t, v) only", x)
    if ctx.max_order(zeta0) > 1:
        raise ReductionError("zeta0 must depend on (t, v, v1) only", zeta0)
    if sp.diff(zeta0, ctx.jet(1)) == 0:
        raise ReductionError("zeta0 does not depend on v1", zeta0)
    if lp is not None:
        U = lambda_prolong(lp, k)
        for inv in (x, zeta0):
            if not verify_invariant(U, inv):
                raise ReductionError("not an invariant of the lambda-prolonged field", inv)

    X = sp.Symbol(names[0])
    Z = [sp.Symbol(f"{names[1]}{i}") for i in range(k)]
    taken = {str(s) for s in (X, *Z)}
    clash = [s for s in (*ctx.parameters, *ctx.constants) if s in taken]
    if clash:
        raise ReductionError(f"invariant symbol names collide with {clash}")

    zetas = _chain(ode, x, zeta0, restricted=False)
    solved = {}
    for i, zi in enumerate(zetas):
        target = ctx.jet(i + 1)
        known = simplify(zi.xreplace(solved))
        solved[target] = _affine_solve(known, Z[i], target)
        solved = {s: simplify(e.xreplace({target: solved[target]})) for s, e in solved.items()}

    candidate = simplify(ode.normal_residual.xreplace(solved))

    # trade t (or failing that v) for x; the other coordinate must drop out
    try:
        candidate = simplify(candidate.xreplace({t: _affine_solve(x, X, t)}))
        drop = v
    except ReductionError:
        candidate = simplify(candidate.xreplace({v: _affine_solve(x, X, v)}))
        drop = t

    slope = simplify(sp.diff(candidate, Z[-1]))
    if slope == 0:
        raise ReductionError("equation does not involve the top invariant", candidate)
    reduced = simplify(candidate / slope)

    status = "symbolic"
    dependence = simplify(sp.diff(reduced, drop))
    if dependence != 0:
        verdict = is_zero(dependence, ctx)
        if not verdict:
            raise ReductionError(f"reduced equation still depends on {drop}", reduced)
        status = "numeric-confirmed"
        reduced = _freeze(reduced, drop, ctx)
    return InvariantChain(x, tuple(zetas), reduced, (X, *Z), solved, status)


def _freeze(expr, var, ctx):
    """Drop a dependence that was shown to be numerically void."""
    value = sp.Rational(1) if ctx.classify(var)[1] == 0 else sp.Integer(0)
    return simplify(expr.xreplace({var: value}))


def auxiliary_ode(zeta0, rhs, x=None, ctx=None, names=("x",)):
    """``zeta0(t, v, v1) - rhs(x(t, v))``: the first-order equation for ``v``
    once the reduced equation has been solved as ``zeta0 = rhs(x)``."""
    t = ctx.t if ctx is not None else sp.Symbol("t")
    x = t if x is None else x
    rhs = sp.sympify(rhs).xreplace({sp.Symbol(names[0]): x})
    return simplify(zeta0 - rhs)
