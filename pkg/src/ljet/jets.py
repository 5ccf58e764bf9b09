"""
Jet contexts, total derivatives and restriction to the equation manifold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import lru_cache

import sympy as sp

from .expr import SymbolKind, parse, simplify, equals, EvaluationError

__all__ = [
    "JetContext",
    "OdeProblem",
    "CoveringSystem",
    "total_derivative",
    "restrict_to_manifold",
    "restricted_total_derivative",
]

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9]*$")
_RESERVED = {"exp", "ln", "sin", "cos", "tan"}


@dataclass(frozen=True)
class JetContext:
    """Coordinate names for one problem.

    Jets of the dependent variable are ``v, v1, v2, ...``; when a nonlocal
    variable is present its jets are ``w, w1, w2, ...``.  Any order can be
    requested, the context grows on demand.
    """

    order: int = 1
    independent: str = "t"
    base: str = "v"
    nonlocal_base: str | None = None
    parameters: tuple = ()
    constants: tuple = ()
    functions: tuple = ()

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("jet context order must be at least 1")
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "constants", tuple(self.constants))
        object.__setattr__(self, "functions", tuple(self.functions))
        names = [self.independent, self.base, *self.parameters,
                 *self.constants, *self.functions]
        if self.nonlocal_base is not None:
            names.append(self.nonlocal_base)
        for n in names:
            if not _IDENT.match(n) or n in _RESERVED:
                raise ValueError(f"invalid name {n!r}")
        if len(set(names)) != len(names):
            raise ValueError("names in a jet context must be unique")
        for n in (*self.parameters, *self.constants, *self.functions, self.independent):
            if self._jet_family(n) is not None:
                raise ValueError(f"{n!r} collides with a jet coordinate name")

    # -- coordinates -------------------------------------------------------

    @property
    def t(self):
        return sp.Symbol(self.independent)

    def jet(self, i):
        return sp.Symbol(self.base if i == 0 else f"{self.base}{i}")

    def wjet(self, i):
        if self.nonlocal_base is None:
            raise ValueError("context has no nonlocal variable")
        return sp.Symbol(self.nonlocal_base if i == 0 else f"{self.nonlocal_base}{i}")

    def jets(self, upto=None):
        upto = self.order if upto is None else upto
        return [self.jet(i) for i in range(upto + 1)]

    @property
    def has_nonlocal(self):
        return self.nonlocal_base is not None

    def parameter_symbols(self):
        return [sp.Symbol(n) for n in (*self.parameters, *self.constants)]

    def function(self, name, order=0):
        if name not in self.functions:
            raise ValueError(f"undeclared function {name!r}")
        applied = sp.Function(name)(self.t)
        return sp.Derivative(applied, (self.t, order)) if order else applied

    def _jet_family(self, name):
        for fam, base in (("v", self.base), ("w", self.nonlocal_base)):
            if base is None:
                continue
            if name == base:
                return fam, 0
            if name.startswith(base) and name[len(base):].isdigit():
                digits = name[len(base):]
                if digits[0] != "0":
                    return fam, int(digits)
        return None

    def classify(self, sym):
        """Return ``(kind, order)``; order is None for non-jet symbols."""
        name = str(sym)
        if name == self.independent:
            return SymbolKind.INDEPENDENT, None
        fam = self._jet_family(name)
        if fam is not None:
            kind = SymbolKind.JET if fam[0] == "v" else SymbolKind.NONLOCAL_JET
            return kind, fam[1]
        if name in self.parameters:
            return SymbolKind.PARAMETER, None
        if name in self.constants:
            return SymbolKind.CONSTANT, None
        return None, None

    def resolve(self, name):
        kind, _ = self.classify(name)
        return sp.Symbol(name) if kind is not None else None

    def parse(self, text):
        return parse(text, self)

    def max_order(self, e, family="v"):
        """Highest jet order of ``family`` occurring in ``e`` (-1 if none)."""
        want = SymbolKind.JET if family == "v" else SymbolKind.NONLOCAL_JET
        best = -1
        for s in sp.sympify(e).free_symbols:
            kind, order = self.classify(s)
            if kind is want:
                best = max(best, order)
        return best

    def jet_symbols(self, e):
        """Jet symbols of ``e`` as ``(symbol, family, order)`` triples."""
        out = []
        for s in sp.sympify(e).free_symbols:
            kind, order = self.classify(s)
            if kind is SymbolKind.JET:
                out.append((s, "v", order))
            elif kind is SymbolKind.NONLOCAL_JET:
                out.append((s, "w", order))
        return sorted(out, key=lambda x: (x[1], x[2]))

    def with_nonlocal(self, name="w"):
        if self.nonlocal_base == name:
            return self
        return replace(self, nonlocal_base=name)

    def with_parameters(self, *names, constants=False):
        if constants:
            return replace(self, constants=self.constants + tuple(names))
        return replace(self, parameters=self.parameters + tuple(names))

    def same_coordinates(self, other):
        return (self.independent, self.base, self.nonlocal_base) == (
            other.independent, other.base, other.nonlocal_base)


def total_derivative(e, ctx, canonical=True):
    """``D = d/dt + sum v_{i+1} d/dv_i (+ sum w_{i+1} d/dw_i)``."""
    e = sp.sympify(e)
    out = sp.diff(e, ctx.t)
    for s, fam, order in ctx.jet_symbols(e):
        nxt = ctx.jet(order + 1) if fam == "v" else ctx.wjet(order + 1)
        out += nxt * sp.diff(e, s)
    return simplify(out) if canonical else out


@dataclass(frozen=True)
class OdeProblem:
    """A scalar ODE ``v_k = f`` with an optional general residual ``Delta``.

    If only ``delta`` is given it must be affine in ``v_k``; the normal
    form is then solved for.
    """

    ctx: JetContext
    order: int
    rhs: object = None
    delta: object = None

    def __post_init__(self):
        k = self.order
        if k < 1:
            raise ValueError("ODE order must be at least 1")
        if self.ctx.order != k:
            object.__setattr__(self, "ctx", replace(self.ctx, order=k))
        vk = self.ctx.jet(k)
        if self.rhs is None and self.delta is None:
            raise ValueError("an ODE needs a right-hand side or a residual")
        if self.delta is not None:
            delta = simplify(self.delta)
            object.__setattr__(self, "delta", delta)
            if self.ctx.max_order(delta) > k:
                raise ValueError(f"residual involves jets above order {k}")
            if self.ctx.max_order(delta, "w") >= 0:
                raise ValueError("residual must not involve nonlocal jets")
        if self.rhs is None:
            delta = self.delta
            slope = simplify(sp.diff(delta, vk))
            if slope == 0 or simplify(sp.diff(slope, vk)) != 0:
                raise ValueError(f"residual is not affine in {vk}; give the normal form")
            rhs = simplify(-delta.xreplace({vk: 0}) / slope)
            object.__setattr__(self, "rhs", rhs)
        else:
            rhs = simplify(self.rhs)
            object.__setattr__(self, "rhs", rhs)
            if self.ctx.max_order(rhs) >= k:
                raise ValueError(f"right-hand side must not involve jets of order >= {k}")
            if self.ctx.max_order(rhs, "w") >= 0:
                raise ValueError("right-hand side must not involve nonlocal jets")
            if self.delta is not None:
                check = equals(self.delta.xreplace({vk: rhs}), 0)
                if not check:
                    raise ValueError("residual does not vanish on v_k = f")

    @property
    def top(self):
        return self.ctx.jet(self.order)

    @property
    def normal_residual(self):
        return simplify(self.top - self.rhs)

    @property
    def residual(self):
        """``Delta`` if one was given, otherwise ``v_k - f``."""
        return self.delta if self.delta is not None else self.normal_residual

    @classmethod
    def from_text(cls, order, rhs=None, delta=None, parameters=(), constants=(),
                  functions=(), ctx=None):
        if ctx is None:
            ctx = JetContext(order=order, parameters=parameters, constants=constants,
                             functions=functions)
        return cls(ctx, order,
                   rhs=parse(rhs, ctx) if rhs is not None else None,
                   delta=parse(delta, ctx) if delta is not None else None)


@dataclass(frozen=True)
class CoveringSystem:
    """The system ``{v_k = f, w_1 = H}`` over an ODE."""

    base: OdeProblem
    H: object
    ctx: JetContext = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ctx", self.base.ctx.with_nonlocal())
        H = simplify(self.H)
        object.__setattr__(self, "H", H)
        if self.ctx.max_order(H) >= self.base.order:
            raise ValueError("covering coefficient involves jets of order >= k")
        if self.ctx.max_order(H, "w") > 0:
            raise ValueError("covering coefficient may depend on w but not on its derivatives")

    @property
    def equations(self):
        """The two defining relations as residuals ``(v_k - f, w_1 - H)``."""
        return self.base.normal_residual, simplify(self.ctx.wjet(1) - self.H)


@lru_cache(maxsize=512)
def _jet_values(ode, cover, n_v, n_w):
    """Manifold values of ``v_k..v_{n_v}`` and ``w_1..w_{n_w}``."""
    ctx = cover.ctx if cover is not None else ode.ctx
    k = ode.order
    base = {ctx.jet(k): ode.rhs}
    if cover is not None:
        base[ctx.wjet(1)] = cover.H
    values = dict(base)
    prev = ode.rhs
    for j in range(k + 1, n_v + 1):
        prev = simplify(total_derivative(prev, ctx).xreplace(base))
        values[ctx.jet(j)] = prev
    if cover is not None:
        prev = cover.H
        for j in range(2, n_w + 1):
            prev = simplify(total_derivative(prev, ctx).xreplace(base))
            values[ctx.wjet(j)] = prev
    return values


def restrict_to_manifold(e, ode, cover=None):
    """Eliminate ``v_{k+s}`` (and ``w_{1+s}``) using the equations.

    The result depends on ``t, v, ..., v_{k-1}`` (and ``w``) only.
    """
    ctx = cover.ctx if cover is not None else ode.ctx
    e = sp.sympify(e)
    n_v = ctx.max_order(e, "v")
    n_w = ctx.max_order(e, "w") if ctx.has_nonlocal else -1
    if n_v < ode.order and n_w < 1:
        return simplify(e)
    if n_w >= 1 and cover is None:
        raise ValueError("nonlocal jets present but no covering given")
    values = _jet_values(ode, cover, max(n_v, ode.order), max(n_w, 1))
    used = {s: values[s] for s in e.free_symbols if s in values}
    return simplify(e.xreplace(used))


def restricted_total_derivative(e, ode, cover=None):
    ctx = cover.ctx if cover is not None else ode.ctx
    return restrict_to_manifold(total_derivative(e, ctx), ode, cover)
