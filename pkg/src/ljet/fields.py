"""
Vector fields on jet spaces: prolongation, lambda-prolongation, brackets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .expr import simplify, to_text
from .jets import JetContext, total_derivative
from .numeric import is_zero

__all__ = [
    "VectorField",
    "LambdaPair",
    "CommutationResult",
    "std_prolong",
    "lambda_prolong",
    "commutator",
    "total_derivative_field",
    "check_commutation",
    "apply",
]


@dataclass(frozen=True)
class VectorField:
    """``xi d/dt + sum eta[i] d/dv_i + sum eta_w[i] d/dw_i``."""

    ctx: JetContext
    xi: object = 0
    eta: tuple = ()
    eta_w: tuple = ()
    prolonged: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "xi", simplify(self.xi))
        object.__setattr__(self, "eta", tuple(simplify(c) for c in self.eta))
        object.__setattr__(self, "eta_w", tuple(simplify(c) for c in self.eta_w))
        if self.eta_w and not self.ctx.has_nonlocal:
            raise ValueError("nonlocal components need a context with a nonlocal variable")

    def components(self):
        """Nonzero coefficients keyed by coordinate symbol."""
        out = {}
        if self.xi != 0:
            out[self.ctx.t] = self.xi
        for i, c in enumerate(self.eta):
            if c != 0:
                out[self.ctx.jet(i)] = c
        for i, c in enumerate(self.eta_w):
            if c != 0:
                out[self.ctx.wjet(i)] = c
        return out

    def __call__(self, e):
        return apply(self, e)

    def is_zero(self):
        return all(c == 0 for c in (self.xi, *self.eta, *self.eta_w))

    def _padded(self, n, m):
        eta = self.eta + (sp.Integer(0),) * (n - len(self.eta))
        eta_w = self.eta_w + (sp.Integer(0),) * (m - len(self.eta_w))
        return eta, eta_w

    def _combine(self, other, sign):
        if not self.ctx.same_coordinates(other.ctx):
            raise ValueError("vector fields live on different jet contexts")
        n = max(len(self.eta), len(other.eta))
        m = max(len(self.eta_w), len(other.eta_w))
        a, aw = self._padded(n, m)
        b, bw = other._padded(n, m)
        return VectorField(
            self.ctx, self.xi + sign * other.xi,
            tuple(x + sign * y for x, y in zip(a, b)),
            tuple(x + sign * y for x, y in zip(aw, bw)))

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def scaled(self, factor):
        return VectorField(self.ctx, self.xi * factor,
                           tuple(c * factor for c in self.eta),
                           tuple(c * factor for c in self.eta_w), self.prolonged)

    def to_dict(self):
        return {str(s): to_text(c) for s, c in self.components().items()}

    def __str__(self):
        parts = [f"({to_text(c)})*d/d{s}" for s, c in self.components().items()]
        return " + ".join(parts) if parts else "0"


@dataclass(frozen=True)
class LambdaPair:
    """A field ``rho d/dt + psi d/dv`` on ``(t, v)`` together with ``lambda(t, v, v1)``."""

    ctx: JetContext
    rho: object
    psi: object
    lam: object

    def __post_init__(self):
        for name in ("rho", "psi", "lam"):
            object.__setattr__(self, name, simplify(getattr(self, name)))
        if self.ctx.max_order(self.rho) > 0 or self.ctx.max_order(self.psi) > 0:
            raise ValueError("rho and psi may depend on t and v only")
        if self.ctx.max_order(self.lam) > 1:
            raise ValueError("lambda may depend on t, v and v1 only")
        for e in (self.rho, self.psi, self.lam):
            if self.ctx.has_nonlocal and self.ctx.max_order(e, "w") >= 0:
                raise ValueError("lambda pairs must not involve nonlocal variables")

    @property
    def field(self):
        return VectorField(self.ctx, self.rho, (self.psi,))


def apply(V, e, canonical=True):
    """Directional derivative ``V(e)``; ``canonical=False`` skips simplify."""
    e = sp.sympify(e)
    out = V.xi * sp.diff(e, V.ctx.t) if V.xi != 0 else sp.Integer(0)
    free = e.free_symbols
    for i, c in enumerate(V.eta):
        s = V.ctx.jet(i)
        if c != 0 and s in free:
            out += c * sp.diff(e, s)
    for i, c in enumerate(V.eta_w):
        s = V.ctx.wjet(i)
        if c != 0 and s in free:
            out += c * sp.diff(e, s)
    return simplify(out) if canonical else out


def std_prolong(X, k):
    """Prolong ``X`` through order ``k``: ``eta_i = D(eta_{i-1}) - D(xi) u_i``.

    ``D`` is the total derivative of the context, including the nonlocal
    family when there is one.
    """
    ctx = X.ctx
    Dxi = total_derivative(X.xi, ctx)
    eta = [X.eta[0] if X.eta else sp.Integer(0)]
    for i in range(1, k + 1):
        eta.append(simplify(total_derivative(eta[-1], ctx, False) - Dxi * ctx.jet(i)))
    eta_w = []
    if ctx.has_nonlocal:
        eta_w = [X.eta_w[0] if X.eta_w else sp.Integer(0)]
        for i in range(1, k + 1):
            eta_w.append(simplify(total_derivative(eta_w[-1], ctx, False) - Dxi * ctx.wjet(i)))
    return VectorField(ctx, X.xi, tuple(eta), tuple(eta_w), prolonged=True)


def lambda_prolong(lp, k):
    """``X^[lambda,k]``.

    psi_0 = psi and
    psi_i = D0(psi_{i-1}) - D0(rho) v_i + lambda (psi_{i-1} - rho v_i).
    """
    if k < 1:
        raise ValueError("prolongation order must be at least 1")
    ctx = lp.ctx
    D_rho = total_derivative(lp.rho, ctx)
    psi = [lp.psi]
    for i in range(1, k + 1):
        vi = ctx.jet(i)
        prev = psi[-1]
        psi.append(simplify(total_derivative(prev, ctx, False) - D_rho * vi
                            + lp.lam * (prev - lp.rho * vi)))
    return VectorField(ctx, lp.rho, tuple(psi))


def commutator(A, B):
    """Lie bracket on the finite jet context spanned by both fields."""
    if not A.ctx.same_coordinates(B.ctx):
        raise ValueError("vector fields live on different jet contexts")
    ctx = A.ctx
    n = max(len(A.eta), len(B.eta))
    m = max(len(A.eta_w), len(B.eta_w))
    a, aw = A._padded(n, m)
    b, bw = B._padded(n, m)

    def bracket(ca, cb):
        return simplify(apply(A, cb) - apply(B, ca))

    return VectorField(
        ctx, bracket(A.xi, B.xi),
        tuple(bracket(x, y) for x, y in zip(a, b)),
        tuple(bracket(x, y) for x, y in zip(aw, bw)))


def total_derivative_field(ctx, k, nonlocal_=False):
    """Truncated ``D0 = d/dt + v1 d/dv + ... + v_k d/dv_{k-1}`` as a field."""
    eta = tuple(ctx.jet(i + 1) for i in range(k))
    eta_w = tuple(ctx.wjet(i + 1) for i in range(k)) if nonlocal_ else ()
    return VectorField(ctx, 1, eta, eta_w)


@dataclass(frozen=True)
class CommutationResult:
    mu: object
    ok: bool
    residuals: tuple = field(default=())

    def __bool__(self):
        return self.ok


def check_commutation(lp, k, tests=None):
    """Check ``[U, D0] = mu D0 + lambda U`` for ``U = X^[lambda,k]``.

    ``mu = -(D0(rho) + lambda rho)``, read off the d/dt component.  Both
    sides are derivations, so by default they are compared on the
    coordinates ``t, v, ..., v_{k-1}``, where the truncated operators agree
    exactly with the infinite ones.  ``tests`` replaces that list.
    """
    ctx = lp.ctx
    U = lambda_prolong(lp, k)
    D0 = total_derivative_field(ctx, k)
    mu = simplify(-(total_derivative(lp.rho, ctx) + lp.lam * lp.rho))
    if tests is None:
        tests = [ctx.t] + [ctx.jet(i) for i in range(k)]
    residuals = []
    ok = True
    for h in tests:
        Dh, Uh = apply(D0, h, False), apply(U, h, False)
        lhs = apply(U, Dh, False) - apply(D0, Uh, False)
        r = simplify(lhs - mu * Dh - lp.lam * Uh)
        residuals.append(r)
        if r != 0 and not is_zero(r, ctx):
            ok = False
    return CommutationResult(mu, ok, tuple(residuals))
