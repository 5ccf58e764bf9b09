"""
Lambda-symmetries and their nonlocal counterparts.

A lambda-symmetry ``X^[lambda,k]`` of ``v_k = f`` corresponds to a symmetry
``Y`` of the covering ``{v_k = f, w_1 = lambda}`` whose coefficients are
``e^w`` times functions free of ``w``.  The d/dw coefficient of ``Y`` is
``e^w chi`` where ``chi`` solves a linear first-order PDE; this module
builds that PDE, solves it under the ansatz ``chi = chi(t, v)`` when the
integrals involved are elementary, and goes back and forth between the two
descriptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from .expr import simplify, to_text
from .fields import (
    LambdaPair, VectorField, apply, commutator, lambda_prolong, std_prolong,
)
from .jets import CoveringSystem, restrict_to_manifold
from .numeric import is_zero

__all__ = [
    "SymmetryCheck",
    "ChiEquation",
    "ChiResult",
    "NonlocalSymmetry",
    "NonlocalCheck",
    "ReconstructionError",
    "NotExponentialForm",
    "is_lambda_symmetry",
    "build_covering",
    "chi_pde",
    "solve_chi_ansatz",
    "verify_chi",
    "reconstruct_nonlocal",
    "verify_nonlocal_symmetry",
    "extract_lambda_from_nonlocal",
    "antiderivative",
]

SOLVED = "solved"
UNSOLVED = "unsolved"
VERIFIED_ONLY = "verified-only"


class ReconstructionError(ValueError):
    pass


class NotExponentialForm(ValueError):
    pass


@dataclass(frozen=True)
class SymmetryCheck:
    ok: bool
    residual: object
    status: str

    def __bool__(self):
        return self.ok


def is_lambda_symmetry(ode, lp):
    """Tangency of ``X^[lambda,k]`` to the equation.

    The residual is ``X^[lambda,k](Delta)`` restricted to the manifold,
    with ``Delta = v_k - f`` unless the problem carries its own residual.
    """
    U = lambda_prolong(lp, ode.order)
    residual = restrict_to_manifold(apply(U, ode.residual), ode)
    verdict = is_zero(residual, ode.ctx)
    return SymmetryCheck(verdict.equal, residual, verdict.status)


def build_covering(ode, lam):
    """The covering ``{v_k = f, w_1 = lambda}``."""
    lam = simplify(lam)
    if ode.ctx.max_order(lam) >= ode.order:
        raise ValueError(f"lambda must not involve jets of order >= {ode.order}")
    return CoveringSystem(ode, lam)


# --------------------------------------------------------------------------
# the chi equation

@dataclass(frozen=True)
class ChiEquation:
    """``sum_s a_s d(chi)/ds + lambda chi - source = 0``.

    ``transport`` holds ``(coordinate, a_s)`` pairs: ``d/dt`` with 1,
    ``d/dv_{i-1}`` with ``v_i`` and ``d/dv_{k-1}`` with ``f``.
    """

    ode: object
    lp: LambdaPair
    transport: tuple
    source: object

    @property
    def variables(self):
        return tuple(s for s, _ in self.transport)

    @property
    def decay(self):
        return self.lp.lam

    def unknown(self):
        return sp.Function("chi")(*self.variables)

    def residual(self, chi):
        """``R[chi]`` for a concrete ``chi``."""
        chi = sp.sympify(chi)
        out = sum((a * sp.diff(chi, s) for s, a in self.transport), sp.Integer(0))
        return simplify(out + self.decay * chi - self.source)

    def expression(self):
        """``R[chi]`` with ``chi`` an undetermined function of the coordinates."""
        chi = self.unknown()
        out = sum((a * sp.diff(chi, s) for s, a in self.transport), sp.Integer(0))
        return out + self.decay * chi - self.source

    def describe(self):
        parts = []
        for s, a in self.transport:
            term = f"chi_{s}" if a == 1 else f"({to_text(a)})*chi_{s}"
            parts.append(term)
        parts.append(f"({to_text(self.decay)})*chi")
        parts.append(f"({to_text(simplify(-self.source))})")
        return " + ".join(parts) + " = 0"

    def to_dict(self):
        return {
            "transport": {str(s): to_text(a) for s, a in self.transport},
            "chi_coefficient": to_text(self.decay),
            "source": to_text(self.source),
            "text": self.describe(),
        }


def chi_pde(ode, lp):
    """The equation ``chi`` must satisfy for ``Y`` to be tangent to the covering:

        D0bar(chi) = X^[lambda,1](lambda) + lambda^2 rho
                     + lambda (rho_t + v1 rho_v - chi)
    """
    ctx = ode.ctx
    k = ode.order
    transport = [(ctx.t, sp.Integer(1))]
    for i in range(1, k):
        transport.append((ctx.jet(i - 1), ctx.jet(i)))
    transport.append((ctx.jet(k - 1), ode.rhs))
    X1 = lambda_prolong(lp, 1)
    lam, rho = lp.lam, lp.rho
    source = (apply(X1, lam) + lam ** 2 * rho
              + lam * (sp.diff(rho, ctx.t) + ctx.jet(1) * sp.diff(rho, ctx.jet(0))))
    return ChiEquation(ode, lp, tuple(transport), simplify(source))


@dataclass(frozen=True)
class ChiResult:
    status: str
    chi: object = None
    residual_system: tuple = ()
    note: str = ""

    @property
    def solved(self):
        return self.status == SOLVED

    def to_dict(self):
        return {
            "status": self.status,
            "chi": to_text(self.chi) if self.chi is not None else None,
            "residual_system": [to_text(e) for e in self.residual_system],
            "note": self.note,
        }


def _split_by(expr, var):
    """Group the summands of ``expr`` by their ``var``-dependent factor.

    Returns ``{factor: coefficient}`` where coefficients are free of
    ``var``; distinct factors are treated as linearly independent
    functions of ``var``.
    """
    groups = {}
    for term in sp.Add.make_args(sp.expand(expr)):
        dep, indep = [], []
        for factor in sp.Mul.make_args(term):
            (dep if var in factor.free_symbols else indep).append(factor)
        key = sp.Mul(*dep)
        groups[key] = groups.get(key, sp.Integer(0)) + sp.Mul(*indep)
    return {k: c for k, c in groups.items() if simplify(c) != 0}


def _coefficient_equations(expr, var):
    """Clear denominators and split by powers/kernels of ``var``."""
    num, _den = sp.fraction(sp.together(simplify(expr)))
    return [simplify(c) for c in _split_by(sp.expand_power_exp(num), var).values()]


def antiderivative(expr, var):
    """Integrate from a small table, or return None.

    Handles sums of ``c * var^n`` (``n`` free of ``var``, ``n = -1`` gives a
    logarithm) and ``c * exp(a*var + b)`` with ``a`` free of ``var``.
    """
    expr = sp.expand(sp.expand_power_exp(simplify(expr)))
    out = sp.Integer(0)
    for term, coeff in _split_by(expr, var).items():
        n = _power_of(term, var)
        if n is not None:
            if simplify(n + 1) == 0:
                out += coeff * sp.log(var)
            else:
                out += coeff * var ** (n + 1) / (n + 1)
            continue
        if isinstance(term, sp.exp):
            arg = sp.expand(term.args[0])
            a = sp.diff(arg, var)
            if a != 0 and var not in a.free_symbols:
                out += coeff * term / a
                continue
        return None
    return simplify(out)


def _power_of(term, var):
    if term == 1:
        return sp.Integer(0)
    if term == var:
        return sp.Integer(1)
    if term.is_Pow and term.base == var and var not in term.exp.free_symbols:
        return term.exp
    if term.is_Mul:
        total = sp.Integer(0)
        for f in term.args:
            n = _power_of(f, var)
            if n is None:
                return None
            total += n
        return total
    return None


def _solve_linear_first_order(a, b, c, var):
    """General solution of ``a y' + b y + c = 0`` in ``var`` as
    ``(homogeneous, particular)``, or None when the table falls short."""
    p = simplify(b / a)
    q = simplify(-c / a)
    P = antiderivative(p, var)
    if P is None:
        return None
    mu = simplify(sp.exp(P))
    integral = antiderivative(simplify(mu * q), var) if q != 0 else sp.Integer(0)
    if integral is None:
        return None
    return simplify(1 / mu), simplify(integral / mu)


def solve_chi_ansatz(ode, lp):
    """Look for ``chi = chi(t, v)`` solving the chi equation (second order ODEs).

    The residual is split by its dependence on ``v1``; an equation
    involving only ``chi_v`` is integrated in ``v`` (integrating factor,
    constant of integration ``C(t)``), and the remaining equations, split
    by their ``v``-dependence, must then fix ``C(t)``.
    """
    eq = chi_pde(ode, lp)
    if ode.order != 2:
        return ChiResult(VERIFIED_ONLY, None, (simplify(eq.residual(0)),),
                         "ansatz solver handles second order equations; supply chi to verify")
    ctx = ode.ctx
    t, v, v1 = ctx.t, ctx.jet(0), ctx.jet(1)
    chi = sp.Function("chi")(t, v)
    Ct, Cv = sp.Dummy("chi_t"), sp.Dummy("chi_v")
    Cs = sp.Dummy("chi")
    partials = {t: Ct, v: Cv}
    R = sum((a * partials[s] for s, a in eq.transport if s in partials), sp.Integer(0))
    R = R + eq.decay * Cs - eq.source
    system = _coefficient_equations(R, v1)
    if not system:
        return ChiResult(SOLVED, sp.Integer(0), (), "every chi(t, v) solves the equation")

    def restore(e):
        return e.xreplace({Ct: sp.Derivative(chi, t), Cv: sp.Derivative(chi, v), Cs: chi})

    stage = None
    for e in system:
        a, b, c = sp.diff(e, Cv), sp.diff(e, Cs), sp.diff(e, Ct)
        if simplify(a) != 0 and simplify(c) == 0:
            rest = simplify(e - a * Cv - b * Cs)
            stage = (simplify(a), simplify(b), rest)
            break
    if stage is None:
        return ChiResult(UNSOLVED, None, tuple(restore(e) for e in system),
                         "no equation of the form a chi_v + b chi + c = 0")
    a, b, c = stage
    if a.has(Ct, Cv, Cs) or b.has(Ct, Cv, Cs) or c.has(Ct, Cv, Cs):
        return ChiResult(UNSOLVED, None, tuple(restore(e) for e in system), "nonlinear system")
    sol = _solve_linear_first_order(a, b, c, v)
    if sol is None:
        return ChiResult(UNSOLVED, None, tuple(restore(e) for e in system),
                         "integral in v outside the antiderivative table")
    hom, part = sol
    C, Cp = sp.Dummy("C"), sp.Dummy("Cp")
    trial = C * hom + part
    # chi_t of trial, with C(t) carried as C and C'(t) as Cp
    trial_t = Cp * hom + C * sp.diff(hom, t) + sp.diff(part, t)
    conditions = []
    for e in system:
        sub = e.xreplace({Cs: trial, Cv: sp.diff(trial, v), Ct: trial_t})
        conditions += _coefficient_equations(sub, v)
    conditions = [simplify(e) for e in conditions if simplify(e) != 0]
    Cval = _fix_constant(conditions, C, Cp, t)
    if Cval is None:
        residuals = tuple(simplify(e.xreplace({C: sp.Function("C")(t),
                                               Cp: sp.Derivative(sp.Function("C")(t), t)}))
                          for e in conditions)
        return ChiResult(UNSOLVED, None, residuals,
                         "no C(t) satisfies every coefficient equation")
    solution = simplify(trial.xreplace({C: Cval}))
    if eq.residual(solution) != 0 and not is_zero(eq.residual(solution), ctx):
        return ChiResult(UNSOLVED, None, (eq.residual(solution),),
                         "candidate failed the final substitution check")
    return ChiResult(SOLVED, solution, ())


def _fix_constant(conditions, C, Cp, t):
    """Find ``C(t)`` meeting every linear condition ``alpha C + beta C' + gamma = 0``."""
    linear = []
    for e in conditions:
        alpha, beta = simplify(sp.diff(e, C)), simplify(sp.diff(e, Cp))
        gamma = simplify(e - alpha * C - beta * Cp)
        if alpha.has(C, Cp) or beta.has(C, Cp):
            return None
        linear.append((alpha, beta, gamma))
    candidate = None
    for alpha, beta, gamma in linear:
        if beta == 0:
            if alpha == 0:
                return None  # gamma != 0: contradiction
            candidate = simplify(-gamma / alpha)
            break
    if candidate is None:
        for alpha, beta, gamma in linear:
            sol = _solve_linear_first_order(beta, alpha, gamma, t)
            if sol is None:
                return None
            candidate = sol[1]
            break
    if candidate is None:
        candidate = sp.Integer(0)
    if t in candidate.free_symbols or candidate.atoms(sp.core.function.AppliedUndef):
        dcand = sp.diff(candidate, t)
    else:
        dcand = sp.Integer(0)
    for alpha, beta, gamma in linear:
        if simplify(alpha * candidate + beta * dcand + gamma) != 0:
            return None
    return candidate


def verify_chi(ode, lp, chi):
    """Check a user-supplied ``chi`` against the chi equation."""
    eq = chi_pde(ode, lp)
    chi = simplify(chi)
    r = eq.residual(chi)
    if r == 0 or is_zero(r, ode.ctx):
        return ChiResult(VERIFIED_ONLY, chi, ())
    return ChiResult(UNSOLVED, None, (r,), "supplied chi does not satisfy the chi equation")


# --------------------------------------------------------------------------
# nonlocal symmetries

@dataclass(frozen=True)
class NonlocalSymmetry:
    field: VectorField
    exponential: bool = False
    rho: object = None
    psi: object = None
    chi: object = None

    def to_dict(self):
        out = {"field": self.field.to_dict(), "exponential_form": self.exponential}
        if self.exponential:
            out["generator"] = {"rho": to_text(self.rho), "psi": to_text(self.psi),
                                "chi": to_text(self.chi)}
        return out


@dataclass(frozen=True)
class NonlocalCheck:
    exponential: bool
    tangent_equation: bool
    tangent_cover: bool
    residuals: tuple = field(default=())

    @property
    def ok(self):
        return self.exponential and self.tangent_equation and self.tangent_cover

    def __bool__(self):
        return self.ok

    def to_dict(self):
        return {
            "bracket_with_d_dw": self.exponential,
            "tangent_to_equation": self.tangent_equation,
            "tangent_to_covering": self.tangent_cover,
            "residuals": [to_text(r) for r in self.residuals],
            "ok": self.ok,
        }


def _exp_field(cover, rho, psi, chi, k):
    ctx = cover.ctx
    ew = sp.exp(ctx.wjet(0))
    base = VectorField(ctx, ew * rho, (ew * psi,), (ew * chi,))
    return std_prolong(base, k)


def reconstruct_nonlocal(ode, lp, chi, check=True):
    """Build ``Y = e^w (rho d/dt + psi d/dv + chi d/dw)`` prolonged on the covering."""
    eq = chi_pde(ode, lp)
    r = eq.residual(chi)
    if r != 0 and not is_zero(r, ode.ctx):
        raise ReconstructionError(f"chi does not satisfy the chi equation: residual {to_text(r)}")
    cover = build_covering(ode, lp.lam)
    Y = NonlocalSymmetry(_exp_field(cover, lp.rho, lp.psi, simplify(chi), ode.order),
                         True, lp.rho, lp.psi, simplify(chi))
    if check:
        result = verify_nonlocal_symmetry(cover, Y)
        if not result:
            raise ReconstructionError(f"reconstructed field is not a symmetry: {result}")
    return Y


def d_dw(ctx):
    return VectorField(ctx, 0, (), (1,))


def verify_nonlocal_symmetry(cover, Y):
    """(a) ``[d/dw, Y] = Y``; (b) tangency to ``v_k = f``; (c) to ``w_1 = H``."""
    field_ = Y.field if isinstance(Y, NonlocalSymmetry) else Y
    ctx = cover.ctx
    diffs = commutator(d_dw(ctx), field_) - field_
    exponential = all(c == 0 or is_zero(c, ctx)
                      for c in (diffs.xi, *diffs.eta, *diffs.eta_w))
    eq_v, eq_w = cover.equations
    r_v = restrict_to_manifold(apply(field_, eq_v), cover.base, cover)
    r_w = restrict_to_manifold(apply(field_, eq_w), cover.base, cover)
    tangent_v = bool(is_zero(r_v, ctx))
    tangent_w = bool(is_zero(r_w, ctx))
    return NonlocalCheck(exponential, tangent_v, tangent_w, (r_v, r_w))


def extract_lambda_from_nonlocal(Y, cover):
    """Recover ``(X, lambda)`` from an exponential-form nonlocal symmetry."""
    field_ = Y.field if isinstance(Y, NonlocalSymmetry) else Y
    ctx = cover.ctx
    w = ctx.wjet(0)
    ew = sp.exp(-w)
    parts = []
    for c in (field_.xi, field_.eta[0] if field_.eta else 0):
        q = simplify(c * ew)
        if w in q.free_symbols or ctx.max_order(q) > 0 or ctx.max_order(q, "w") > 0:
            raise NotExponentialForm(f"coefficient {to_text(c)} is not e^w times a function of (t, v)")
        parts.append(q)
    if field_.eta_w:
        q = simplify(field_.eta_w[0] * ew)
        if w in q.free_symbols:
            raise NotExponentialForm("d/dw coefficient is not e^w times a function free of w")
    if w in cover.H.free_symbols:
        raise NotExponentialForm("covering coefficient depends on w")
    base_ctx = cover.base.ctx
    return LambdaPair(base_ctx, parts[0], parts[1], cover.H)
