"""
Symbolic expressions over jet coordinates.

Expressions are plain sympy trees.  This module fixes the conventions the
rest of the package relies on: the text grammar (``parse`` / ``to_text``),
the canonical form produced by ``simplify``, and an equality test that
falls back to random numeric evaluation when the rational normal form
cannot decide.

Transcendental kernels (``exp``, ``ln``, ``sin``, ``cos``, ``tan``) and
uninterpreted functions ``g(t)``, ``g'(t)``, ... are atoms for the
simplifier.  Identities among them are never applied symbolically.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy as sp
from sympy.printing.precedence import precedence
from sympy.printing.str import StrPrinter

__all__ = [
    "SymbolKind",
    "ParseError",
    "ExprSyntaxError",
    "UndeclaredSymbolError",
    "EvaluationError",
    "Verdict",
    "parse",
    "to_text",
    "diff",
    "substitute",
    "simplify",
    "equals",
    "is_zero_symbolic",
    "evaluate",
    "atomize",
    "instantiate",
]

ELEMENTARY = {
    "exp": sp.exp,
    "ln": sp.log,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
}


class SymbolKind(enum.Enum):
    INDEPENDENT = "independent"
    JET = "jet"
    NONLOCAL_JET = "nonlocal-jet"
    PARAMETER = "parameter"
    CONSTANT = "integration-constant"


class ParseError(ValueError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class ExprSyntaxError(ParseError):
    pass


class UndeclaredSymbolError(ParseError):
    def __init__(self, name, position=None, text=None):
        self.name = name
        super().__init__(f"undeclared symbol {name!r}", position, text)


class EvaluationError(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+\.\d*|\.\d+|\d+)
  | (?P<ident>[A-Za-z][A-Za-z0-9]*)
  | (?P<op>\*\*|[-+*/^(),']|−)
    """,
    re.VERBOSE,
)


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if value == "−":
                value = "-"
            elif value == "**":
                value = "^"
            tokens.append((kind, value, pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, ctx):
        self.text = text
        self.ctx = ctx
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def error(self, message):
        raise ExprSyntaxError(message, self.peek()[2], self.text)

    def parse(self):
        if self.peek()[0] == "end":
            self.error("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = self.unary()
            return -e if op == "-" else e
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return base ** self.unary()
        return base

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return sp.Rational(Fraction(val))
        if kind == "op" and val == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            self.take()
            primes = 0
            while self.peek()[1] == "'":
                self.take()
                primes += 1
            if self.peek()[1] == "(":
                return self.call(val, primes, pos)
            if primes:
                raise ExprSyntaxError(f"derivative mark on non-function {val!r}", pos, self.text)
            return self.symbol(val, pos)
        if kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected token {val!r}")

    def call(self, name, primes, pos):
        self.take()  # "("
        if name in ELEMENTARY:
            if primes:
                raise ExprSyntaxError(f"derivative mark on elementary function {name!r}", pos, self.text)
            arg = self.expr()
            self.expect(")")
            return ELEMENTARY[name](arg)
        functions = getattr(self.ctx, "functions", ()) if self.ctx is not None else ()
        if name not in functions:
            raise UndeclaredSymbolError(name, pos, self.text)
        apos = self.peek()[2]
        arg = self.expr()
        self.expect(")")
        t = self.ctx.t
        if arg != t:
            raise ExprSyntaxError(
                f"function {name!r} takes exactly the argument {t}", apos, self.text)
        applied = sp.Function(name)(t)
        return sp.Derivative(applied, (t, primes)) if primes else applied

    def symbol(self, name, pos):
        if name in ELEMENTARY:
            raise ExprSyntaxError(f"function {name!r} used without argument", pos, self.text)
        if self.ctx is None:
            return sp.Symbol(name)
        sym = self.ctx.resolve(name)
        if sym is None:
            raise UndeclaredSymbolError(name, pos, self.text)
        return sym


def parse(text, ctx=None):
    """Parse ``text`` in the expression grammar and return its canonical form.

    With a context, identifiers must be coordinates, parameters or
    functions declared by it.  Without one every identifier becomes a
    plain symbol (handy in tests and at the REPL).
    """
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return simplify(_Parser(text, ctx).parse())


# --------------------------------------------------------------------------
# printing

class _JetPrinter(StrPrinter):

    def _print_Pow(self, expr, rational=True):
        PREC = precedence(expr)
        if expr.is_commutative and expr.exp is sp.S.NegativeOne:
            return "1/%s" % self.parenthesize(expr.base, PREC, strict=False)
        base = self.parenthesize(expr.base, PREC, strict=False)
        exp = self.parenthesize(expr.exp, PREC, strict=False)
        return f"{base}^{exp}"

    def _print_Derivative(self, expr):
        fn = expr.expr
        if isinstance(fn, sp.core.function.AppliedUndef) and len(fn.args) == 1:
            order = sum(n for _, n in expr.variable_count)
            return "%s%s(%s)" % (fn.func.__name__, "'" * order, self._print(fn.args[0]))
        return super()._print_Derivative(expr)

    def _print_log(self, expr):
        return "ln(%s)" % self._print(expr.args[0])

    def _print_Exp1(self, expr):
        return "exp(1)"

    def _print_Rational(self, expr):
        return "%d/%d" % (expr.p, expr.q)


_PRINTER = _JetPrinter({"order": "lex"})


def to_text(e):
    """Render an expression in the same grammar ``parse`` accepts."""
    return _PRINTER.doprint(sp.sympify(e))


# --------------------------------------------------------------------------
# canonical form and calculus

def simplify(e):
    """Rational normal form with transcendental kernels kept atomic.

    Powers with symbolic exponents are split first so that ``v^p*v`` and
    ``v^(p+1)`` meet as the same monomial, then recombined for display.
    """
    e = sp.sympify(e)
    if e.is_Number:
        return e
    symbolic_powers = any(not p.exp.is_Integer for p in e.atoms(sp.Pow))
    if symbolic_powers:
        e = sp.expand_power_exp(e)
    e, kernels = _exp_kernels(e)
    e = _cancel(e)
    if kernels:
        e = e.xreplace(kernels)
    if not (kernels or symbolic_powers):
        return e
    e = sp.powsimp(e, combine="all", deep=True)
    # merged exponents come back as unsimplified sums
    merged = {a: sp.exp(simplify(a.args[0])) for a in e.atoms(sp.exp)}
    return e.xreplace(merged) if merged else e


def _cancel(e):
    """``p/q`` in lowest terms, every non-rational subterm a generator.

    The sparse rational function field is much faster than ``sp.cancel``
    on the large polynomials that prolongation produces.
    """
    try:
        return sp.sfield(e)[1].as_expr()
    except (sp.PolificationFailed, sp.PolynomialError, sp.GeneratorsNeeded, ValueError):
        return sp.cancel(e)


def _exp_kernels(e):
    """Rewrite ``exp(n1*m1 + n2*m2 + ...)`` as a product of integer powers of
    placeholder symbols standing for ``exp(m_i / q_i)``, so that the
    polynomial machinery sees ``exp(2t)`` and ``exp(-2t)`` as ``K^2``, ``K^-2``."""
    atoms = e.atoms(sp.exp)
    if not atoms:
        return e, {}
    kernels = {}
    by_arg = {}
    mapping = {}
    for atom in atoms:
        arg = sp.expand(simplify(atom.args[0]))
        product = sp.Integer(1)
        for term in sp.Add.make_args(arg):
            n, m = term.as_coeff_Mul()
            n = sp.Rational(n)
            base = m / n.q if n.q != 1 else m
            if base not in by_arg:
                k = sp.Dummy("E")
                by_arg[base] = k
                kernels[k] = sp.exp(base)
            product *= by_arg[base] ** n.p
        mapping[atom] = product
    return e.xreplace(mapping), kernels


def diff(e, s):
    return simplify(sp.diff(e, s))


def substitute(e, bindings):
    """Simultaneous substitution followed by ``simplify``."""
    if not bindings:
        return simplify(e)
    return simplify(sp.sympify(e).xreplace(dict(bindings)))


def is_zero_symbolic(e):
    return simplify(e) == 0


# --------------------------------------------------------------------------
# numeric evaluation

def instantiate(e, functions, t):
    """Replace uninterpreted ``g(t)`` (and its derivatives) by concrete
    expressions in ``t``; ``functions`` maps names to expressions."""
    if not functions:
        return e
    for name, body in functions.items():
        e = e.subs(sp.Function(name), sp.Lambda(t, body))
    return e.doit()


def atomize(e):
    """Swap applied functions and their derivatives for fresh symbols.

    Returns the new expression and the replacement map.  Algebraic
    identity testing can then treat ``g(t)``, ``g'(t)`` as independent
    unknowns.
    """
    e = sp.sympify(e)
    kernels = sorted(e.atoms(sp.Derivative), key=sp.default_sort_key, reverse=True)
    kernels += sorted(e.atoms(sp.core.function.AppliedUndef), key=sp.default_sort_key)
    mapping = {}
    for i, k in enumerate(kernels):
        if k not in mapping:
            mapping[k] = sp.Dummy(f"k{i}")
    return e.xreplace(mapping) if mapping else e, mapping


def _check(value):
    if isinstance(value, complex):
        if abs(value.imag) > 1e-12 * max(1.0, abs(value.real)):
            raise EvaluationError("complex value")
        value = value.real
    value = float(value)
    if not math.isfinite(value):
        raise EvaluationError("non-finite value")
    return value


class Magnitude(sp.Function):
    """``|x|`` kept opaque, so that sympy does not rewrite it into ``re``/``im``."""


def compile_numeric(e, symbols):
    """Compile ``e`` into a float function of ``symbols`` (positional)."""
    fn = sp.lambdify(list(symbols), e, modules=[{"Magnitude": abs}, "math"])

    def call(*args):
        try:
            return _check(fn(*args))
        except (ZeroDivisionError, ValueError, OverflowError, TypeError) as exc:
            raise EvaluationError(str(exc)) from exc

    return call


def evaluate(e, point, functions=None, t=None):
    """Evaluate ``e`` in double precision at ``point``.

    ``point`` maps symbols, or their names, to numbers.
    """
    e = sp.sympify(e)
    point = {sp.Symbol(k) if isinstance(k, str) else k: v for k, v in point.items()}
    if functions:
        e = instantiate(e, functions, t if t is not None else sp.Symbol("t"))
    if e.atoms(sp.core.function.AppliedUndef):
        raise EvaluationError("uninterpreted function without instantiation")
    missing = e.free_symbols - set(point)
    if missing:
        raise EvaluationError(
            "unbound symbols: " + ", ".join(sorted(str(s) for s in missing)))
    syms = sorted(e.free_symbols, key=str)
    return compile_numeric(e, syms)(*[float(point[s]) for s in syms])


# --------------------------------------------------------------------------
# equality

@dataclass(frozen=True)
class Verdict:
    equal: bool
    status: str
    max_rel: float = 0.0

    def __bool__(self):
        return self.equal


SYMBOLIC = "symbolic"
NUMERIC = "undecided-symbolic, confirmed-numeric"
MISMATCH = "numeric-mismatch"


def equals(a, b, tol=1e-9, samples=20, seed=0, low=0.5, high=2.0, retries=50):
    """Decide ``a == b``: symbolic zero test first, numeric sampling second.

    Numeric sampling draws every free symbol (and every applied
    uninterpreted function) uniformly from ``[low, high]``.
    """
    diff_ = sp.sympify(a) - sp.sympify(b)
    if is_zero_symbolic(diff_):
        return Verdict(True, SYMBOLIC)
    (ea, eb), _ = _atomize_pair(a, b)
    syms = sorted((ea - eb).free_symbols | ea.free_symbols | eb.free_symbols,
                  key=sp.default_sort_key)
    fa = compile_numeric(ea, syms)
    fb = compile_numeric(eb, syms)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        for _attempt in range(retries):
            vals = rng.uniform(low, high, size=len(syms))
            try:
                va, vb = fa(*vals), fb(*vals)
                break
            except EvaluationError:
                continue
        else:
            raise EvaluationError("could not find a regular sample point")
        err = abs(va - vb)
        if err <= 1e-12:
            continue
        rel = err / max(1.0, abs(va), abs(vb))
        worst = max(worst, rel)
        if rel > tol:
            return Verdict(False, MISMATCH, worst)
    return Verdict(True, NUMERIC, worst)


def _atomize_pair(a, b):
    combined, mapping = atomize(sp.Tuple(sp.sympify(a), sp.sympify(b)))
    return tuple(combined), mapping
