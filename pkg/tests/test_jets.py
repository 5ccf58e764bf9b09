import numpy as np
import pytest
import sympy as sp

from conftest import random_poly
from ljet.expr import SymbolKind, equals, simplify
from ljet.jets import (CoveringSystem, JetContext, OdeProblem, restrict_to_manifold,
                       restricted_total_derivative, total_derivative)
from ljet.numeric import SamplePlan, verify_residual

t, v, v1, v2, v3 = sp.symbols("t v v1 v2 v3")
w, w1 = sp.symbols("w w1")

EX4 = OdeProblem.from_text(2, rhs="-t^2/(4*v^3) - v - 1/(2*v)")
EX4_COVER = CoveringSystem(EX4, EX4.ctx.parse("t/v^2"))


class TestContext:
    def test_jets_grow_on_demand(self):
        ctx = JetContext(order=1)
        assert ctx.jet(7) == sp.Symbol("v7")
        assert ctx.classify(sp.Symbol("v7")) == (SymbolKind.JET, 7)

    def test_classify(self):
        ctx = JetContext(order=2, parameters=("p",)).with_nonlocal()
        assert ctx.classify(t)[0] == SymbolKind.INDEPENDENT
        assert ctx.classify(sp.Symbol("w2")) == (SymbolKind.NONLOCAL_JET, 2)
        assert ctx.classify(sp.Symbol("p"))[0] == SymbolKind.PARAMETER

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            JetContext(parameters=("p", "p"))

    def test_jet_name_collision_rejected(self):
        with pytest.raises(ValueError):
            JetContext(parameters=("v3",))

    def test_max_order(self):
        ctx = JetContext(order=2)
        assert ctx.max_order(t * v1 ** 2) == 1
        assert ctx.max_order(t) == -1


class TestOdeProblem:
    def test_from_delta(self):
        ode = OdeProblem.from_text(
            2, delta="v^5 + exp(2*(1/v + t))*(v^4 + v^5 - 3*v1^2 + v*v2)")
        expected = ode.ctx.parse("-v^4*exp(-2*(1/v + t)) - v^3 - v^4 + 3*v1^2/v")
        assert simplify(ode.rhs - expected) == 0

    def test_rhs_may_not_reach_order_k(self):
        with pytest.raises(ValueError):
            OdeProblem.from_text(2, rhs="v2")

    def test_nonaffine_delta_rejected(self):
        with pytest.raises(ValueError):
            OdeProblem.from_text(2, delta="v2^2 - v")

    def test_inconsistent_pair_rejected(self):
        ctx = JetContext(order=2)
        with pytest.raises(ValueError):
            OdeProblem(ctx, 2, rhs=v, delta=v2 + v)


class TestTotalDerivative:
    def test_v(self):
        assert total_derivative(v, EX4.ctx) == v1

    def test_quotient(self):
        assert total_derivative(t / v ** 2, EX4.ctx) == simplify(1 / v ** 2 - 2 * t * v1 / v ** 3)

    def test_nonlocal(self):
        ctx = EX4_COVER.ctx
        assert total_derivative(sp.exp(w) * v, ctx) == simplify(
            sp.exp(w) * w1 * v + sp.exp(w) * v1)

    def test_uninterpreted_function(self):
        ctx = JetContext(order=2, functions=("g",))
        g = sp.Function("g")
        assert total_derivative(g(t) * v, ctx) == simplify(sp.Derivative(g(t), t) * v + g(t) * v1)


class TestRestriction:
    def test_top_jet(self):
        assert restrict_to_manifold(v2, EX4) == EX4.rhs

    def test_nonlocal(self):
        assert restrict_to_manifold(w1, EX4, EX4_COVER) == t / v ** 2

    def test_below_order(self):
        assert restrict_to_manifold(v1, EX4) == v1

    def test_higher_jets(self):
        r = restrict_to_manifold(v3, EX4)
        assert EX4.ctx.max_order(r) <= 1
        assert simplify(r - restricted_total_derivative(EX4.rhs, EX4)) == 0

    def test_restricted_derivative_of_top_free_jet(self):
        assert restricted_total_derivative(v1, EX4) == EX4.rhs

    def test_restricted_derivative_of_w(self):
        assert restricted_total_derivative(w, EX4, EX4_COVER) == t / v ** 2

    def test_zeta0_derivative_on_manifold(self):
        zeta0 = EX4.ctx.parse("-v1/v - t/(2*v^2)")
        r = restricted_total_derivative(zeta0, EX4) - (zeta0 ** 2 + 1)
        assert verify_residual(r, SamplePlan(count=100, seed=1), ode=EX4).ok


def _random_ode(rng, order):
    ctx = JetContext(order=order)
    syms = [t] + [ctx.jet(i) for i in range(order)]
    return OdeProblem(ctx, order, rhs=random_poly(rng, syms, degree=2, terms=3))


def test_affinity(rng):
    ctx = JetContext(order=3)
    for _ in range(60):
        m = int(rng.integers(0, 3))
        syms = [t] + [ctx.jet(i) for i in range(m + 1)]
        e = random_poly(rng, syms, degree=3, terms=4) / (1 + v ** 2)
        De = total_derivative(e, ctx)
        top = ctx.jet(m + 1)
        assert simplify(sp.diff(De, top, 2)) == 0
        assert simplify(sp.diff(De, top) - sp.diff(e, ctx.jet(m))) == 0


def test_leibniz(rng):
    ctx = JetContext(order=2)
    syms = [t, v, v1]
    for _ in range(20):
        a = random_poly(rng, syms) + sp.exp(v) * random_poly(rng, syms, degree=1)
        b = random_poly(rng, syms) / (2 + t ** 2)
        lhs = total_derivative(a * b, ctx)
        rhs = simplify(total_derivative(a, ctx) * b + a * total_derivative(b, ctx))
        assert lhs == rhs


def test_restriction_commutes_with_total_derivative(rng):
    for _ in range(500):
        k = int(rng.integers(1, 4))
        ode = _random_ode(rng, k)
        ctx = ode.ctx
        syms = [t] + [ctx.jet(i) for i in range(k + 1)]
        e = random_poly(rng, syms, degree=2, terms=3)
        lhs = restrict_to_manifold(total_derivative(e, ctx), ode)
        rhs = restricted_total_derivative(restrict_to_manifold(e, ode), ode)
        assert equals(lhs, rhs)
