import numpy as np
import pytest
import sympy as sp

from conftest import random_poly
from ljet.expr import evaluate, simplify
from ljet.fields import LambdaPair, VectorField, lambda_prolong
from ljet.jets import JetContext, OdeProblem, restrict_to_manifold, restricted_total_derivative
from ljet.numeric import SamplePlan, sample_manifold, verify_residual
from ljet.reduction import (ReductionError, auxiliary_ode, derived_invariants,
                            find_invariant_ansatz, reduce, verify_invariant)

t, v, v1, v2 = sp.symbols("t v v1 v2")
x, zeta0, zeta1 = sp.symbols("x zeta0 zeta1")
ZETA4 = "-v1/v - t/(2*v^2)"
ZETA5 = "(v1 + t)/v - v"


def spans(basis, target, syms):
    """Is ``target`` a linear combination of ``basis`` (Laurent polynomials)?"""
    def coeffs(e):
        num, den = sp.fraction(sp.together(e))
        return num, den
    den = sp.lcm_list([coeffs(b)[1] for b in [*basis, target]])
    polys = [sp.Poly(sp.cancel(e * den), *syms).as_dict() for e in [*basis, target]]
    keys = sorted(set().union(*polys))
    M = sp.Matrix([[p.get(k, 0) for p in polys] for k in keys])
    return M[:, :-1].rank() == M.rank()


class TestVerifyInvariant:
    def test_example4(self, examples):
        p = examples[4]
        assert verify_invariant(lambda_prolong(p.lp, 1), p.ctx.parse(ZETA4))

    def test_example5(self, examples):
        p = examples[5]
        assert verify_invariant(lambda_prolong(p.lp, 1), p.ctx.parse(ZETA5))

    def test_not_invariant(self):
        ctx = JetContext(order=1)
        assert not verify_invariant(VectorField(ctx, 0, (1,)), v)


class TestAnsatz:
    def test_example4(self, examples):
        p = examples[4]
        basis = find_invariant_ansatz(p.lp, 3)
        assert spans(basis, p.ctx.parse(ZETA4), (t, v, v1))

    def test_example5(self, examples):
        p = examples[5]
        basis = find_invariant_ansatz(p.lp, 2)
        assert spans(basis, p.ctx.parse(ZETA5), (t, v, v1))

    def test_translation(self):
        ctx = JetContext(order=2)
        basis = find_invariant_ansatz(LambdaPair(ctx, 0, 1, 0), 1)
        assert spans(basis, t, (t, v, v1)) and spans(basis, v1, (t, v, v1))
        assert not spans(basis, v, (t, v, v1))

    @pytest.mark.parametrize("n", [4, 5])
    def test_outputs_are_invariants(self, examples, n):
        p = examples[n]
        U = lambda_prolong(p.lp, 1)
        assert all(verify_invariant(U, b) for b in find_invariant_ansatz(p.lp, 2))

    def test_deterministic(self, examples):
        lp = examples[4].lp
        assert find_invariant_ansatz(lp, 2) == find_invariant_ansatz(lp, 2)

    def test_bound(self, examples):
        with pytest.raises(ValueError):
            find_invariant_ansatz(examples[4].lp, 0)

    def test_non_polynomial_field(self, examples):
        assert find_invariant_ansatz(examples[1].lp, 2) == []


class TestDerived:
    def test_example4(self, examples):
        p = examples[4]
        z0 = p.ctx.parse(ZETA4)
        (z1,) = derived_invariants(p.ode, t, z0)
        assert simplify(z1 - z0 ** 2 - 1) == 0

    def test_example5(self, examples):
        p = examples[5]
        assert derived_invariants(p.ode, t, p.ctx.parse(ZETA5)) == [0]

    def test_free_particle(self):
        ode = OdeProblem.from_text(2, rhs="0")
        assert derived_invariants(ode, t, v1) == [0]


class TestReduce:
    def test_example4(self, examples):
        p = examples[4]
        chain = reduce(p.ode, t, p.ctx.parse(ZETA4), lp=p.lp)
        assert chain.reduced == simplify(zeta1 - zeta0 ** 2 - 1)
        assert chain.status == "symbolic"

    def test_example5(self, examples):
        p = examples[5]
        chain = reduce(p.ode, t, p.ctx.parse(ZETA5), lp=p.lp)
        assert chain.reduced == zeta1
        assert chain.to_dict()["reduced_equation"] == "zeta1 = 0"

    def test_free_particle(self):
        ode = OdeProblem.from_text(2, rhs="0")
        assert reduce(ode, t, v1).reduced == zeta1

    def test_elimination_soundness(self, examples):
        for n, z in ((4, ZETA4), (5, ZETA5)):
            p = examples[n]
            chain = reduce(p.ode, t, p.ctx.parse(z))
            Z = chain.symbols[1:]
            for zi, Zi in zip(chain.zeta, Z):
                assert simplify(zi.xreplace(chain.jets) - Zi) == 0

    def test_correct_on_manifold(self, examples):
        p = examples[4]
        chain = reduce(p.ode, t, p.ctx.parse(ZETA4))
        for pt in sample_manifold(p.ode, plan=SamplePlan(count=100, seed=5)):
            vals = {"x": pt[t]}
            for Zi, zi in zip(chain.symbols[1:], chain.zeta):
                vals[str(Zi)] = evaluate(zi, pt)
            assert abs(evaluate(chain.reduced, vals)) < 1e-9

    def test_not_an_invariant(self, examples):
        p = examples[4]
        with pytest.raises(ReductionError):
            reduce(p.ode, t, v1, lp=p.lp)

    def test_nonaffine(self):
        ode = OdeProblem.from_text(2, rhs="0")
        with pytest.raises(ReductionError):
            reduce(ode, t, v1 ** 2)

    def test_zeta0_must_involve_v1(self):
        ode = OdeProblem.from_text(2, rhs="0")
        with pytest.raises(ReductionError):
            reduce(ode, t, v)

    def test_name_clash(self):
        ctx = JetContext(order=2, constants=("zeta0",))
        ode = OdeProblem(ctx, 2, rhs=sp.Integer(0))
        with pytest.raises(ReductionError):
            reduce(ode, t, v1)


class TestAuxiliary:
    def test_example4(self, examples):
        p = examples[4]
        c1 = sp.Symbol("c1")
        aux = auxiliary_ode(p.ctx.parse(ZETA4), sp.tan(x + c1), ctx=p.ctx)
        assert simplify(aux - p.ctx.parse(ZETA4 + " - tan(t + c1)")) == 0

    def test_example5(self, examples):
        p = examples[5]
        c = sp.Symbol("c")
        aux = auxiliary_ode(p.ctx.parse(ZETA5), c, ctx=p.ctx)
        assert simplify(aux * v - (v1 - v ** 2 - c * v + t)) == 0

    def test_zero(self):
        assert auxiliary_ode(v1, 0) == v1


def test_affine_solvability(rng):
    ctx = JetContext(order=3)
    for _ in range(500):
        ode = OdeProblem(ctx, 3, rhs=random_poly(rng, [t, v, v1, v2]))
        i = int(rng.integers(0, 2))
        syms = [t] + [ctx.jet(j) for j in range(i + 1)]
        z = random_poly(rng, syms, degree=3, terms=4) + ctx.jet(i) ** 2
        Dz = restricted_total_derivative(z, ode)
        nxt = ctx.jet(i + 1)
        assert simplify(sp.diff(Dz, nxt, 2)) == 0
        assert simplify(sp.diff(Dz, nxt) - sp.diff(z, ctx.jet(i))) == 0
