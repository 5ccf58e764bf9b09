import pytest
import sympy as sp

from ljet.expr import simplify
from ljet.fields import LambdaPair, VectorField, commutator, std_prolong
from ljet.jets import JetContext, OdeProblem
from ljet.lambda_sym import (SOLVED, UNSOLVED, VERIFIED_ONLY, NotExponentialForm,
                             ReconstructionError, antiderivative, build_covering, chi_pde,
                             d_dw, extract_lambda_from_nonlocal, is_lambda_symmetry,
                             reconstruct_nonlocal, solve_chi_ansatz, verify_chi,
                             verify_nonlocal_symmetry)

t, v, v1, v2 = sp.symbols("t v v1 v2")
w, w1 = sp.symbols("w w1")


class TestIsLambdaSymmetry:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_examples(self, examples, n):
        res = is_lambda_symmetry(examples[n].ode, examples[n].lp)
        assert res.ok and res.residual == 0

    def test_not_a_symmetry(self):
        ode = OdeProblem.from_text(2, rhs="v")
        res = is_lambda_symmetry(ode, LambdaPair(ode.ctx, 0, 1, 0))
        assert not res.ok and res.residual == -1


class TestBuildCovering:
    def test_example4(self, examples):
        p = examples[4]
        cover = build_covering(p.ode, p.lp.lam)
        eq_v, eq_w = cover.equations
        assert eq_v == simplify(v2 - p.ode.rhs)
        assert eq_w == simplify(w1 - t / v ** 2)

    def test_example5(self, examples):
        p = examples[5]
        assert build_covering(p.ode, p.lp.lam).H == simplify(v + t / v)

    def test_zero_lambda(self, examples):
        assert build_covering(examples[4].ode, 0).equations[1] == w1

    def test_lambda_order(self, examples):
        with pytest.raises(ValueError):
            build_covering(examples[4].ode, v2)


class TestChiPde:
    def test_example2(self, examples):
        p = examples[2]
        chi = sp.Function("chi")(t, v)
        r = chi_pde(p.ode, p.lp).residual(chi)
        assert simplify(r - (chi.diff(t) + v1 * chi.diff(v) - v * chi)) == 0

    def test_example3(self, examples):
        p = examples[3]
        chi = sp.Function("chi")(t, v, v1)
        lam = v + t / v
        expected = (chi.diff(t) + v1 * chi.diff(v) + (v1 ** 2 / v + lam * v1 - 1) * chi.diff(v1)
                    + lam * chi - v + t / v)
        assert simplify(chi_pde(p.ode, p.lp).residual(chi) - expected) == 0

    def test_lambda_zero_leaves_total_derivative(self, examples):
        p = examples[4]
        lp = LambdaPair(p.ctx, 0, v ** 2 * t, 0)
        eq = chi_pde(p.ode, lp)
        assert eq.source == 0 and eq.decay == 0
        chi = sp.Function("chi")(t, v, v1)
        expected = chi.diff(t) + v1 * chi.diff(v) + p.ode.rhs * chi.diff(v1)
        assert simplify(eq.residual(chi) - expected) == 0


class TestSolveChi:
    def test_example1(self, examples):
        res = solve_chi_ansatz(examples[1].ode, examples[1].lp)
        assert res.status == SOLVED
        assert res.chi == simplify(examples[1].ctx.parse("(p+1)/v"))

    def test_example2(self, examples):
        res = solve_chi_ansatz(examples[2].ode, examples[2].lp)
        assert res.status == SOLVED and res.chi == 0

    def test_example3(self, examples):
        res = solve_chi_ansatz(examples[3].ode, examples[3].lp)
        assert res.status == UNSOLVED and res.chi is None
        assert res.residual_system

    def test_example4(self, examples):
        res = solve_chi_ansatz(examples[4].ode, examples[4].lp)
        assert res.status == SOLVED and res.chi == -2

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_solutions_satisfy_the_equation(self, examples, n):
        p = examples[n]
        res = solve_chi_ansatz(p.ode, p.lp)
        assert chi_pde(p.ode, p.lp).residual(res.chi) == 0

    def test_third_order_is_verify_only(self):
        ode = OdeProblem.from_text(3, rhs="v2")
        res = solve_chi_ansatz(ode, LambdaPair(ode.ctx, 0, 1, 0))
        assert res.status == VERIFIED_ONLY and res.chi is None


class TestVerifyChi:
    def test_example4(self, examples):
        p = examples[4]
        assert verify_chi(p.ode, p.lp, sp.Integer(-2)).status == VERIFIED_ONLY
        bad = verify_chi(p.ode, p.lp, sp.Integer(2))
        assert bad.status == UNSOLVED and bad.residual_system


class TestAntiderivative:
    def test_powers(self):
        assert antiderivative(3 * v ** 2 + 1 / v, v) == simplify(v ** 3 + sp.log(v))

    def test_symbolic_power(self):
        p = sp.Symbol("p")
        assert simplify(antiderivative(v ** p, v) - v ** (p + 1) / (p + 1)) == 0

    def test_exponential(self):
        assert antiderivative(sp.exp(2 * v + t), v) == simplify(sp.exp(2 * v + t) / 2)

    def test_outside_table(self):
        assert antiderivative(sp.exp(v ** 2), v) is None


class TestReconstruct:
    @pytest.mark.parametrize("n,xi,eta,eta_w", [
        (1, "0", "1", "(p+1)/v"),
        (2, "1", "v^2", "0"),
        (4, "0", "v", "-2"),
    ])
    def test_generators(self, examples, n, xi, eta, eta_w):
        p = examples[n]
        Y = reconstruct_nonlocal(p.ode, p.lp, solve_chi_ansatz(p.ode, p.lp).chi)
        ew = sp.exp(w)
        f = Y.field
        assert f.xi == simplify(ew * p.ctx.parse(xi))
        assert f.eta[0] == simplify(ew * p.ctx.parse(eta))
        assert (f.eta_w[0] if f.eta_w else 0) == simplify(ew * p.ctx.parse(eta_w))

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_round_trip(self, examples, n):
        p = examples[n]
        Y = reconstruct_nonlocal(p.ode, p.lp, solve_chi_ansatz(p.ode, p.lp).chi)
        back = extract_lambda_from_nonlocal(Y, build_covering(p.ode, p.lp.lam))
        assert (back.rho, back.psi, back.lam) == (p.lp.rho, p.lp.psi, p.lp.lam)

    def test_wrong_chi(self, examples):
        p = examples[4]
        with pytest.raises(ReconstructionError):
            reconstruct_nonlocal(p.ode, p.lp, sp.Integer(0))


class TestVerifyNonlocal:
    def test_example2(self, examples):
        p = examples[2]
        Y = reconstruct_nonlocal(p.ode, p.lp, 0, check=False)
        assert verify_nonlocal_symmetry(build_covering(p.ode, p.lp.lam), Y).ok

    def test_time_translation_is_not_exponential(self):
        ode = OdeProblem.from_text(1, rhs="0")
        cover = build_covering(ode, 0)
        Y = std_prolong(VectorField(cover.ctx, 1), 1)
        res = verify_nonlocal_symmetry(cover, Y)
        assert res.tangent_equation and res.tangent_cover
        assert not res.exponential and not res.ok

    def test_example4_with_chi_zero(self, examples):
        p = examples[4]
        cover = build_covering(p.ode, p.lp.lam)
        Y = std_prolong(VectorField(cover.ctx, 0, (sp.exp(w) * v,), (0,)), 2)
        res = verify_nonlocal_symmetry(cover, Y)
        assert res.tangent_equation and not res.tangent_cover
        # Y(w1 - H) = e^w R[0], with R[c] = (t/v^2)(c + 2)
        assert chi_pde(p.ode, p.lp).residual(0) == simplify(2 * t / v ** 2)
        assert simplify(res.residuals[1] - 2 * sp.exp(w) * t / v ** 2) == 0

    def test_exponential_tag_matches_bracket(self, examples):
        p = examples[4]
        cover = build_covering(p.ode, p.lp.lam)
        Y = reconstruct_nonlocal(p.ode, p.lp, -2)
        assert Y.exponential
        assert (commutator(d_dw(cover.ctx), Y.field) - Y.field).is_zero()


def test_extract_rejects_non_exponential(examples):
    p = examples[4]
    cover = build_covering(p.ode, p.lp.lam)
    with pytest.raises(NotExponentialForm):
        extract_lambda_from_nonlocal(VectorField(cover.ctx, 0, (w * v,)), cover)
