"""Jet calculus for lambda-symmetries of scalar ODEs."""

from .expr import (EvaluationError, ParseError, equals, parse, simplify, substitute,
                   to_text)
from .jets import CoveringSystem, JetContext, OdeProblem, restrict_to_manifold, total_derivative
from .fields import (LambdaPair, VectorField, check_commutation, commutator, lambda_prolong,
                     std_prolong)
from .lambda_sym import (build_covering, chi_pde, extract_lambda_from_nonlocal,
                         is_lambda_symmetry, reconstruct_nonlocal, solve_chi_ansatz,
                         verify_chi, verify_nonlocal_symmetry)
from .reduction import (auxiliary_ode, derived_invariants, find_invariant_ansatz, reduce,
                        verify_invariant)
from .numeric import SamplePlan, integrate_ode, is_zero, verify_residual, verify_solution
from .problem import load_problem

__version__ = "0.1.0"
