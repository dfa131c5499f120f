import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from thermalchannel import exemplars, maxent, qcore
from thermalchannel.errors import DimMismatch, Infeasible, ThermalChannelError

H2 = np.diag([0.0, 1.0])


def replacer_problem(q=0.3):
    return maxent.MaxEntProblem(2, 2, equality=exemplars.replacer_constraints(H2, q))


@pytest.fixture(scope="module")
def replacer_solution():
    problem = replacer_problem()
    return maxent.solve_thermal_channel(problem), problem


class TestProblem:
    def test_dimension_check(self):
        with pytest.raises(DimMismatch):
            maxent.MaxEntProblem(2, 2, equality=[(np.eye(3), 1.0)])

    def test_nonhermitian_rejected(self):
        with pytest.raises(ThermalChannelError):
            maxent.MaxEntProblem(2, 2, equality=[(np.triu(np.ones((4, 4))), 1.0)])

    def test_negative_quadratic_weight(self):
        with pytest.raises(ValueError):
            maxent.MaxEntProblem(2, 2, quadratic=[(np.eye(4), 1.0, -0.1)])

    def test_reference_dims(self):
        with pytest.raises(DimMismatch):
            maxent.MaxEntProblem(2, 3, reference=qcore.identity_choi(2))


def test_hermitian_basis_orthonormal():
    B = maxent.hermitian_basis(3)
    assert len(B) == 9
    gram = np.array([[np.trace(a @ b).real for b in B] for a in B])
    assert_allclose(gram, np.eye(9), atol=1e-12)


class TestSolver:
    def test_unconstrained(self):
        sol = maxent.solve_thermal_channel(maxent.MaxEntProblem(2, 2))
        assert_allclose(sol.choi.op, np.eye(4) / 2, atol=1e-8)
        assert abs(sol.entropy - math.log(2)) < 1e-8

    def test_replacer(self, replacer_solution):
        sol, problem = replacer_solution
        assert_allclose(sol.choi.op, exemplars.replacer_thermal(H2, 0.3).op, atol=1e-6)
        assert maxent.kkt_verify(sol, problem).ok(1e-6)

    def test_fixed_input_mixed_is_tp(self):
        N0 = qcore.random_channel(3, 2, 2)
        C = qcore.random_hermitian(qcore.make_rng(3), 4)
        problem = maxent.MaxEntProblem(2, 2, equality=[(C, float(np.trace(C @ N0.op).real))])
        sol = maxent.solve_fixed_input(problem, np.eye(2) / 2)
        assert sol.choi.is_valid()
        assert abs(np.trace(C @ sol.choi.op).real - np.trace(C @ N0.op).real) < 1e-8

    def test_inactive_inequality(self):
        # the unconstrained optimum already satisfies tr[D N] <= r with slack
        D = np.kron(H2, np.eye(2) / 2)
        problem = maxent.MaxEntProblem(2, 2, inequality=[(D, 0.9)])
        sol = maxent.solve_thermal_channel(problem)
        assert_allclose(sol.choi.op, np.eye(4) / 2, atol=1e-6)
        assert abs(sol.nu[0]) < 1e-6

    def test_active_inequality_matches_equality(self):
        D = np.kron(H2, np.eye(2) / 2)
        sol = maxent.solve_thermal_channel(maxent.MaxEntProblem(2, 2, inequality=[(D, 0.3)]))
        assert_allclose(sol.choi.op, exemplars.replacer_thermal(H2, 0.3).op, atol=1e-5)
        assert sol.nu[0] > 0

    def test_infeasible(self):
        # energy below the ground state
        with pytest.raises(ThermalChannelError):
            maxent.solve_thermal_channel(replacer_problem(-0.5))

    def test_reference_self(self):
        M = qcore.random_channel(6, 2, 2)
        sol = maxent.solve_fixed_input(maxent.MaxEntProblem(2, 2, reference=M), np.eye(2) / 2)
        assert_allclose(sol.choi.op, M.op, atol=1e-6)
        assert abs(sol.achieved) < 1e-8


class TestCertificate:
    def test_perturbed_mu_breaks_exp_form(self, replacer_solution):
        sol, problem = replacer_solution
        base = maxent.kkt_verify(sol, problem).exp_form_residual
        bad = maxent.ThermalSolution(**{**sol.__dict__, "mu": sol.mu + 0.1})
        assert maxent.kkt_verify(bad, problem).exp_form_residual > base + 1e-3

    def test_g_positive(self, replacer_solution):
        sol, problem = replacer_solution
        assert maxent.kkt_verify(sol, problem).G_min_eigenvalue >= -1e-8

    def test_strict_feasibility(self):
        assert maxent.strict_feasibility_hint(replacer_problem(0.3)) > 0
        assert maxent.strict_feasibility_hint(replacer_problem(0.0)) <= 1e-10
        assert maxent.strict_feasibility_hint(replacer_problem(-1.0)) < 0


class TestSymmetry:
    def test_unconstrained_has_all(self):
        rep = maxent.symmetry_reduce(maxent.MaxEntProblem(2, 2))
        assert rep["dephasing_R"] and rep["dephasing_B"] and rep["bell"]

    def test_bell_diagonal_constraint(self):
        c = np.array([[1.0, 0.0], [0.5, 0.0]])
        rep = maxent.symmetry_reduce(maxent.MaxEntProblem(2, 2, equality=[(exemplars.bell_constraint_operator(c, 2), 0.4)]))
        assert rep["bell"] and rep["bell_input"]

    def test_diagonal_replacer(self):
        rep = maxent.symmetry_reduce(replacer_problem())
        assert rep["dephasing_B"] and rep["dephasing_R"]

    def test_generic_has_none(self):
        C = qcore.random_hermitian(qcore.make_rng(1), 4)
        rep = maxent.symmetry_reduce(maxent.MaxEntProblem(2, 2, equality=[(C, 0.1)]))
        assert not any(rep.values())


class TestJson:
    def test_problem_roundtrip(self):
        problem = maxent.MaxEntProblem(2, 2, equality=exemplars.replacer_constraints(H2, 0.3),
                                       inequality=[(np.eye(4), 5.0)],
                                       quadratic=[(np.kron(H2, np.eye(2)), 0.2, 0.1)],
                                       reference=qcore.random_channel(2, 2, 2))
        text = json.dumps(maxent.problem_to_json(problem, phi=np.eye(2) / 2))
        back, phi = maxent.problem_from_json(json.loads(text))
        assert_allclose(phi, np.eye(2) / 2)
        assert_allclose(back.equality[0][0], problem.equality[0][0], rtol=0, atol=0)
        assert back.quadratic[0][1:] == problem.quadratic[0][1:]
        assert_allclose(back.reference.op, problem.reference.op, rtol=0, atol=0)

    def test_solution_roundtrip(self, replacer_solution):
        sol, problem = replacer_solution
        back = maxent.solution_from_json(json.loads(json.dumps(maxent.solution_to_json(sol))))
        r0, r1 = maxent.kkt_verify(sol, problem), maxent.kkt_verify(back, problem)
        assert abs(r0.max_residual() - r1.max_residual()) < 1e-12
        assert_allclose(back.choi.op, sol.choi.op, rtol=0, atol=0)

    def test_malformed(self):
        with pytest.raises(ValueError):
            maxent.problem_from_json({"dimA": 2})
        with pytest.raises(ValueError):
            maxent.solution_from_json({"choi": None})


class TestEstimator:
    def test_fit_transform(self):
        est = maxent.ThermalChannelSolver().fit(replacer_problem())
        gamma = exemplars.replacer_thermal(H2, 0.3).op[::2, ::2]
        rho = qcore.random_density(qcore.make_rng(0), 2)
        assert_allclose(est.transform(rho), gamma, atol=1e-6)
        assert est.transform(np.stack([rho, rho])).shape == (2, 2, 2)
        assert est.score() == pytest.approx(qcore.von_neumann_entropy(gamma), abs=1e-6)

    def test_fixed_input(self):
        est = maxent.ThermalChannelSolver(fixed_input=np.eye(2) / 2).fit(maxent.MaxEntProblem(2, 2))
        assert_allclose(est.choi_.op, np.eye(4) / 2, atol=1e-8)

    def test_rejects_arrays(self):
        with pytest.raises(TypeError):
            maxent.ThermalChannelSolver().fit(np.eye(2))

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            maxent.ThermalChannelSolver().transform(np.eye(2) / 2)


def test_tp_violation_is_measured(replacer_solution):
    sol, problem = replacer_solution
    bad_op = sol.choi.op + 0.01 * np.kron(np.eye(2), np.diag([1.0, 0.0])) / 2
    bad = maxent.ThermalSolution(**{**sol.__dict__, "choi": qcore.choi(bad_op, 2, 2)})
    assert maxent.kkt_verify(bad, problem).tp_residual == pytest.approx(0.01, rel=1e-9)


def test_average_energy_qubit():
    problem = maxent.MaxEntProblem(2, 2, equality=exemplars.avg_energy_constraints(H2))
    sol = maxent.solve_thermal_channel(problem)
    assert_allclose(sol.choi.op, np.diag([1.0, 0, 0, 1.0]), atol=1e-4)
    assert abs(sol.entropy) < 1e-4
