import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from thermalchannel import exemplars, qcore
from thermalchannel.errors import EnergyOutOfRange, Infeasible

H2 = np.diag([0.0, 1.0])


class TestGibbs:
    def test_zero_temperature(self):
        assert_allclose(exemplars.gibbs(H2, np.inf), np.diag([1.0, 0.0]))
        assert_allclose(exemplars.gibbs(H2, -np.inf), np.diag([0.0, 1.0]))

    def test_degenerate_ground_space(self):
        assert_allclose(exemplars.gibbs(np.diag([0.0, 0.0, 1.0]), np.inf), np.diag([0.5, 0.5, 0.0]))

    def test_infinite_temperature(self):
        assert_allclose(exemplars.gibbs(H2, 0.0), np.eye(2) / 2)

    def test_beta_for_energy_frozen(self):
        # E = 0.3 on a qubit gap of 1: exp(-beta) = 3/7
        assert abs(exemplars.beta_for_energy(H2, 0.3) - math.log(7 / 3)) < 1e-12

    def test_beta_edges(self):
        assert exemplars.beta_for_energy(H2, 0.0) == np.inf
        assert exemplars.beta_for_energy(H2, 1.0) == -np.inf
        assert exemplars.beta_for_energy(H2, 0.5) == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(EnergyOutOfRange):
            exemplars.beta_for_energy(H2, 1.5)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.01, 0.99))
    def test_energy_matches(self, E):
        H = np.diag([0.0, 0.4, 1.0])
        g = exemplars.gibbs(H, exemplars.beta_for_energy(H, E))
        assert abs(np.trace(g @ H).real - E) < 1e-9

    def test_eigenspaces(self):
        groups = exemplars.energy_eigenspaces(np.diag([0.0, 1.0, 1.0]))
        assert [round(e, 12) for e, _ in groups] == [0.0, 1.0]
        assert [np.trace(P).real for _, P in groups] == pytest.approx([1, 2])


class TestThermalExemplars:
    def test_replacer(self):
        N = exemplars.replacer_thermal(H2, 0.3)
        assert N.is_valid()
        out = qcore.apply_channel(N, np.diag([0.0, 1.0]))
        assert_allclose(out, np.diag([0.7, 0.3]), atol=1e-12)

    def test_strict_energy(self):
        N, s = exemplars.strict_energy_thermal(np.diag([0.0, 1.0, 1.0]))
        assert N.is_valid()
        assert s == pytest.approx(0.0)
        N2, s2 = exemplars.strict_energy_thermal(np.diag([0.0, 0.0, 1.0, 1.0]))
        assert s2 == pytest.approx(math.log(2))

    def test_avg_energy(self):
        H = np.diag([0.0, 1.0, 2.0])
        N, s = exemplars.avg_energy_thermal(H)
        assert N.is_valid()
        # the extreme eigenstates are mapped to themselves, so the entropy vanishes
        assert s == pytest.approx(0.0, abs=1e-12)
        for C, q in exemplars.avg_energy_constraints(H):
            assert abs(np.trace(C @ N.op).real - q) < 1e-10


class TestPauli:
    def test_bell_basis_orthonormal(self):
        V = np.array(exemplars.bell_vectors(3))
        assert_allclose(V.conj() @ V.T, np.eye(9), atol=1e-12)

    def test_weights_roundtrip(self):
        p = np.array([0.4, 0.3, 0.2, 0.1])
        N = exemplars.pauli_choi(p, 2)
        assert N.is_valid()
        assert_allclose(exemplars.bell_weights(N), p, atol=1e-12)
        assert exemplars.off_bell_weight(N) < 1e-12

    def test_identity_is_first_bell_state(self):
        assert_allclose(exemplars.bell_weights(qcore.identity_choi(2)), [1, 0, 0, 0], atol=1e-12)

    def test_unconstrained_maxent_is_uniform(self):
        p, N = exemplars.pauli_maxent(2, [])
        assert_allclose(p, np.full(4, 0.25))
        assert_allclose(N.op, np.eye(4) / 2, atol=1e-12)

    def test_single_constraint_is_exponential_family(self):
        c = np.array([[0.0, 1.0], [1.0, 2.0]])
        p, _ = exemplars.pauli_maxent(2, [(c, 0.7)])
        assert abs(c.ravel() @ p - 0.7) < 1e-10
        # log p is affine in c
        lp = np.log(p)
        slope = (lp[1] - lp[0]) / 1.0
        assert_allclose(lp, lp[0] + slope * c.ravel(), atol=1e-9)

    def test_classical_maxent_infeasible(self):
        with pytest.raises(Infeasible):
            exemplars.classical_maxent(np.array([[1.0, 1.0, 1.0, 1.0]]), np.array([2.0]))


class TestClassical:
    def test_fixed_input_meets_constraints(self):
        c = np.array([[[0.0, 1.0], [1.0, 0.0]]])
        p = np.array([0.3, 0.7])
        T = exemplars.classical_maxent_fixed_input(c, [0.4], p)
        assert_allclose(T.sum(axis=0), 1)
        assert abs(np.einsum("jkl,kl->j", c, T)[0] - 0.4) < 1e-10

    def test_no_constraints_uniform(self):
        T = exemplars.classical_maxent_fixed_input(np.zeros((0, 2, 2)), [], [0.5, 0.5])
        assert_allclose(T, np.full((2, 2), 0.5))

    def test_nonpositive_input(self):
        with pytest.raises(ValueError):
            exemplars.classical_maxent_fixed_input(np.ones((1, 2, 2)), [1.0], [1.0, 0.0])

    def test_channel_entropy(self):
        T = np.array([[1.0, 0.5], [0.0, 0.5]])
        assert exemplars.classical_channel_entropy(T) == pytest.approx(0.0)
        assert exemplars.classical_channel_entropy(np.full((2, 2), 0.5)) == pytest.approx(math.log(2))

    def test_choi_is_diagonal(self):
        T = np.array([[0.9, 0.3], [0.1, 0.7]])
        N = exemplars.classical_choi(T)
        assert N.is_valid()
        assert_allclose(np.diag(N.op).real, T.reshape(-1))


class TestPassivity:
    def test_thermal_replacer_passes(self):
        from thermalchannel.maxent import MaxEntProblem

        problem = MaxEntProblem(2, 2, equality=exemplars.replacer_constraints(H2, 0.3))
        assert exemplars.passivity_probe(exemplars.replacer_thermal(H2, 0.3), problem, trials=200)["passed"]

    def test_inverted_replacer_fails(self):
        from thermalchannel.maxent import MaxEntProblem

        # output energy 0.7 can be lowered by a unitary on B
        problem = MaxEntProblem(2, 2, equality=exemplars.replacer_constraints(H2, 0.7))
        rep = exemplars.passivity_probe(exemplars.replacer_thermal(H2, 0.7), problem, trials=200)
        assert not rep["passed"]
        assert rep["witness"] is not None


class TestCatalogueCases:
    def test_symmetric_qutrit(self):
        H = np.diag([0.0, 1.0, 2.0])
        b = exemplars.beta_for_energy(H, 1.0)
        assert b == pytest.approx(0.0, abs=1e-12)
        g = exemplars.gibbs(H, b)
        assert qcore.von_neumann_entropy(g) == pytest.approx(math.log(3))

    def test_replacer_infinite_temperature(self):
        assert_allclose(exemplars.replacer_thermal(np.diag([1.0, -1.0]), 0.0).op, np.eye(4) / 2, atol=1e-12)

    def test_strict_energy_trivial_hamiltonian(self):
        N, s = exemplars.strict_energy_thermal(np.eye(3))
        assert_allclose(N.op, np.eye(9) / 3, atol=1e-12)
        assert s == pytest.approx(math.log(3))

    def test_avg_energy_qubit_dephasing(self):
        N, s = exemplars.avg_energy_thermal(H2)
        assert_allclose(N.op, np.diag([1.0, 0, 0, 1.0]), atol=1e-12)
        assert s == pytest.approx(0.0)

    def test_avg_energy_middle_level(self):
        N, _ = exemplars.avg_energy_thermal(np.diag([0.0, 1.0, 2.0]))
        assert_allclose(qcore.apply_channel(N, np.diag([0.0, 1.0, 0.0])), np.eye(3) / 3, atol=1e-10)

    def test_avg_energy_flat(self):
        N, _ = exemplars.avg_energy_thermal(np.eye(2))
        assert_allclose(N.op, np.eye(4) / 2, atol=1e-12)

    def test_pauli_single_atom(self):
        c = np.zeros((2, 2))
        c[0, 0] = 1.0
        p, _ = exemplars.pauli_maxent(2, [(c, 0.9)])
        assert_allclose(p, [0.9, 0.1 / 3, 0.1 / 3, 0.1 / 3], atol=1e-10)

    def test_pauli_two_atoms(self):
        c = np.array([[1.0, 1.0], [0.0, 0.0]])
        p, _ = exemplars.pauli_maxent(2, [(c, 0.5)])
        assert_allclose(p, np.full(4, 0.25), atol=1e-10)

    def test_classical_entropy_cases(self):
        assert exemplars.classical_channel_entropy(np.eye(3)) == pytest.approx(0.0)
        assert exemplars.classical_channel_entropy(np.full((3, 3), 1 / 3)) == pytest.approx(math.log(3))

    def test_passivity_vacuous(self):
        from thermalchannel.maxent import MaxEntProblem

        problem = MaxEntProblem(2, 2, equality=exemplars.replacer_constraints(H2, 0.7))
        assert exemplars.passivity_probe(qcore.identity_choi(2), problem, trials=0)["passed"]

    def test_identity_with_slack_has_witness(self):
        from thermalchannel.maxent import MaxEntProblem

        # the identity maps |1><1| to itself; a flip on B lowers its energy
        C = np.kron(H2, np.diag([0.0, 1.0]))
        problem = MaxEntProblem(2, 2, equality=[(C, 1.0)])
        assert not exemplars.passivity_probe(qcore.identity_choi(2), problem, trials=500)["passed"]
