import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from thermalchannel import schurweyl as sw
from thermalchannel.errors import ParamOutOfRange, ScaleExceeded


class TestDimensions:
    def test_sym_dim(self):
        assert sw.sym_dim(2, 2) == 3
        assert sw.sym_dim(3, 4) == math.comb(6, 3)

    def test_qubit_three_copies(self):
        assert (sw.dim_P((3,)), sw.dim_Q((3,), 2)) == (1, 4)
        assert (sw.dim_P((2, 1)), sw.dim_Q((2, 1), 2)) == (2, 2)

    def test_sign_representation(self):
        for d in range(1, 5):
            assert sw.dim_P((1,) * d) == 1

    @pytest.mark.parametrize("n", range(1, 7))
    def test_regular_representation(self, n):
        assert sum(sw.dim_P(l) ** 2 for l in sw.partitions(n)) == math.factorial(n)

    def test_young_diagrams_row_bound(self):
        assert all(len(l) <= 2 for l in sw.young_diagrams(2, 5))

    def test_not_a_diagram(self):
        with pytest.raises(ValueError):
            sw.young_diagram((1, 2))

    def test_scale(self):
        with pytest.raises(ScaleExceeded):
            sw.young_diagrams(2, 7)
        with pytest.raises(ScaleExceeded):
            sw.young_diagrams(5, 2)


class TestCharacters:
    def test_trivial_and_sign(self):
        assert sw.character((3,), (2, 1)) == 1
        assert sw.character((1, 1, 1), (2, 1)) == -1

    def test_dimension_is_identity_character(self):
        for lam in sw.partitions(5):
            assert sw.character(lam, (1,) * 5) == sw.dim_P(lam)

    def test_column_orthogonality(self):
        # sum_lam chi(lam, mu) chi(lam, nu) = 0 for distinct classes
        n = 4
        parts = sw.partitions(n)
        for mu in parts:
            for nu in parts:
                if mu != nu:
                    assert sum(sw.character(l, mu) * sw.character(l, nu) for l in parts) == 0

    def test_cycle_type(self):
        assert tuple(sw.cycle_type((1, 2, 0, 3))) == (3, 1)


class TestProjectors:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_identities(self, n):
        r = sw.projector_residuals(2, n)
        assert max(r.values()) <= 1e-10

    def test_too_many_rows_is_zero(self):
        assert np.linalg.norm(sw.schur_projector((1, 1, 1), 2, 3)) < 1e-12

    def test_symmetric_projector_trace(self):
        assert np.trace(sw.symmetric_projector(3, 2)).real == pytest.approx(6)

    def test_swap(self):
        F = sw.permutation_operator((1, 0), 2)
        a, b = np.array([1.0, 0]), np.array([0.3, 0.7])
        assert_allclose(F @ np.kron(a, b), np.kron(b, a))

    def test_operator_cap(self):
        # the largest supported case sits exactly at the cap
        assert 4 ** 6 == sw.MAX_OPERATOR_DIM
        with pytest.raises(ScaleExceeded):
            sw._class_sum(lambda pi: 1.0, [4] * 6 + [2], [[k] for k in range(7)])


class TestDeFinetti:
    def test_single_copy(self):
        rep = sw.definetti_state(2, 1)
        assert_allclose(rep.from_blocks, np.eye(2) / 2, atol=1e-12)
        assert_allclose(rep.from_symmetric, np.eye(2) / 2, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_gap(self, n):
        rep = sw.definetti_state(2, n)
        assert rep.gap <= 1e-10
        assert np.trace(rep.from_blocks).real == pytest.approx(1)

    def test_cap(self):
        with pytest.raises(ScaleExceeded):
            sw.definetti_state(2, 9)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_block_compat(self, n):
        assert sw.verify_block_compat(n, 2, 2) <= 1e-10


def test_pgm_completeness_decreases():
    res = [r for _, r in sw.pgm_completeness(2, grids=(2, 4, 8, 16))]
    assert all(b < a for a, b in zip(res, res[1:]))
    assert res[-1] < 0.01


class TestMicro:
    BASE = dict(n=1000, J=1, eta=0.5, eta_p=0.25, eps=0.1, delta=0.1, delta_p=0.1, eps_p=0.1, y=0.1,
                y_p=0.5, nu=1.5, nu_p=1.5, c_min=1.0, c_max=1.0)

    def test_vacuous_at_eps_one(self):
        bounds = sw.micro_bounds(sw.MicroParams(**{**self.BASE, "eps": 1.0}))
        assert bounds.bound_a >= 1.0
        assert not bounds.prefactor_known

    def test_unpacks(self):
        a, b, ok = sw.micro_bounds(sw.MicroParams(**self.BASE))
        assert 0 < a <= 1 and 0 < b <= 1 and isinstance(ok, bool)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 10 ** 6))
    def test_bounds_in_unit_interval(self, n):
        a, b, _ = sw.micro_bounds(sw.MicroParams(**{**self.BASE, "n": n}))
        assert 0 < a <= 1 and 0 < b <= 1

    def test_hoeffding_boundary(self):
        n, eta_p, y_p = 1000, 0.25, 0.5
        delta_p = 2 * math.exp(-n * eta_p ** 2 * y_p ** 2 / 2)
        assert sw.hoeffding_condition(n, eta_p, y_p, delta_p, 1.0)
        assert not sw.hoeffding_condition(n - 1, eta_p, y_p, delta_p, 1.0)

    @pytest.mark.parametrize("bad", [{"eta_p": 0.6}, {"eps": 0.0}, {"nu": 1.0}, {"y": 1.0}, {"c_min": 2.0}])
    def test_validation(self, bad):
        with pytest.raises(ParamOutOfRange):
            sw.micro_bounds(sw.MicroParams(**{**self.BASE, **bad}))

    def test_regime(self):
        g = 1 / 32
        p = sw.parameter_regime(64, g, g, g, 1.0, 2.0)
        assert p.extra["alpha1"] == 1 - 17 * g
        assert p.extra["alpha2"] == 1 - 5 * g
        assert p.eps == pytest.approx(math.exp(-64 ** (1 - 17 * g)))
        assert p.eta_p == p.eta / 2

    def test_regime_validation(self):
        with pytest.raises(ParamOutOfRange):
            sw.parameter_regime(1, 0.01, 0.01, 0.01, 1.0, 1.0)
        with pytest.raises(ParamOutOfRange):
            sw.parameter_regime(64, 0.1, 0.05, 0.01, 1.0, 1.0)


def test_identity_report():
    rep = sw.identity_report(3, 2)
    assert rep["dimension_sum"] == 0 and rep["character_regular"] == 0
    assert rep["definetti_gap"] <= 1e-10 and rep["block_compat"] <= 1e-10
