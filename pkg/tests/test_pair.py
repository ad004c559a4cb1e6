import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kaonlab.errors import DomainError, InvalidParameterError, InvalidSpecError
from kaonlab.meson import Basis, QuasiSpinState, epsilon_from_polar, from_widths, make_params, named_state
from kaonlab.pair import (
    MeasurementSpec,
    Outcome,
    Side,
    expectation_approx,
    expectation_bmeson,
    expectation_from_probabilities,
    expectation_general,
    expectation_unitary,
    initial_singlet,
    joint_probabilities,
    joint_probability,
    side_gram,
)
from oracles import propagator

Y, N = Outcome.YES, Outcome.NO
NAMES = ("K0", "K0bar", "KS", "KL", "K1", "K2")


def spec(side, name, t, outcome):
    return MeasurementSpec(side, named_state(name), t, outcome)


def oracle_probabilities(k_n, t_l, k_m, t_r, params):
    """Four probabilities from meson amplitudes and no-signalling marginals.

    ``P(Y, Y)`` projects the meson part only, since decay products are
    orthogonal to every meson state.  The one-sided ``Yes`` marginals do not
    depend on when (or whether) the other side evolves, so they follow from
    a single propagator acting on the orthonormal strangeness basis.
    """
    c = initial_singlet(Basis.STRANGENESS, params).coef
    u_l, u_r = propagator(t_l, params), propagator(t_r, params)
    a = k_n.strangeness(params)
    b = k_m.strangeness(params)
    yy = abs(a.conj() @ u_l @ c @ u_r.T @ b.conj()) ** 2
    marg_l = float(np.sum(np.abs(a.conj() @ u_l @ c) ** 2))
    marg_r = float(np.sum(np.abs(c @ u_r.T @ b.conj()) ** 2))
    yn, ny = marg_l - yy, marg_r - yy
    return {(Y, Y): yy, (Y, N): yn, (N, Y): ny, (N, N): 1 - yy - yn - ny}


class TestSinglet:
    @pytest.mark.parametrize("eps", [0.0, epsilon_from_polar(2.23e-3, 45.0), 0.04 - 0.02j])
    def test_representations_agree(self, eps):
        params = make_params(0.47, 581.0, eps)
        s = initial_singlet(Basis.STRANGENESS, params)
        m = initial_singlet(Basis.MASS, params)
        assert_allclose(m.strangeness_coef(), s.strangeness_coef(), atol=1e-12)
        assert_allclose(s.in_basis(Basis.MASS).coef, m.coef, atol=1e-12)
        assert_allclose(initial_singlet(Basis.CP, params).strangeness_coef(), s.coef, atol=1e-12)

    def test_standard_singlet_without_cp_violation(self, kaon_cp0):
        m = initial_singlet(Basis.MASS, kaon_cp0)
        assert_allclose(m.coef, np.array([[0, 1], [-1, 0]]) / math.sqrt(2), atol=1e-15)

    def test_antisymmetric(self, kaon):
        for basis in Basis:
            s = initial_singlet(basis, kaon)
            assert_allclose(s.swapped().coef, -s.coef, atol=1e-15)

    def test_like_strangeness_amplitude_vanishes(self, kaon):
        s = initial_singlet(Basis.MASS, kaon)
        assert abs(s.amplitude(named_state("K0"), named_state("K0"))) < 1e-15
        assert abs(s.amplitude(named_state("K0"), named_state("K0bar"))) == pytest.approx(1 / math.sqrt(2))

    def test_normalized(self, kaon):
        c = initial_singlet(Basis.STRANGENESS, kaon).coef
        assert np.sum(np.abs(c) ** 2) == pytest.approx(1.0)


class TestJointProbability:
    def test_stable_limit(self):
        params = from_widths(1.0, 1e-13, 1e-13)
        for t_l, t_r in [(0.4, 0.4), (2.0, 0.5), (0.1, 3.3)]:
            yy = joint_probability(spec(Side.LEFT, "K0", t_l, Y), spec(Side.RIGHT, "K0", t_r, Y), params)
            yn = joint_probability(spec(Side.LEFT, "K0", t_l, Y), spec(Side.RIGHT, "K0", t_r, N), params)
            c = math.cos(t_l - t_r)
            assert yy == pytest.approx(0.25 * (1 - c), abs=1e-11)
            assert yn == pytest.approx(0.25 * (1 + c), abs=1e-11)

    def test_completeness_example(self, kaon):
        pr = joint_probabilities(named_state("K0"), 0.7, named_state("K0"), 1.3, kaon)
        assert sum(pr.values()) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("params_id", ["cp0", "kaon", "bmeson"])
    def test_grid_completeness(self, params_id, kaon, kaon_cp0):
        params = {"cp0": kaon_cp0, "kaon": kaon, "bmeson": make_params(0.77, 1.0, 0.0, label="B")}[params_id]
        ts = np.linspace(0, 5, 20)
        k0 = named_state("K0")
        for t_l in ts:
            for t_r in ts:
                pr = joint_probabilities(k0, t_l, k0, t_r, params)
                vals = np.array(list(pr.values()))
                assert np.all((vals >= -1e-15) & (vals <= 1 + 1e-15))
                assert vals.sum() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("eps", [0.0, epsilon_from_polar(2.23e-3, 45.0), 0.03 + 0.02j])
    def test_against_oracle(self, eps, rng):
        params = make_params(0.47, 581.0, eps)
        for _ in range(30):
            n, m = rng.choice(NAMES, 2)
            t_l, t_r = rng.uniform(0, 6, 2)
            got = joint_probabilities(named_state(n), t_l, named_state(m), t_r, params)
            want = oracle_probabilities(named_state(n), t_l, named_state(m), t_r, params)
            for key in want:
                assert got[key] == pytest.approx(want[key], abs=1e-12), (n, m, t_l, t_r, key)

    def test_arbitrary_quasi_spin(self, kaon, rng):
        for _ in range(10):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            w = rng.normal(size=2) + 1j * rng.normal(size=2)
            w /= np.linalg.norm(w)
            k_n = QuasiSpinState(Basis.STRANGENESS, tuple(v))
            k_m = QuasiSpinState(Basis.STRANGENESS, tuple(w))
            got = joint_probabilities(k_n, 1.1, k_m, 0.4, kaon)
            want = oracle_probabilities(k_n, 1.1, k_m, 0.4, kaon)
            for key in want:
                assert got[key] == pytest.approx(want[key], abs=1e-12)

    @pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 3.0, 8.0])
    def test_equal_time_anticorrelation(self, kaon_cp0, t):
        p = joint_probability(spec(Side.LEFT, "K0", t, Y), spec(Side.RIGHT, "K0", t, Y), kaon_cp0)
        assert p < 1e-12

    def test_unnormalized_state(self, kaon):
        bad = MeasurementSpec(Side.LEFT, QuasiSpinState(Basis.STRANGENESS, (1, 1)), 1.0, Y)
        with pytest.raises(InvalidSpecError):
            joint_probability(bad, spec(Side.RIGHT, "K0", 1.0, Y), kaon)

    def test_wrong_side(self, kaon):
        with pytest.raises(InvalidSpecError):
            joint_probability(spec(Side.RIGHT, "K0", 1.0, Y), spec(Side.RIGHT, "K0", 1.0, Y), kaon)

    def test_negative_time(self, kaon):
        with pytest.raises(DomainError):
            joint_probability(spec(Side.LEFT, "K0", -1.0, Y), spec(Side.RIGHT, "K0", 1.0, Y), kaon)

    def test_gram_matrix_positive_for_kaons(self, kaon):
        for t in (0.0, 0.5, 5.0, 500.0):
            assert np.linalg.eigvalsh(side_gram(t, kaon)).min() > -1e-12

    def test_large_epsilon_rejected(self):
        # probability conservation bounds the K_L-K_S overlap for these widths
        params = make_params(0.47, 581.0, 0.5)
        with pytest.raises(InvalidParameterError):
            joint_probabilities(named_state("K0"), 1.0, named_state("K0"), 1.0, params)


class TestExpectations:
    def test_initial_anticorrelation(self, kaon):
        assert expectation_general("K0", 0.0, "K0", 0.0, kaon) == pytest.approx(-1.0, abs=1e-12)

    def test_identity_with_probabilities(self, kaon, rng):
        for _ in range(10):
            t_a, t_b = rng.uniform(0, 5, 2)
            pr = joint_probabilities(named_state("K0"), t_a, named_state("K0"), t_b, kaon)
            e = -1 + 2 * (pr[(Y, Y)] + pr[(N, N)])
            assert expectation_general("K0", t_a, "K0", t_b, kaon) == pytest.approx(e, abs=1e-12)
            assert expectation_from_probabilities(pr) == pytest.approx(e, abs=1e-12)

    def test_general_matches_unitary(self, kaon_cp0, rng):
        assert expectation_general("K0", 1.0, "K0", 1.0, kaon_cp0) == pytest.approx(
            expectation_unitary(1.0, 1.0, kaon_cp0), abs=1e-12
        )
        for _ in range(20):
            t_l, t_r = rng.uniform(0, 8, 2)
            assert expectation_general("K0", t_l, "K0", t_r, kaon_cp0) == pytest.approx(
                expectation_unitary(t_l, t_r, kaon_cp0), abs=1e-12
            )

    def test_general_matches_bmeson(self, rng):
        params = make_params(0.77, 1.0, 0.0, label="B")
        for _ in range(10):
            t_l, t_r = rng.uniform(0, 5, 2)
            assert expectation_general("K0", t_l, "K0", t_r, params) == pytest.approx(
                expectation_bmeson(t_l, t_r, params), abs=1e-12
            )

    def test_unitary_values(self, kaon):
        assert expectation_unitary(0, 0, kaon) == -1.0
        gs, gl, gb = kaon.gamma_S, kaon.gamma_L, kaon.gamma_bar
        direct = -math.exp(-2 * gb) + (1 - math.exp(-gl)) * (1 - math.exp(-gs))
        assert expectation_unitary(1.0, 1.0, kaon) == pytest.approx(direct, rel=1e-14)

    def test_unitary_approaches_approx(self):
        for gl in (1e-2, 1e-3, 1e-4):
            params = from_widths(0.47, 1.0, gl)
            diff = expectation_unitary(1.0, 1.0, params) - expectation_approx(1.0, 1.0, params)
            assert abs(diff) <= gl * 1.0

    def test_approx_values(self, kaon):
        assert expectation_approx(0, 0, kaon) == -1.0
        dt = math.pi / 2 / kaon.delta_m
        assert expectation_approx(1.0 + dt, 1.0, kaon) == pytest.approx(0.0, abs=1e-15)
        assert expectation_approx(1.0, 1.0, kaon) == pytest.approx(-math.exp(-2 * kaon.gamma_bar), rel=1e-15)

    def test_bmeson_values(self):
        params = make_params(0.77, 1.0, 0.0, label="B")
        assert expectation_bmeson(0, 0, params) == -1.0
        assert expectation_bmeson(200.0, 200.0, params) == pytest.approx(1.0, abs=1e-15)

    def test_bmeson_equals_unitary_for_equal_widths(self, rng):
        params = make_params(0.77, 1.0, 0.0, label="B")
        for t_l, t_r in rng.uniform(0, 5, (5, 2)):
            assert expectation_bmeson(t_l, t_r, params) == pytest.approx(
                expectation_unitary(t_l, t_r, params), abs=1e-15
            )

    def test_bmeson_requires_equal_widths(self, kaon):
        with pytest.raises(InvalidParameterError):
            expectation_bmeson(1.0, 1.0, kaon)

    def test_bounds_and_symmetry(self, kaon):
        ts = np.linspace(0, 5, 20)
        tl, tr = np.meshgrid(ts, ts, indexing="ij")
        b = make_params(0.77, 1.0, 0.0, label="B")
        for e in (expectation_unitary(tl, tr, kaon), expectation_approx(tl, tr, kaon), expectation_bmeson(tl, tr, b)):
            assert np.all(np.abs(e) <= 1 + 1e-15)
        assert_allclose(expectation_unitary(tl, tr, kaon), expectation_unitary(tr, tl, kaon), atol=1e-15)

    def test_array_and_scalar_agree(self, kaon):
        ts = np.array([0.0, 0.7, 3.1])
        arr = expectation_unitary(ts, ts[::-1], kaon)
        assert_allclose(arr, [expectation_unitary(a, b, kaon) for a, b in zip(ts, ts[::-1])])
        assert isinstance(expectation_unitary(0.7, 0.2, kaon), float)
