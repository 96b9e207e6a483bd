import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochham import expr as ex
from stochham.field import (ComponentError, FieldError, PhasePoint, StochasticField, eval_field,
                            field_from_hamiltonian, ito_drift_correction, jacobians)
from stochham.fieldfile import FieldFileError, format_field, load_field, parse_field_text
from stochham.helmholtz import check_conditions_at

from conftest import FIELDS, GOLDEN, random_systems


class TestLoad:
    def test_harmonic(self):
        f = load_field(FIELDS / "harmonic.field")
        assert (f.d, f.n) == (1, 0)
        assert f.qs == ((),) and f.ps == ((),)
        assert f.qd[0] == ex.Var("p0")

    def test_kubo(self):
        f = load_field(FIELDS / "kubo.field")
        assert (f.d, f.n) == (1, 1)
        assert f.params == {"a": 1.0, "s": 0.5}
        assert f.qs[0][0] == ex.BinOp("*", ex.Param("s"), ex.Var("p0"))
        assert check_conditions_at(f, [0.3, -0.7]).max() == 0.0

    def test_undeclared_symbol(self):
        with pytest.raises(FieldFileError, match="undeclared symbol.*q1") as info:
            parse_field_text("dim 1\nQD[0] = q1\nPD[0] = 0\n")
        assert info.value.line == 2

    def test_channel_out_of_range(self):
        with pytest.raises(FieldFileError, match="channel index 1") as info:
            parse_field_text("dim 1\nnoise 1\nQD[0] = p\nPD[0] = -q\nQS[0][1] = q\n")
        assert info.value.line == 5

    @pytest.mark.parametrize("text,line", [
        ("dim 1\nQD[0] = sin(q\nPD[0] = 0\n", 2),
        ("dim 1\nQD[0] = p\nQD[0] = q\nPD[0] = 0\n", 3),
        ("QD[0] = p\n", 1),
        ("dim 1\nfrobnicate\n", 2),
        ("dim 1\nparam a = x\nQD[0] = p\nPD[0] = 0\n", 2),
        ("dim 2\nQD[2] = p0\n", 2),
        ("dim 1\nQS[0] = p0\n", 2),
    ])
    def test_errors_carry_line(self, text, line):
        with pytest.raises(FieldFileError) as info:
            parse_field_text(text)
        assert info.value.line == line

    def test_missing_drift(self):
        with pytest.raises(FieldFileError, match=r"missing PD\[0\]"):
            parse_field_text("dim 1\nQD[0] = p\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FieldFileError, match="cannot read"):
            load_field(tmp_path / "nope.field")

    def test_sparse_diffusion_defaults_to_zero(self):
        f = parse_field_text("dim 2\nnoise 2\nQD[0]=p0\nQD[1]=p1\nPD[0]=-q0\nPD[1]=-q1\nPS[1][0] = 1\n")
        _, sigma = eval_field(f, [1.0, 2.0, 3.0, 4.0])
        expected = np.zeros((4, 2))
        expected[3, 0] = 1.0
        np.testing.assert_array_equal(sigma, expected)

    def test_golden_format(self):
        f = load_field(FIELDS / "kubo.field")
        assert format_field(f) == (GOLDEN / "kubo_format.field").read_text()
        again = parse_field_text(format_field(f))
        assert format_field(again) == format_field(f)


class TestEval:
    def test_harmonic(self, harmonic):
        drift, sigma = eval_field(harmonic, [1.0, 2.0])
        np.testing.assert_array_equal(drift, [2.0, -1.0])
        assert sigma.shape == (2, 0)

    def test_kubo(self, kubo):
        drift, sigma = eval_field(kubo, PhasePoint([1.0], [2.0]))
        np.testing.assert_array_equal(drift, [2.0, -1.0])
        np.testing.assert_array_equal(sigma, [[1.0], [-0.5]])

    def test_zero_field(self):
        f = StochasticField.build(2, 1, ["0", "0"], ["0", "0"])
        drift, sigma = eval_field(f, [1.0, -2.0, 3.0, 0.5])
        assert not drift.any() and not sigma.any()

    def test_batched(self, kubo):
        z = np.array([[1.0, 0.0, -1.0], [2.0, 1.0, 0.5]])
        drift, sigma = eval_field(kubo, z)
        assert drift.shape == (2, 3) and sigma.shape == (2, 1, 3)
        np.testing.assert_array_equal(drift[:, 0], [2.0, -1.0])

    def test_component_error(self):
        f = StochasticField.build(1, 1, ["p"], ["-q"], [["log(q)"]], [["0"]])
        with pytest.raises(ComponentError, match=r"QS\[0\]\[0\]") as info:
            eval_field(f, [-1.0, 0.0])
        assert info.value.component == "QS[0][0]"

    def test_bad_state_shape(self, kubo):
        with pytest.raises(FieldError):
            eval_field(kubo, [1.0, 2.0, 3.0])


class TestJacobians:
    def test_harmonic(self, harmonic):
        j = jacobians(harmonic, [0.3, 0.4])
        assert j.dQD_dP.tolist() == [[1.0]] and j.dPD_dQ.tolist() == [[-1.0]]
        assert j.dQD_dQ.tolist() == [[0.0]] and j.dPD_dP.tolist() == [[0.0]]

    def test_kubo(self, kubo):
        j = jacobians(kubo, [1.0, 2.0])
        assert j.dQS_dP.tolist() == [[[0.5]]] and j.dPS_dQ.tolist() == [[[-0.5]]]
        assert j.dQS_dQ.tolist() == [[[0.0]]] and j.dPS_dP.tolist() == [[[0.0]]]

    def test_product(self):
        f = StochasticField.build(1, 0, ["q*p"], ["0"])
        j = jacobians(f, [2.0, 3.0])
        assert j.dQD_dQ.tolist() == [[3.0]] and j.dQD_dP.tolist() == [[2.0]]

    def test_index_convention(self):
        # QS[i][j] = q_k * p_i with distinct k per (i, j) to pin (i, j, k) ordering
        f = StochasticField.build(2, 2, ["0", "0"], ["0", "0"],
                                  [["q1", "7*q0"], ["3*q0", "5*q1"]], None)
        j = jacobians(f, [1.0, 1.0, 1.0, 1.0])
        assert j.dQS_dQ[0, 0, 1] == 1.0 and j.dQS_dQ[0, 1, 0] == 7.0
        assert j.dQS_dQ[1, 0, 0] == 3.0 and j.dQS_dQ[1, 1, 1] == 5.0
        assert j.dQS_dQ.sum() == 16.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        f = StochasticField.build(
            2, 1,
            ["sin(q0)*p1 + q1^2", "exp(0.3*p0)*q0"],
            ["cos(q1*p0)", "tanh(q0+p1)*p0"],
            [["q0*p0*a"], ["sqrt(1+q1^2)"]], [["log(2+sin(p1))"], ["p0^3/(1+q0^2)"]],
            params={"a": 0.7})
        z = rng.uniform(-1.5, 1.5, 4)
        j = jacobians(f, z)
        D = np.concatenate([j.drift_matrix(), j.diffusion_tensor().reshape(4, 4)], axis=0)
        step = 1e-5
        for k in range(4):
            e = np.zeros(4)
            e[k] = step
            up = np.concatenate([x.reshape(-1) for x in eval_field(f, z + e)])
            dn = np.concatenate([x.reshape(-1) for x in eval_field(f, z - e)])
            np.testing.assert_allclose(D[:, k], (up - dn) / (2 * step), atol=1e-6)


class TestFromHamiltonian:
    def test_harmonic(self):
        f = field_from_hamiltonian("(q^2+p^2)/2", [], 1)
        drift, _ = eval_field(f, [0.7, -1.3])
        np.testing.assert_allclose(drift, [-1.3, -0.7], rtol=0, atol=0)

    def test_kubo(self, kubo):
        f = field_from_hamiltonian("a*(q^2+p^2)/2", ["s*(q^2+p^2)/2"], 1, {"a": 1.0, "s": 0.5})
        rng = np.random.default_rng(5)
        z = rng.uniform(-2, 2, (2, 50))
        for a, b in zip(eval_field(f, z), eval_field(kubo, z)):
            np.testing.assert_allclose(a, b, rtol=1e-15, atol=1e-15)

    def test_qp(self):
        f = field_from_hamiltonian("q*p", [], 1)
        drift, _ = eval_field(f, [2.0, 3.0])
        np.testing.assert_array_equal(drift, [2.0, -3.0])

    def test_random_polynomials_satisfy_conditions(self):
        # degree <= 6 Hamiltonian pairs, 128 random points each
        rng = np.random.default_rng(11)
        for f, _, _ in random_systems(count=10, seed=11, degree=6):
            z = rng.uniform(-2, 2, (2 * f.d, 128))
            from stochham.helmholtz import residuals_from_jacobians
            res = residuals_from_jacobians(jacobians(f, z))
            assert res.as_rows().max() <= 1e-10

    def test_generated_file_roundtrip(self):
        f = field_from_hamiltonian("q0*p1^2 + sin(q1)", ["p0*q1"], 2)
        g = parse_field_text(format_field(f))
        z = np.random.default_rng(0).uniform(-1, 1, (4, 20))
        for a, b in zip(eval_field(f, z), eval_field(g, z)):
            np.testing.assert_array_equal(a, b)


class TestItoCorrection:
    def test_kubo(self):
        s = 0.5
        f = field_from_hamiltonian("(q^2+p^2)/2", ["s*(q^2+p^2)/2"], 1, {"s": s})
        z = np.array([1.0, 2.0])
        np.testing.assert_allclose(ito_drift_correction(f, z), [-s * s * 1.0 / 2, -s * s * 2.0 / 2], atol=1e-15)

    def test_additive_noise(self):
        f = StochasticField.build(1, 2, ["p"], ["-q"], [["0.3", "1"]], [["-2", "0"]])
        np.testing.assert_array_equal(ito_drift_correction(f, [0.4, -0.2]), [0.0, 0.0])

    def test_linear_diffusion(self):
        f = StochasticField.build(1, 1, ["0"], ["0"], [["q"]], [["0"]])
        np.testing.assert_allclose(ito_drift_correction(f, [0.8, 0.1]), [0.4, 0.0])

    @pytest.mark.parametrize("qs,ps,state_dependent", [
        ("1", "-2", False), ("0.5*s", "s^2", False), ("q", "0", True), ("sin(p)", "1", True),
        ("1", "exp(q)", True), ("p*0", "3", False),
    ])
    def test_vanishes_iff_state_independent(self, qs, ps, state_dependent):
        f = StochasticField.build(1, 1, ["p"], ["-q"], [[qs]], [[ps]], params={"s": 0.7})
        z = np.random.default_rng(1).uniform(-2, 2, (2, 64))
        nonzero = np.abs(ito_drift_correction(f, z)).max() > 0
        assert nonzero == state_dependent
