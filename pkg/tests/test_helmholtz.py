import numpy as np
import pytest

from stochham import expr as ex
from stochham.field import StochasticField, eval_field, jacobians
from stochham.fieldfile import load_field
from stochham.helmholtz import (HAMILTONIAN, NOT_HAMILTONIAN, CheckError, SamplingConfig,
                                check_conditions_at, check_field, residuals_from_jacobians,
                                sample_points)
from stochham.systems import noncommuting_field

from conftest import FIELDS, random_systems

EPS = 1e-3


def perturbed(f, eps=EPS):
    bump = ex.BinOp("*", ex.Num(eps), ex.BinOp("^", ex.Var("q0"), ex.Num(2.0)))
    return f.replace(qd=(ex.BinOp("+", f.qd[0], bump),) + tuple(f.qd[1:]))


class TestExamples:
    def test_kubo_all_zero(self, kubo):
        r = check_conditions_at(kubo, [0.4, -1.1])
        assert r.max() == 0.0
        assert r.names() == ["trace_D", "sym_QD", "sym_PD", "trace_S[0]", "sym_QS[0]", "sym_PS[0]"]

    def test_qp_drift_trace_zero(self):
        # H_D = q p gives X_QD = q, X_PD = -p
        f = StochasticField.build(1, 0, ["q"], ["-p"])
        assert check_conditions_at(f, [1.3, 0.2]).trace_D == 0.0

    def test_broken_trace(self):
        f = load_field(FIELDS / "broken.field")
        r = check_conditions_at(f, [0.5, 0.5])
        assert r.trace_D == 1.0
        assert check_field(f).verdict == NOT_HAMILTONIAN

    def test_dissipative_diffusion(self):
        f = StochasticField.build(1, 1, ["p"], ["-q"], [["q"]], [["0"]])
        r = check_conditions_at(f, [0.5, 0.5])
        assert r.trace_S.tolist() == [1.0]

    def test_asymmetric_cross_coupling(self):
        # dX_QD[0]/dp1 = 1 but dX_QD[1]/dp0 = 0
        f = StochasticField.build(2, 0, ["p1", "0"], ["0", "0"])
        r = check_conditions_at(f, [0.0, 0.0, 0.0, 0.0])
        assert (r.trace_D, r.sym_QD, r.sym_PD) == (0.0, 1.0, 0.0)

    def test_diffusion_transpose_convention(self):
        # H_S = q0*q1 in channel 0: X_PS[0] = -q1, X_PS[1] = -q0 is Hamiltonian;
        # swapping the indices of one entry breaks it.
        good = StochasticField.build(2, 1, ["0", "0"], ["0", "0"], None, [["-q1"], ["-q0"]])
        bad = StochasticField.build(2, 1, ["0", "0"], ["0", "0"], None, [["-q1"], ["-2*q0"]])
        assert check_conditions_at(good, [0.3, 0.2, 0.1, 0.0]).max() == 0.0
        assert check_conditions_at(bad, [0.3, 0.2, 0.1, 0.0]).sym_PS.tolist() == [1.0]

    def test_noncommuting_is_hamiltonian(self):
        assert check_field(noncommuting_field()).hamiltonian

    def test_report_text(self, kubo):
        text = check_field(kubo).to_text()
        assert text.startswith("# stochham helmholtz report v1\n")
        assert "verdict = hamiltonian" in text and "pass.trace_S[0] = yes" in text

    def test_csv_rows(self, kubo):
        rows = check_field(kubo, SamplingConfig(points=10)).to_csv().splitlines()
        assert rows[0] == "point,q0,p0,trace_D,sym_QD,sym_PD,trace_S[0],sym_QS[0],sym_PS[0]"
        assert len(rows) == 11

    def test_extra_points_appended(self):
        s = SamplingConfig(points=4, extra_points=((9.0, 8.0),))
        pts = sample_points(1, s)
        assert pts.shape == (2, 5) and pts[:, -1].tolist() == [9.0, 8.0]

    def test_singular_points_skipped(self):
        # 1/q0 blows up only on the plane q0 = 0, which a user point hits exactly
        f = StochasticField.build(1, 0, ["1/q0 + p0"], ["q0^-2 * p0"])
        s = SamplingConfig(points=32, extra_points=((0.0, 1.0),))
        rep = check_field(f, s)
        assert len(rep.skipped) == 1 and rep.points_checked == 32

    def test_mostly_singular_raises(self):
        f = StochasticField.build(1, 0, ["log(q0)"], ["0"])
        with pytest.raises(CheckError):
            check_field(f)

    def test_bad_sampling(self):
        with pytest.raises(ValueError):
            SamplingConfig(radius=-1.0)


class TestRandomSystems:
    def test_soundness(self):
        for f, _, _ in random_systems():
            rep = check_field(f)
            assert rep.verdict == HAMILTONIAN
            assert rep.max_residuals.max() <= 1e-9

    def test_sensitivity(self):
        for f, _, _ in random_systems():
            rep = check_field(perturbed(f))
            assert rep.verdict == NOT_HAMILTONIAN
            assert rep.max_residuals.trace_D >= EPS

    def test_determinism(self, kubo):
        s = SamplingConfig(seed=7)
        assert check_field(kubo, s).to_text() == check_field(kubo, s).to_text()
        assert np.array_equal(sample_points(2, s), sample_points(2, s))


def classical_residuals(f, z):
    """Independent oracle for n = 0: asymmetry of -J DX built from symbolic partials."""
    d = f.d
    names = [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)]
    comps = list(f.qd) + list(f.pd)
    env = ex.EvalEnv(dict(zip(names, z)), f.params)
    DX = np.array([[float(ex.evaluate(ex.differentiate(c, v), env)) for v in names] for c in comps])
    J = np.block([[np.zeros((d, d)), np.eye(d)], [-np.eye(d), np.zeros((d, d))]])
    A = -J @ DX
    A = A - A.T
    # the blocks of the asymmetry are exactly the classical conditions
    return (np.abs(A[:d, d:]).max(), np.abs(A[d:, d:]).max(), np.abs(A[:d, :d]).max())


def test_classical_reduction():
    rng = np.random.default_rng(3)
    for k in range(20):
        d = 1 + k % 3
        qd = [f"{rng.uniform(-1, 1):.4f}*q{(i + 1) % d}*p{i} + sin(p{(i + k) % d})" for i in range(d)]
        pd = [f"{rng.uniform(-1, 1):.4f}*q{i}^2 + p{(i + 1) % d}*q{i}" for i in range(d)]
        f = StochasticField.build(d, 0, qd, pd)
        for z in rng.uniform(-2, 2, (5, 2 * d)):
            r = check_conditions_at(f, z)
            oracle = classical_residuals(f, z)
            assert abs(r.trace_D - oracle[0]) <= 1e-14
            assert abs(r.sym_QD - oracle[1]) <= 1e-14
            assert abs(r.sym_PD - oracle[2]) <= 1e-14
            assert r.trace_S.size == 0


def test_batched_matches_pointwise(kubo):
    f = perturbed(kubo, 0.3)
    z = np.random.default_rng(0).uniform(-2, 2, (2, 16))
    batch = residuals_from_jacobians(jacobians(f, z)).as_rows()
    for m in range(16):
        np.testing.assert_array_equal(batch[:, m], check_conditions_at(f, z[:, m]).as_rows())
