"""Reconstruction error against the number of Gauss-Legendre nodes for non-polynomial fields."""

import numpy as np

from stochham import expr as ex
from stochham.field import field_from_hamiltonian
from stochham.reconstruct import reconstruct_hd

CASES = {
    "p cos(q)": "p*cos(q)",
    "exp(q p / 2)": "exp(q*p/2)",
    "tanh(q) + p^4": "tanh(q) + p^4",
    "1 / (2 + sin(q + p))": "1/(2 + sin(q + p))",
}

z = np.random.default_rng(0).uniform(-2, 2, (2, 256))
print(f"{'m':>3}" + "".join(f"{k:>22}" for k in CASES))
for m in (1, 2, 3, 4, 6, 8, 12, 16, 20, 32):
    errs = []
    for src in CASES.values():
        f = field_from_hamiltonian(src, [], 1)
        e = ex.rename(ex.parse(src), {"q": "q0", "p": "p0"})
        H = lambda x: ex.evaluate(e, ex.EvalEnv({"q0": x[0], "p0": x[1]}))
        exact = H(z) - H(np.zeros(2))
        errs.append(np.abs(reconstruct_hd(f, z, m) - exact).max())
    print(f"{m:3d}" + "".join(f"{x:22.3e}" for x in errs))
