"""Symplectic defect along trajectories for a Hamiltonian and a non-Hamiltonian field.

    python3 scripts/liouville.py --paths 16 --T 2
"""

import argparse

import numpy as np

from stochham import expr as ex
from stochham.brownian import sample_brownian
from stochham.sde import IntegratorConfig, integrate_batch
from stochham.systems import kubo_field
from stochham.verify import symplectic_defect


def defect_series(f, scheme, T, h, paths, seed):
    N = int(round(T / h))
    bps = [sample_brownian(f.n, 0.0, T, N, seed, i) for i in range(paths)]
    res = integrate_batch(f, [1.0, 0.0], IntegratorConfig(scheme), bps, tangent=True)
    return res.times, symplectic_defect(np.moveaxis(res.tangents, -1, 1)).max(axis=1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--paths", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bump", type=float, default=0.1, help="coefficient c in X_QD[0] += c q0^2")
    args = ap.parse_args()

    kubo = kubo_field()
    extra = ex.BinOp("*", ex.Num(args.bump), ex.BinOp("^", ex.Var("q0"), ex.Num(2.0)))
    broken = kubo.replace(qd=(ex.BinOp("+", kubo.qd[0], extra),), label="kubo+bump")

    columns = {}
    for name, f in (("kubo", kubo), ("bumped", broken)):
        for scheme in ("midpoint", "heun"):
            t, s = defect_series(f, scheme, args.T, args.h, args.paths, args.seed)
            columns[f"{name}/{scheme}"] = s
    rows = np.linspace(0, len(t) - 1, 11).astype(int)
    print("t".rjust(6) + "".join(k.rjust(18) for k in columns))
    for k in rows:
        print(f"{t[k]:6.2f}" + "".join(f"{v[k]:18.3e}" for v in columns.values()))


if __name__ == "__main__":
    main()
