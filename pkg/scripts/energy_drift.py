"""H_D drift of Heun and implicit midpoint on the Kubo oscillator as h shrinks.

Noise is shared across step sizes: each coarser path sums pairs of finer increments.
"""

import argparse

import numpy as np

from stochham.brownian import sample_brownian
from stochham.reconstruct import reconstruct
from stochham.sde import IntegratorConfig, integrate_batch
from stochham.systems import kubo_field

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--paths", type=int, default=16)
ap.add_argument("--levels", type=int, default=5, help="number of step sizes, halving each time")
ap.add_argument("--N", type=int, default=64, help="steps on the coarsest grid")
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

f = kubo_field()
H = reconstruct(f)
finest = [sample_brownian(1, 0.0, 1.0, args.N * 2 ** (args.levels - 1), args.seed, i)
          for i in range(args.paths)]
grids = [finest]
for _ in range(args.levels - 1):
    grids.append([bp.coarsen() for bp in grids[-1]])
grids.reverse()

print(f"{'h':>10} {'heun mean':>12} {'heun max':>12} {'midpoint max':>14}")
prev = None
for bps in grids:
    out = {}
    for scheme in ("heun", "midpoint"):
        states = integrate_batch(f, [1.0, 0.0], IntegratorConfig(scheme), bps).states
        E = H.hd(np.moveaxis(states, 1, 0))
        out[scheme] = np.abs(E - E[0]).max(axis=0)
    ratio = "" if prev is None else f"   ratio {prev / out['heun'].mean():.2f}"
    print(f"{bps[0].h:10.2e} {out['heun'].mean():12.3e} {out['heun'].max():12.3e} "
          f"{out['midpoint'].max():14.3e}{ratio}")
    prev = out["heun"].mean()
