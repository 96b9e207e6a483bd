"""Command-line front end.

Exit codes: 0 success / affirmative, 1 negative verdict, 2 input error,
3 runtime failure (divergence, field singular along a trajectory or ray).
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .brownian import sample_brownian
from .expr import ExprError
from .field import FieldError, coordinate_names, field_from_hamiltonian
from .fieldfile import format_field, load_field
from .helmholtz import CheckError, SamplingConfig, check_field
from .quadrature import gauss_legendre
from .reconstruct import Hamiltonian, ReconstructionError, gradient_mismatch, sample_points
from .sde import IntegratorConfig, StepError, integrate_paths
from .verify import VerifyConfig, default_z0, verify_field

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class InputError(Exception):
    pass


def _grid(text: str) -> np.ndarray:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise InputError(f"--grid must look like a:b:step, got {text!r}") from None
    if not step > 0 or b < a:
        raise InputError("--grid needs step > 0 and a <= b")
    count = int(np.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(count)


def _z0(text, f):
    if text is None:
        return default_z0(f)
    try:
        z = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise InputError(f"--z0 must be comma-separated reals, got {text!r}") from None
    if z.shape != (2 * f.d,):
        raise InputError(f"--z0 needs {2 * f.d} values (q0..,p0..)")
    return z


def _steps(T: float, h: float) -> int:
    if not (T > 0 and h > 0):
        raise InputError("--T and --h must be positive")
    N = int(round(T / h))
    if N < 1 or abs(N * h - T) > 1e-9 * max(1.0, T):
        raise InputError(f"--T {T} is not a whole number of steps of --h {h}")
    return N


def _sampling(args) -> SamplingConfig:
    if args.points < 1:
        raise InputError("--points must be >= 1")
    try:
        return SamplingConfig(args.radius, args.points, args.seed)
    except ValueError as err:
        raise InputError(str(err)) from None


def _emit(text: str, out: str | None):
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")


def cmd_check(args) -> int:
    f = load_field(args.field)
    report = check_field(f, _sampling(args), args.tol)
    _emit(report.to_text(), args.out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK if report.hamiltonian else EXIT_NEGATIVE


def cmd_reconstruct(args) -> int:
    f = load_field(args.field)
    sampling = _sampling(args)
    report = check_field(f, sampling, args.tol)
    if not report.hamiltonian and not args.force:
        sys.stderr.write(
            f"refusing to reconstruct: {args.field} is not Hamiltonian "
            f"(max residual {report.max_residuals.max():.3g} > tol {args.tol:g}); "
            "use --force to run anyway\n")
        return EXIT_NEGATIVE
    rule = gauss_legendre(args.nodes)
    h = Hamiltonian(f, rule)
    axis = _grid(args.grid)
    pts = np.array(list(itertools.product(axis, repeat=2 * f.d))).T
    HD = h.hd(pts)
    HS = h.hs(pts)
    rt_pts = sample_points(f.d, sampling)
    roundtrip = float(gradient_mismatch(h, rt_pts).max())
    lines = [
        "# stochham reconstruct v1",
        f"# field={args.field} verdict={report.verdict} forced={'yes' if args.force else 'no'}",
        f"# quadrature=gauss-legendre nodes={rule.m} grid={args.grid}",
        f"# roundtrip_residual={roundtrip!r} sampling.radius={sampling.radius!r} "
        f"sampling.points={sampling.points} sampling.seed={sampling.seed}",
        ",".join(coordinate_names(f.d) + ["H_D"] + [f"H_S{j}" for j in range(f.n)]),
    ]
    for m in range(pts.shape[1]):
        row = list(pts[:, m]) + [HD[m]] + list(HS[:, m])
        lines.append(",".join(repr(float(v)) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    sys.stderr.write(f"roundtrip residual: {roundtrip:.6g}\n")
    return EXIT_OK


def _path_file(out: str, index: int, total: int) -> Path:
    p = Path(out)
    if total == 1:
        return p
    return p.with_name(f"{p.stem}_path{index}{p.suffix}")


def cmd_simulate(args) -> int:
    f = load_field(args.field)
    N = _steps(args.T, args.h)
    z0 = _z0(args.z0, f)
    if args.paths < 1 or args.stride < 1:
        raise InputError("--paths and --stride must be >= 1")
    cfg = IntegratorConfig(args.scheme)
    bps = [sample_brownian(f.n, 0.0, args.T, N, args.seed, i) for i in range(args.paths)]
    paths = integrate_paths(f, z0, cfg, bps)
    for i, path in enumerate(paths):
        header = [
            "stochham trajectory v1",
            f"field={args.field} scheme={args.scheme} h={args.h!r} T={args.T!r} steps={N}",
            f"seed={args.seed} path_index={i} stride={args.stride} "
            f"z0={','.join(repr(float(v)) for v in z0)}",
        ]
        target = _path_file(args.out, i, args.paths)
        target.write_text(path.to_csv(args.stride, header), encoding="utf-8")
        print(f"wrote {target}")
    return EXIT_OK


def cmd_verify(args) -> int:
    f = load_field(args.field)
    _steps(args.T, args.h)
    if args.paths < 1:
        raise InputError("--paths must be >= 1")
    cfg = VerifyConfig(
        integrator=IntegratorConfig(args.scheme), T=args.T, h=args.h, paths=args.paths,
        seed=args.seed, z0=tuple(_z0(args.z0, f)), sampling=_sampling(args),
        check_tol=args.tol, nodes=args.nodes)
    report = verify_field(f, cfg)
    text = report.to_text()
    if report.energy_status == "SKIPPED" and report.bracket_max:
        text += f"# energy check skipped: max |{{H_D, H_S}}| = {report.bracket_max:.6g}\n"
    _emit(text, args.out)
    if args.series:
        Path(args.series).write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def cmd_generate(args) -> int:
    params = {}
    for item in args.param:
        name, _, value = item.partition("=")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"--param must look like name=value, got {item!r}") from None
    f = field_from_hamiltonian(args.hd, args.hs, args.dim, params, args.label)
    _emit(format_field(f), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stochham",
        description="Decide whether a Stratonovich SDE is stochastic Hamiltonian, "
                    "reconstruct {H_D, H_S}, simulate and verify.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def sampling(p):
        p.add_argument("--tol", type=float, default=1e-9, help="residual tolerance (default 1e-9)")
        p.add_argument("--radius", type=float, default=2.0, help="sampling box half-width R (default 2)")
        p.add_argument("--points", type=int, default=128, help="number of sampled points (default 128)")
        p.add_argument("--seed", type=int, default=0, help="seed for sampling and noise (default 0)")

    def sim(p, paths):
        p.add_argument("--scheme", choices=("heun", "midpoint"), default="midpoint",
                       help="integrator (default midpoint)")
        p.add_argument("--h", type=float, default=1e-3, help="step size (default 1e-3)")
        p.add_argument("--T", type=float, default=1.0, help="final time (default 1)")
        p.add_argument("--paths", type=int, default=paths, help=f"number of Brownian paths (default {paths})")
        p.add_argument("--z0", help="initial state q0,..,p0,.. (default q=1, p=0)")

    p = sub.add_parser("check", help="evaluate the integrability conditions")
    p.add_argument("field")
    sampling(p)
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--csv", help="write per-point residuals as CSV")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reconstruct", help="tabulate H_D, H_S on a grid")
    p.add_argument("field")
    sampling(p)
    p.add_argument("--nodes", type=int, default=20, help="Gauss-Legendre nodes (default 20)")
    p.add_argument("--grid", default="-2:2:0.5", help="per-coordinate grid a:b:step (default -2:2:0.5)")
    p.add_argument("--force", action="store_true", help="reconstruct even if the check fails")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("simulate", help="integrate sample paths, one CSV per path")
    p.add_argument("field")
    sim(p, 1)
    p.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    p.add_argument("--stride", type=int, default=1, help="keep every k-th step (default 1)")
    p.add_argument("--out", default="trajectory.csv",
                   help="CSV path; with several paths _path<i> is appended to the stem")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="symplecticity and energy checks along trajectories")
    p.add_argument("field")
    sampling(p)
    sim(p, 100)
    p.add_argument("--nodes", type=int, default=20, help="Gauss-Legendre nodes (default 20)")
    p.add_argument("--out", help="also write the report here")
    p.add_argument("--series", help="write per-time maxima as CSV")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("generate", help="write the field file of a Hamiltonian pair")
    p.add_argument("--hd", required=True, help="H_D expression")
    p.add_argument("--hs", action="append", default=[], help="H_S channel expression (repeatable)")
    p.add_argument("--dim", type=int, default=1, help="number of phase pairs d (default 1)")
    p.add_argument("--param", action="append", default=[], help="name=value (repeatable)")
    p.add_argument("--label", default="", help="label written to the file")
    p.add_argument("--out", help="also write the field file here")
    p.set_defaults(func=cmd_generate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FieldError, ExprError, CheckError, ValueError, OSError) as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_INPUT
    except (StepError, ReconstructionError) as err:
        sys.stderr.write(f"runtime error: {err}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
