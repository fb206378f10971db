"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 data format, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import bench, modelfile
from . import decomposition as dmd
from .errors import DegenerateDataError, FormatError, InputError, NumericalError
from .kernels import Family, KernelSpec, default_shape, parse_family
from .quadrature import TimeGrid
from .signals import (
    Dataset,
    Trajectory,
    add_noise,
    dumps_csv,
    load_csv,
    load_dataset,
    save_csv,
    save_dataset,
    segment,
)

EXIT_USAGE, EXIT_FORMAT, EXIT_DEGENERATE = 2, 3, 4


class UsageError(Exception):
    pass


def _vector(text):
    try:
        return np.array([float(c) for c in text.split(",")], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {v}")
    return v


def _fmt_complex(z):
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real:.10g} {sign} {abs(z.imag):.10g}i"


# ---------------------------------------------------------------- commands


def cmd_simulate(args):
    if args.system == "chain":
        n = args.n or (len(args.x0) if args.x0 is not None else None)
        if n is None:
            raise UsageError("chain needs --n or --x0")
        system = bench.SystemSpec.chain(n, args.k if args.k is not None else 1.0)
        x0 = args.x0 if args.x0 is not None else bench.bent_profile(system)
    else:
        if args.x0 is None:
            raise UsageError("linosc needs --x0")
        n = args.n or len(args.x0)
        system = bench.SystemSpec.oscillator(args.k if args.k is not None else 2.0, n)
        x0 = args.x0
    v0 = args.v0 if args.v0 is not None else np.zeros(n)
    if len(x0) != n or len(v0) != n:
        raise UsageError(f"--x0 and --v0 must have {n} entries")
    grid = TimeGrid(args.dt, args.steps + 1)
    traj = bench.simulate(system, x0, v0, grid, substeps=args.substeps, label=args.system)
    _write_csv(traj, args.out)
    return 0


def _write_csv(traj, out):
    if out is None or out == "-":
        sys.stdout.write(dumps_csv(traj))
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        save_csv(traj, out)


def cmd_fit(args):
    data = load_dataset(args.data).with_estimated_velocities()
    family = parse_family(args.kernel)
    if args.shape is None:
        shape = default_shape(family, data.samples())
        source = "linear kernel, unused" if family is Family.LINEAR else "data-driven default"
    else:
        shape, source = args.shape, "user"
    kernel = KernelSpec(family, shape, data.dim)
    rank_tol = None if args.rank_tol == 0 else args.rank_tol
    model = dmd.fit(data, kernel, args.quad, args.ridge, rank_tol)
    modelfile.save_model(model, args.out)
    diag = model.diagnostics
    print(f"trajectories: {len(data)}  samples: {data.grid.count}  dim: {data.dim}  T: {data.grid.T:g}")
    print(f"kernel: {family.value}  shape: {shape:.10g} ({source})")
    print(f"ridge: {model.ridge:.6g}  gram condition: {diag['gram_condition']:.3g}  "
          f"retained rank: {diag['gram_rank']}")
    print(f"eigenvalues ({model.rank} retained, {len(diag['dropped_eigenvalues'])} dropped):")
    for z in model.eigenvalues:
        print(f"  {_fmt_complex(z)}")
    print(f"projection error: {diag['projection_error']:.6g}")
    print(f"model written to {args.out}")
    return 0


def cmd_reconstruct(args):
    model = modelfile.load_model(args.model)
    n = model.dim
    if len(args.x0) != n or len(args.v0) != n:
        raise UsageError(f"model has state dimension {n}; --x0 and --v0 must match")
    count = int(round(args.t_end / args.dt)) + 1
    if count < 2:
        raise UsageError("--t-end must be at least one --dt")
    grid = TimeGrid(args.dt, count)
    rec = dmd.reconstruct(model, dmd.ReconstructionRequest(args.x0, args.v0, grid.times))
    traj = Trajectory(grid, rec.states, args.v0, "reconstruction")
    _write_csv(traj, args.out)
    flag = "WARNING ill-conditioned" if rec.ill_conditioned else "ok"
    print(f"imaginary residual: {rec.imag_residual:.3e} ({flag})", file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_segment(args):
    traj = load_csv(args.input)
    segs = segment(traj, args.window, args.stride)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for tr in segs:
        save_csv(tr, out / f"{tr.label}.csv")
    print(f"{len(segs)} segments written to {out}")
    return 0


def cmd_noise(args):
    src = Path(args.input)
    if src.is_dir():
        data = load_dataset(src)
        noisy = add_noise(data, args.sigma, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for tr in noisy:
            save_csv(tr, out / f"{tr.label}.csv")
        return 0
    header = src.read_text(encoding="utf-8").split("\n", 1)[0]
    if header.strip().lower().startswith("traj_id"):
        save_dataset(add_noise(load_dataset(src), args.sigma, args.seed), args.out)
    else:
        tr = load_csv(src)
        noisy = add_noise(Dataset((tr,)), args.sigma, args.seed)[0]
        save_csv(noisy, args.out)
    return 0


def cmd_evaluate(args):
    truth = load_csv(args.truth)
    est = load_csv(args.estimate)
    if truth.samples.shape != est.samples.shape:
        raise FormatError(
            f"shape mismatch: {args.truth} has {truth.samples.shape}, {args.estimate} has {est.samples.shape}"
        )
    err = bench.rms_relative_error(truth, est.samples)
    if args.out:
        scale = np.max(np.abs(truth.samples))
        signal = Trajectory(truth.grid, (truth.samples - est.samples) / scale, None, "error")
        save_csv(signal, args.out)
    print(repr(err))
    return 0


def _write_report(report, out_dir, stem):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.csv").write_text(report.rows_csv(), encoding="utf-8", newline="\n")
    (out / f"{stem}_summary.json").write_text(report.summary_json(), encoding="utf-8", newline="\n")


def cmd_experiment1(args):
    cfg = bench.Experiment1Config(trials=args.trials, seed=args.seed, dim=args.dim,
                                  kernel=args.kernel, shape=args.shape, sigma=args.sigma,
                                  dt=args.dt)
    report = bench.experiment1(cfg)
    _write_report(report, args.out_dir, "experiment1")
    s = report.summary
    print(f"median {s['median']:.4g}  p95 {s['p95']:.4g}  max {s['max']:.4g}")
    return 0


def cmd_experiment2(args):
    cfg = bench.Experiment2Config(masses=args.masses, snapshots=args.snapshots,
                                  window=args.window, stride=args.stride)
    report = bench.experiment2(cfg)
    _write_report(report, args.out_dir, "experiment2")
    s = report.summary
    print(f"segments {s['segments']}  rms relative error {s['rms_rel_error']:.4g}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser():
    p = argparse.ArgumentParser(prog="soldmd", description="Second-order Liouville DMD with occupation kernels")
    p.add_argument("--verbose", action="store_true", help="log numerical diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate a ground-truth system to CSV")
    s.add_argument("--system", choices=["linosc", "chain"], required=True)
    s.add_argument("--k", type=_positive_float, help="stiffness (linosc 2.0, chain 1.0)")
    s.add_argument("--n", type=_positive_int, help="state dimension")
    s.add_argument("--x0", type=_vector)
    s.add_argument("--v0", type=_vector)
    s.add_argument("--dt", type=_positive_float, required=True)
    s.add_argument("--steps", type=_positive_int, required=True, help="number of sampling intervals")
    s.add_argument("--substeps", type=_positive_int, default=10, help="RK4 steps per interval (>= 10)")
    s.add_argument("--out", help="output CSV (stdout if omitted)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", help="fit a model from trajectory CSVs")
    s.add_argument("--data", required=True, help="directory of CSVs or a traj_id CSV")
    s.add_argument("--kernel", default="gaussian", choices=["gaussian", "linear", "exponential"])
    s.add_argument("--shape", type=_positive_float, help="kernel width / decay; data-driven if omitted")
    s.add_argument("--ridge", type=_nonneg_float, help="Tikhonov shift (default 1e-8 trace(G)/M)")
    s.add_argument("--rank-tol", type=_nonneg_float, default=dmd.RANK_TOL,
                   help="relative Gram cutoff; 0 keeps every direction")
    s.add_argument("--quad", default="trapezoid", choices=["trapezoid", "simpson"])
    s.add_argument("--out", required=True, help="model JSON path")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("reconstruct", help="predict a trajectory from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--x0", type=_vector, required=True)
    s.add_argument("--v0", type=_vector, required=True)
    s.add_argument("--t-end", type=_positive_float, required=True)
    s.add_argument("--dt", type=_positive_float, required=True)
    s.add_argument("--out", help="output CSV (stdout if omitted)")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("segment", help="cut one trajectory into windows")
    s.add_argument("--input", required=True)
    s.add_argument("--window", type=_positive_int, required=True)
    s.add_argument("--stride", type=_positive_int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("noise", help="add Gaussian measurement noise")
    s.add_argument("--input", required=True, help="CSV file or directory")
    s.add_argument("--sigma", type=_nonneg_float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_noise)

    s = sub.add_parser("evaluate", help="RMS relative error between two trajectory CSVs")
    s.add_argument("truth")
    s.add_argument("estimate")
    s.add_argument("--out", help="write the relative error signal as CSV")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("experiment1", help="noisy linear oscillator benchmark")
    s.add_argument("--trials", type=_positive_int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dim", type=int, choices=[1, 2], default=1)
    s.add_argument("--kernel", default="gaussian", choices=["gaussian", "linear", "exponential"])
    s.add_argument("--shape", type=_positive_float, default=24.0)
    s.add_argument("--sigma", type=_nonneg_float, default=0.01)
    s.add_argument("--dt", type=_positive_float, default=0.5)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_experiment1)

    s = sub.add_parser("experiment2", help="windowed mass-spring chain benchmark")
    s.add_argument("--masses", type=_positive_int, default=50)
    s.add_argument("--snapshots", type=_positive_int, default=301)
    s.add_argument("--window", type=_positive_int, default=31)
    s.add_argument("--stride", type=_positive_int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_experiment2)
    return p


_NUMBER = re.compile(r"^-[0-9.]")


def _glue_negative_values(argv):
    """Rewrite ``--x0 -1,0`` as ``--x0=-1,0`` so argparse does not read a flag."""
    out, k = [], 0
    while k < len(argv):
        a = argv[k]
        if a.startswith("--") and "=" not in a and k + 1 < len(argv) and _NUMBER.match(argv[k + 1]):
            out.append(f"{a}={argv[k + 1]}")
            k += 2
        else:
            out.append(a)
            k += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_glue_negative_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InputError) as exc:
        print(f"soldmd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"soldmd {args.command}: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (DegenerateDataError, NumericalError) as exc:
        print(f"soldmd {args.command}: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
