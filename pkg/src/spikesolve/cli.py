"""Command-line interface.

Exit codes: 0 success, 1 bad input or usage, 2 solver failure, 3 extraction
failure, 4 duplicate points. Messages go to stderr; data goes to stdout
unless ``--out`` is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import __version__, conic
from .fileio import dumps, read_json, write_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_EXTRACT = 3
EXIT_DUPLICATE = 4

log = logging.getLogger("spikesolve")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def parse_range(text: str) -> tuple[int, ...]:
    """``"1..6"`` or ``"1,3,5"`` or ``"4"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer range: {text!r}") from None


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def parse_box(text: str | None, n: int):
    """``"lo:hi"`` for every axis or ``"lo:hi,lo:hi,..."``."""
    if text is None:
        return None
    try:
        parts = [tuple(float(v) for v in p.split(":")) for p in text.split(",")]
    except ValueError:
        raise CliError(f"malformed box {text!r}") from None
    if any(len(p) != 2 for p in parts):
        raise CliError(f"malformed box {text!r}")
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise CliError(f"box has {len(parts)} axes, expected {n}")
    return tuple(parts)


def _load(path: str):
    try:
        return read_json(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from None


def _emit(doc, out: str | None) -> None:
    if out:
        write_json(out, doc)
    else:
        sys.stdout.write(dumps(doc) + "\n")


def _solver(args, base: conic.SolverOptions) -> conic.SolverOptions:
    kw = {}
    if args.tol is not None:
        kw["eps"] = args.tol
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    return dataclasses.replace(base, **kw)


def _extract_opts(args):
    from .recovery import ExtractOptions

    return ExtractOptions(grid=args.grid) if args.grid else ExtractOptions()


def _points(doc) -> np.ndarray:
    """Points from a measure file, ``{"points": [...]}`` or a bare list."""
    if isinstance(doc, dict) and "atoms" in doc:
        from .measure import DiscreteMeasure

        return DiscreteMeasure.from_json(doc).points
    raw = doc.get("points") if isinstance(doc, dict) else doc
    try:
        pts = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise CliError("points must be a list of coordinate lists") from None
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise CliError("points must be a non-empty list of coordinate lists")
    if isinstance(doc, dict) and "n" in doc and int(doc["n"]) != pts.shape[1]:
        raise CliError("point length does not match n")
    return pts


def _point_set(pts):
    from .pointalg import PointSet

    try:
        return PointSet(pts)
    except ValueError as exc:
        code = EXIT_DUPLICATE if "duplicate" in str(exc) else EXIT_USAGE
        raise CliError(str(exc), code) from None


def _report_code(rep) -> int:
    from .recovery import STAGE_ASSEMBLE, STAGE_SOLVE

    if rep.success:
        return EXIT_OK
    if rep.stage == STAGE_SOLVE:
        return EXIT_SOLVER
    if rep.stage == STAGE_ASSEMBLE:
        return EXIT_USAGE
    return EXIT_EXTRACT


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_moments(args) -> int:
    from .measure import DiscreteMeasure, MomentData
    from .polybasis import PolyBasis, box_moments

    if (args.measure is None) == (args.density is None):
        raise CliError("give exactly one of --measure or --density")
    if args.measure is not None:
        try:
            mu = DiscreteMeasure.from_json(_load(args.measure))
        except ValueError as exc:
            raise CliError(str(exc)) from None
        n = mu.n
        box = parse_box(args.box, n)
        basis = PolyBasis(n, args.degree, args.basis, box)
        y = mu.moments(basis)
    else:
        n = args.n
        box = parse_box(args.box, n)
        basis = PolyBasis(n, args.degree, args.basis, box)
        try:
            y = box_moments(n, args.degree, basis.box, args.density, args.basis)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    delta = 0.0
    if args.noise:
        rng = np.random.default_rng(args.seed)
        eps = args.noise * rng.standard_normal(basis.size)
        y = y + eps
        delta = float(np.linalg.norm(eps))
    data = MomentData(basis, y, delta, "noisy" if delta > 0 else "exact")
    _emit(data.to_json(), args.out)
    return EXIT_OK


def cmd_recover(args) -> int:
    from .measure import DiscreteMeasure, MomentData

    try:
        data = MomentData.from_json(_load(args.moments))
        truth = DiscreteMeasure.from_json(_load(args.truth)) if args.truth else None
    except ValueError as exc:
        raise CliError(str(exc)) from None
    mode = args.mode or ("noisy" if data.delta > 0 else "exact")
    if mode == "exact":
        from .recovery import RECOVERY_SOLVER, recover_exact

        if data.delta > 0:
            raise CliError("exact mode needs delta = 0; use --mode noisy")
        rep = recover_exact(data, args.degree, _extract_opts(args), _solver(args, RECOVERY_SOLVER))
        if truth is not None:
            from .certify import diagnose, sos_witness

            rep.diagnostics = diagnose(rep.measure, truth, 0.0, sos_witness(truth.points, data.box, per_axis=args.grid))
    else:
        from .blasso import BLASSO_SOLVER, recover_noisy

        if not data.delta > 0:
            raise CliError("noisy mode needs delta > 0")
        rep = recover_noisy(
            data, d=args.degree, s=args.level, truth=truth, opts=_extract_opts(args),
            solver=_solver(args, BLASSO_SOLVER), per_axis=args.grid,
        )
    doc = rep.to_json()
    doc["mode"] = mode
    if args.out:
        write_json(args.out, rep.measure.to_json())
        if args.report:
            write_json(args.report, doc)
    else:
        _emit(doc, args.report)
    code = _report_code(rep)
    if code:
        print(f"recovery failed at stage {rep.stage}: {rep.message}", file=sys.stderr)
    return code


def cmd_analyze(args) -> int:
    from .pointalg import analyze

    X = _point_set(_points(_load(args.points)))
    _emit(analyze(X).to_json(), args.out)
    return EXIT_OK


def cmd_certify(args) -> int:
    from .certify import chebyshev_witness, sos_witness
    from .pointalg import analyze

    X = _point_set(_points(_load(args.points)))
    box = parse_box(args.box, X.n)
    if box is None:
        box = tuple((-1.0, 1.0) for _ in range(X.n))
    try:
        if args.witness == "sos":
            w = sos_witness(X.points, box, per_axis=args.grid)
        else:
            w = chebyshev_witness(X.points, box, analyze(X), m=args.m, per_axis=args.grid)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    _emit(w.to_json(), args.out)
    return EXIT_OK if w.grid_verified else EXIT_SOLVER


def cmd_summarize(args) -> int:
    from .blasso import BLASSO_SOLVER
    from .summarize import SummarySpec, summarize

    try:
        spec = SummarySpec(args.density, args.degree, args.k, args.delta, args.n, parse_box(args.box, args.n))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    rep = summarize(spec, opts=_extract_opts(args), solver=_solver(args, BLASSO_SOLVER))
    _emit(rep.to_json(include_h=False), args.out)
    code = _report_code(rep)
    if code:
        print(f"summarization failed at stage {rep.stage}: {rep.message}", file=sys.stderr)
    return code


def cmd_experiment(args) -> int:
    from .harness import ExperimentPlan, desk_plans, run_plans

    seed = args.seed
    if args.kind == "desk":
        plans = desk_plans(seed)
    else:
        kw = dict(kind=args.kind, n=args.n, trials=args.trials, seed=seed)
        if args.k:
            kw["k_range"] = args.k
        if args.d:
            kw["d_range"] = args.d
        if args.noise:
            kw["noise"] = args.noise
        if args.theta is not None:
            kw["theta"] = args.theta
        try:
            plans = [ExperimentPlan(**kw)]
        except ValueError as exc:
            raise CliError(str(exc)) from None
    paths = run_plans(plans, args.out)
    for p in paths:
        print(p, file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .polybasis import KINDS, MONOMIAL

    # the shared flags may be given before or after the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--max-iter", type=int, help="solver iteration cap")
    common.add_argument("--grid", type=int, help="grid points per axis for extraction and checks")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="spikesolve", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.set_defaults(seed=0, tol=None, max_iter=None, grid=None, verbose=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("moments", parents=[common], help="moments of a measure or a density")
    p.add_argument("--measure", help="measure file")
    p.add_argument("--density", choices=("uniform", "cheb1", "cheb2"), help="built-in density")
    p.add_argument("--n", type=int, default=1, help="dimension for --density")
    p.add_argument("--basis", choices=KINDS[:2], default=MONOMIAL)
    p.add_argument("--degree", type=int, required=True, help="total degree of the moments")
    p.add_argument("--box", help="lo:hi for every axis, or lo:hi,lo:hi,...")
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise level; sets delta to the noise norm")
    p.add_argument("--out", help="output file")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("recover", parents=[common], help="recover a measure from a moment file")
    p.add_argument("moments", help="moment file")
    p.add_argument("--mode", choices=("exact", "noisy"), help="default: noisy when delta > 0")
    p.add_argument("--degree", type=int, help="half-degree of the extraction")
    p.add_argument("--level", type=int, help="hierarchy level for noisy mode")
    p.add_argument("--truth", help="ground-truth measure file for diagnostics")
    p.add_argument("--out", help="write the recovered measure here")
    p.add_argument("--report", help="write the report here")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("analyze", parents=[common], help="algebraic invariants of a point set")
    p.add_argument("points", help="points file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("certify", parents=[common], help="quadratic isolation witness for a point set")
    p.add_argument("points", help="points file")
    p.add_argument("--box", help="domain box, default [-1, 1]^n")
    p.add_argument("--witness", choices=("sos", "chebyshev"), default="sos")
    p.add_argument("--m", type=int, default=4, help="helper polynomial order for --witness chebyshev")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("summarize", parents=[common], help="few-atom summary of a density")
    p.add_argument("--density", choices=("uniform", "cheb1", "cheb2"), default="uniform")
    p.add_argument("--degree", type=int, required=True, help="half-degree d")
    p.add_argument("--k", type=int, help="number of atoms kept")
    p.add_argument("--delta", type=float, help="moment tolerance, default 1e-6 ||y||")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--box")
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("experiment", parents=[common], help="run a reproducible sweep")
    p.add_argument("kind", choices=("exact-heatmap", "noisy-sweep", "summary-gallery", "desk"))
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--k", type=parse_range, help="atom counts, e.g. 1..6")
    p.add_argument("--d", type=parse_range, help="half-degrees, e.g. 1..8")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--noise", type=parse_floats, help="noise levels, e.g. 1e-2,1e-4")
    p.add_argument("--theta", type=float, help="success threshold relative to max H*")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"spikesolve: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
