"""Command-line entry point: ``gpmisspec <subcommand> ...``.

Exit codes: 0 on success, 2 on a usage error, 1 on any other failure, with
``ERROR <code>: <detail>`` on standard error. Subcommands given ``--json``
print exactly one JSON object on standard output.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .designs import gen_grid, gen_halton, gen_jittered_grid, geometry, grid_side
from .errors import DomainError, GPMisspecError
from .experiments import (
    SweepConfig,
    nested_designs,
    rate_sweep,
    resolve_threads,
    variance_decay_sweep,
)
from .formats import (
    RunManifest,
    build_digest,
    dumps_json,
    fmt,
    read_data,
    read_design,
    read_points,
    write_csv,
    write_json,
    write_points,
)
from .gp_core import ConditionedModel, conditional_moments
from .gram import assemble_gram, cholesky, dump_gram
from .kernels import MaternKernel, parse_kernel_spec
from .mle import MisspecScenario, driscoll_trace, expected_mle_details, mle_decomposition, scale_mle
from .plotting import emit_svg

log = logging.getLogger("gpmisspec")

RATE_COLUMNS = ("n", "expected_mle", "mc_mean", "mc_stderr", "jitter_true", "jitter_model", "fill", "separation")


class UsageError(Exception):
    """Bad arguments discovered after parsing; reported with exit code 2."""


def _kernel_spec(text):
    try:
        return parse_kernel_spec(text)
    except GPMisspecError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _sizes(text):
    try:
        sizes = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}") from None
    if not sizes or any(n < 1 for n in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive")
    return sizes


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="gpmisspec", description="Scale estimation under Matérn covariance misspecification.")
    p.add_argument("--version", action="version", version=f"gpmisspec {__version__} (build {build_digest()})")
    p.add_argument("--threads", type=_positive_int, default=None, help="worker cap (default: GPMISSPEC_THREADS or CPU count)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    design = sub.add_parser("design", help="generate designs or report their geometry")
    dsub = design.add_subparsers(dest="action", metavar="ACTION")
    dsub.required = True
    gen = dsub.add_parser("gen", help="write a design to a point file")
    gen.add_argument("--kind", choices=("grid", "halton", "jittered-grid"), required=True)
    gen.add_argument("--d", type=_positive_int, required=True)
    gen.add_argument("--n", type=_positive_int, required=True)
    gen.add_argument("--seed", type=int, default=0, help="seed for jittered grids")
    gen.add_argument("--out", required=True)
    stats = dsub.add_parser("stats", help="fill distance and separation radius of a point file")
    stats.add_argument("--in", dest="input", required=True)
    stats.add_argument("--resolution", type=int, default=None)
    stats.add_argument("--out-csv", default=None)

    gp = sub.add_parser("gp", help="conditional moments")
    gsub = gp.add_subparsers(dest="action", metavar="ACTION")
    gsub.required = True
    pred = gsub.add_parser("predict", help="conditional mean and variance at query points")
    pred.add_argument("--model", type=_kernel_spec, required=True)
    pred.add_argument("--design", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--query", required=True)
    pred.add_argument("--out-csv", default=None)
    pred.add_argument("--dump-gram", default=None, help="write the model Gram matrix to this path")

    mle = sub.add_parser("mle", help="the scale maximum-likelihood estimate")
    msub = mle.add_subparsers(dest="action", metavar="ACTION")
    msub.required = True
    exp = msub.add_parser("expected", help="expected scale estimate tr(K R^-1)/N")
    dec = msub.add_parser("decompose", help="sequential decomposition of the expected estimate")
    for q in (exp, dec):
        q.add_argument("--true", type=_kernel_spec, required=True)
        q.add_argument("--model", type=_kernel_spec, required=True)
        q.add_argument("--design", required=True)
        q.add_argument("--method", choices=("dense", "markov", "auto"), default="dense")
    exp.add_argument("--dump-gram", default=None, help="write the model Gram matrix to this path")
    exp.add_argument("--json", action="store_true")
    dec.add_argument("--out-csv", default=None)
    est = msub.add_parser("estimate", help="scale estimate from a data vector")
    est.add_argument("--model", type=_kernel_spec, required=True)
    est.add_argument("--design", required=True)
    est.add_argument("--data", required=True)
    est.add_argument("--dump-gram", default=None, help="write the model Gram matrix to this path")
    est.add_argument("--json", action="store_true")

    dr = sub.add_parser("driscoll", help="trace growth over nested designs")
    dr.add_argument("--true", type=_kernel_spec, required=True)
    dr.add_argument("--model", type=_kernel_spec, required=True)
    dr.add_argument("--sizes", type=_sizes, required=True)
    dr.add_argument("--d", type=_positive_int, default=1)
    dr.add_argument("--design", choices=("grid", "halton"), default="halton")
    dr.add_argument("--method", choices=("dense", "markov", "auto"), default="auto")
    dr.add_argument("--out-csv", default=None)
    dr.add_argument("--out-json", default=None)

    rs = sub.add_parser("rate-sweep", help="expected estimate over sizes with a log-log slope fit")
    rs.add_argument("--true", type=_kernel_spec, required=True)
    rs.add_argument("--model", type=_kernel_spec, required=True)
    rs.add_argument("--d", type=_positive_int, default=1)
    rs.add_argument("--design", choices=("grid", "halton"), default="grid")
    rs.add_argument("--sizes", type=_sizes, required=True)
    rs.add_argument("--mc-replicates", type=int, default=0)
    rs.add_argument("--seed", type=int, default=0)
    rs.add_argument("--tolerance", type=float, default=0.3)
    rs.add_argument("--method", choices=("dense", "markov", "auto"), default="auto")
    rs.add_argument("--out-csv", required=True)
    rs.add_argument("--out-svg", default=None)
    rs.add_argument("--json", action="store_true")

    vs = sub.add_parser("variance-sweep", help="decay of the maximum conditional variance")
    vs.add_argument("--model", type=_kernel_spec, required=True)
    vs.add_argument("--d", type=_positive_int, default=1)
    vs.add_argument("--design", choices=("grid", "halton"), default="grid")
    vs.add_argument("--sizes", type=_sizes, required=True)
    vs.add_argument("--resolution", type=_positive_int, default=4096)
    vs.add_argument("--tolerance", type=float, default=0.2)
    vs.add_argument("--out-csv", required=True)
    vs.add_argument("--out-svg", default=None)
    vs.add_argument("--json", action="store_true")

    sub.add_parser("selftest", help="run the embedded invariant suite")
    return p


def _config(args):
    return {k: (v.spec() if hasattr(v, "spec") else v) for k, v in sorted(vars(args).items())}


def _scenario(args, d):
    if args.model.sigma != 1.0:
        raise UsageError("--model must have sigma=1: the scale is what gets estimated")
    return MisspecScenario(args.true, args.model, d)


def _design_input(path, manifest):
    manifest.add_input(path)
    return read_design(path)


def _dump(path, kernel, design, manifest):
    if path:
        dump_gram(path, assemble_gram(kernel, design))
        manifest.add_output(path)


def cmd_design(args, manifest, out):
    if args.action == "gen":
        if args.kind == "halton":
            des = gen_halton(args.d, args.n)
        else:
            m = grid_side(args.n, args.d)
            if m is None:
                raise DomainError(f"a {args.d}-d grid needs n to be a perfect {args.d}-th power, got {args.n}")
            des = gen_grid(args.d, m) if args.kind == "grid" else gen_jittered_grid(args.d, m, args.seed)
        write_points(args.out, des)
        manifest.add_output(args.out)
        return
    des = _design_input(args.input, manifest)
    geo = geometry(des, args.resolution)
    row = [geo.n, geo.fill_distance, geo.separation_radius, geo.ratio]
    header = ["n", "fill", "separation", "ratio"]
    if args.out_csv:
        write_csv(args.out_csv, header, [row])
        manifest.add_output(args.out_csv)
    else:
        write_csv(out, header, [row])


def cmd_gp(args, manifest, out):
    des = _design_input(args.design, manifest)
    manifest.add_input(args.data)
    manifest.add_input(args.query)
    kernel = MaternKernel(args.model, des.d)
    query = read_points(args.query)
    if query.shape[1] != des.d:
        raise DomainError(f"query points have d={query.shape[1]}, design has d={des.d}")
    _dump(args.dump_gram, kernel, des, manifest)
    model = ConditionedModel.condition(kernel, des, read_data(args.data))
    mean, var = conditional_moments(model, query if des.d > 1 else query[:, 0])
    header = ["x"] if des.d == 1 else [f"x{i + 1}" for i in range(des.d)]
    rows = [list(q) + [m, v] for q, m, v in zip(query, mean, var)]
    if args.out_csv:
        write_csv(args.out_csv, header + ["mean", "variance"], rows)
        manifest.add_output(args.out_csv)
    else:
        write_csv(out, header + ["mean", "variance"], rows)


def cmd_mle(args, manifest, out):
    des = _design_input(args.design, manifest)
    if args.action == "estimate":
        if args.model.sigma != 1.0:
            raise UsageError("--model must have sigma=1: the scale is what gets estimated")
        manifest.add_input(args.data)
        kernel = MaternKernel(args.model, des.d)
        _dump(args.dump_gram, kernel, des, manifest)
        factor = cholesky(assemble_gram(kernel, des))
        value = scale_mle(kernel, des, read_data(args.data), factor)
        if args.json:
            out.write(dumps_json({"scale_mle": value, "n": des.n, "jitter_model": factor.jitter_applied}) + "\n")
        else:
            out.write(fmt(value) + "\n")
        return
    s = _scenario(args, des.d)
    if args.action == "expected":
        _dump(args.dump_gram, s.model_kernel(), des, manifest)
        res = expected_mle_details(s, des, args.method)
        if args.json:
            out.write(dumps_json({"expected_mle": res.value, "n": des.n, "method": res.method,
                                  "jitter_model": res.jitter_model}) + "\n")
        else:
            out.write(fmt(res.value) + "\n")
        return
    rep = mle_decomposition(s, des, args.method)
    ratios = rep.ratios
    running = rep.running_mean
    rows = [[i + 1, rep.numerators[i], rep.denominators[i], ratios[i], running[i]] for i in range(len(ratios))]
    header = ["n", "numerator", "denominator", "ratio_sq", "running_mean"]
    if args.out_csv:
        write_csv(args.out_csv, header, rows)
        manifest.add_output(args.out_csv)
    else:
        write_csv(out, header, rows)


def cmd_driscoll(args, manifest, out):
    s = _scenario(args, args.d)
    sizes = sorted(set(args.sizes))
    rep = driscoll_trace(s, nested_designs(args.design, args.d, sizes), args.method)
    rows = [[n, t, t / n] for n, t in zip(rep.sizes, rep.traces)]
    if args.out_csv:
        write_csv(args.out_csv, ["n", "trace", "trace_over_n"], rows)
        manifest.add_output(args.out_csv)
    verdict = rep.verdict()
    if args.out_json:
        write_json(args.out_json, verdict)
        manifest.add_output(args.out_json)
    out.write(dumps_json(verdict) + "\n")


def cmd_rate_sweep(args, manifest, out):
    s = _scenario(args, args.d)
    cfg = SweepConfig(s, tuple(args.sizes), args.design, args.seed, args.mc_replicates,
                      args.tolerance, args.method, threads=args.threads)
    rep = rate_sweep(cfg)
    rows = [[getattr(r, c) for c in RATE_COLUMNS] for r in rep.rows]
    write_csv(args.out_csv, RATE_COLUMNS, rows)
    manifest.add_output(args.out_csv)
    if args.out_svg:
        emit_svg(rep, args.out_svg)
        manifest.add_output(args.out_svg)
    for r in rep.rows:
        if r.error:
            log.warning("N=%d: %s", r.n, r.error)
    if rep.banner:
        log.warning(rep.banner)
    if args.json:
        out.write(dumps_json(rep.to_json()) + "\n")
    else:
        theory = "n/a" if rep.theoretical_slope is None else f"{rep.theoretical_slope:.3f}"
        out.write(f"slope {rep.slope:.3f}  r2 {rep.r_squared:.5f}  theory {theory}  pass {rep.passed}\n")
        if rep.banner:
            out.write(rep.banner + "\n")


def cmd_variance_sweep(args, manifest, out):
    if args.model.sigma != 1.0:
        log.info("model sigma=%g scales the variance but not its slope", args.model.sigma)
    kernel = MaternKernel(args.model, args.d)
    rep = variance_decay_sweep(kernel, args.sizes, args.design, args.resolution, args.tolerance, args.threads)
    write_csv(args.out_csv, ["n", "max_variance"], list(zip(rep.sizes, rep.values)))
    manifest.add_output(args.out_csv)
    if args.out_svg:
        emit_svg(rep, args.out_svg)
        manifest.add_output(args.out_svg)
    if args.json:
        out.write(dumps_json(rep.to_json()) + "\n")
    else:
        out.write(f"slope {rep.slope:.3f}  r2 {rep.r_squared:.5f}  theory {rep.theoretical_slope:.3f}  "
                  f"pass {rep.passed}  test grid {rep.test_grid_points} points\n")


def cmd_selftest(args, manifest, out):
    from .selftest import run_selftest

    results = run_selftest()
    width = max(len(r[0]) for r in results)
    for name, err, tol, ok in results:
        out.write(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  err {err:.3e}  tol {tol:.0e}\n")
    if not all(r[3] for r in results):
        return 1
    return 0


COMMANDS = {
    "design": cmd_design,
    "gp": cmd_gp,
    "mle": cmd_mle,
    "driscoll": cmd_driscoll,
    "rate-sweep": cmd_rate_sweep,
    "variance-sweep": cmd_variance_sweep,
    "selftest": cmd_selftest,
}


def main(argv=None, stdout=None, stderr=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = logging.StreamHandler(stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    log.propagate = False

    command = " ".join(filter(None, [args.command, getattr(args, "action", None)]))
    manifest = RunManifest(command, _config(args), argv, __version__, getattr(args, "seed", None))
    try:
        if args.threads is not None:
            resolve_threads(args.threads)
        code = COMMANDS[args.command](args, manifest, stdout) or 0
        manifest.finalize()
        return code
    except UsageError as exc:
        parser.print_usage(stderr)
        stderr.write(f"gpmisspec: error: {exc}\n")
        return 2
    except GPMisspecError as exc:
        stderr.write(f"ERROR {exc.code}: {exc}\n")
        return 1
    except OSError as exc:
        where = exc.filename if exc.filename is not None else "?"
        stderr.write(f"ERROR IO: {where}: {exc.strerror or exc}\n")
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
