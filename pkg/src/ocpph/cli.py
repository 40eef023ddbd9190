"""Command-line interface: ``ocpph {fit,eval,curves,sample,gof}``.

Exit codes: 0 success, 2 input error, 3 fit did not converge (best model
still written), 4 numerical failure.
"""

import argparse
import datetime
import logging
import sys

import numpy as np

from . import __version__
from .cutpoint import OcpErlangSpec
from .errors import (
    DomainError,
    InvalidInputError,
    OcpphError,
    SingularMatrixError,
    TailUnderflowError,
    UnreliableEstimateError,
)
from .estimation import (
    FitConfig,
    bootstrap_ci_cutpoint,
    fit_erlang,
    fit_ocp_erlang,
    refit,
    select_phases,
    with_cutpoint_ci,
)
from .gof import MIN_GOF_REPS, ad_pvalue_bootstrap, anderson_darling
from .io import (
    as_distribution,
    curves_table,
    model_kind,
    read_model,
    read_samples,
    write_curves,
    write_model,
    write_samples,
)
from .phasetype import ErlangSpec

logger = logging.getLogger("ocpph")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_NUMERIC = 4

POINT_MEASURES = ("pdf", "cdf", "reliability", "hazard", "cum_hazard")
SCALAR_MEASURES = ("mean", "sd", "second_moment")

SUBSTITUTION_NOTE = (
    "estimators: cut-point CI and A-D p-value by parametric bootstrap; "
    "empirical hazard uses a global-bandwidth Epanechnikov smoother"
)


class InputError(Exception):
    """Bad flags or files; maps to exit code 2."""


def _phases(text):
    if text == "auto":
        return text
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("phases must be >= 1")
    return n


def _phase_range(text):
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    return lo, hi


def build_parser():
    parser = argparse.ArgumentParser(prog="ocpph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit an Erlang or Erlang cut-point model")
    fit.add_argument("--data", required=True)
    fit.add_argument("--kind", choices=("ph-erlang", "ocp-erlang"), default="ocp-erlang")
    fit.add_argument("--phases", type=_phases, default="auto")
    fit.add_argument("--phase-range", type=_phase_range, default=FitConfig.phase_range,
                     help="LO:HI searched when --phases auto (default %(default)s)")
    fit.add_argument("--a-grid", type=int, default=FitConfig.cutpoint_grid_size)
    fit.add_argument("--multistarts", type=int, default=FitConfig.multistarts)
    fit.add_argument("--bootstrap", type=int, default=0,
                     help="replicates for the cut-point CI (0 skips it)")
    fit.add_argument("--level", type=float, default=FitConfig.confidence_level)
    fit.add_argument("--max-iter", type=int, default=FitConfig.max_iter,
                     help="iteration cap for each inner optimization")
    fit.add_argument("--seed", type=int, default=FitConfig.seed)
    fit.add_argument("--out", required=True, help="model file to write")
    fit.add_argument("--report", help="report file (default: stdout)")
    fit.add_argument("--no-timestamp", action="store_true")

    ev = sub.add_parser("eval", help="evaluate measures of a model")
    ev.add_argument("--model", required=True)
    ev.add_argument("--x", type=float, action="append", default=[])
    ev.add_argument("--measures", default="pdf,cdf,reliability,hazard,cum_hazard",
                    help=f"comma list from {', '.join(POINT_MEASURES + SCALAR_MEASURES)}")

    cur = sub.add_parser("curves", help="write a table of model (and empirical) curves")
    cur.add_argument("--model", required=True)
    cur.add_argument("--data")
    cur.add_argument("--xmin", type=float, default=0.0)
    cur.add_argument("--xmax", type=float, help="default: the model's 0.9999 quantile")
    cur.add_argument("--points", type=int, default=512)
    cur.add_argument("--out", required=True)

    smp = sub.add_parser("sample", help="simulate from a model")
    smp.add_argument("--model", required=True)
    smp.add_argument("--count", type=int, required=True)
    smp.add_argument("--seed", type=int, required=True)
    smp.add_argument("--out", required=True)

    gof = sub.add_parser("gof", help="Anderson-Darling test with a bootstrap p-value")
    gof.add_argument("--model", required=True)
    gof.add_argument("--data", required=True)
    gof.add_argument("--bootstrap", type=int, default=MIN_GOF_REPS)
    gof.add_argument("--seed", type=int, default=FitConfig.seed)
    gof.add_argument("--a-grid", type=int, default=FitConfig.cutpoint_grid_size)
    gof.add_argument("--multistarts", type=int, default=FitConfig.multistarts)
    return parser


def _config(args, **extra):
    return FitConfig(
        cutpoint_grid_size=args.a_grid,
        multistarts=args.multistarts,
        seed=args.seed,
        **extra,
    )


def _fmt(v):
    return repr(float(v))


def _params(model):
    if isinstance(model, OcpErlangSpec):
        return (f"cut_point={_fmt(model.cut_point)} phases={model.phases} "
                f"rate1={_fmt(model.rate1)} rate2={_fmt(model.rate2)}")
    return f"phases={model.phases} rate={_fmt(model.rate)}"


def _report(args, data, result, interval):
    model = result.model
    lines = ["# ocpph fit report"]
    if not args.no_timestamp:
        lines.append(f"generated: {datetime.datetime.now().isoformat(timespec='seconds')}")
    lines += [
        f"data: {args.data} (m={data.m}, mean={_fmt(data.values.mean())}, "
        f"sd={_fmt(data.values.std(ddof=1) if data.m > 1 else 0.0)})",
        f"kind: {model_kind(model)}",
        f"phases: {model.phases}",
    ]
    if isinstance(model, OcpErlangSpec):
        lines += [
            f"cut_point: {_fmt(model.cut_point)}",
            f"rate1: {_fmt(model.rate1)}",
            f"rate2: {_fmt(model.rate2)}",
        ]
    else:
        lines.append(f"rate: {_fmt(model.rate)}")
    dist = result.distribution()
    lines += [
        f"model_mean: {_fmt(dist.mean())}",
        f"model_sd: {_fmt(dist.sd())}",
        f"log_likelihood: {_fmt(result.log_likelihood)}",
        f"converged: {'yes' if result.converged else 'no'}",
        f"evaluations: {result.evaluations}",
    ]
    if interval is not None:
        if interval.lower is None:
            lines.append("cut_point_ci: skipped")
        else:
            lines.append(
                f"cut_point_ci: [{_fmt(interval.lower)}, {_fmt(interval.upper)}] "
                f"(level {interval.level}, B={interval.estimates.size + interval.failures}, "
                f"failures {interval.failures})"
            )
    if result.flags:
        lines.append(f"flags: {', '.join(result.flags)}")
    if len(result.trace) > 1:
        lines.append("phase_trace:")
        lines += [f"  n={n} log_likelihood={_fmt(ll)}" for n, ll in result.trace]
    lines.append(f"note: {SUBSTITUTION_NOTE}")
    return "\n".join(lines) + "\n"


def cmd_fit(args):
    data = read_samples(args.data)
    config = _config(
        args, phase_range=args.phase_range, bootstrap_reps=args.bootstrap,
        confidence_level=args.level, max_iter=args.max_iter,
    )
    if args.phases == "auto":
        result = select_phases(data, config, kind=args.kind)
    elif args.kind == "ocp-erlang":
        result = fit_ocp_erlang(data, args.phases, config)
    else:
        result = fit_erlang(data, args.phases)
    interval = None
    if args.kind == "ocp-erlang":
        interval = bootstrap_ci_cutpoint(data, result, config)
        result = with_cutpoint_ci(result, interval)
    write_model(args.out, result.model)
    text = _report(args, data, result, interval)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_eval(args):
    dist = as_distribution(read_model(args.model))
    measures = [m.strip() for m in args.measures.split(",") if m.strip()]
    unknown = [m for m in measures if m not in POINT_MEASURES + SCALAR_MEASURES]
    if unknown:
        raise InputError(f"unknown measures: {', '.join(unknown)}")
    if any(x < 0 for x in args.x):
        raise DomainError("x must be nonnegative")
    if any(m in POINT_MEASURES for m in measures) and not args.x:
        raise InputError("pointwise measures need at least one --x")
    for m in measures:
        if m in SCALAR_MEASURES:
            sys.stdout.write(f"{m} = {_fmt(getattr(dist, m)())}\n")
        else:
            for x in args.x:
                sys.stdout.write(f"{m}({x!r}) = {_fmt(getattr(dist, m)(x))}\n")
    return EXIT_OK


def cmd_curves(args):
    model = read_model(args.model)
    dist = as_distribution(model)
    xmax = dist.quantile(0.9999) if args.xmax is None else args.xmax
    if args.xmin < 0:
        raise DomainError("--xmin must be nonnegative")
    if args.xmin >= xmax:
        raise InputError(f"--xmin ({args.xmin}) must be below --xmax ({xmax})")
    if args.points < 2:
        raise InputError("--points must be at least 2")
    data = read_samples(args.data) if args.data else None
    cols = curves_table(model, np.linspace(args.xmin, xmax, args.points), data)
    write_curves(args.out, cols)
    return EXIT_OK


def cmd_sample(args):
    if args.count < 1:
        raise InputError("--count must be positive")
    dist = as_distribution(read_model(args.model))
    write_samples(args.out, dist.sample(args.count, args.seed).values)
    return EXIT_OK


def cmd_gof(args):
    model = read_model(args.model)
    data = read_samples(args.data)
    dist = as_distribution(model)
    refittable = isinstance(model, (ErlangSpec, OcpErlangSpec))
    if args.bootstrap < MIN_GOF_REPS or not refittable:
        why = (f"--bootstrap {args.bootstrap} < {MIN_GOF_REPS}" if refittable
               else f"kind {model_kind(model)} cannot be refitted")
        logger.warning("%s; reporting the statistic only", why)
        sys.stdout.write(f"A2 = {_fmt(anderson_darling(data, dist.cdf))}\n")
        sys.stdout.write("p_value = unavailable\n")
        sys.stdout.write(f"B = {args.bootstrap}\n")
        return EXIT_OK
    # the bootstrap refits every replicate, so score the data against its own refit too
    config = _config(args)
    fit = refit(model, data, config)
    report = ad_pvalue_bootstrap(data, fit, config, reps=args.bootstrap)
    if fit.model != model:
        sys.stdout.write(f"refit: {model_kind(fit.model)} {_params(fit.model)}\n")
    sys.stdout.write(f"A2 = {_fmt(report.a_squared)}\n")
    sys.stdout.write(f"p_value = {_fmt(report.p_value)}\n")
    sys.stdout.write(f"B = {report.bootstrap_reps}\n")
    if report.failures:
        sys.stdout.write(f"failed_replicates = {report.failures}\n")
    sys.stdout.write(f"note: {SUBSTITUTION_NOTE}\n")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "eval": cmd_eval,
    "curves": cmd_curves,
    "sample": cmd_sample,
    "gof": cmd_gof,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (SingularMatrixError, UnreliableEstimateError, TailUnderflowError) as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    except (InputError, InvalidInputError, DomainError, OcpphError, OSError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
