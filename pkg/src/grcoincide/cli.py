"""``grcoincide`` command line.

Exit codes: 0 when a result was computed (whatever the verdict), 1 for
usage errors (bad flags, unreadable or malformed inputs, invalid configs),
2 for numerical or validation failures.  Results go to stdout as
``key=value`` lines, with numbers at 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
from dataclasses import replace
import io as _stdio
from pathlib import Path
import sys

import numpy as np

from .config import load_config, parse_model_spec, parse_penalty, resolve_matrix
from .equivalence import column_space_check, cross_validate, decomposition_check
from .errors import FormatError, GRCoincideError, InconsistencyError, SpecError
from .fixtures import FIXTURES, get_fixture
from .io import format_float
from .linalg import Tolerances, as_matrix
from .models import Sar1Model, _SpatialModel, parameter_free_check, spatial_all_rho_check
from .ridge import Penalty, estimators_coincide, gr_hat_operator, materialize_penalty
from .twostep import ESTIMATORS, McReport, run_sweep, two_step_estimate

__all__ = ["main", "build_parser", "report_csv", "report_table"]

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

METHODS = {
    "auto": "column_space",
    "column_space": "column_space",
    "thm2": "column_space",
    "decomposition": "decomposition",
    "thm1": "decomposition",
    "oracle": "oracle",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    arr = np.asarray(v)
    if arr.ndim >= 1:
        return ",".join(format_float(x) for x in arr.reshape(-1))
    return str(v)


def _emit(out, key: str, value) -> None:
    print(f"{key}={_fmt(value)}", file=out)


def _add_tolerance_flags(p):
    g = p.add_argument_group("tolerances")
    g.add_argument("--residual-atol", type=float, default=1e-10, help="residual cutoff (default 1e-10)")
    g.add_argument("--rank-rtol", type=float, default=None, help="relative singular value cutoff")
    g.add_argument("--psd-atol", type=float, default=1e-10, help="eigenvalue slack for psd tests")


def _add_model_flags(p):
    p.add_argument("--X", help="design matrix file or spec")
    p.add_argument("--K", default=None, help="penalty: zero | ridge:LAMBDA | shrink:DELTA | matrix file")
    p.add_argument(
        "--model",
        help="explicit:FILE | rao[:DELTABAR[:GAMMABAR]] | sur:X1:X2 | sar1:W | sma1:W | serial:A",
    )
    p.add_argument("--rho", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--sigma12", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grcoincide", description="When does a general ridge estimator ignore Omega?")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("check", help="decide whether beta_GR(Omega, K) equals beta_GR(I, K)")
    _add_model_flags(c)
    c.add_argument("--method", default="auto", choices=sorted(METHODS))
    c.add_argument("--all-rho", action="store_true", help="spatial models: decide for every admissible rho")
    c.add_argument("--verify", action="store_true", help="run every route and cross-check them")
    c.add_argument("--demo", choices=FIXTURES, help="use a named fixture for model, X and K")
    _add_tolerance_flags(c)

    e = sub.add_parser("estimate", help="compute beta_GR(Omega, K) and beta_GR(I, K)")
    _add_model_flags(e)
    e.add_argument("--y", required=True, help="response vector file")
    e.add_argument("--two-step", action="store_true", help="estimate parameters not given on the command line")
    e.add_argument("--demo", choices=FIXTURES, help="use a named fixture for model, X and K")
    _add_tolerance_flags(e)

    s = sub.add_parser("simulate", help="Monte Carlo comparison of oracle, two-step and covariance-free estimators")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output prefix; writes PREFIX.csv and PREFIX.txt")
    s.add_argument("--workers", type=int, default=None, help="override the config's thread count")
    _add_tolerance_flags(s)

    d = sub.add_parser("demo", help="write a named fixture to files and print its known verdicts")
    d.add_argument("--name", required=True, help=f"one of: {', '.join(FIXTURES)}")
    d.add_argument("--out", default=None, help="output directory (default: ./NAME)")
    return parser


def _tolerances(args) -> Tolerances:
    return Tolerances(rank_rtol=args.rank_rtol, residual_atol=args.residual_atol, psd_atol=args.psd_atol)


def _resolve_inputs(args, need_known: bool, hide_fixture_params: bool = False):
    """Model, design and penalty recipe from flags (and ``--demo``).

    With ``hide_fixture_params`` the fixture's parameter values are dropped,
    so only values given on the command line count as known.
    """
    fixture = get_fixture(args.demo) if args.demo else None
    X = resolve_matrix(args.X) if args.X else (fixture.X if fixture else None)
    if fixture is not None and args.model is None:
        model = fixture.model
        if hide_fixture_params:
            model = model.with_params(**{p: None for p in model.parameters})
        overrides = {k: getattr(args, k) for k in model.parameters if getattr(args, k, None) is not None}
        if overrides:
            model = model.with_params(**overrides)
    elif args.model:
        model = parse_model_spec(args.model, X, None, args.rho, args.theta, args.sigma12)
    else:
        raise UsageError("--model is required (or use --demo)")
    if X is None:
        X = getattr(model, "design", None)
        if X is None:
            raise UsageError("--X is required for this model")
    X = as_matrix(X, "X")
    if args.K is not None:
        penalty = parse_penalty(args.K)
    elif fixture is not None:
        penalty = Penalty.custom(fixture.K)
    else:
        penalty = Penalty.zero()
    if need_known and model.unknowns:
        flags = ", ".join(f"--{p}" for p in model.unknowns)
        raise UsageError(f"{model.kind} model needs {flags}")
    return model, X, penalty


def cmd_check(args, out) -> int:
    tol = _tolerances(args)
    model, X, penalty = _resolve_inputs(args, need_known=not args.all_rho)
    K = materialize_penalty(penalty, X, None, tol)
    method = METHODS[args.method]
    print(f"model={model.kind}", file=out)
    print(f"penalty={penalty.describe()}", file=out)

    if args.all_rho:
        if not isinstance(model, _SpatialModel):
            raise UsageError("--all-rho applies to sar1 and sma1 models only")
        variant = "sar" if isinstance(model, Sar1Model) else "sma"
        v = spatial_all_rho_check(model.W, X, K, variant, tol)
        _emit(out, "equal", v.holds)
        print("fired_condition=spatial_all_rho", file=out)
        print("scope=all_rho", file=out)
        for key, r in v.residuals.items():
            _emit(out, f"residual.{key}", r)
        return EXIT_OK

    Omega = model.omega(tol)
    if args.verify:
        cv = cross_validate(Omega, X, K, tol)
        _emit(out, "equal", cv.equal)
        print(f"fired_condition={'+'.join(cv.verdicts)}", file=out)
        _emit(out, "agree", cv.agree)
        for name, v in cv.verdicts.items():
            _emit(out, f"verdict.{name}", v.equal)
        for key, r in cv.residuals().items():
            _emit(out, f"residual.{key}", r)
        if cv.diagnostic:
            print(f"diagnostic={cv.diagnostic}", file=out)
    elif method == "oracle":
        c = estimators_coincide(X, Omega, K, tol)
        _emit(out, "equal", c.equal)
        print("fired_condition=oracle", file=out)
        _emit(out, "residual.hat_gap", c.residual)
    else:
        v = (column_space_check if method == "column_space" else decomposition_check)(Omega, X, K, tol)
        _emit(out, "equal", v.equal)
        print(f"fired_condition={v.fired_condition}", file=out)
        for key, r in v.residuals().items():
            _emit(out, f"residual.{key}", r)

    for name, v in parameter_free_check(model, X, K, tol).items():
        _emit(out, f"condition.{name}", v.holds)
        if not v.exact:
            print(f"condition.{name}.kind=sufficient", file=out)
        for key, r in v.residuals.items():
            _emit(out, f"condition.{name}.residual.{key}", r)
    return EXIT_OK


def cmd_estimate(args, out) -> int:
    tol = _tolerances(args)
    model, X, penalty = _resolve_inputs(args, not args.two_step, hide_fixture_params=args.two_step)
    y = resolve_matrix(args.y).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise GRCoincideError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
    res = two_step_estimate(model, y, X, penalty, tol)
    K_free = materialize_penalty(penalty, X, None, tol)
    b_free = gr_hat_operator(X, None, K_free, tol) @ y
    print(f"model={model.kind}", file=out)
    print(f"penalty={penalty.describe()}", file=out)
    print(f"mode={'two_step' if args.two_step else 'known'}", file=out)
    _emit(out, "beta", res.beta_hat)
    _emit(out, "beta_cov_free", b_free)
    _emit(out, "gap", float(np.linalg.norm(res.beta_hat - b_free)))
    for name, est in res.params.items():
        _emit(out, f"param.{name}", est.value)
        if est.degenerate:
            print(f"param.{name}.degenerate=true", file=out)
        if est.clamped:
            print(f"param.{name}.clamped=true", file=out)
    return EXIT_OK


def report_csv(reports: list[tuple[float | None, McReport]], param: str | None) -> str:
    """Machine-readable report; identical inputs give identical bytes."""
    k = len(reports[0][1].records[0].bias)
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["grid_parameter", "grid_value", "estimator", "mse", "mse_se"]
        + [f"bias_{j + 1}" for j in range(k)]
        + ["gap_mean", "gap_max", "replications", "failed", "seed", "param_name", "param_true", "param_mean",
           "omega_hat_cond_mean"]
    )

    def opt(v):
        return "" if v is None else format_float(v)

    for g, rep in reports:
        for rec in rep.records:
            w.writerow(
                [param or "", opt(g), rec.name, format_float(rec.mse), format_float(rec.mse_se)]
                + [format_float(b) for b in rec.bias]
                + [format_float(rec.gap_mean), format_float(rec.gap_max), rep.replications, rep.failed, rep.seed,
                   rep.param_name or "", opt(rep.param_true), opt(rep.param_mean), opt(rep.omega_hat_cond_mean)]
            )
    return buf.getvalue()


def report_table(reports: list[tuple[float | None, McReport]], param: str | None) -> str:
    lines = []
    for g, rep in reports:
        head = f"{param} = {g:.6g}" if g is not None else "single run"
        lines.append(
            f"{head}: {rep.replications} replications, {rep.failed} failed, seed {rep.seed}, "
            f"{rep.wall_time:.2f} s"
        )
        if rep.param_name:
            lines.append(f"  fitted {rep.param_name}: true {rep.param_true:.6g}, mean {rep.param_mean:.6g}")
        if rep.omega_hat_cond_mean is not None:
            lines.append(f"  mean cond(Omega_hat): {rep.omega_hat_cond_mean:.6g}")
        lines.append(f"  {'estimator':<10} {'mse':>12} {'mse_se':>12} {'|bias|':>12} {'gap_mean':>12} {'gap_max':>12}")
        for rec in rep.records:
            lines.append(
                f"  {rec.name:<10} {rec.mse:>12.6g} {rec.mse_se:>12.6g} {float(np.linalg.norm(rec.bias)):>12.6g} "
                f"{rec.gap_mean:>12.6g} {rec.gap_max:>12.6g}"
            )
        lines.append("")
    lines.append("gap = |beta_hat - beta_cov_free|; " + ", ".join(ESTIMATORS))
    return "\n".join(lines) + "\n"


def cmd_simulate(args, out) -> int:
    try:
        cfg = load_config(args.config)
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
    except GRCoincideError as exc:
        raise UsageError(f"invalid config {args.config}: {exc}") from exc
    reports = run_sweep(cfg, _tolerances(args))
    param = cfg.swept_parameter
    prefix = Path(args.out)
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True)
    csv_path = prefix.with_name(prefix.name + ".csv")
    txt_path = prefix.with_name(prefix.name + ".txt")
    csv_path.write_text(report_csv(reports, param))
    txt_path.write_text(report_table(reports, param))
    _emit(out, "seed", cfg.seed)
    _emit(out, "replications", cfg.replications)
    _emit(out, "failed", sum(r.failed for _, r in reports))
    print(f"csv={csv_path}", file=out)
    print(f"table={txt_path}", file=out)
    return EXIT_OK


def cmd_demo(args, out) -> int:
    if args.name not in FIXTURES:
        raise UsageError(f"unknown demo {args.name!r}; choose from {', '.join(FIXTURES)}")
    fx = get_fixture(args.name)
    outdir = Path(args.out) if args.out else Path(args.name)
    paths = fx.write(outdir)
    print(f"name={fx.name}", file=out)
    print(f"summary={fx.summary}", file=out)
    print(f"model={fx.model.kind}", file=out)
    for p in fx.model.parameters:
        value = getattr(fx.model, p)
        if isinstance(value, float):
            _emit(out, p, value)
    for key, path in paths.items():
        print(f"file.{key}={path}", file=out)
    for key, verdict in fx.expected.items():
        _emit(out, f"expected.{key}", verdict)
    print(f"basis={fx.basis}", file=out)
    return EXIT_OK


COMMANDS = {"check": cmd_check, "estimate": cmd_estimate, "simulate": cmd_simulate, "demo": cmd_demo}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, SpecError, FormatError) as exc:
        print(f"grcoincide: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InconsistencyError as exc:
        print(f"grcoincide: {exc}", file=sys.stderr)
        for key, r in exc.residuals.items():
            print(f"  residual.{key}={format_float(r)}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GRCoincideError, np.linalg.LinAlgError) as exc:
        print(f"grcoincide: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
