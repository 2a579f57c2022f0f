"""Command-line front end: validate generator configs, price claims,
compare methods, and inspect transition matrices.

Exit codes: 0 on success, 1 for a domain failure (invalid generator, failed
check, tolerance exceeded, unreadable data file), 2 for a usage or
configuration parse error.
"""

import argparse
import sys
import time

import numpy as np

from .config import ConfigError, build_family, build_grid, build_payoff, build_matrix, load_config
from .generators import InvalidGeneratorError, InvalidRateMatrixError, check_pmp, \
    rate_matrix_violations, write_matrix_file
from .linalg import euler_product_exp, mat_exp, op_norm_inf
from .pricing import compare_methods, linear_reference, price_bounds

_CONFIG_KEYS = (
    "d", "delta", "t", "q0", "q", "lambda_low", "lambda_high", "payoff", "K", "L",
    "method", "steps", "n", "k", "refs", "out", "seed", "tol",
    "method2", "steps2", "n2", "k2",
)


def _fmt(value) -> str:
    return format(float(value), ".9g")


def _add_config_flags(parser, keys=_CONFIG_KEYS):
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="flat key = value configuration file")
    for key in keys:
        flag = "--" + key.replace("_", "-")
        parser.add_argument(flag, dest=key, default=None, metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qenvelope",
        description="Worst-case price curves for claims on a finite price grid "
                    "whose generator is only known up to an interval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser(
        "validate", help="check the configured generator family and its maximum principle")
    _add_config_flags(p_validate)
    p_validate.set_defaults(func=cmd_validate)

    p_price = sub.add_parser(
        "price", help="write upper/lower price curves (and references) as CSV")
    _add_config_flags(p_price)
    p_price.set_defaults(func=cmd_price)

    p_compare = sub.add_parser(
        "compare", help="price with two methods and compare the curves")
    _add_config_flags(p_compare)
    p_compare.set_defaults(func=cmd_compare)

    p_expm = sub.add_parser(
        "expm", help="print e^{t q} (or its Euler-product approximation) with row sums")
    _add_config_flags(p_expm, keys=("d", "delta", "t", "q", "out"))
    p_expm.add_argument("--k", dest="expm_k", default=None, metavar="K",
                        help="use the (I + (t/k) q)^k approximation; omit or 0 for exact")
    p_expm.set_defaults(func=cmd_expm)

    return parser


def _solver_kwargs(method: str, steps, n, k):
    if method == "nisio":
        return {"n": n, "k": None if int(k) == 0 else int(k)}
    return {"steps": steps}


def _stiffness_warning(fam, t, steps, method):
    if method not in ("ode-euler", "ode-rk4"):
        return
    rate = max(op_norm_inf(m) for m in fam.matrices)
    h = t / steps if steps else 0.0
    if h * rate > 1.0:
        print(f"warning: step length {h:g} times generator norm {rate:g} is "
              f"{h * rate:.3g} > 1; the {method} iteration may lose monotonicity "
              f"(use --steps > {int(np.ceil(t * rate))})", file=sys.stderr)


def cmd_validate(cfg, args) -> int:
    fam = build_family(cfg)
    rows = []
    for idx, m in enumerate(fam.matrices):
        violations = rate_matrix_violations(m)
        detail = "" if not violations else str(violations[0])
        rows.append((f"member[{idx}] rate-matrix conditions", not violations, detail))
    report = check_pmp(fam, trials=100, rng_seed=cfg.seed)
    for cat in report.categories:
        detail = "" if cat.passed else cat.failures[0].detail
        rows.append((f"maximum principle: {cat.name} ({cat.checks} checks)",
                     cat.passed, detail))
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        line = f"{name:<{width}}  {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        print(line)
    return 0 if all(ok for _, ok, _ in rows) else 1


def _write_csv(path, header, columns) -> None:
    rows = len(columns[0])
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(col[i] for col in columns) + "\n")


def _curve_summary(name, values):
    print(f"{name}: min={_fmt(values.min())}, max={_fmt(values.max())}")


def cmd_price(cfg, args) -> int:
    start = time.perf_counter()
    fam = build_family(cfg)
    payoff = build_payoff(cfg)
    _stiffness_warning(fam, cfg.t, cfg.steps, cfg.method)
    bounds = price_bounds(
        fam, payoff, cfg.t, cfg.method,
        config_extra={"lambda_low": cfg.lambda_low, "lambda_high": cfg.lambda_high,
                      "q0": cfg.q0, "q": cfg.q},
        **_solver_kwargs(cfg.method, cfg.steps, cfg.n, cfg.k),
    )
    lambdas = cfg.reference_lambdas()
    q0m = build_matrix(cfg.q0, cfg.d, cfg.delta)
    qm = build_matrix(cfg.q, cfg.d, cfg.delta)
    references = [(lam, linear_reference(q0m + lam * qm, payoff, cfg.t)) for lam in lambdas]

    out = cfg.out or "price_bounds.csv"
    grid_x = build_grid(cfg).points
    header = ["state_index", "x", "payoff", "upper", "lower"]
    columns = [
        [str(i) for i in range(cfg.d)],
        [_fmt(x) for x in grid_x],
        [_fmt(v) for v in payoff.values],
        [_fmt(v) for v in bounds.upper],
        [_fmt(v) for v in bounds.lower],
    ]
    for lam, curve in references:
        header.append(f"ref_{lam:g}")
        columns.append([_fmt(v) for v in curve])
    _write_csv(out, header, columns)

    _curve_summary("payoff", payoff.values)
    _curve_summary("upper", bounds.upper)
    _curve_summary("lower", bounds.lower)
    for lam, curve in references:
        _curve_summary(f"ref_{lam:g}", curve)
    print(f"wrote {out} ({cfg.d} states) in {time.perf_counter() - start:.3f} s")
    return 0


def cmd_compare(cfg, args) -> int:
    start = time.perf_counter()
    fam = build_family(cfg)
    payoff = build_payoff(cfg)
    runs = []
    for method, steps, n, k in ((cfg.method, cfg.steps, cfg.n, cfg.k),
                                (cfg.method2, cfg.steps2, cfg.n2, cfg.k2)):
        _stiffness_warning(fam, cfg.t, steps, method)
        runs.append(price_bounds(fam, payoff, cfg.t, method,
                                 **_solver_kwargs(method, steps, n, k)))
    report = compare_methods(runs[0], runs[1])

    out = cfg.out or "compare.csv"
    grid_x = build_grid(cfg).points
    header = ["state_index", "x", "payoff", "upper_a", "lower_a",
              "upper_b", "lower_b", "diff_upper", "diff_lower"]
    columns = [
        [str(i) for i in range(cfg.d)],
        [_fmt(x) for x in grid_x],
        [_fmt(v) for v in payoff.values],
        [_fmt(v) for v in runs[0].upper],
        [_fmt(v) for v in runs[0].lower],
        [_fmt(v) for v in runs[1].upper],
        [_fmt(v) for v in runs[1].lower],
        [_fmt(v) for v in report.diff_upper],
        [_fmt(v) for v in report.diff_lower],
    ]
    _write_csv(out, header, columns)

    def describe(bounds):
        items = ", ".join(f"{key}={val}" for key, val in bounds.config.items()
                          if key not in ("t", "method"))
        return f"{bounds.method}({items})"

    print(f"a = {describe(runs[0])}")
    print(f"b = {describe(runs[1])}")
    print(f"max |upper_a - upper_b| = {_fmt(report.max_abs_diff_upper)}")
    print(f"max |lower_a - lower_b| = {_fmt(report.max_abs_diff_lower)}")
    ok = report.max_abs_diff <= cfg.tol
    print(f"tolerance {cfg.tol:g}: {'within' if ok else 'EXCEEDED'}")
    print(f"wrote {out} in {time.perf_counter() - start:.3f} s")
    return 0 if ok else 1


def cmd_expm(cfg, args) -> int:
    q = build_matrix(cfg.q, cfg.d, cfg.delta)
    k_raw = getattr(args, "expm_k", None)
    if k_raw in (None, "", "0", 0):
        k = None
    else:
        try:
            k = int(k_raw)
        except ValueError:
            raise ConfigError(f"invalid value for '--k': {k_raw!r} (expected an integer)") from None
        if k < 1:
            raise ConfigError(f"invalid value for '--k': {k_raw!r} (expected 0 or a positive integer)")
    if k is None:
        result = mat_exp(q, cfg.t)
        mode = "exact"
    else:
        result = euler_product_exp(q, cfg.t, k)
        mode = f"euler-product(k={k})"
    print(f"d={q.shape[0]} t={cfg.t:g} mode={mode}")
    for row in result:
        print("  ".join(_fmt(v) for v in row) + "  | row_sum=" + _fmt(row.sum()))
    if cfg.out:
        write_matrix_file(cfg.out, result)
        print(f"wrote {cfg.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    overrides = {key: getattr(args, key) for key in _CONFIG_KEYS if hasattr(args, key)}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvalidGeneratorError, InvalidRateMatrixError, FloatingPointError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
