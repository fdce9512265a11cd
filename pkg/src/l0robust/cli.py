"""Command-line driver: bounds, simulate, sweep, psi, validate."""
import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import adversary as adv
from . import asymptotics as asy
from . import filtrun as ft
from . import gmm_model as gm
from . import harness as h
from . import kernels
from .rng import check_seed

EXIT_OK, EXIT_VALIDATION, EXIT_BAD_INPUT = 0, 1, 2


class ConfigError(ValueError):
    pass


def fmt(value):
    """Render one cell: 9 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def _json_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(f"{float(value):.9g}")
        return v if math.isfinite(v) else str(v)
    return value


def render(rows, columns, config, path):
    """CSV text, or JSON ``{config, rows}`` when ``path`` ends with .json."""
    if path and path.lower().endswith(".json"):
        doc = {"config": config, "rows": [{c: _json_cell(r[c]) for c in columns} for r in rows]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def emit(rows, columns, config, path):
    text = render(rows, columns, config, path)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def parse_grid(spec, integer=False):
    """``A:B:STEP`` (inclusive of B) or a comma list."""
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError
            a, b, step = (float(p) for p in parts)
            if step <= 0 or b < a:
                raise ConfigError(f"grid {spec!r}: need STEP > 0 and B >= A")
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            vals = [round(a + i * step, 12) for i in range(count)]
        else:
            vals = [float(p) for p in spec.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid {spec!r}; expected A:B:STEP or a comma list") from None
    if not vals:
        raise ConfigError(f"grid {spec!r} is empty")
    if integer:
        if any(v != int(v) for v in vals):
            raise ConfigError(f"grid {spec!r} must contain integers")
        vals = [int(v) for v in vals]
    return vals


def _seed(value):
    try:
        return check_seed(int(value))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nonneg_int(value):
    v = int(value)
    if v < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def _pos_int(value):
    v = int(value)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def load_target(args):
    """Problem from ``--problem`` or ``--family``/``--d``/``--nblocks``."""
    if getattr(args, "problem", None):
        if getattr(args, "family", None):
            raise ConfigError("give either --problem or --family, not both")
        return gm.load_problem(args.problem), {"problem": args.problem}
    if not getattr(args, "family", None):
        raise ConfigError("need --problem FILE or --family NAME")
    problem = asy.family_problem(args.family, d=args.d, nblocks=getattr(args, "nblocks", None))
    return problem, {"family": args.family, "d": problem.d}


def default_policy(problem):
    return "auto-diag" if problem.is_diagonal else "auto-min"


def resolve_attack_set(problem, spec):
    if spec == "all":
        return np.arange(problem.d)
    if spec.startswith("top:"):
        try:
            m = int(spec[4:])
        except ValueError:
            raise ConfigError(f"bad --A {spec!r}") from None
        if not 0 <= m <= problem.d:
            raise ConfigError(f"--A top:M needs 0 <= M <= {problem.d}")
        return np.sort(ft.magnitude_order(problem)[:m])
    raise ConfigError(f"bad --A {spec!r}; expected top:M or all")


BOUND_COLUMNS = ("kind", "d", "k", "f_size", "budget", "value", "raw")


def _bound_row(report, d, k, f_size):
    return {"kind": report.kind, "d": d, "k": k, "f_size": f_size, "budget": report.budget,
            "value": report.value, "raw": report.raw}


def cmd_bounds(args):
    problem, config = load_target(args)
    policy = args.F or default_policy(problem)
    config.update(k=args.k, F=policy)
    F, usable = h.select_filtration(problem, args.k, policy)
    rows = []
    if usable:
        rows.append(_bound_row(h.upper_bound_for(problem, F, args.k), problem.d, args.k, F.size))
    else:
        config["note"] = "no classifier with 2k < |F|; upper bound omitted"
    lower = adv.lower_bound_at_budget(problem, args.k)[0]
    rows.append(_bound_row(lower, problem.d, args.k, 0))
    emit(rows, BOUND_COLUMNS, config, args.out)
    return EXIT_OK


SIM_COLUMNS = ("classifier", "attack", "d", "k", "f_size", "budget", "p_hat", "ci_low", "ci_high",
               "misclassified", "lower_bound", "n", "seed")


def _sim_row(name, attack, d, k, f_size, budget, est, lower):
    return {"classifier": name, "attack": attack, "d": d, "k": k, "f_size": f_size, "budget": budget,
            "p_hat": est.p_hat, "ci_low": est.ci_low, "ci_high": est.ci_high,
            "misclassified": est.misclassified_count, "lower_bound": lower, "n": est.n, "seed": est.seed}


def cmd_simulate(args):
    problem, config = load_target(args)
    policy = args.F or default_policy(problem)
    config.update(k=args.k, n=args.n, seed=args.seed, attack=args.attack, F=policy)
    clf, F, usable = h.classifier_for(problem, args.k, policy)
    f_size = int(F.size) if usable else 0
    name = "filtrun" if usable else "constant"
    if args.attack == "exact":
        if args.A is not None:
            raise ConfigError("--A applies only to --attack adv-a")
        est = h.mc_robust_error(problem, clf, args.n, args.seed, workers=args.workers)
        lower = adv.lower_bound_at_budget(problem, args.k)[0].value
        rows = [_sim_row(name, "exact", problem.d, args.k, f_size, args.k, est, lower)]
    else:
        A = resolve_attack_set(problem, args.A or "all")
        strat = adv.make_adv_a(problem, A)
        config["A"] = args.A or "all"
        genie = adv.genie_classifier(problem, A)
        ests = h.mc_errors_under_adv(problem, [clf, genie], strat, args.n, args.seed, workers=args.workers)
        lower = adv.lower_bound_thm2(problem, A).value
        rows = [
            _sim_row(name, "adv-a", problem.d, args.k, f_size, strat.budget, ests[0], lower),
            _sim_row("genie", "adv-a", problem.d, args.k, problem.d - A.size, strat.budget, ests[1], lower),
        ]
    emit(rows, SIM_COLUMNS, config, args.out)
    return EXIT_OK


def cmd_sweep(args):
    problem, config = load_target(args)
    ks = parse_grid(args.k_grid, integer=True)
    if any(k < 0 for k in ks):
        raise ConfigError("k grid must be nonnegative")
    config.update(k_grid=args.k_grid, n=args.n, seed=args.seed, select=args.select)
    rows = h.sweep(problem, ks, args.n, args.seed, selector=args.select, workers=args.workers)
    emit([r.as_record() for r in rows], h.SWEEP_COLUMNS, config, args.out)
    return EXIT_OK


def cmd_psi(args):
    if args.family not in asy.FAMILIES:
        raise ConfigError(f"unknown family {args.family!r}")
    problem = asy.family_problem(args.family, d=args.d, nblocks=args.nblocks)
    cs = parse_grid(args.c_grid)
    if any(not 0 < c <= 1 for c in cs):
        raise ConfigError("c grid values must lie in (0, 1]")
    nu = np.sort(np.abs(problem.nu))[::-1]
    rows = h.psi_table(nu, cs, args.family)
    emit(rows, h.PSI_COLUMNS, {"family": args.family, "d": problem.d, "c_grid": args.c_grid}, args.out)
    return EXIT_OK


def cmd_validate(args):
    report = h.validate_oracles(args.seed, args.suite)
    print(f"backend: {kernels.BACKEND}")
    for line in report.lines():
        print(line)
    print("all checks passed" if report.passed else "validation FAILED")
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _add_target(p, family_only=False):
    if not family_only:
        p.add_argument("--problem", metavar="FILE", help="problem JSON file")
    p.add_argument("--family", choices=sorted(asy.FAMILIES))
    p.add_argument("--d", type=_pos_int)
    p.add_argument("--nblocks", type=_pos_int, help="block count for log-block")


def build_parser():
    parser = argparse.ArgumentParser(prog="l0robust", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="upper and lower robust-error bounds")
    _add_target(p)
    p.add_argument("--k", type=_nonneg_int, required=True)
    p.add_argument("--F", help="suffix:R | auto-diag | auto-min | all")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Monte Carlo robust error")
    _add_target(p)
    p.add_argument("--k", type=_nonneg_int, required=True)
    p.add_argument("--n", type=_pos_int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--attack", choices=("exact", "adv-a"), default="exact")
    p.add_argument("--A", help="top:M | all (adv-a only)")
    p.add_argument("--F", help="suffix:R | auto-diag | auto-min | all")
    p.add_argument("--workers", type=_pos_int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="robust error and bounds over a k grid")
    _add_target(p)
    p.add_argument("--k-grid", required=True, help="A:B:STEP or comma list")
    p.add_argument("--n", type=_pos_int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--select", default="auto-diag", help="suffix:R | auto-diag | auto-min | all")
    p.add_argument("--workers", type=_pos_int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("psi", help="lambda_c and psi_d on a c grid")
    _add_target(p, family_only=True)
    p.add_argument("--c-grid", required=True, help="A:B:STEP or comma list")
    p.add_argument("--out")
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser("validate", help="run the brute-force and statistical cross-checks")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--suite", choices=("all",) + h.SUITES, default="all")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "family", None) == "log-block" and args.d is None and args.nblocks is None:
        parser.error("log-block needs --nblocks N or --d 2^N-1")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
