"""Command-line interface: ``kl <command> [options]``.

Exit codes: 0 success, 2 invalid input, 3 a requested audit failed.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from typing import Sequence

from . import bounds, cf_engine, constants, sampler
from .report import make_report, table_csv, to_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_AUDIT = 3

TABLE_T = (2.0, 1.0, 0.5, 0.1)
TABLE_EST = (0.01, 0.5, 0.9, 0.99, 0.999)

#: Published minimal N = K^2 (rows: est, columns: T).  Table 1 is the Mprime
#: variant, Table 2 the M variant.
REFERENCE_TABLES = {
    1: (
        (3.969e9, 8.122e10, 1.633e12, 1.610e15),
        (4.225e9, 8.585e10, 1.724e12, 1.681e15),
        (4.900e9, 9.860e10, 1.949e12, 1.854e15),
        (6.084e9, 1.183e11, 2.292e12, 2.116e15),
        (7.225e9, 1.399e11, 2.663e12, 2.394e15),
    ),
    2: (
        (2.074e10, 4.238e11, 8.456e12, 8.154e15),
        (2.220e10, 4.489e11, 8.898e12, 8.496e15),
        (2.560e10, 5.112e11, 9.992e12, 9.328e15),
        (3.098e10, 6.068e11, 1.166e13, 1.058e16),
        (3.686e10, 7.090e11, 1.345e13, 1.192e16),
    ),
}
REFERENCE_XI_PRIME_2 = 0.9997597
TABLE_TOLERANCE = 0.05

PI_RANGE = 438_000_000
PI_T = 5.62
PI_BASE = 743
PI_EST = 0.999


class UsageError(ValueError):
    pass


# -- shared computations -------------------------------------------------------------

def moment_audit(k_max: int = 30) -> list[dict]:
    rows = []
    for variant in ("M", "Mprime"):
        for k in range(2, k_max + 1):
            value = constants.moment_series(variant, k, 1e-10)
            bound = constants.moment_bound(variant, k)
            rows.append({"k": k, "variant": variant, "moment": value, "bound": bound, "ok": value <= bound})
    return rows


def compute_table(which: int) -> list[list[int]]:
    variant = "Mprime" if which == 1 else "M"
    return [[bounds.min_n_for_estimate(T, est, variant) for T in TABLE_T] for est in TABLE_EST]


def table_deviations(which: int, cells: list[list[int]]) -> list[list[float]]:
    ref = REFERENCE_TABLES[which]
    return [[c / r - 1.0 for c, r in zip(row, rrow)] for row, rrow in zip(cells, ref)]


def digits_for_quotients(n: int) -> int:
    # certification needs 10^-d below ~q_n^-2, ln q_n ~ n * LEVY
    return math.ceil(1.05 * 2.0 * n * sampler.LEVY / math.log(10.0)) + 50


def pi_analysis(n_max: int, digits: str) -> dict:
    cf = cf_engine.expand_digits(digits)
    if len(cf) < n_max:
        raise cf_engine.InsufficientQuotients(
            f"{len(digits)} digits certify only {len(cf)} quotients; {n_max} requested"
        )
    table = constants.constants_table()
    st = cf_engine.statistics(cf, n_max)
    w = st.deviation
    tail = list(range(15, n_max + 1))
    w_tail_max = max((w[n - 1], n) for n in tail) if tail else (float("nan"), None)
    # smallest n0 with W_n < 0.1 for all n0 <= n <= n_max
    n0 = n_max + 1
    while n0 > 1 and w[n0 - 2] < 0.1:
        n0 -= 1
    max_rate, argmax_rate = max((s / n, n) for n, s in enumerate(st.log_M, start=1))
    base = math.exp(table.kappa + PI_T)
    t_min = bounds.min_t_for_estimate(PI_RANGE + 1, PI_EST, "M", "upper")
    checks = {
        "quotients_prefix": list(cf.quotients[:4]) == [7, 15, 1, 292],
        "W4_matches_1.598": abs(w[3] - 1.598) <= 2e-3 if n_max >= 4 else None,
        "W_below_0.1_from_15": w_tail_max[0] < 0.1 if tail else None,
        "M_n_below_14^n": max_rate < math.log(14.0),
        "base_below_743": base < PI_BASE,
        "T_min_within_5pct": abs(t_min / PI_T - 1.0) <= 0.05,
    }
    return {
        "digits_used": len(digits),
        "quotients_certified": len(cf),
        "quotients": list(cf.quotients[:n_max]),
        "W4": w[3] if n_max >= 4 else None,
        "W_max": max(w),
        "W_argmax": w.index(max(w)) + 1,
        "W_max_from_15": w_tail_max[0],
        "W_argmax_from_15": w_tail_max[1],
        "W_below_0.1_from": n0 if n0 <= n_max else None,
        "max_log_M_over_n": max_rate,
        "argmax_log_M_over_n": argmax_rate,
        "log_14": math.log(14.0),
        "base_e_kappa_plus_T": base,
        "T_used": PI_T,
        "T_min_for_0.999_at_range": t_min,
        "range_N": PI_RANGE + 1,
        "checks": checks,
    }


# -- argument helpers ---------------------------------------------------------------

def _positive(x: str) -> float:
    v = float(x)
    if not v > 0 or math.isinf(v) or math.isnan(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {x}")
    return v


def _pos_int(x: str) -> int:
    v = int(float(x)) if "e" in x.lower() else int(x)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {x}")
    return v


def _rational(x: str) -> Fraction:
    try:
        p, q = x.split("/")
        return Fraction(int(p), int(q))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected p/q, got {x}") from None


def _add_variant(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=("M", "Mprime"), default="M")


def _add_out(p: argparse.ArgumentParser, csv_ok: bool = False) -> None:
    p.add_argument("--out", choices=("json", "csv") if csv_ok else ("json",), default="json")


def _add_source(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--rational", type=_rational, help="p/q in (0, 1)")
    g.add_argument("--interval", nargs=2, metavar=("LO", "HI"), help="decimal endpoints in (0, 1)")
    g.add_argument("--digits-file", help="decimal digits of a number > 1; its fractional part is expanded")
    g.add_argument("--pi", type=_pos_int, metavar="DIGITS", help="builtin digits of pi; expands pi - 3")
    p.add_argument("--max-terms", type=_pos_int)


def _load_source(args) -> cf_engine.ContinuedFraction:
    if args.rational is not None:
        r = args.rational
        return cf_engine.expand_rational(r.numerator, r.denominator)
    if args.interval is not None:
        return cf_engine.expand_interval(Fraction(args.interval[0]), Fraction(args.interval[1]), args.max_terms)
    if args.digits_file is not None:
        return cf_engine.expand_digits(cf_engine.read_digits_file(args.digits_file), args.max_terms)
    return cf_engine.expand_digits(cf_engine.pi_digits(args.pi), args.max_terms)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="universal constants and the moment audit")
    p.add_argument("--audit", action="store_true", help="exit 3 if any moment inequality fails")
    _add_out(p)

    p = sub.add_parser("xi", help="tail factor Xi(T)")
    p.add_argument("--T", type=float, required=True)
    _add_variant(p)
    p.add_argument("--compare-reference", action="store_true", help="report deviation from the printed Xi'(2)")
    _add_out(p)

    p = sub.add_parser("bound", help="measure lower bound for KL(T, N)")
    _add_variant(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--N", type=_pos_int, required=True)
    p.add_argument("--side", choices=bounds.SIDES, default="upper")
    _add_out(p)

    p = sub.add_parser("min-n", help="minimal square N reaching an estimate")
    _add_variant(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--est", type=float, required=True)
    p.add_argument("--side", choices=bounds.SIDES, default="upper")
    _add_out(p)

    p = sub.add_parser("table", help="recompute a minimal-N table")
    p.add_argument("--which", type=int, choices=(1, 2), required=True)
    p.add_argument("--tolerance-report", action="store_true", help="compare with the printed values; exit 3 beyond 5%%")
    _add_out(p, csv_ok=True)

    p = sub.add_parser("expand", help="continued fraction expansion")
    _add_source(p)
    _add_out(p)

    p = sub.add_parser("kl-check", help="per-index KL membership of a number")
    _add_source(p)
    _add_variant(p)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--side", choices=("upper", "lower"), default="upper")
    p.add_argument("--n-max", type=_pos_int)
    _add_out(p)

    p = sub.add_parser("diophantine", help="Diophantine witness, constants and exponents")
    _add_source(p)
    p.add_argument("--C", type=_positive, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--n-max", type=int)
    p.add_argument("--kl-T", type=_positive, help="also report the exponent implied by upper-KL with this T")
    _add_out(p)

    p = sub.add_parser("synth", help="synthetic non-KL Diophantine quotients")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--delta", type=_positive, required=True)
    p.add_argument("--n-max", type=_pos_int, required=True)
    p.add_argument("--T", type=_positive, default=2.0)
    _add_out(p)

    p = sub.add_parser("sum-lemma", help="bound on sum of exp(-alpha sqrt n) vs brute force")
    p.add_argument("--alpha", type=_positive, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--terms", type=_pos_int, default=10**6)
    _add_out(p)

    p = sub.add_parser("simulate", help="Gauss-measure Monte Carlo")
    p.add_argument("--what", choices=("kappa", "tail"), default="kappa")
    _add_variant(p)
    p.add_argument("--n", type=_pos_int, default=1000)
    p.add_argument("--trials", type=_pos_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", type=int)
    p.add_argument("--threads", type=_pos_int, default=1)
    p.add_argument("--T", type=_positive, default=1.0)
    p.add_argument("--side", choices=("upper", "lower"), default="upper")
    p.add_argument("--audit", action="store_true", help="exit 3 if the estimate violates its bound")
    _add_out(p)

    p = sub.add_parser("pi-report", help="pi - 3 continued fraction analysis")
    p.add_argument("--n-max", type=_pos_int, default=10_000)
    p.add_argument("--digits-file")
    p.add_argument("--audit", action="store_true", help="exit 3 if any check fails")
    _add_out(p)
    return parser


# -- commands ---------------------------------------------------------------------

def _emit(report: dict) -> None:
    sys.stdout.write(to_json(report) + "\n")


def cmd_constants(args) -> int:
    table = constants.constants_table()
    audit = moment_audit()
    _emit(make_report("constants", {}, {"table": table.to_dict(), "moment_audit": audit}))
    return EXIT_AUDIT if args.audit and not all(r["ok"] for r in audit) else EXIT_OK


def cmd_xi(args) -> int:
    lq = bounds.log_xi(args.T, args.variant)
    out = {"xi": math.exp(lq), "log_xi": lq, "den": -math.expm1(lq)}
    if args.compare_reference:
        ref = bounds.xi(2.0, "Mprime")
        out["xi_prime_2"] = ref
        out["xi_prime_2_reference"] = REFERENCE_XI_PRIME_2
        out["xi_prime_2_deviation"] = ref - REFERENCE_XI_PRIME_2
    _emit(make_report("xi", {"T": args.T, "variant": args.variant}, out))
    return EXIT_OK


def cmd_bound(args) -> int:
    q = bounds.KLQuery(args.variant, args.T, args.N, args.side)
    _emit(make_report("bound", {"variant": q.variant, "T": q.T, "N": q.N, "side": q.side},
                      bounds.kl_measure_lower_bound(q).to_dict()))
    return EXIT_OK


def cmd_min_n(args) -> int:
    N = bounds.min_n_for_estimate(args.T, args.est, args.variant, args.side)
    K = math.isqrt(N)
    lq = bounds.log_xi(args.T, args.variant)
    out = {
        "N": N,
        "K": K,
        "bound_at_K": bounds._square_bound(lq, K, args.side),
        "bound_at_K_minus_1": bounds._square_bound(lq, K - 1, args.side) if K > 1 else None,
    }
    _emit(make_report("min-n", vars_inputs(args, "T", "est", "variant", "side"), out))
    return EXIT_OK


def vars_inputs(args, *names: str) -> dict:
    return {n: getattr(args, n) for n in names}


def cmd_table(args) -> int:
    cells = compute_table(args.which)
    rows = [f"est>{e:g}" for e in TABLE_EST]
    cols = [f"T={t:g}" for t in TABLE_T]
    out: dict = {"variant": "Mprime" if args.which == 1 else "M", "T": list(TABLE_T), "est": list(TABLE_EST), "cells": cells}
    status = EXIT_OK
    if args.tolerance_report:
        dev = table_deviations(args.which, cells)
        out["reference"] = [list(r) for r in REFERENCE_TABLES[args.which]]
        out["relative_deviation"] = dev
        out["max_abs_deviation"] = max(abs(d) for row in dev for d in row)
        out["within_tolerance"] = out["max_abs_deviation"] <= TABLE_TOLERANCE
        if args.which == 1:
            x = bounds.xi(2.0, "Mprime")
            out["xi_prime_2"] = x
            out["xi_prime_2_reference_deviation"] = x - REFERENCE_XI_PRIME_2
        if not out["within_tolerance"]:
            status = EXIT_AUDIT
    if args.out == "csv":
        sys.stdout.write(table_csv(rows, cols, cells))
    else:
        _emit(make_report("table", {"which": args.which, "tolerance_report": args.tolerance_report}, out))
    return status


def cmd_expand(args) -> int:
    cf = _load_source(args)
    _emit(make_report("expand", {"source": cf.source},
                      {"quotients": list(cf.quotients), "exact": cf.exact, "certified": cf.certified,
                       "length": len(cf)}))
    return EXIT_OK


def cmd_kl_check(args) -> int:
    cf = _load_source(args)
    n_max = args.n_max or len(cf)
    st = cf_engine.statistics(cf, n_max)
    per_n, first = cf_engine.kl_membership(st, args.T, args.variant, args.side)
    _emit(make_report("kl-check", {"source": cf.source, "T": args.T, "variant": args.variant,
                                   "side": args.side, "n_max": n_max},
                      {"per_n": per_n, "first_violation": first, "holds_all": first is None}))
    return EXIT_OK


def cmd_diophantine(args) -> int:
    params = cf_engine.DiophantineParams(args.C, args.tau)
    cf = _load_source(args)
    st = cf_engine.statistics(cf)
    holds, first = cf_engine.diophantine_witness(st, params, args.n_max)
    out = {
        "holds": holds,
        "first_failure": first,
        "converse_constant": cf_engine.diophantine_convert(args.C),
        "excluded_measure": cf_engine.excluded_measure(params) if args.tau > 1 else None,
    }
    if args.kl_T is not None:
        out["tau_from_upper_kl"] = cf_engine.kl_to_diophantine_tau(T=args.kl_T)
        out["tau_from_two_sided_kl"] = cf_engine.kl_to_diophantine_tau(T_minus=args.kl_T, T_plus=args.kl_T)
    _emit(make_report("diophantine", {"source": cf.source, "C": args.C, "tau": args.tau, "n_max": args.n_max}, out))
    return EXIT_OK


def cmd_synth(args) -> int:
    cf = cf_engine.synth_non_kl_diophantine(args.s, args.delta, args.n_max)
    st = cf_engine.statistics(cf)
    per_n, first = cf_engine.kl_membership(st, args.T, "M", "upper")
    # exact values can be huge; ship their logs plus small ones verbatim
    out = {
        "quotients": [a if a.bit_length() <= 64 else None for a in cf.quotients],
        "log_quotients": list(st.log_a),
        "upper_kl_violations": [n for n, ok in enumerate(per_n, start=1) if not ok],
        "first_violation": first,
    }
    _emit(make_report("synth", vars_inputs(args, "s", "delta", "n_max", "T"), out))
    return EXIT_OK


def cmd_sum_lemma(args) -> int:
    bound = bounds.exp_sqrt_sum_bound(args.alpha, args.N)
    partial, cap = bounds.exp_sqrt_sum_oracle(args.alpha, args.N, args.terms)
    out = {"bound": bound, "partial": partial, "tail_cap": cap,
           "dominates": bound >= partial, "margin": bound - (partial + cap)}
    _emit(make_report("sum-lemma", vars_inputs(args, "alpha", "N", "terms"), out))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = sampler.SampleConfig(trials=args.trials, n=args.n, seed=args.seed, bits=args.bits, threads=args.threads)
    if args.what == "kappa":
        res = sampler.estimate_kappa(cfg, args.variant)
    else:
        res = sampler.estimate_tail(cfg, args.T, args.variant, args.side)
    inputs = vars_inputs(args, "what", "variant", "n", "trials", "seed", "bits", "threads", "T", "side")
    _emit(make_report("simulate", inputs, res.to_dict()))
    return EXIT_AUDIT if args.audit and res.within_bound is False else EXIT_OK


def cmd_pi_report(args) -> int:
    need = digits_for_quotients(args.n_max)
    if args.digits_file:
        digits = cf_engine.read_digits_file(args.digits_file)
    else:
        digits = cf_engine.pi_digits(min(need, cf_engine.BUILTIN_PI_LIMIT))
    out = pi_analysis(args.n_max, digits)
    _emit(make_report("pi-report", {"n_max": args.n_max, "digits_file": args.digits_file}, out))
    failed = [k for k, v in out["checks"].items() if v is False]
    return EXIT_AUDIT if args.audit and failed else EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "xi": cmd_xi,
    "bound": cmd_bound,
    "min-n": cmd_min_n,
    "table": cmd_table,
    "expand": cmd_expand,
    "kl-check": cmd_kl_check,
    "diophantine": cmd_diophantine,
    "synth": cmd_synth,
    "sum-lemma": cmd_sum_lemma,
    "simulate": cmd_simulate,
    "pi-report": cmd_pi_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, ArithmeticError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"kl {args.command}: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
