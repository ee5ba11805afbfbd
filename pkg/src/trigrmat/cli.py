"""Batch verification driver.

Subcommands:
  gseries   build the normalizer series for one n and window, optionally
            through both construction routes, and write it as JSON
  check     run one named suite
  run       run several suites (or --all) against one configuration

Suites are data: a registry maps suite names to cell builders, so CI
scripts can select them with --suites without touching code.  Exit codes:
0 every check reported pass (an expected failure that fails counts as a
pass), 1 at least one check reported fail or error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from .central import (
    classical_limit_compare,
    truncated_eval_rep,
    verify_centrality,
    verify_h_valuation_Theta,
    verify_l0_assembly,
    verify_l0_exchange,
    verify_multi_conjugation,
    verify_pairwise_commute,
    verify_reversal_conjugation,
    verify_rtt_exact,
)
from .coeffring.series import SeriesWindow, series_to_records
from .fusion import verify_AD_commutation, verify_fusion
from .normalizer import (
    build_gseries,
    solve_g_ode,
    verify_g_relations,
    verify_route_agreement,
)
from .report import SCHEMA, report_to_json
from .rmatrix import (
    build_bundle,
    verify_crossing,
    verify_rational_limit,
    verify_two_point_relation,
    verify_unitarity,
    verify_ybe,
)

GSERIES_SCHEMA = "trigrmat-gseries/1"


class UsageError(Exception):
    pass


@dataclass
class SuiteConfig:
    n: int
    window: SeriesWindow
    level: Fraction | None = None
    suites: list = field(default_factory=list)
    series: str | None = None
    k: int | None = None
    expect: str = "pass"
    _shared: dict = field(default_factory=dict)

    def validate(self):
        if self.n < 1:
            raise UsageError("--n must be at least 1")
        w = self.window
        if not (w.u_low <= 0 <= w.u_high) or w.h_high < 0:
            raise UsageError("window must contain u^0 and have hmax >= 0")
        for s in self.suites:
            if s not in SUITES:
                known = ", ".join(sorted(SUITES))
                raise UsageError(f"unknown suite {s!r} (known: {known})")
        if self.expect not in ("pass", "fail"):
            raise UsageError("--expect must be pass or fail")

    def bundle(self):
        got = self._shared.get("bundle")
        if got is None:
            got = build_bundle(self.n, self.window)
            self._shared["bundle"] = got
        return got

    def rep(self):
        got = self._shared.get("rep")
        if got is None:
            # letter coefficients have u-valuation down to -(h_high + 3), so
            # the floor must sit at least that deep regardless of the window
            # asked for on the series side
            w = self.window
            rw = SeriesWindow(
                min(w.u_low, -(w.h_high + 4)), max(w.u_high, 8), w.h_high
            )
            got = truncated_eval_rep(self.n, rw)
            self._shared["rep"] = got
        return got

    def critical(self):
        return Fraction(-self.n)


def _suite_gseries(cfg):
    out = [verify_route_agreement(cfg.n, cfg.window)]
    out.extend(verify_g_relations(build_gseries(cfg.n, cfg.window)))
    return out


def _suite_unitarity(cfg):
    return verify_unitarity(cfg.bundle())


def _suite_crossing(cfg):
    b = cfg.bundle()
    return verify_crossing(b.R_norm, cfg.n)


def _suite_ybe(cfg):
    return [verify_two_point_relation(cfg.n), verify_ybe(cfg.n)]


def _suite_rational(cfg):
    return verify_rational_limit(cfg.bundle())


def _suite_fusion(cfg):
    out = []
    for k in (2, 3):
        out.append(verify_fusion(cfg.n, k))
        if k <= cfg.n:
            out.extend(verify_AD_commutation(cfg.n, k))
    return out


def _central_cell(cfg, series, c, k, expect):
    rep = cfg.rep()
    if series == "Theta":
        return verify_h_valuation_Theta(rep, k if k is not None else 1)
    if series in ("phi", "theta") and k is None:
        k = 1
    return verify_centrality(rep, series, c, k=k, expect=expect)


def _suite_central(cfg):
    crit = cfg.critical()
    if cfg.series is not None:
        c = cfg.level if cfg.level is not None else crit
        return [_central_cell(cfg, cfg.series, c, cfg.k, cfg.expect)]
    rep = cfg.rep()
    out = []
    for k in range(1, min(cfg.n, 2) + 1):
        out.append(verify_centrality(rep, "phi", crit, k=k))
        out.append(verify_centrality(rep, "theta", crit, k=k))
    if cfg.n >= 2:
        out.append(
            verify_centrality(rep, "phi", Fraction(0), k=1, expect="fail")
        )
    out.append(verify_centrality(rep, "qdet", crit))
    out.append(verify_centrality(rep, "qdet", Fraction(0)))
    return out


def _suite_commute(cfg):
    return verify_pairwise_commute(cfg.rep())


def _suite_regularity(cfg):
    return [verify_h_valuation_Theta(cfg.rep(), m) for m in (0, 1, 2)]


def _suite_classical(cfg):
    rep = cfg.rep()
    out = [classical_limit_compare(rep, m) for m in (0, 1, 2)]
    out.append(classical_limit_compare(rep, "qdet"))
    return out


def _suite_exact(cfg):
    n = cfg.n
    out = [verify_rtt_exact(n)]
    for k in range(2, min(n, 3) + 1):
        out.append(verify_reversal_conjugation(n, k))
    for k in (2, 3):
        out.append(verify_multi_conjugation(n, k))
    for c in (0, -n):
        out.append(verify_l0_exchange(n, c))
    if n <= 2:
        # the m=2 assembly over four tensor slots of exact fractions gets
        # expensive fast; larger n stays reachable through this entry point
        # by explicit request, not in --all
        for c in (0, -n):
            out.append(verify_l0_assembly(n, c))
    return out


SUITES = {
    "gseries": _suite_gseries,
    "unitarity": _suite_unitarity,
    "crossing": _suite_crossing,
    "ybe": _suite_ybe,
    "rational-limit": _suite_rational,
    "fusion": _suite_fusion,
    "central": _suite_central,
    "commute": _suite_commute,
    "regularity": _suite_regularity,
    "classical": _suite_classical,
    "exact": _suite_exact,
}


def run_suite(cfg):
    cfg.validate()
    results = []
    for name in cfg.suites:
        results.extend(SUITES[name](cfg))
    results.sort(key=lambda r: (r.check_id, json.dumps(r.params, sort_keys=True, default=str)))
    return results


def emit_report(results, path, with_timing=True):
    text = report_to_json(results, with_timing=with_timing)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def _pure_h_records(fr, h_high):
    from .coeffring.series import ts_from_fraction

    ts = ts_from_fraction(
        fr,
        SeriesWindow(0, 0, h_high),
        assign={"q": (Fraction(0), Fraction(1, 2))},
    )
    return series_to_records(ts)


def serialize_series(gs, path=None):
    """Dump the normalizer bundle: g, its reflection, and the f/a data.

    Every series uses the coefficient-record format; the q-fraction
    coefficients f_k and a_k are written as their pure-h expansions at
    the bundle's h resolution.
    """
    h_high = gs.window.h_high
    body = {
        "schema": GSERIES_SCHEMA,
        "n": gs.n,
        "window": gs.window.as_dict(),
        "g": series_to_records(gs.g),
        "g_reflected": series_to_records(gs.g_reflected),
        "f": [_pure_h_records(fr, h_high) for fr in gs.fc.f],
        "a": [_pure_h_records(fr, h_high) for fr in gs.fc.a],
    }
    text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def _window_from_args(args, default):
    return SeriesWindow(
        args.umin if args.umin is not None else default.u_low,
        args.umax if args.umax is not None else default.u_high,
        args.hmax if args.hmax is not None else default.h_high,
    )


def _add_window_flags(p):
    p.add_argument("--umin", type=int, default=None)
    p.add_argument("--umax", type=int, default=None)
    p.add_argument("--hmax", type=int, default=None)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="trigrmat", description=__doc__.splitlines()[0]
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gseries", help="build and dump the normalizer series")
    g.add_argument("--n", type=int, required=True)
    _add_window_flags(g)
    g.add_argument(
        "--method", choices=("f", "appendixA", "both"), default="f"
    )
    g.add_argument("--out", default=None)
    g.add_argument("--json", dest="out_alias", default=None)

    c = sub.add_parser("check", help="run one named suite")
    c.add_argument("suite", choices=sorted(SUITES))
    c.add_argument("--n", type=int, required=True)
    _add_window_flags(c)
    c.add_argument("--level", type=Fraction, default=None)
    c.add_argument("--series", choices=("phi", "theta", "qdet", "Theta"), default=None)
    c.add_argument("--k", type=int, default=None)
    c.add_argument("--expect", choices=("pass", "fail"), default="pass")
    c.add_argument("--json", default=None)

    r = sub.add_parser("run", help="run several suites")
    r.add_argument("--n", type=int, required=True)
    _add_window_flags(r)
    r.add_argument("--suites", default=None, help="comma-separated suite names")
    r.add_argument("--all", action="store_true")
    r.add_argument("--level", type=Fraction, default=None)
    r.add_argument("--series", choices=("phi", "theta", "qdet", "Theta"), default=None)
    r.add_argument("--k", type=int, default=None)
    r.add_argument("--expect", choices=("pass", "fail"), default="pass")
    r.add_argument("--json", default=None)
    return ap


def _print_results(results, out=sys.stdout):
    for r in results:
        ps = " ".join(f"{k}={v}" for k, v in sorted(r.params.items()))
        line = f"{r.check_id} [{ps}] -> {r.status} ({r.seconds:.2f}s)"
        if r.detail:
            line += f"  {r.detail}"
        print(line, file=out)
        if r.witness:
            print(f"  witness: {json.dumps(r.witness, sort_keys=True, default=str)}", file=out)


def _cmd_gseries(args):
    window = _window_from_args(args, SeriesWindow(-8, 6, 6))
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    out_path = args.out or args.out_alias
    results = []
    if args.method == "both":
        results.append(verify_route_agreement(args.n, window))
    if args.method in ("f", "both"):
        gs = build_gseries(args.n, window)
        text = serialize_series(gs, out_path)
    else:
        g = solve_g_ode(args.n, window)
        body = {
            "schema": GSERIES_SCHEMA,
            "n": args.n,
            "window": window.as_dict(),
            "g": series_to_records(g),
        }
        text = json.dumps(body, indent=2, sort_keys=True) + "\n"
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(text)
    if out_path is None:
        sys.stdout.write(text)
    _print_results(results)
    return 1 if any(r.status != "pass" for r in results) else 0


def _cmd_check_or_run(args, suites):
    window = _window_from_args(args, SeriesWindow(-8, 6, 4))
    cfg = SuiteConfig(
        n=args.n,
        window=window,
        level=args.level,
        suites=suites,
        series=args.series,
        k=args.k,
        expect=args.expect,
    )
    results = run_suite(cfg)
    _print_results(results)
    if args.json:
        emit_report(results, args.json)
    return 1 if any(r.status != "pass" for r in results) else 0


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.cmd == "gseries":
            return _cmd_gseries(args)
        if args.cmd == "check":
            return _cmd_check_or_run(args, [args.suite])
        if args.suites is None and not getattr(args, "all", False):
            raise UsageError("run needs --suites or --all")
        suites = (
            sorted(SUITES)
            if args.all
            else [s.strip() for s in args.suites.split(",") if s.strip()]
        )
        return _cmd_check_or_run(args, suites)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
