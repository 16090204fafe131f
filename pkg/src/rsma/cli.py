"""Command line interface: ``rsma region|curve|preset list|run|validate``.

Exit codes: 0 success, 1 usage or input error, 2 infeasible scenario,
3 enumeration cap exceeded.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

from .io import load_config, slug, write_curve_bundle, write_region_bundle
from .model import LayoutError, ScenarioConfig
from .optimizer import DEFAULT_CAP, EnumerationCapExceeded, InfeasibleScenario
from .presets import SNR_GRID, UnknownPreset, preset, preset_names
from .sweep import rate_region, wsr_curve

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which is reserved for infeasible scenarios
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_PI = re.compile(r"^\s*([-+]?[0-9.]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?\s*$")


def number(text: str) -> float:
    """Float, also accepting forms like ``pi/9`` and ``2pi/9``."""
    m = _PI.match(text)
    if m:
        a = m.group(1)
        coef = float(a) if a not in ("", "+", "-") else (-1.0 if a == "-" else 1.0)
        return coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)
    return float(text)


def numbers(text: str) -> list[float]:
    return [number(t) for t in text.split(",") if t.strip()]


def grouping(text: str) -> list[list[int]]:
    """``1,2|3,4`` -> [[1, 2], [3, 4]]."""
    return [[int(u) for u in g.split(",")] for g in text.split("|")]


def order(text: str):
    if text == "ascending-gain":
        return text
    if "|" in text:
        return grouping(text)
    return [int(u) for u in text.split(",")]


def _scenario_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("scenario overrides")
    g.add_argument("--config", help="JSON manifest (or bare config) to start from")
    g.add_argument("--Nt", type=int)
    g.add_argument("--K", type=int)
    g.add_argument("--snr", type=float, dest="snr_db")
    g.add_argument("--weights", type=numbers)
    g.add_argument("--thresholds", type=numbers)
    g.add_argument("--grouping", type=grouping, help="e.g. 1,2|3,4")
    g.add_argument("--order", type=order, help="e.g. 2,1,3, 1|3,2 or ascending-gain")
    g.add_argument("--alpha", type=numbers)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iter", type=int, dest="max_iter")
    g.add_argument("--restarts", type=int)
    g.add_argument("--solver-tol", type=float, dest="solver_tol")
    g.add_argument("--seed", type=int)
    g.add_argument("--gammas", type=numbers, help="structured channel gains of users 2..K")
    g.add_argument("--thetas", type=numbers, help="structured channel angles, e.g. pi/9,2pi/9")
    g.add_argument("--variances", type=numbers, help="i.i.d. Rayleigh channel variances")
    g.add_argument("--realizations", type=int)
    g.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                   help="override any config field, e.g. --set csit='{\"scales\": [1, 1]}'")
    p.add_argument("--strategies", default=None, help="comma separated strategy names")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: available cores)")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="enumeration cap on orders/groupings")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--name", default=None, help="file name stem")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


_FIELDS = ("Nt", "K", "snr_db", "weights", "thresholds", "grouping", "order", "alpha", "tol", "max_iter",
           "restarts", "solver_tol", "seed")


def build_config(args, base: ScenarioConfig | None = None) -> ScenarioConfig:
    d = (load_config(args.config) if args.config else base or ScenarioConfig()).to_dict()
    for f in _FIELDS:
        v = getattr(args, f, None)
        if v is not None:
            d[f] = v
    ch = dict(d["channel"])
    if args.gammas is not None or args.thetas is not None:
        ch = {"kind": "structured", "gammas": args.gammas if args.gammas is not None else ch.get("gammas"),
              "thetas": args.thetas if args.thetas is not None else ch.get("thetas")}
    if args.variances is not None:
        ch = {"kind": "random", "variances": args.variances, "realizations": ch.get("realizations", 1),
              "seed": ch.get("seed", d["seed"])}
    if args.realizations is not None:
        ch["realizations"] = args.realizations
    d["channel"] = ch
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            d[key] = json.loads(val)
        except json.JSONDecodeError:
            d[key] = val
    K = int(d["K"])
    if "weights" in d and len(d["weights"]) != K and args.weights is None:
        d["weights"] = [1.0] * K
    if "thresholds" in d and len(d["thresholds"]) not in (1, K):
        d["thresholds"] = [0.0] * K
    unknown = set(d) - set(ScenarioConfig().to_dict())
    if unknown:
        raise UsageError(f"unknown config fields: {sorted(unknown)}")
    return ScenarioConfig.from_dict(d)


def _strategies(args, default) -> list[str]:
    return [s.strip() for s in args.strategies.split(",")] if args.strategies else list(default)


def _print_rows(tag: str, rows, cols):
    for r in rows:
        print("\t".join([tag] + [f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in cols]))


def run_region(cfg, strategies, args, name) -> int:
    results = {s: rate_region(cfg, s, workers=args.workers, cap=args.cap) for s in strategies}
    results = {r.strategy: r for r in results.values()}
    files = write_region_bundle(args.out, name, cfg, results, figures=not args.no_figures)
    print("strategy\tu2\tR1\tR2\twsr\tstatus")
    for tag, res in results.items():
        _print_rows(tag, res.rows, ["u2", "R1", "R2", "wsr", "status"])
        print(f"# {tag} hull area {res.area:.6g}", file=sys.stderr)
    print(f"# wrote {', '.join(sorted(set(files.values())))} to {args.out}", file=sys.stderr)
    bad = [t for t, r in results.items() if all(row["status"] == "infeasible" for row in r.rows)]
    return EXIT_INFEASIBLE if bad else EXIT_OK


def run_curve(cfg, strategies, snrs, schedule, args, name) -> int:
    results = {}
    for s in strategies:
        res = wsr_curve(cfg, s, snrs, schedule, workers=args.workers, cap=args.cap)
        results[res.strategy] = res
    files = write_curve_bundle(args.out, name, cfg, results, figures=not args.no_figures)
    print("strategy\tsnr_db\twsr\tstatus\tfeasible")
    infeasible = False
    for tag, res in results.items():
        rows = res.mean_rows()
        _print_rows(tag, rows, ["snr_db", "wsr", "status", "feasible"])
        infeasible |= any(r["status"] == "infeasible" for r in rows)
    print(f"# wrote {', '.join(sorted(set(files.values())))} to {args.out}", file=sys.stderr)
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


def cmd_region(args) -> int:
    cfg = build_config(args)
    return run_region(cfg, _strategies(args, ("mulp", "sc-sic", "rs")), args, args.name or "region")


def cmd_curve(args) -> int:
    cfg = build_config(args)
    snrs = args.snrs if args.snrs is not None else list(SNR_GRID)
    sched = args.schedule
    if args.threshold_schedule is not None:
        sched = args.threshold_schedule
    return run_curve(cfg, _strategies(args, ("mulp", "sc-sic", "rs1", "rs")), snrs, sched, args,
                     args.name or "curve")


def cmd_preset(args) -> int:
    if args.action != "list":
        raise UsageError("usage: rsma preset list")
    for n in preset_names():
        p = preset(n)
        print(f"{n}\t{p.kind}\t{len(p.variants)} variants\t{p.description}")
    return EXIT_OK


def cmd_run(args) -> int:
    p = preset(args.preset)
    if args.list_variants:
        for i, (label, _) in enumerate(p.variants):
            print(f"{i}\t{label}")
        return EXIT_OK
    idx = args.variant if args.variant is not None else list(range(len(p.variants)))
    strategies = _strategies(args, p.strategies)
    code = EXIT_OK
    for i in idx:
        if not 0 <= i < len(p.variants):
            raise UsageError(f"variant index {i} out of range 0..{len(p.variants) - 1}")
        label, base = p.variants[i]
        cfg = build_config(args, base)
        name = args.name or slug(f"{p.name}_{i:02d}")
        print(f"# {p.name} [{i}] {label}", file=sys.stderr)
        if p.kind == "region":
            c = run_region(cfg, strategies, args, name)
        else:
            snrs = args.snrs if args.snrs is not None else list(p.snrs)
            c = run_curve(cfg, strategies, snrs, p.schedule, args, name)
        code = max(code, c)
    return code


def cmd_validate(args) -> int:
    from .validate import run_all
    checks = run_all(args.seed or 0)
    for c in checks:
        print(f"{'PASS' if c.ok else 'FAIL'}\t{c.name}\t{c.detail}")
    return EXIT_OK if all(c.ok for c in checks) else EXIT_USAGE


def parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rsma", description="WSR maximization for MU-LP, SC-SIC and rate-splitting strategies")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    r = sub.add_parser("region", help="two-user rate regions over the weight grid")
    _scenario_args(r)
    r.set_defaults(func=cmd_region)

    c = sub.add_parser("curve", help="WSR versus SNR")
    _scenario_args(c)
    c.add_argument("--snrs", type=numbers, default=None, help="SNR points in dB")
    c.add_argument("--schedule", default=None, help="named QoS threshold schedule")
    c.add_argument("--threshold-schedule", type=numbers, default=None, dest="threshold_schedule",
                   help="one common threshold per SNR")
    c.set_defaults(func=cmd_curve)

    pr = sub.add_parser("preset", help="preset catalogue")
    pr.add_argument("action", choices=["list"])
    pr.set_defaults(func=cmd_preset)

    rn = sub.add_parser("run", help="run a named preset")
    rn.add_argument("preset")
    rn.add_argument("--variant", type=lambda t: [int(v) for v in t.split(",")], default=None,
                    help="comma separated variant indices (default: all)")
    rn.add_argument("--list-variants", action="store_true")
    rn.add_argument("--snrs", type=numbers, default=None)
    _scenario_args(rn)
    rn.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="run the invariant checks")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.func(args)
    except EnumerationCapExceeded as exc:
        print(f"rsma: {exc}", file=sys.stderr)
        return EXIT_CAP
    except InfeasibleScenario as exc:
        print(f"rsma: infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UsageError, UnknownPreset, LayoutError, ValueError, KeyError, OSError) as exc:
        print(f"rsma: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
