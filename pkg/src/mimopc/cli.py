"""Command-line front end.

Subcommands::

    mimopc drop     --seed 7 --out drop.csv         # fading and estimate statistics
    mimopc solve    --schemes nw_mmf --dir ul       # one drop, per-user SE table
    mimopc campaign --drops 200 --out runs/a        # report.json, users.csv, cdf.csv
    mimopc compare  runs/a/report.json              # win percentages from a stored report

Exit codes: 0 success, 1 input or configuration error, 2 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from importlib import resources

import numpy as np

from mimopc import harness
from mimopc.errors import ConfigError, InputError
from mimopc.harness import ALL_DIRECTIONS, ALL_SCHEMES, CampaignReport, CampaignSpec, Scheme, fmt
from mimopc.model import (
    DUMP_HEADER,
    NetworkConfig,
    compute_gamma,
    config_from_mapping,
    drop_rows,
    generate_drop,
    load_config,
)
from mimopc.sinr import Direction

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


def default_config_path() -> str:
    return str(resources.files("mimopc") / "data" / "paper.cfg")


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        k, sep, v = item.partition("=")
        k = k.strip()
        if not sep or not k:
            raise ConfigError(f"malformed override {item!r}: expected key=value")
        if not v.strip():
            raise ConfigError(f"malformed override for {k!r}: empty value")
        out[k] = v
    return out


def resolve_config(args) -> NetworkConfig:
    cfg = load_config(args.config or default_config_path())
    return config_from_mapping(parse_overrides(args.set), base=cfg)


def _selection(raw, parse, everything):
    if raw in (None, "", "all", "both"):
        return tuple(everything)
    try:
        picked = [parse(v.strip()) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return tuple(dict.fromkeys(picked))


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline=""), True


def cmd_drop(args) -> int:
    cfg = resolve_config(args)
    drop, fading = generate_drop(cfg, args.seed)
    stats = compute_gamma(fading, cfg)
    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DUMP_HEADER)
        for row in drop_rows(cfg, drop, fading, stats):
            w.writerow([*row[:3], *(fmt(v) for v in row[3:])])
    finally:
        if close:
            fh.close()
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = resolve_config(args)
    schemes = _selection(args.schemes, Scheme.parse, ALL_SCHEMES)
    directions = _selection(args.dir, Direction.parse, ALL_DIRECTIONS)
    _, fading = generate_drop(cfg, args.seed)
    stats = compute_gamma(fading, cfg)
    failed = []
    fh, close = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n", delimiter="\t")
        w.writerow(["scheme", "direction", "l", "k", "eta", "target", "sinr", "se"])
        for d in directions:
            for s in schemes:
                out = harness.solve_scheme(s, d, fading, stats, cfg, seed=args.seed)
                if not out.ok:
                    failed.append(f"{harness.key(s, d)}: {out.error}")
                    continue
                for l in range(cfg.num_cells):
                    for k in range(cfg.users_per_cell):
                        w.writerow([s.value, d.value, l, k, fmt(out.eta[l, k]), fmt(out.target[l, k]),
                                    fmt(out.sinr[l, k]), fmt(out.se[l, k])])
    finally:
        if close:
            fh.close()
    for msg in failed:
        print(f"solver failure: {msg}", file=sys.stderr)
    return EXIT_SOLVER if failed else EXIT_OK


def _summary(report: CampaignReport) -> dict:
    out = {"drops_ok": len(report.drops), "drops_failed": len(report.failed_drops),
           "win_percentages": report.win_table(), "median_sum_se": {}, "gm_over_pf_crossing": {}}
    present = {k.split("/")[0] for k in report.keys}
    for k in report.keys:
        scheme, d = k.split("/")
        if len(report.drops):
            out["median_sum_se"][k] = float(np.median(report.sum_se(scheme, d)))
    if {"gm_mmf", "nw_pf"} <= present and len(report.drops):
        for d in sorted({k.split("/")[1] for k in report.keys}):
            out["gm_over_pf_crossing"][d] = harness.crossing_percentile(
                report.samples("gm_mmf", d), report.samples("nw_pf", d))
    return out


def _print_summary(summary: dict):
    print(f"drops: {summary['drops_ok']} ok, {summary['drops_failed']} excluded")
    for name, value in sorted(summary["win_percentages"].items()):
        print(f"win {name:<22s} {value:6.2f} %")
    for name, value in sorted(summary["median_sum_se"].items()):
        print(f"median sum SE {name:<14s} {value:8.3f} bit/s/Hz")
    for d, value in sorted(summary["gm_over_pf_crossing"].items()):
        print(f"gm_mmf overtakes nw_pf ({d}) at the {value:.1f}th percentile")


def cmd_campaign(args) -> int:
    cfg = resolve_config(args)
    spec = CampaignSpec(
        cfg=cfg, num_drops=args.drops, base_seed=args.seed,
        schemes=_selection(args.schemes, Scheme.parse, ALL_SCHEMES),
        directions=_selection(args.dir, Direction.parse, ALL_DIRECTIONS),
        workers=args.workers,
    )
    report = harness.run_campaign(spec)
    os.makedirs(args.out, exist_ok=True)
    report.to_json(os.path.join(args.out, "report.json"))
    report.write_csv(os.path.join(args.out, "users.csv"))
    report.write_cdf_csv(os.path.join(args.out, "cdf.csv"))
    _print_summary(_summary(report))
    if not report.drops:
        print("solver failure: no drop succeeded for every scheme", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        report = CampaignReport.from_json(args.report)
    except OSError as exc:
        raise InputError(f"cannot read report {args.report}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed report {args.report}: {exc}") from None
    summary = _summary(report)
    if args.json:
        print(json.dumps(summary, sort_keys=True, indent=1))
    else:
        _print_summary(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mimopc", description="Massive MIMO power control experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", help="config file (default: bundled paper.cfg)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
        sp.add_argument("--seed", type=int, default=0, help="drop seed (campaign: seed of drop 0)")
        sp.add_argument("--out", help=out_help)

    def selectors(sp):
        sp.add_argument("--schemes", help="comma list of gm_mmf,nw_mmf,nw_pf (default all)")
        sp.add_argument("--dir", help="ul, dl or both (default both)")

    sp = sub.add_parser("drop", help="write large-scale fading and estimate variances as CSV")
    common(sp, "CSV path (default stdout)")
    sp.set_defaults(func=cmd_drop)

    sp = sub.add_parser("solve", help="solve one drop and print per-user SE")
    common(sp, "table path (default stdout)")
    selectors(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("campaign", help="run a Monte-Carlo campaign")
    common(sp, "output directory (default runs/campaign)")
    selectors(sp)
    sp.add_argument("--drops", type=int, default=100)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_campaign, out=None)

    sp = sub.add_parser("compare", help="win percentages and sum-SE summary of a stored report")
    sp.add_argument("report", help="report.json written by campaign")
    sp.add_argument("--json", action="store_true", help="print the summary as JSON")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if args.command == "campaign" and not args.out:
        args.out = os.path.join("runs", "campaign")
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
