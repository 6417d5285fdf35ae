"""Command-line front end.

Subcommands: blocks, lodf, outage, verify, influence.  Exit codes: 0 on
success, 1 on verification failure, 2 on input errors, 3 on numerical
failures.  Reports that carry an --out path also render a matplotlib figure
next to the delimited output unless --no-figure is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .dcflow import build_system, solve_flows
from .model import Network, balanced_at_slack, parse_case, strip_dangling
from .outage import (CutSetOutage, classify_cut, cutset_flow_change,
                     full_lodf_matrix, influence_graph, outage_report_json)
from .topology import ParticipationProfile, block_decomposition
from .util import GridError
from .verify import check_network, merge_rows, random_connected_network

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class SystemExit2(Exception):
    """Input-level failure (maps to exit code 2)."""


def _atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _figure_path(out: str | None) -> str | None:
    if not out:
        return None
    base, _ = os.path.splitext(out)
    return base + ".png"


def _load_case(args) -> Network:
    try:
        with open(args.case) as fh:
            text = fh.read()
    except OSError as exc:
        raise SystemExit2(f"cannot read case file: {exc}")
    fmt = args.case_format
    if fmt == "auto":
        fmt = "matpower_m" if args.case.endswith(".m") else "native_json"
    net, diag = parse_case(text, fmt)
    for w in diag.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if net is None:
        for e in diag.errors:
            loc = f" at line {e.line}" if e.line else ""
            print(f"error: {e.code}: {e.message}{loc}", file=sys.stderr)
        raise SystemExit2("case rejected")
    if getattr(args, "strip_dangling", False):
        net, removed = strip_dangling(net)
        if removed:
            print(f"stripped {len(removed)} dangling bridge line(s)", file=sys.stderr)
    return net


def _alpha_for(net: Network, spec: str):
    if spec == "uniform":
        return ParticipationProfile.uniform(b.id for b in net.buses)
    try:
        with open(spec) as fh:
            weights = {int(k): float(v) for k, v in json.load(fh).items()}
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise SystemExit2(f"cannot read alpha file {spec}: {exc}")
    return ParticipationProfile.from_weights(weights)


def _balanced(net: Network) -> Network:
    p = net.injection_vector()
    if abs(p.sum()) > 1e-9 * (1.0 + float(np.abs(p).max(initial=0.0))):
        print(f"warning: injections sum to {p.sum():.6g}; balancing at the slack bus",
              file=sys.stderr)
        return balanced_at_slack(net)
    return net


def _parse_trip(net: Network, spec: str) -> frozenset[int]:
    """Line selectors "i-j" (optionally "i-j#k" for parallels), comma separated."""
    wanted = set()
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        pair, _, which = token.partition("#")
        try:
            a, b = (int(x) for x in pair.split("-"))
        except ValueError:
            raise SystemExit2(f"bad trip selector {token!r}; expected i-j or i-j#k")
        matches = [ln.id for ln in net.lines
                   if {ln.tail, ln.head} == {a, b}]
        if not matches:
            raise SystemExit2(f"no line between buses {a} and {b}")
        if which:
            try:
                idx = int(which)
                wanted.add(matches[idx])
            except (ValueError, IndexError):
                raise SystemExit2(f"bad parallel index in {token!r}")
        elif len(matches) == 1:
            wanted.add(matches[0])
        else:
            raise SystemExit2(
                f"{len(matches)} parallel lines between {a} and {b}; "
                f"disambiguate with #k")
    if not wanted:
        raise SystemExit2("empty trip set")
    return frozenset(wanted)


def _want_format(args, default: str, allowed: tuple[str, ...]) -> str:
    fmt = args.format or default
    if fmt not in allowed:
        raise SystemExit2(f"{args.command} supports output format(s) "
                          f"{'/'.join(allowed)}, not {fmt!r}")
    return fmt


def cmd_blocks(args) -> int:
    net = _load_case(args)
    _want_format(args, "json", ("json",))
    dec = block_decomposition(net)
    doc = dec.to_json_dict()
    doc["cell_sizes"] = [len(c) for c in dec.cells]
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def _csv_matrix(labels, order, matrix) -> str:
    rows = ["line," + ",".join(labels[l] for l in order)]
    for l in order:
        cells = ",".join(format(matrix[l, l_hat], ".17e") for l_hat in order)
        rows.append(f"{labels[l]},{cells}")
    return "\n".join(rows) + "\n"


def cmd_lodf(args) -> int:
    net = _balanced(_load_case(args))
    fmt = _want_format(args, "csv", ("csv", "json"))
    alpha = _alpha_for(net, args.alpha)
    fs = full_lodf_matrix(net, alpha=alpha)
    for col, msg in sorted(fs.column_diagnostics.items()):
        print(f"column {net.line_labels[col]}: {msg}", file=sys.stderr)
    with np.errstate(invalid="ignore"):
        mag = np.abs(np.nan_to_num(fs.lodf, nan=0.0))
    if fmt == "json":
        doc = {
            "order": [net.line_labels[l] for l in fs.block_order],
            "abs_lodf": [[mag[l, lh] for lh in fs.block_order]
                         for l in fs.block_order],
        }
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        _emit(_csv_matrix(net.line_labels, fs.block_order, mag), args.out)
    fig = _figure_path(args.out)
    if fig and not args.no_figure:
        from .figures import save_lodf_heatmap
        save_lodf_heatmap(fs, fig)
        print(f"figure written to {fig}", file=sys.stderr)
    return EXIT_OK


def cmd_outage(args) -> int:
    net = _balanced(_load_case(args))
    _want_format(args, "json", ("json",))
    tripped = _parse_trip(net, args.trip)
    alpha = _alpha_for(net, args.alpha)
    islands = classify_cut(net, CutSetOutage(tripped), alpha=alpha)
    for isl in islands:
        for w in isl.warnings:
            print(f"warning: {w}", file=sys.stderr)
    reports = [cutset_flow_change(isl) for isl in islands]
    doc = outage_report_json(islands, reports)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    fig = _figure_path(args.out)
    if fig and not args.no_figure:
        from .figures import save_outage_figure
        save_outage_figure(doc, fig)
        print(f"figure written to {fig}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    per_network = []
    if args.random:
        n, m = args.random
        for _ in range(args.trials):
            net = random_connected_network(rng, n, m)
            per_network.append(check_network(net, rng))
        rows = merge_rows(per_network)
    elif args.case:
        try:
            net = _load_case(args)
        except SystemExit2 as exc:
            print(f"FAIL  case-valid: {exc}", file=sys.stdout)
            return EXIT_VERIFY_FAIL
        rows = check_network(net, rng)
    else:
        raise SystemExit2("verify needs --case or --random N M")
    failed = False
    for row in rows:
        print(row.format())
        failed = failed or not row.passed
    return EXIT_VERIFY_FAIL if failed else EXIT_OK


def cmd_influence(args) -> int:
    net = _balanced(_load_case(args))
    fmt = _want_format(args, "dot", ("dot", "json"))
    alpha = _alpha_for(net, args.alpha)
    fs = full_lodf_matrix(net, alpha=alpha)
    edges = influence_graph(fs.lodf, threshold=args.threshold)
    labels = net.line_labels
    if fmt == "json":
        doc = {"nodes": list(labels),
               "edges": [[labels[l], labels[l_hat]] for l, l_hat in edges]}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        body = ["graph influence {"]
        for l in range(net.m):
            body.append(f'  "{labels[l]}";')
        for l, l_hat in edges:
            body.append(f'  "{labels[l]}" -- "{labels[l_hat]}";')
        body.append("}")
        _emit("\n".join(body) + "\n", args.out)
    fig = _figure_path(args.out)
    if fig and not args.no_figure:
        from .figures import save_influence_figure
        save_influence_figure(net, edges, fig)
        print(f"figure written to {fig}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="gridlodf",
        description="DC power flow line-failure localization toolkit")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, case_required=True):
        p.add_argument("--case", required=case_required, help="case file path")
        p.add_argument("--case-format", default="auto",
                       choices=["auto", "native_json", "matpower_m"],
                       help="case file format (default: by extension)")
        p.add_argument("--format", default=None, choices=["json", "csv", "dot"],
                       help="output format (default depends on the subcommand)")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--strip-dangling", action="store_true",
                       help="iteratively collapse degree-1 buses into their "
                            "neighbors before the analysis")

    p = sub.add_parser("blocks", help="block decomposition as JSON")
    common(p)
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("lodf", help="block-sorted |K| matrix as CSV")
    common(p)
    p.add_argument("--alpha", default="uniform",
                   help='"uniform" or a JSON file of bus weights')
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_lodf)

    p = sub.add_parser("outage", help="flow-change report for a trip set")
    common(p)
    p.add_argument("--trip", required=True, help='lines to trip, e.g. "1-2,5-6#1"')
    p.add_argument("--alpha", default="uniform")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_outage)

    p = sub.add_parser("verify", help="run the oracle identity suite")
    common(p, case_required=False)
    p.add_argument("--random", nargs=2, type=int, metavar=("N", "M"),
                   help="verify random networks with N buses and M lines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("influence", help="influence graph as DOT")
    common(p)
    p.add_argument("--alpha", default="uniform")
    p.add_argument("--threshold", type=float, default=0.005)
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_influence)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GridError as exc:
        numerical = exc.code in ("SINGULAR_REDUCED", "SINGULAR_OUTAGE",
                                 "DF_FORM_MISMATCH")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if numerical else EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
