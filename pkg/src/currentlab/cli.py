"""Command line front end.

Subcommands
-----------
exact       residual reports for the combinatorial identities on small
            graphs (switching, multigraph principle, flux parity, the
            cosh/sinh weight reduction), as JSON
sample      current traces from the dual-contour chains, one CSV row
            per sampled edge state
events      geometric event rows (crossings, pivotal events, holes,
            separation, coarse boundary counts) evaluated on a stored
            trace CSV
harmonic    absorbed random-walk kernel queries on domains and quads,
            as CSV
boundary, pivotal_square, pivotal_hole, ab_criterion, identity,
coupling, sandwich
            experiment drivers writing estimates.csv, fits.json and
            residuals.json into --out

Domains are text files (vertex / edge / merge / arc lines, '#'
comments).  Wherever a domain is expected, the shorthand `WxH` builds a
grid graph and `box:N` builds the centered box Lambda_N.  Exit status
is 0 iff every gate of the invoked command passed.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys

import numpy as np

from . import clusters, harness, oracle
from .harmonic import (absorbing_network, build_network, z_kernel,
                       z_path_sum, z_sets)
from .lattice import Annulus, DomainGraph, Quad, build_box, build_grid, \
    from_text
from .oracle import Functional, SiteGraph
from .sampler import DoubleChain, DoubleTrace, DualIsingChain


# ---------------------------------------------------------------------
# argument helpers


def _parse_point(text: str) -> tuple[int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}")
    try:
        return (int(parts[0]), int(parts[1]))
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _parse_points(text: str) -> tuple[tuple[int, int], ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(_parse_point(p) for p in text.split(";") if p.strip())


def load_domain(spec: str) -> tuple[DomainGraph, Quad | None]:
    """Domain from a `WxH` / `box:N` shorthand or a text file path."""
    m = re.fullmatch(r"(\d+)x(\d+)", spec)
    if m:
        return build_grid(int(m.group(1)), int(m.group(2))), None
    m = re.fullmatch(r"box:(\d+)", spec)
    if m:
        return build_box(int(m.group(1))), None
    with open(spec, encoding="utf-8") as fh:
        g, quad, _ = from_text(fh.read())
    return g, quad


def _functional(name: str) -> Functional:
    if name == "one":
        return Functional.one()
    if name == "clusters":
        return Functional.cluster_count()
    m = re.fullmatch(r"edge:(-?\d+),(-?\d+);(-?\d+),(-?\d+)", name)
    if m:
        u = (int(m.group(1)), int(m.group(2)))
        v = (int(m.group(3)), int(m.group(4)))
        return Functional.edge_positive((u, v))
    raise argparse.ArgumentTypeError(
        f"unknown functional {name!r}; use one, clusters or edge:x,y;x,y")


def _emit_json(obj, out: str | None) -> None:
    text = json.dumps(harness._jsonable(obj), sort_keys=True, indent=2) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------
# exact


def cmd_exact(args) -> int:
    g, _ = load_domain(args.graph)
    report: dict = {"check": args.check, "graph": args.graph}
    tol = 1e-10

    if args.check == "switching":
        a = _parse_points(args.sources2)
        b = _parse_points(args.sources)
        f = _functional(args.functional)
        cap = args.cap or 24
        rep = oracle.verify_switching_lemma(g, g, a, b, f, cap=cap)
        formal = oracle.switching_exact_equal(g, g, a, b, f, cap=cap)
        report.update(lhs=rep.lhs, rhs=rep.rhs, prefactor=rep.prefactor,
                      residual=rep.residual, formal_equal=formal)
        report["passed"] = rep.residual <= tol and formal

    elif args.check == "principle":
        a = _parse_points(args.sources)
        mg = SiteGraph.from_domain(g)
        rep = oracle.verify_switching_principle(
            mg, a, lambda m: 1.0, cap=args.cap or 20)
        report.update(lhs=rep.lhs, rhs=rep.rhs, residual=rep.residual,
                      k_mask=rep.k_mask)
        report["passed"] = rep.residual <= tol

    elif args.check == "flux-half":
        faces = _parse_points(args.faces)
        if len(faces) != 2:
            raise SystemExit("flux-half needs --faces 'x,y;x,y'")
        rep = oracle.verify_flux_half(g, faces[0], faces[1],
                                      cap=args.cap or 14)
        report.update(max_residual=rep.max_residual,
                      qualifying_classes=rep.qualifying_classes,
                      total_classes=rep.total_classes)
        report["passed"] = rep.max_residual <= tol

    else:  # parity-reduction
        rep = oracle.validate_parity_reduction(args.beta, cap=args.cap or 30)
        report.update(rep)
        report["passed"] = (
            rep["per_parity_max_residual"] <= tol
            and rep["factorization_max_residual"] <= tol
            and rep["q_even_residual"] <= 1e-6)

    _emit_json(report, args.out)
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------
# sample


def cmd_sample(args) -> int:
    g, _ = load_domain(args.domain)
    sources = _parse_points(args.sources)
    sources2 = _parse_points(args.sources2)
    if sources2 and not args.double:
        raise SystemExit("--sources2 needs --double")
    cols = ("sample,chain,edge,parity,parity2,positive" if args.double
            else "sample,chain,edge,parity,positive")
    edge_ids = np.arange(g.n_edges)
    sample_id = 0
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(cols + "\n")
        for ch in range(args.chains):
            rng = harness._rng(args.seed, 0, ch)
            if args.double:
                chain = DoubleChain(g, sources, sources2, rng)
            else:
                chain = DualIsingChain(g, sources, rng)
            chain.sweep(args.burnin)
            for _ in range(args.sweeps):
                chain.sweep(1)
                if args.double:
                    tr = chain.double_trace()
                    block = np.column_stack([
                        np.full(g.n_edges, sample_id), np.full(g.n_edges, ch),
                        edge_ids, tr.eta1.astype(int), tr.eta2.astype(int),
                        tr.positive.astype(int)])
                else:
                    tr = chain.current_trace()
                    block = np.column_stack([
                        np.full(g.n_edges, sample_id), np.full(g.n_edges, ch),
                        edge_ids, tr.eta.astype(int), tr.positive.astype(int)])
                fh.write("\n".join(",".join(str(int(v)) for v in row)
                                   for row in block) + "\n")
                sample_id += 1
    return 0


def read_trace(path: str, g: DomainGraph, sources=(), sources2=()
               ) -> list[tuple[int, DoubleTrace]]:
    """Rebuild per-sample aggregate traces from a trace CSV.

    Single-current files (no parity2 column) load with eta2 = 0, which
    is the aggregate of (n, 0)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty trace file")
    header = rows[0]
    double = "parity2" in header
    want = (["sample", "chain", "edge", "parity", "parity2", "positive"]
            if double else ["sample", "chain", "edge", "parity", "positive"])
    if header != want:
        raise ValueError(f"unexpected trace columns {header}")
    by_sample: dict[int, list[list[str]]] = {}
    for row in rows[1:]:
        by_sample.setdefault(int(row[0]), []).append(row)
    out = []
    for sid in sorted(by_sample):
        eta1 = np.zeros(g.n_edges, dtype=bool)
        eta2 = np.zeros(g.n_edges, dtype=bool)
        pos = np.zeros(g.n_edges, dtype=bool)
        got = by_sample[sid]
        if len(got) != g.n_edges:
            raise ValueError(
                f"sample {sid}: {len(got)} rows for {g.n_edges} edges")
        for row in got:
            e = int(row[2])
            eta1[e] = bool(int(row[3]))
            if double:
                eta2[e] = bool(int(row[4]))
            pos[e] = bool(int(row[-1]))
        out.append((sid, DoubleTrace(g, eta1, eta2, pos,
                                     tuple(sources), tuple(sources2))))
    return out


# ---------------------------------------------------------------------
# events


_EVENTS = ("boundary", "a4-square", "a4-hole", "arms", "crossing-holes",
           "rect", "sep", "boxes")


def _event_outcome(name: str, tr: DoubleTrace, args, quad, cb):
    x, r, R = args.x, args.r, args.R
    if name == "boundary":
        return int(clusters.boundary_connection(tr, R, r))
    if name == "a4-square":
        return int(clusters.detect_a4_square(tr, x, r, R))
    if name == "a4-hole":
        return clusters.detect_a4_blacksquare(tr, x, r, R).verdict
    if name == "arms":
        return clusters.count_annulus_crossings(tr, Annulus(x, r, R)).k_clusters
    if name == "crossing-holes":
        return clusters.count_annulus_crossings(tr, Annulus(x, r, R)).n_crossing
    if name == "rect":
        return clusters.count_rectangle_crossings(tr, quad)
    if name == "sep":
        return int(bool(clusters.detect_sep(tr, r, args.delta, x)))
    return clusters.count_connected_boundary_boxes(tr, cb)


def cmd_events(args) -> int:
    g, quad = load_domain(args.domain)
    if args.event == "rect" and quad is None:
        raise SystemExit("event 'rect' needs a domain file with quad arcs")
    cb = None
    if args.event == "boxes":
        cb = clusters.coarse_boundary(g, args.r, args.R, args.x)
    traces = read_trace(args.trace, g, _parse_points(args.sources),
                        _parse_points(args.sources2))
    lines = ["sample,event,x,r,R,delta,outcome"]
    for sid, tr in traces:
        try:
            out = _event_outcome(args.event, tr, args, quad, cb)
        except ValueError as err:
            raise SystemExit(f"sample {sid}: {err}") from None
        lines.append(f"{sid},{args.event},{args.x[0]}:{args.x[1]},"
                     f"{args.r},{args.R},{args.delta},{out}")
    text = "\n".join(lines) + "\n"
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0


# ---------------------------------------------------------------------
# harmonic


def cmd_harmonic(args) -> int:
    g, quad = load_domain(args.quad)
    net = build_network(quad) if quad is not None else absorbing_network(g)
    rows = []
    if args.set_from or args.set_to:
        if not (args.set_from and args.set_to):
            raise SystemExit("--set-from and --set-to go together")

        def resolve(spec):
            if quad is not None and spec in quad.arcs():
                return spec, quad.arcs()[spec]
            return spec, _parse_points(spec)

        name_x, X = resolve(args.set_from)
        name_y, Y = resolve(args.set_to)
        rows.append((name_x, name_y, z_sets(net, X, Y)))
    elif args.src is not None and args.dst is not None:
        rows.append((args.src, args.dst, z_kernel(net, args.src, args.dst)))
    elif args.dst is not None:
        for v in net.base.vertex_list():
            rows.append((v, args.dst, z_kernel(net, v, args.dst)))
    else:
        raise SystemExit("need --to (with optional --from), or the "
                         "--set-from/--set-to pair")
    if args.path_check and args.src is not None and args.dst is not None:
        direct = z_path_sum(net, args.src, args.dst, args.path_check)
        rows.append((args.src, args.dst, direct))

    def fmt(v):
        return f"{v[0]}:{v[1]}" if isinstance(v, tuple) else str(v)

    text = "\n".join(["x,y,Z"] + [f"{fmt(x)},{fmt(y)},{z!r}"
                                  for x, y, z in rows]) + "\n"
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0


# ---------------------------------------------------------------------
# experiment drivers


def cmd_experiment(args) -> int:
    name = args.command
    if args.config is not None:
        mapping = harness.parse_config_text(
            open(args.config, encoding="utf-8").read())
        if mapping.get("experiment", name) != name:
            raise SystemExit(f"config names experiment "
                             f"{mapping['experiment']!r}, not {name!r}")
        mapping["experiment"] = name
    else:
        mapping = {"experiment": name}
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    cfg = harness.config_from_mapping(mapping, **overrides)
    result = harness.run_experiment(cfg)
    harness.write_reports(cfg.out, result)
    n = len(result["records"])
    status = "pass" if result["passed"] else "FAIL"
    print(f"{name}: {n} estimate rows, gates {status}, reports in {cfg.out}")
    for failure in result.get("failures", []):
        print(f"  failure: {failure}")
    return 0 if result["passed"] else 1


# ---------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="currentlab",
        description="critical double random currents on subgraphs of Z^2")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="residual report for one identity")
    p.add_argument("--check", required=True,
                   choices=("switching", "principle", "flux-half",
                            "parity-reduction"))
    p.add_argument("--graph", default="2x2",
                   help="WxH, box:N or a domain file (default 2x2)")
    p.add_argument("--sources", default="",
                   help="even vertex set 'x,y;x,y' (ambient sources)")
    p.add_argument("--sources2", default="",
                   help="second source set for --check switching")
    p.add_argument("--functional", default="one",
                   help="one | clusters | edge:x,y;x,y")
    p.add_argument("--faces", default="0,0;1,0",
                   help="two dual faces for --check flux-half")
    p.add_argument("--beta", type=float, default=harness.BETA_C)
    p.add_argument("--cap", type=int, default=0,
                   help="edge/truncation cap (0 = per-check default)")
    p.add_argument("--out", default=None, help="JSON path (default stdout)")
    p.set_defaults(fn=cmd_exact)

    p = sub.add_parser("sample", help="write a current trace CSV")
    p.add_argument("--domain", required=True)
    p.add_argument("--sources", default="",
                   help="boundary sources 'x,y;x,y'")
    p.add_argument("--sources2", default="",
                   help="second-current sources (with --double)")
    p.add_argument("--double", action="store_true",
                   help="sample an aggregate of two currents")
    p.add_argument("--sweeps", type=int, default=100,
                   help="recorded samples per chain (one sweep apart)")
    p.add_argument("--burnin", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("events", help="evaluate events on a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--event", required=True, choices=_EVENTS)
    p.add_argument("--x", type=_parse_point, default=(0, 0))
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--R", type=int, default=4)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--sources", default="")
    p.add_argument("--sources2", default="")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(fn=cmd_events)

    p = sub.add_parser("harmonic", help="absorbed-walk kernel queries")
    p.add_argument("--quad", required=True,
                   help="domain file (with arcs for wired sides) or WxH")
    p.add_argument("--from", dest="src", type=_parse_point, default=None)
    p.add_argument("--to", dest="dst", type=_parse_point, default=None)
    p.add_argument("--set-from", default=None,
                   help="arc name (ab|bc|cd|da) or 'x,y;x,y'")
    p.add_argument("--set-to", default=None)
    p.add_argument("--path-check", type=int, default=0,
                   help="if > 0, append a truncated path-sum row at this "
                        "maximum length")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(fn=cmd_harmonic)

    for name in harness.EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None,
                       help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.set_defaults(fn=cmd_experiment)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
