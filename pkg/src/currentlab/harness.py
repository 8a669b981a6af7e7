"""Monte Carlo harness: experiment configs, Wilson intervals, log-log
fits, experiment drivers, and deterministic report writers.

Experiments wire the samplers to the event detectors and exact oracles:

boundary        P[Lambda_R <-> boundary band] under sourceless double
                currents, with the p_hat * log(R/r) constant fit
pivotal_square  four-arm box event rates across r/R with log-log slope
pivotal_hole    crossing-hole event rates with the odd/even flux split
ab_criterion    multi-arm annulus counts and rectangle crossing tails
identity        exhaustive switching / principle / flux / parity checks
coupling        current->FK->spin couplings against independent chains
                and exact small-graph marginals
sandwich        wired-box connection probabilities bracketed by primal
                and dual killed-walk kernels

Reports: estimates.csv (fixed column order), fits.json, residuals.json.
Byte-identical regeneration from (config, master seed) is part of the
contract, so no timestamps or environment stamps appear anywhere.  The
k column of estimates.csv is the arm count for ab_criterion rows, and
tags subclasses elsewhere (pivotal_hole: 0 event, 1 odd flux, 2 even
flux; ab_rectangle: crossing count threshold).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import clusters, harmonic, oracle
from .constants import TANH_BC
from .lattice import (Annulus, DomainGraph, build_box, build_grid,
                      build_rect_quad, merge_vertices)
from .oracle import Functional, SiteGraph
from .sampler import (DEFAULT_BURN_IN, DoubleChain, DoubleTrace,
                      DualIsingChain, SpinFkChain, cluster_labels_of,
                      fk_from_current, sample_fk)

IDENTITY_TOL = 1e-10
BETA_C = math.atanh(TANH_BC)

EXPERIMENTS = ("boundary", "pivotal_square", "pivotal_hole",
               "ab_criterion", "identity", "coupling", "sandwich")

CSV_COLUMNS = ("experiment", "r", "R", "k", "hits", "trials",
               "p_hat", "ci_lo", "ci_hi", "seed")


# ---------------------------------------------------------------------
# Wilson intervals


def wilson_ci(hits: int, trials: int, confidence: float = 0.95
              ) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("wilson_ci needs a positive trial count")
    if not 0 <= hits <= trials:
        raise ValueError("hits must lie in [0, trials]")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    n = float(trials)
    p = hits / n
    denom = n + z * z
    center = (hits + z * z / 2.0) / denom
    half = (z / denom) * math.sqrt(n * p * (1.0 - p) + z * z / 4.0)
    # exact endpoints at the degenerate counts; sqrt rounding can leak
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == trials else min(1.0, center + half)
    return (lo, hi)


def wilson_sigma(hits: int, trials: int, confidence: float = 0.95) -> float:
    """Interval half-width rescaled to one standard unit."""
    lo, hi = wilson_ci(hits, trials, confidence)
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    return (hi - lo) / (2.0 * z)


def intervals_overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return max(a[0], b[0]) <= min(a[1], b[1])


# ---------------------------------------------------------------------
# records and fits


@dataclass(frozen=True)
class EstimateRecord:
    """One event-frequency estimate at fixed parameters."""

    experiment: str
    r: int
    R: int
    k: int
    hits: int
    trials: int
    seed: int
    confidence: float = 0.95

    def __post_init__(self):
        if self.trials < 0 or not 0 <= self.hits <= max(self.trials, 0):
            raise ValueError("need 0 <= hits <= trials")

    @property
    def p_hat(self) -> float:
        return self.hits / self.trials

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_ci(self.hits, self.trials, self.confidence)

    def row(self) -> tuple:
        lo, hi = self.ci
        return (self.experiment, self.r, self.R, self.k, self.hits,
                self.trials, self.p_hat, lo, hi, self.seed)


def merge_records(a: EstimateRecord, b: EstimateRecord) -> EstimateRecord:
    """Pool two estimates of the same parameter point."""
    ka = (a.experiment, a.r, a.R, a.k, a.seed, a.confidence)
    kb = (b.experiment, b.r, b.R, b.k, b.seed, b.confidence)
    if ka != kb:
        raise ValueError("cannot merge records with different parameters")
    return replace(a, hits=a.hits + b.hits, trials=a.trials + b.trials)


@dataclass(frozen=True)
class SeriesFit:
    """Least-squares line through (log ratio, log rate) points."""

    slope: float
    intercept: float
    residual: float
    points: tuple[tuple[float, float], ...]


def fit_loglog(points: Sequence[tuple[float, float]]) -> SeriesFit:
    """Fit log p = slope * log x + intercept by least squares.

    `points` are (x, p) pairs on the raw scale; p = 0 is rejected since
    it has no log.  residual is the rms misfit in log p.
    """
    if len(points) < 2:
        raise ValueError("need at least two points to fit")
    xs = np.asarray([x for x, _ in points], dtype=float)
    ps = np.asarray([p for _, p in points], dtype=float)
    if np.any(xs <= 0.0) or np.any(ps <= 0.0):
        raise ValueError("log fit needs positive ratios and rates")
    lx, lp = np.log(xs), np.log(ps)
    slope, intercept = np.polyfit(lx, lp, 1)
    resid = float(np.sqrt(np.mean((lp - (slope * lx + intercept)) ** 2)))
    pts = tuple((float(a), float(b)) for a, b in zip(lx, lp))
    return SeriesFit(float(slope), float(intercept), resid, pts)


# ---------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat description of one experiment run.

    r_values / R_values broadcast against each other: equal lengths are
    zipped, a length-1 list repeats.  `margin` scales the containing box
    (half-width margin * R).  `samples` counts retained samples per
    chain, `stride` the sweeps between them.
    """

    experiment: str
    r_values: tuple[int, ...] = (1,)
    R_values: tuple[int, ...] = (8,)
    k_max: int = 3
    margin: int = 2
    stride: int = 2
    burn_in: int = DEFAULT_BURN_IN
    chains: int = 2
    samples: int = 200
    seed: int = 0
    confidence: float = 0.95
    out: str = "."

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.r_values or not self.R_values:
            raise ValueError("r_values and R_values must be nonempty")
        object.__setattr__(self, "r_values",
                           tuple(int(r) for r in self.r_values))
        object.__setattr__(self, "R_values",
                           tuple(int(R) for R in self.R_values))
        for r, R in self.pairs():
            if r < 0 or R < r:
                raise ValueError(f"need 0 <= r <= R, got ({r}, {R})")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.margin < 1:
            raise ValueError("margin must be >= 1")
        if min(self.stride, self.chains, self.samples) < 1:
            raise ValueError("stride, chains and samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")

    def pairs(self) -> tuple[tuple[int, int], ...]:
        rs, Rs = self.r_values, self.R_values
        if len(rs) == len(Rs):
            return tuple(zip(rs, Rs))
        if len(rs) == 1:
            return tuple((rs[0], R) for R in Rs)
        if len(Rs) == 1:
            return tuple((r, Rs[0]) for r in rs)
        raise ValueError("r_values and R_values do not broadcast")


_INT_KEYS = ("k_max", "margin", "stride", "burn_in", "chains", "samples",
             "seed")
_LIST_KEYS = {"r": "r_values", "R": "R_values"}


def parse_config_text(text: str) -> dict[str, str]:
    """key = value lines; '#' starts a comment; later keys win."""
    out: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key or not val:
            raise ValueError(f"line {ln}: empty key or value")
        out[key] = val
    return out


def config_from_mapping(m: dict[str, str], **overrides) -> ExperimentConfig:
    kw: dict = {}
    for key, val in m.items():
        if key in _LIST_KEYS:
            kw[_LIST_KEYS[key]] = tuple(
                int(s.strip()) for s in val.split(",") if s.strip())
        elif key in _INT_KEYS:
            kw[key] = int(val)
        elif key == "confidence":
            kw[key] = float(val)
        elif key in ("experiment", "out"):
            kw[key] = val
        else:
            raise ValueError(f"unknown config key {key!r}")
    kw.update(overrides)
    if "experiment" not in kw:
        raise ValueError("config must name an experiment")
    return ExperimentConfig(**kw)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_mapping(parse_config_text(fh.read()), **overrides)


def _rng(seed: int, point: int, chain: int) -> np.random.Generator:
    """Chain generator derived from the master seed; stable under
    reordering of points and chains."""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(point, chain)))


# ---------------------------------------------------------------------
# report writers


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_estimates_csv(path, records: Sequence[EstimateRecord]) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for rec in records:
        lines.append(",".join(_fmt(v) for v in rec.row()))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, SeriesFit):
        return {"slope": obj.slope, "intercept": obj.intercept,
                "residual": obj.residual, "points": _jsonable(obj.points)}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def gates_pass(gates) -> bool:
    """All boolean leaves of a nested gate report."""
    if isinstance(gates, bool):
        return gates
    if isinstance(gates, dict):
        return all(gates_pass(v) for v in gates.values())
    if isinstance(gates, (list, tuple)):
        return all(gates_pass(v) for v in gates)
    return True


def write_reports(outdir, result: dict) -> None:
    os.makedirs(outdir, exist_ok=True)
    write_estimates_csv(os.path.join(outdir, "estimates.csv"),
                        result.get("records", ()))
    write_json(os.path.join(outdir, "fits.json"),
               {"experiment": result["experiment"],
                "fits": result.get("fits", {}),
                "gates": result.get("gates", {}),
                "passed": result["passed"]})
    write_json(os.path.join(outdir, "residuals.json"),
               {"experiment": result["experiment"],
                "residuals": result.get("residuals", {})})


def _result(cfg_or_name, records, fits, gates, residuals) -> dict:
    name = cfg_or_name if isinstance(cfg_or_name, str) \
        else cfg_or_name.experiment
    return {"experiment": name, "records": list(records), "fits": fits,
            "gates": gates, "residuals": residuals,
            "passed": gates_pass(gates)}


# ---------------------------------------------------------------------
# sampling loops


def _empty_trace(g: DomainGraph) -> DoubleTrace:
    z = np.zeros(g.n_edges, dtype=bool)
    return DoubleTrace(g, z.copy(), z.copy(), z.copy(), (), ())


def _count_events(cfg: ExperimentConfig, g: DomainGraph, point: int,
                  n_events: int, eval_fn: Callable, inject: str | None = None
                  ) -> list[EstimateRecord]:
    """Run cfg.chains double-current chains on g, tally the event vector
    returned by eval_fn(dc) and pool chains.  Records come back without
    experiment metadata; callers rewrap them."""
    pooled: list[EstimateRecord] | None = None
    for chain_idx in range(cfg.chains):
        chain = DoubleChain(g, (), (), _rng(cfg.seed, point, chain_idx))
        chain.sweep(cfg.burn_in)
        hits = np.zeros(n_events, dtype=np.int64)
        for _ in range(cfg.samples):
            chain.sweep(cfg.stride)
            dc = chain.double_trace()
            if inject == "empty":
                dc = _empty_trace(g)
            hits += np.asarray(eval_fn(dc), dtype=np.int64)
        part = [EstimateRecord("point", 0, 0, i, int(h), cfg.samples,
                               cfg.seed, cfg.confidence)
                for i, h in enumerate(hits)]
        pooled = part if pooled is None else \
            [merge_records(a, b) for a, b in zip(pooled, part)]
    return pooled


def _retag(rec: EstimateRecord, experiment: str, r: int, R: int, k: int
           ) -> EstimateRecord:
    return replace(rec, experiment=experiment, r=r, R=R, k=k)


# ---------------------------------------------------------------------
# boundary connection


def run_boundary_connection(cfg: ExperimentConfig) -> dict:
    """Frequency of a positive cluster joining Lambda_R to the width-r
    boundary band of Lambda_{margin R}, with the p_hat * log(R/r)
    constant fit across R."""
    records = []
    for point, (r, R) in enumerate(cfg.pairs()):
        g = build_box(max(cfg.margin * R, R, 1))
        recs = _count_events(
            cfg, g, point, 1,
            lambda dc, r=r, R=R: [clusters.boundary_connection(dc, R, r)])
        records.append(_retag(recs[0], "boundary", r, R, 0))

    c_values = {}
    for rec in records:
        if rec.R > rec.r > 0:
            c_values[f"{rec.r}:{rec.R}"] = rec.p_hat * math.log(rec.R / rec.r)
    fits: dict = {"c_values": c_values}
    gates: dict = {}
    if c_values:
        vals = list(c_values.values())
        fits["c_min"] = min(vals)
        fits["c_max"] = max(vals)
        gates["c_positive"] = min(vals) > 0.0
        gates["c_stable_factor_3"] = (
            min(vals) > 0.0 and max(vals) <= 3.0 * min(vals))
    if len(records) >= 2:
        ps = [rec.p_hat for rec in records]
        gates["decreasing"] = all(b < a for a, b in zip(ps, ps[1:]))
        gates["endpoints_separated"] = (
            records[-1].ci[1] < records[0].ci[0])
    return _result(cfg, records, fits, gates, {})


# ---------------------------------------------------------------------
# pivotal events


def _grouped_pairs(cfg: ExperimentConfig) -> dict[int, list[int]]:
    grouped: dict[int, list[int]] = {}
    for r, R in cfg.pairs():
        grouped.setdefault(R, []).append(r)
    return grouped


def _run_pivotal(cfg: ExperimentConfig, hole: bool,
                 inject: str | None = None) -> dict:
    """Shared driver: four-arm box events (hole=False) or crossing-hole
    events with the odd/even flux split (hole=True).  All ratios at one
    R share the sample stream."""
    records = []
    by_R: dict[int, list[EstimateRecord]] = {}
    for point, (R, rs) in enumerate(_grouped_pairs(cfg).items()):
        g = build_box(max(cfg.margin * R, R, 1))
        if hole:
            def eval_fn(dc, rs=rs, R=R):
                out = []
                for r in rs:
                    ev = clusters.detect_a4_blacksquare(dc, (0, 0), r, R)
                    out.extend([ev.occurred, ev.verdict == "odd",
                                ev.verdict == "even"])
                return out
            recs = _count_events(cfg, g, point, 3 * len(rs), eval_fn, inject)
            name = "pivotal_hole"
            for i, r in enumerate(rs):
                for k in range(3):
                    records.append(_retag(recs[3 * i + k], name, r, R, k))
                by_R.setdefault(R, []).append(records[-3])
        else:
            def eval_fn(dc, rs=rs, R=R):
                return [clusters.detect_a4_square(dc, (0, 0), r, R)
                        for r in rs]
            recs = _count_events(cfg, g, point, len(rs), eval_fn, inject)
            name = "pivotal_square"
            for i, r in enumerate(rs):
                records.append(_retag(recs[i], name, r, R, 0))
                by_R.setdefault(R, []).append(records[-1])

    fits: dict = {}
    gates: dict = {}
    for R, recs in by_R.items():
        key = f"R={R}"
        # unobserved ratios carry no log-frequency; fit the seen ones
        pts = [(rec.r / rec.R, rec.p_hat) for rec in recs if rec.hits > 0]
        try:
            fit = fit_loglog(pts)
            fits[key] = fit
            gates[f"slope_ge_1.5[{key}]"] = fit.slope >= 1.5
        except ValueError as err:
            fits[key] = {"error": str(err)}
            gates[f"slope_ge_1.5[{key}]"] = False
    if hole:
        overlap = {}
        for rec in [r for r in records if r.k == 1]:
            even = next(r2 for r2 in records
                        if r2.k == 2 and (r2.r, r2.R) == (rec.r, rec.R))
            lo_o, hi_o = wilson_ci(rec.hits, rec.trials, 0.99)
            lo_e, hi_e = wilson_ci(even.hits, even.trials, 0.99)
            overlap[f"{rec.r}:{rec.R}"] = intervals_overlap(
                (lo_o, hi_o), (lo_e, hi_e))
        gates["odd_even_overlap"] = overlap
    return _result(cfg, records, fits, gates, {})


def run_pivotal_square(cfg: ExperimentConfig) -> dict:
    return _run_pivotal(cfg, hole=False)


def run_pivotal_hole(cfg: ExperimentConfig, inject: str | None = None) -> dict:
    return _run_pivotal(cfg, hole=True, inject=inject)


# ---------------------------------------------------------------------
# multi-arm counts and rectangle tails


def run_ab_criterion(cfg: ExperimentConfig) -> dict:
    """Annulus crossing-cluster counts P[A_2k], k = 1..k_max, plus the
    disjoint long-way crossing tail of a 2R x R free rectangle."""
    K = cfg.k_max
    records = []
    pairs = cfg.pairs()
    for point, (r, R) in enumerate(pairs):
        if r < 1:
            raise ValueError("annulus arms need r >= 1")
        g = build_box(max(cfg.margin * R, R))
        ann = Annulus((0, 0), r, R)

        def eval_fn(dc, ann=ann):
            rep = clusters.count_annulus_crossings(dc, ann)
            return [rep.k_clusters >= k for k in range(1, K + 1)]

        recs = _count_events(cfg, g, point, K, eval_fn)
        for k in range(1, K + 1):
            records.append(_retag(recs[k - 1], "ab_criterion", r, R, k))

    rect_records = []
    for point, (r, R) in enumerate(pairs):
        quad = build_rect_quad(2 * R, R)

        def eval_fn(dc, quad=quad):
            c = clusters.count_rectangle_crossings(dc, quad)
            return [c >= k for k in range(1, K + 1)]

        recs = _count_events(cfg, quad.domain, len(pairs) + point, K, eval_fn)
        rect_records.append(EstimateRecord(
            "ab_rectangle", R, 2 * R, 0, cfg.chains * cfg.samples,
            cfg.chains * cfg.samples, cfg.seed, cfg.confidence))
        for k in range(1, K + 1):
            rect_records.append(_retag(recs[k - 1], "ab_rectangle", R, 2 * R, k))

    fits: dict = {}
    gates: dict = {}
    for r, R in pairs:
        key = f"{r}:{R}"
        arm = {rec.k: rec for rec in records
               if (rec.r, rec.R) == (r, R) and rec.experiment == "ab_criterion"}
        ratios, ratios_hi = {}, {}
        for k in range(1, K):
            if arm[k].hits == 0:
                continue
            ratios[k] = arm[k + 1].p_hat / arm[k].p_hat
            lo_k = wilson_ci(arm[k].hits, arm[k].trials, cfg.confidence)[0]
            hi_k1 = wilson_ci(arm[k + 1].hits, arm[k + 1].trials,
                              cfg.confidence)[1]
            ratios_hi[k] = hi_k1 / lo_k if lo_k > 0 else math.inf
        lam = {k: -math.log(arm[k].p_hat) / math.log(R / r)
               for k in range(1, K + 1) if arm[k].hits > 0 and R > r}
        fits[f"ratio[{key}]"] = ratios
        fits[f"ratio_ci_hi[{key}]"] = ratios_hi
        fits[f"lambda[{key}]"] = lam
        for k in (1, 2):
            if k < K:
                gates[f"ratio_le_0.7[k={k},{key}]"] = (
                    ratios_hi.get(k, math.inf) <= 0.7)
        ks = sorted(lam)
        gates[f"lambda_nondecreasing[{key}]"] = all(
            lam[a] <= lam[b] + 1e-12 for a, b in zip(ks, ks[1:]))

        tail = {rec.k: rec for rec in rect_records
                if (rec.r, rec.R) == (R, 2 * R) and rec.k >= 1}
        c_hat = 1.0 - max((tail[k].p_hat ** (1.0 / k) for k in tail
                           if tail[k].hits > 0), default=0.0)
        fits[f"rect_c_hat[{key}]"] = c_hat
        gates[f"rect_c_positive[{key}]"] = c_hat > 0.0
        gates[f"rect_tail_geometric[{key}]"] = all(
            tail[k].p_hat <= (1.0 - c_hat) ** k + 1e-12 for k in tail)
    return _result(cfg, records + rect_records, fits, gates, {})


# ---------------------------------------------------------------------
# identity suite


def _switching_functionals() -> list[tuple[str, Functional]]:
    return [("one", Functional.one()),
            ("edge+", Functional.edge_positive(((0, 0), (1, 0)))),
            ("clusters", Functional.cluster_count())]


def switching_cases() -> Iterable[tuple]:
    """(case id, ambient sitegraph, subgraph sitegraph, a, b, functional)
    over every connected induced subgraph of the 2x3 grid and every even
    source pair of sizes <= 4."""
    G = build_grid(3, 2)
    sgG = SiteGraph.from_domain(G)
    b_sets = oracle.even_subsets(G.vertex_list(), 4)
    funcs = _switching_functionals()
    for si, sub in enumerate(oracle.connected_induced_subgraphs(G)):
        sgH = SiteGraph.from_domain(sub)
        for a in oracle.even_subsets(sub.vertex_list(), 4):
            for b in b_sets:
                for fname, f in funcs:
                    cid = (f"switch[{si}]"
                           f"a={sorted(a)}b={sorted(b)}f={fname}")
                    yield cid, sgG, sgH, a, b, f


def principle_cases() -> Iterable[tuple]:
    """(case id, multigraph, a, mask functional) over a fixed multigraph
    corpus, skipping unrealizable source sets."""
    specs = [
        ("double-edge", ["u", "v"], [("u", "v")] * 2),
        ("triple-edge", ["u", "v"], [("u", "v")] * 3),
        ("doubled-path", ["u", "m", "v"],
         [("u", "m")] * 2 + [("m", "v")] * 2),
        ("mixed-path", ["u", "m", "v"], [("u", "m")] + [("m", "v")] * 2),
        ("triangle", ["u", "v", "w"],
         [("u", "v"), ("v", "w"), ("w", "u")]),
        ("triangle-doubled", ["u", "v", "w"],
         [("u", "v"), ("u", "v"), ("v", "w"), ("w", "u")]),
        ("star", ["c", "a", "b", "d"],
         [("c", "a"), ("c", "b"), ("c", "d"), ("c", "d")]),
        ("square", ["a", "b", "c", "d"],
         [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")]),
        ("theta", ["u", "m", "v"],
         [("u", "m")] * 2 + [("m", "v")] * 2 + [("u", "v")] * 2),
    ]
    fns = [("one", lambda m: 1.0),
           ("bits", lambda m: float(m.bit_count())),
           ("low-slot", lambda m: float(m & 1))]
    for name, sites, pairs in specs:
        mg = SiteGraph.from_pairs(sites, pairs)
        groups = oracle._parity_groups(mg, 20)
        for a in oracle.even_subsets(sites, 4):
            if mg.source_mask(a) not in groups:
                continue
            for fname, fn in fns:
                yield f"principle[{name}]a={sorted(a)}f={fname}", mg, a, fn


def flux_cases() -> list[tuple]:
    return [
        ("flux[2x2]", build_grid(2, 2), (0, 0), (0, 1)),
        ("flux[3x2-below]", build_grid(3, 2), (0, 0), (0, -1)),
        ("flux[3x2-right]", build_grid(3, 2), (0, 0), (1, 0)),
        ("flux[box1-diag]", build_box(1), (0, 0), (-1, -1)),
    ]


def run_identity_suite(cfg: ExperimentConfig | None = None,
                       corrupt_case: str | None = None,
                       cases: Sequence[tuple] | None = None,
                       exact_mode: bool = True) -> dict:
    """Exhaustive residual checks for the exact identities.

    `cases` overrides the switching corpus (an empty override is an
    error); `corrupt_case` injects a weight fault into the named case so
    the failure path stays exercised.
    """
    sw = list(switching_cases()) if cases is None else list(cases)
    if not sw:
        raise ValueError("no cases")
    failures: list[dict] = []
    resid: dict = {}

    worst = 0.0
    n_exact = 0
    n_exact_bad = 0
    for cid, sgG, sgH, a, b, f in sw:
        scale = 1.0 + 1e-6 if cid == corrupt_case else 1.0
        rep = oracle.verify_switching_lemma(sgG, sgH, a, b, f,
                                            rhs_scale=scale)
        worst = max(worst, rep.residual)
        if rep.residual > IDENTITY_TOL:
            failures.append({"case": cid, "residual": rep.residual})
        elif exact_mode:
            n_exact += 1
            if not oracle.switching_exact_equal(sgG, sgH, a, b, f):
                n_exact_bad += 1
                failures.append({"case": cid + "|formal",
                                 "residual": math.inf})
    resid["switching_max"] = worst
    resid["switching_cases"] = len(sw)
    if exact_mode:
        resid["switching_formal_cases"] = n_exact
        resid["switching_formal_failures"] = n_exact_bad

    worst = 0.0
    n = 0
    for cid, mg, a, fn in principle_cases():
        rep = oracle.verify_switching_principle(mg, a, fn)
        worst = max(worst, rep.residual)
        n += 1
        if rep.residual > IDENTITY_TOL:
            failures.append({"case": cid, "residual": rep.residual})
    resid["principle_max"] = worst
    resid["principle_cases"] = n

    worst = 0.0
    qual = 0
    for cid, g, fu, fv in flux_cases():
        rep = oracle.verify_flux_half(g, fu, fv)
        worst = max(worst, rep.max_residual)
        qual += rep.qualifying_classes
        if rep.max_residual > IDENTITY_TOL:
            failures.append({"case": cid, "residual": rep.max_residual})
    resid["flux_max"] = worst
    resid["flux_qualifying_classes"] = qual

    worst = 0.0
    q_err = 0.0
    for beta in (0.0, BETA_C, 1.0):
        rep = oracle.validate_parity_reduction(beta)
        worst = max(worst, rep["per_parity_max_residual"],
                    rep["factorization_max_residual"])
        if beta == BETA_C:
            q_err = abs(rep["q_even_closed"] - rep["q_even_series"])
    resid["parity_max"] = worst
    resid["q_even_error"] = q_err
    if worst > IDENTITY_TOL:
        failures.append({"case": "parity-reduction", "residual": worst})

    gates = {"all_residuals_ok": not failures}
    result = _result("identity", [], {}, gates, resid)
    result["failures"] = failures
    return result


# ---------------------------------------------------------------------
# coupling suite


def _eta_marginals(g: DomainGraph, t: float = TANH_BC) -> np.ndarray:
    """Exact per-edge odd-parity probability of a sourceless current."""
    tab = oracle.enumerate_parity(g, ())
    w = np.power(float(t), tab.sizes)
    z = float(w.sum())
    out = np.empty(tab.graph.n_edges)
    for e in range(tab.graph.n_edges):
        sel = (tab.masks >> e) & 1 == 1
        out[e] = float(w[sel].sum()) / z
    return out


def _column_masks(g: DomainGraph) -> tuple[np.ndarray, np.ndarray]:
    vs = np.asarray(g.vertex_list())
    return vs[:, 0] == vs[:, 0].min(), vs[:, 0] == vs[:, 0].max()


def _crossing_hits(g, omega: np.ndarray, left: np.ndarray,
                   right: np.ndarray) -> bool:
    lab = cluster_labels_of(g, np.asarray(omega, dtype=bool))
    return bool(np.intersect1d(lab[left], lab[right]).size > 0)


def run_coupling_suite(cfg: ExperimentConfig) -> dict:
    """Cross-checks between the coupled FK map, the direct FK chain, the
    spin chain and the exact small-graph oracles.  Failure entries name
    the check and the edge or pair involved."""
    n_per = cfg.chains * cfg.samples
    failures: list[str] = []
    gates: dict = {}
    fits: dict = {}

    # (i) Lambda_4 left-right crossing: coupled FK vs direct FK chain.
    g4 = build_box(4)
    left, right = _column_masks(g4)
    hits_map = 0
    for ch in range(cfg.chains):
        rng = _rng(cfg.seed, 0, ch)
        chain = DualIsingChain(g4, (), rng)
        chain.sweep(cfg.burn_in)
        for _ in range(cfg.samples):
            chain.sweep(cfg.stride)
            omega = fk_from_current(chain.current_trace(), rng)
            hits_map += _crossing_hits(g4, omega, left, right)
    hits_dir = 0
    for ch in range(cfg.chains):
        rng = _rng(cfg.seed, 1, ch)
        for _ in range(cfg.samples):
            omega = sample_fk(g4, rng, sweeps=cfg.burn_in)
            hits_dir += _crossing_hits(g4, omega, left, right)
    ci_map = wilson_ci(hits_map, n_per, 0.99)
    ci_dir = wilson_ci(hits_dir, n_per, 0.99)
    ok = intervals_overlap(ci_map, ci_dir)
    gates["crossing_overlap"] = ok
    fits["crossing"] = {"p_map": hits_map / n_per, "p_direct": hits_dir / n_per,
                        "ci_map": ci_map, "ci_direct": ci_dir}
    if not ok:
        failures.append("crossing Lambda_4 left-right")

    # (ii) spin pair correlations vs FK connectivity, independent chains.
    pair_list = [((0, 0), (0, 0)), ((0, 0), (1, 0)), ((0, 0), (2, 2)),
                 ((-3, 0), (3, 0))]
    sg4 = SiteGraph.from_domain(g4)
    iu = np.asarray([sg4.site_index(u) for u, _ in pair_list])
    iv = np.asarray([sg4.site_index(v) for _, v in pair_list])
    spin_hits = np.zeros(len(pair_list), dtype=np.int64)
    fk_hits = np.zeros(len(pair_list), dtype=np.int64)
    for ch in range(cfg.chains):
        chain = SpinFkChain(sg4, _rng(cfg.seed, 2, ch))
        chain.sweep(cfg.burn_in)
        for _ in range(cfg.samples):
            chain.sweep(cfg.stride)
            s = chain.spins
            spin_hits += s[iu] == s[iv]
    for ch in range(cfg.chains):
        chain = SpinFkChain(sg4, _rng(cfg.seed, 3, ch))
        chain.sweep(cfg.burn_in)
        for _ in range(cfg.samples):
            chain.sweep(cfg.stride)
            lab = chain.bond_labels()
            fk_hits += lab[iu] == lab[iv]
    pair_gates = {}
    for i, pair in enumerate(pair_list):
        ci_s = wilson_ci(int(spin_hits[i]), n_per, 0.99)
        lo_f, hi_f = wilson_ci(int(fk_hits[i]), n_per, 0.99)
        # P[s_u = s_v] = (1 + P[u <-> v]) / 2 under the coupling
        ok = intervals_overlap(ci_s, ((1 + lo_f) / 2, (1 + hi_f) / 2))
        pair_gates[str(pair)] = ok
        if not ok:
            failures.append(f"pair {pair}")
    gates["pair_overlap"] = pair_gates

    # (iii) 2x3 grid: chain marginals vs exact oracles, 4 sigma gates.
    g6 = build_grid(3, 2)
    eta_exact = _eta_marginals(g6)
    pos_exact = oracle.edge_positive_marginals(g6, ())
    eta_hits = np.zeros(g6.n_edges, dtype=np.int64)
    pos_hits = np.zeros(g6.n_edges, dtype=np.int64)
    for ch in range(cfg.chains):
        chain = DualIsingChain(g6, (), _rng(cfg.seed, 4, ch))
        chain.sweep(cfg.burn_in)
        for _ in range(cfg.samples):
            chain.sweep(cfg.stride)
            tr = chain.current_trace()
            eta_hits += np.asarray(tr.eta, dtype=np.int64)
            pos_hits += np.asarray(tr.positive, dtype=np.int64)
    edge_keys = g6.edge_list()
    eta_gates, pos_gates = {}, {}
    for e in range(g6.n_edges):
        sig = max(wilson_sigma(int(eta_hits[e]), n_per), 1e-12)
        ok = abs(eta_hits[e] / n_per - eta_exact[e]) <= 4.0 * sig
        eta_gates[str(edge_keys[e])] = ok
        if not ok:
            failures.append(f"eta marginal {edge_keys[e]}")
        sig = max(wilson_sigma(int(pos_hits[e]), n_per), 1e-12)
        ok = abs(pos_hits[e] / n_per - pos_exact[e]) <= 4.0 * sig
        pos_gates[str(edge_keys[e])] = ok
        if not ok:
            failures.append(f"trace marginal {edge_keys[e]}")
    gates["eta_4sigma"] = eta_gates
    gates["trace_positive_4sigma"] = pos_gates

    # (iv) 2x3 grid: all pairwise spin correlations vs the exact oracle.
    sg6 = SiteGraph.from_domain(g6)
    labels = g6.vertex_list()
    all_pairs = [(labels[i], labels[j]) for i in range(len(labels))
                 for j in range(i + 1, len(labels))]
    ju = np.asarray([sg6.site_index(u) for u, _ in all_pairs])
    jv = np.asarray([sg6.site_index(v) for _, v in all_pairs])
    pair_hits = np.zeros(len(all_pairs), dtype=np.int64)
    for ch in range(cfg.chains):
        chain = SpinFkChain(sg6, _rng(cfg.seed, 5, ch))
        chain.sweep(cfg.burn_in)
        for _ in range(cfg.samples):
            chain.sweep(cfg.stride)
            s = chain.spins
            pair_hits += s[ju] == s[jv]
    corr_gates = {}
    for i, (u, v) in enumerate(all_pairs):
        exact = oracle.correlation_exact(g6, [u, v])
        p_exact = (1.0 + exact) / 2.0
        h = int(pair_hits[i])
        sig = max(wilson_sigma(h, n_per), 1e-12)
        ok = abs(h / n_per - p_exact) <= 4.0 * sig
        corr_gates[str((u, v))] = ok
        if not ok:
            failures.append(f"correlation {(u, v)}")
    gates["pair_correlation_4sigma"] = corr_gates

    result = _result("coupling", [], fits, gates, {})
    result["failures"] = failures
    return result


# ---------------------------------------------------------------------
# harmonic sandwich


_FACE_CHOICES = ((0, 0), (-1, 0), (0, -1), (-1, -1))


def _sandwich_geometry(R: int) -> tuple[int, tuple[int, int]]:
    r = max(1, R // 8)
    return r, ((3 * R) // 2, 0)


def run_harmonic_sandwich(cfg: ExperimentConfig) -> dict:
    """Wired-box connection probability in Lambda_{2R} bracketed between
    the dual and primal killed-walk kernels.

    The event joins Lambda_{R/8}(x), x = (3R/2, 0), to Lambda_R; both
    boxes are wired, so its probability is the squared FK connectivity
    of the merged graph.  Constants (c, C) are fitted at the first R and
    must keep c Z_dual / 2 <= p_hat <= 2 C Z_primal at the rest."""
    records = []
    rows = []
    for point, R in enumerate(cfg.R_values):
        r, x = _sandwich_geometry(R)
        box = build_box(2 * R)
        probe = [(x[0] + dx, x[1] + dy)
                 for dx in range(-r, r + 1) for dy in range(-r, r + 1)]
        target = [(dx, dy)
                  for dx in range(-R, R + 1) for dy in range(-R, R + 1)]
        merged = merge_vertices(box, [("probe", probe), ("target", target)])
        sgm = SiteGraph.from_domain(merged)
        i_probe = sgm.site_index("probe")
        i_target = sgm.site_index("target")
        hits = 0
        for ch in range(cfg.chains):
            chain = SpinFkChain(sgm, _rng(cfg.seed, point, ch))
            chain.sweep(cfg.burn_in)
            for _ in range(cfg.samples):
                chain.sweep(cfg.stride)
                lab = chain.bond_labels()
                hits += bool(lab[i_probe] == lab[i_target])
        trials = cfg.chains * cfg.samples
        rec = EstimateRecord("sandwich", r, R, 0, hits, trials,
                             cfg.seed, cfg.confidence)
        records.append(rec)

        net = harmonic.absorbing_network(box)
        z_primal = harmonic.z_kernel(net, x, (0, 0))
        dual = harmonic.dual_domain(box)
        dnet = harmonic.absorbing_network(dual)
        z_choices = [harmonic.z_kernel(dnet, (x[0] + ox, x[1] + oy), (ox, oy))
                     for ox, oy in _FACE_CHOICES]
        z_dual = z_choices[0]
        variation = max(z_choices) / min(z_choices) - 1.0 \
            if min(z_choices) > 0 else math.inf
        rows.append({"R": R, "r": r, "rec": rec, "z": z_primal,
                     "z_dual": z_dual, "variation": variation})

    fits: dict = {"p_hat": {}, "z_primal": {}, "z_dual": {},
                  "dual_choice_variation": {}}
    gates: dict = {}
    base = rows[0]
    p0 = base["rec"].p_hat ** 2
    c_fit = p0 / base["z_dual"] if base["z_dual"] > 0 else 0.0
    C_fit = p0 / base["z"] if base["z"] > 0 else math.inf
    fits["c"] = c_fit
    fits["C"] = C_fit
    fits["fit_R"] = base["R"]
    for row in rows:
        key = f"R={row['R']}"
        p = row["rec"].p_hat ** 2
        fits["p_hat"][key] = p
        fits["z_primal"][key] = row["z"]
        fits["z_dual"][key] = row["z_dual"]
        fits["dual_choice_variation"][key] = row["variation"]
        gates[f"dual_choice_lt_10pct[{key}]"] = row["variation"] < 0.10
        if row is not base:
            gates[f"lower[{key}]"] = p >= 0.5 * c_fit * row["z_dual"]
            gates[f"upper[{key}]"] = p <= 2.0 * C_fit * row["z"]

    quads = [(1, 1, 40), (2, 1, 80), (2, 2, 120)]
    z_err = 0.0
    for w, h, depth in quads:
        net = harmonic.build_network(build_rect_quad(w, h))
        verts = net.base.vertex_list()
        for a in verts:
            for b in verts:
                z_err = max(z_err, abs(
                    harmonic.z_kernel(net, a, b)
                    - harmonic.z_path_sum(net, a, b, depth)))
    residuals = {"z_path_sum_max": z_err}
    gates["z_path_sum_1e-6"] = z_err <= 1e-6
    return _result(cfg, records, fits, gates, residuals)


# ---------------------------------------------------------------------
# dispatch


EXPERIMENT_RUNNERS: dict[str, Callable] = {
    "boundary": run_boundary_connection,
    "pivotal_square": run_pivotal_square,
    "pivotal_hole": run_pivotal_hole,
    "ab_criterion": run_ab_criterion,
    "identity": run_identity_suite,
    "coupling": run_coupling_suite,
    "sandwich": run_harmonic_sandwich,
}


def run_experiment(cfg: ExperimentConfig) -> dict:
    return EXPERIMENT_RUNNERS[cfg.experiment](cfg)
