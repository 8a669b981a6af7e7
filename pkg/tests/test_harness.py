"""Harness checks: Wilson intervals, record pooling, config parsing,
experiment drivers at small scale, fault injection, and byte-stable
report regeneration."""

import filecmp
import itertools
import math

import numpy as np
import pytest

from currentlab import harness as hn
from currentlab import oracle as oc
from currentlab.lattice import build_grid


# ---------------------------------------------------------------------
# wilson intervals


def test_wilson_edge_cases():
    lo, hi = hn.wilson_ci(0, 40)
    assert lo == 0.0 and 0 < hi < 0.2
    lo, hi = hn.wilson_ci(40, 40)
    assert hi == 1.0 and 0.8 < lo < 1
    lo, hi = hn.wilson_ci(50, 100, 0.95)
    assert abs(lo - 0.404) < 1e-3
    assert abs(hi - 0.596) < 1e-3


def test_wilson_rejects_bad_inputs():
    with pytest.raises(ValueError):
        hn.wilson_ci(0, 0)
    with pytest.raises(ValueError):
        hn.wilson_ci(5, 3)
    with pytest.raises(ValueError):
        hn.wilson_ci(1, 3, confidence=1.0)


def test_wilson_orders_and_contains_p_hat():
    for hits in range(0, 61, 7):
        lo, hi = hn.wilson_ci(hits, 60)
        assert 0.0 <= lo <= hits / 60 <= hi <= 1.0


def test_wilson_coverage_bernoulli():
    # 95% intervals over 1000 replicates of Bernoulli(0.3), n = 150
    rng = np.random.default_rng(123)
    covered = 0
    for _ in range(1000):
        hits = int(rng.binomial(150, 0.3))
        lo, hi = hn.wilson_ci(hits, 150)
        covered += lo <= 0.3 <= hi
    assert covered >= 900


# ---------------------------------------------------------------------
# records and fits


def _rec(hits, trials, **kw):
    base = dict(experiment="boundary", r=1, R=8, k=0, seed=5)
    base.update(kw)
    return hn.EstimateRecord(hits=hits, trials=trials, **base)


def test_merge_records_is_associative():
    a, b, c = _rec(3, 10), _rec(5, 10), _rec(0, 7)
    left = hn.merge_records(hn.merge_records(a, b), c)
    right = hn.merge_records(a, hn.merge_records(b, c))
    assert left == right
    assert left.hits == 8 and left.trials == 27


def test_merge_records_rejects_mismatch():
    with pytest.raises(ValueError):
        hn.merge_records(_rec(1, 5), _rec(1, 5, R=16))


def test_record_rejects_bad_counts():
    with pytest.raises(ValueError):
        _rec(6, 5)


def test_fit_loglog_recovers_power_law():
    pts = [(x, 0.3 * x ** 2.0) for x in (1 / 4, 1 / 8, 1 / 16, 1 / 32)]
    fit = hn.fit_loglog(pts)
    assert abs(fit.slope - 2.0) < 1e-12
    assert abs(fit.intercept - math.log(0.3)) < 1e-12
    assert fit.residual < 1e-12


def test_fit_loglog_rejects_degenerate():
    with pytest.raises(ValueError):
        hn.fit_loglog([(0.5, 0.1)])
    with pytest.raises(ValueError):
        hn.fit_loglog([(0.5, 0.0), (0.25, 0.1)])


# ---------------------------------------------------------------------
# configs


def test_config_broadcast_pairs():
    cfg = hn.ExperimentConfig("boundary", r_values=(1,), R_values=(8, 16, 32))
    assert cfg.pairs() == ((1, 8), (1, 16), (1, 32))
    cfg = hn.ExperimentConfig("boundary", r_values=(1, 2), R_values=(8, 16))
    assert cfg.pairs() == ((1, 8), (2, 16))
    with pytest.raises(ValueError):
        hn.ExperimentConfig("boundary", r_values=(1, 2), R_values=(8, 16, 32))


def test_config_validation():
    with pytest.raises(ValueError):
        hn.ExperimentConfig("nope")
    with pytest.raises(ValueError):
        hn.ExperimentConfig("boundary", r_values=(), R_values=(8,))
    with pytest.raises(ValueError):
        hn.ExperimentConfig("boundary", r_values=(9,), R_values=(8,))
    # r = R is allowed: the boundary run uses it as a sanity point
    cfg = hn.ExperimentConfig("boundary", r_values=(8,), R_values=(8,))
    assert cfg.pairs() == ((8, 8),)


def test_config_text_round_trip(tmp_path):
    text = """
    # boundary sweep
    experiment = boundary
    r = 1
    R = 8, 16, 32   # three scales
    samples = 50
    chains = 3
    seed = 42
    confidence = 0.99
    """
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = hn.load_config(path)
    assert cfg.experiment == "boundary"
    assert cfg.R_values == (8, 16, 32)
    assert cfg.chains == 3 and cfg.samples == 50 and cfg.seed == 42
    assert cfg.confidence == 0.99


def test_config_rejects_unknown_key():
    with pytest.raises(ValueError):
        hn.config_from_mapping({"experiment": "boundary", "wat": "1"})
    with pytest.raises(ValueError):
        hn.parse_config_text("just words\n")


def test_gates_pass_walks_nesting():
    assert hn.gates_pass({"a": True, "b": {"c": [True, True]}})
    assert not hn.gates_pass({"a": True, "b": {"c": [True, False]}})


# ---------------------------------------------------------------------
# experiment drivers, small scale


def test_boundary_r_equals_R_is_certain():
    cfg = hn.ExperimentConfig("boundary", r_values=(4,), R_values=(4,),
                              chains=1, samples=25, seed=1)
    res = hn.run_experiment(cfg)
    rec = res["records"][0]
    assert rec.hits == rec.trials == 25


def test_boundary_records_and_fit_keys():
    cfg = hn.ExperimentConfig("boundary", r_values=(1,), R_values=(4, 8),
                              chains=2, samples=40, seed=3)
    res = hn.run_experiment(cfg)
    assert [(r.r, r.R) for r in res["records"]] == [(1, 4), (1, 8)]
    assert all(r.trials == 80 for r in res["records"])
    assert set(res["fits"]["c_values"]) == {"1:4", "1:8"}
    assert "decreasing" in res["gates"]


def test_pivotal_square_slope_on_shared_stream():
    cfg = hn.ExperimentConfig("pivotal_square", r_values=(4, 2, 1),
                              R_values=(8,), margin=4, chains=2,
                              samples=120, seed=7)
    res = hn.run_experiment(cfg)
    ps = [r.p_hat for r in res["records"]]
    assert ps[0] > ps[1] > ps[2]
    fit = res["fits"]["R=8"]
    assert 1.0 < fit.slope < 3.5


def test_pivotal_hole_empty_injection_never_fires():
    cfg = hn.ExperimentConfig("pivotal_hole", r_values=(2,), R_values=(6,),
                              margin=4, chains=1, samples=30, seed=7)
    res = hn.run_pivotal_hole(cfg, inject="empty")
    assert all(r.hits == 0 for r in res["records"])


def test_pivotal_hole_subclass_partition():
    cfg = hn.ExperimentConfig("pivotal_hole", r_values=(2,), R_values=(6,),
                              margin=4, chains=2, samples=60, seed=9)
    res = hn.run_experiment(cfg)
    by_k = {r.k: r for r in res["records"]}
    assert by_k[0].hits == by_k[1].hits + by_k[2].hits
    assert "odd_even_overlap" in res["gates"]


def test_ab_criterion_counts_nested_and_trivial_row():
    cfg = hn.ExperimentConfig("ab_criterion", r_values=(2,), R_values=(8,),
                              k_max=3, chains=2, samples=80, seed=5)
    res = hn.run_experiment(cfg)
    arm = {r.k: r for r in res["records"] if r.experiment == "ab_criterion"}
    assert arm[1].hits >= arm[2].hits >= arm[3].hits
    rect = {r.k: r for r in res["records"] if r.experiment == "ab_rectangle"}
    assert rect[0].hits == rect[0].trials  # crossing count >= 0 always
    assert rect[1].hits >= rect[2].hits


def test_sandwich_small_scale():
    cfg = hn.ExperimentConfig("sandwich", R_values=(8, 12), chains=2,
                              samples=80, seed=11)
    res = hn.run_experiment(cfg)
    assert res["residuals"]["z_path_sum_max"] <= 1e-6
    assert set(res["fits"]["p_hat"]) == {"R=8", "R=12"}
    assert res["fits"]["c"] > 0 and res["fits"]["C"] > 0
    assert "lower[R=12]" in res["gates"] and "upper[R=12]" in res["gates"]


def test_coupling_suite_consistent_at_fixed_seed():
    cfg = hn.ExperimentConfig("coupling", chains=2, samples=300, seed=11)
    res = hn.run_experiment(cfg)
    assert res["failures"] == []
    assert res["passed"]
    assert res["gates"]["pair_overlap"]["((0, 0), (0, 0))"]


# ---------------------------------------------------------------------
# identity suite


def test_identity_suite_restricted_corpus_passes():
    cases = list(itertools.islice(hn.switching_cases(), 150))
    res = hn.run_identity_suite(cases=cases)
    assert res["passed"]
    assert res["residuals"]["switching_max"] <= 1e-10
    assert res["residuals"]["switching_formal_failures"] == 0
    assert res["residuals"]["principle_max"] <= 1e-10
    assert res["residuals"]["flux_max"] <= 1e-10
    assert res["residuals"]["parity_max"] <= 1e-10
    assert res["residuals"]["q_even_error"] <= 1e-6


def test_identity_suite_corrupt_case_is_located():
    cases = list(itertools.islice(hn.switching_cases(), 40))
    target = cases[17][0]
    res = hn.run_identity_suite(cases=cases, corrupt_case=target)
    assert not res["passed"]
    assert [f["case"] for f in res["failures"]] == [target]


def test_identity_suite_empty_corpus_errors():
    with pytest.raises(ValueError, match="no cases"):
        hn.run_identity_suite(cases=[])


def test_formal_checker_agrees_with_symbolic_mode():
    cases = list(itertools.islice(hn.switching_cases(), 2000))
    for cid, sgG, sgH, a, b, f in cases[::97]:
        fast = oc.switching_exact_equal(sgG, sgH, a, b, f)
        slow = oc.verify_switching_lemma(sgG, sgH, a, b, f, mode="exact")
        assert fast == slow.exact_equal is True, cid


def test_formal_checker_detects_weighted_fault():
    g = build_grid(2, 2)
    a, b = [(0, 0), (1, 0)], [(0, 0), (0, 1)]
    f = oc.Functional.cluster_count()
    assert oc.switching_exact_equal(g, g, a, b, f)
    assert not oc.switching_exact_equal(g, g, a, b, f, rhs_weight=2)
    rep = oc.verify_switching_lemma(g, g, a, b, f, rhs_scale=1.0 + 1e-5)
    assert rep.residual > 1e-10


# ---------------------------------------------------------------------
# determinism


def test_reports_regenerate_byte_identical(tmp_path):
    cfg = hn.ExperimentConfig("boundary", r_values=(1,), R_values=(4, 6),
                              chains=2, samples=35, seed=21)
    for d in ("a", "b"):
        hn.write_reports(tmp_path / d, hn.run_experiment(cfg))
    for name in ("estimates.csv", "fits.json", "residuals.json"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name,
                           shallow=False)


def test_seed_changes_output():
    mk = lambda s: hn.run_experiment(hn.ExperimentConfig(
        "boundary", r_values=(1,), R_values=(6,), chains=1, samples=60,
        seed=s))["records"][0].hits
    assert mk(1) != mk(2) or mk(3) != mk(4)


def test_estimates_csv_schema(tmp_path):
    cfg = hn.ExperimentConfig("boundary", r_values=(1,), R_values=(4,),
                              chains=1, samples=20, seed=2)
    hn.write_reports(tmp_path, hn.run_experiment(cfg))
    lines = (tmp_path / "estimates.csv").read_text().splitlines()
    assert lines[0] == "experiment,r,R,k,hits,trials,p_hat,ci_lo,ci_hi,seed"
    fields = lines[1].split(",")
    assert fields[0] == "boundary"
    assert fields[-1] == "2"
    lo, hi = float(fields[7]), float(fields[8])
    assert 0.0 <= lo <= float(fields[6]) <= hi <= 1.0
