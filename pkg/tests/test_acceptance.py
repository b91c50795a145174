"""Acceptance suite: one test (or group of sub-checks) per criterion.

Every check logs a ``criterion N: PASS|FAIL`` line; the lines are repeated
in the pytest terminal summary.
"""

import csv
import itertools
import json
import math
import time
from importlib import resources

import numpy as np
import pytest
from conftest import (CountingOracle, categorical_data, design, random_linear_oracle, record, regression_data,
                      stacked_cross_reliance)
from scipy.optimize import minimize

from blackbox_reliance import admissions
from blackbox_reliance.cli import main
from blackbox_reliance.losses import LossSpec
from blackbox_reliance.models import PROBABILITY, BoundedOracle, FitterSpec, Oracle, fit_huber, fit_ols, huber_objective
from blackbox_reliance.reliance import (cross_distribution_check, estimate_reliance, expected_kl, mean_independent,
                                        order_groups, parity_test, population_reliance, random_joint,
                                        reliance_bounds, reliance_categorical, reliance_exhaustive)
from blackbox_reliance.reliance.population import DiscreteJoint
from blackbox_reliance.tabular import ColumnSchema, Dataset, Partition

SQUARE = LossSpec("square")
CROSS_ENTROPY = LossSpec("cross_entropy")
FIXTURE_INI = str(resources.files("blackbox_reliance") / "data" / "chunks_fixture.ini")
FIXTURE_CSV = str(resources.files("blackbox_reliance") / "data" / "chunks_fixture.csv")


def test_criterion_1_estimator_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        n, levels = int(rng.integers(2, 501)), int(rng.integers(1, 6))
        logistic = bool(rng.integers(0, 2))
        data, part = categorical_data(rng, n, levels, binary_y=logistic, n_x2=int(rng.integers(0, 3)))
        f = random_linear_oracle(rng, ("x1", *part.x2), logistic=logistic)
        loss = CROSS_ENTROPY if logistic and seed % 2 else SQUARE
        fast = reliance_categorical(data, f, loss, part)
        slow = reliance_exhaustive(data, f, loss, part)
        worst = max(worst, abs(fast - slow) / max(abs(slow), 1e-300))
    elapsed = time.perf_counter() - start
    ok = record(1, worst <= 1e-10 and elapsed < 30, f"max rel diff {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_evaluation_counts():
    rng = np.random.default_rng(2)
    ok = True
    for n, levels in [(2, 1), (37, 3), (120, 5)]:
        data, part = categorical_data(rng, n, levels)
        c = len(np.unique(data["x1"]))
        fast = CountingOracle(random_linear_oracle(rng, ("x1", "w0"), logistic=True))
        reliance_categorical(data, fast, SQUARE, part)
        slow = CountingOracle(random_linear_oracle(rng, ("x1", "w0"), logistic=True))
        reliance_exhaustive(data, slow, SQUARE, part)
        ok &= fast.calls == n * c and slow.calls == n * (n - 1)
    assert record(2, ok, "categorical n*|C|, exhaustive n(n-1)")


def test_criterion_3_population_r_at_least_b():
    start = time.perf_counter()
    gap_min, mi_max, general_min = math.inf, 0.0, math.inf
    for seed in range(50):
        rng = np.random.default_rng(3000 + seed)
        n_y, n1, n2 = (int(v) for v in rng.integers(2, 5, 3))
        n2 = int(rng.integers(1, 5))
        ys = rng.normal(size=n_y)
        general = DiscreteJoint(random_joint(rng, n_y, n1, n2).p, ys)
        r, b = population_reliance(general, SQUARE)
        gap_min = min(gap_min, r - b)
        general_min = min(general_min, r - b)
        assert not mean_independent(general)
        mi = DiscreteJoint(random_joint(rng, n_y, n1, n2, mean_independent=True).p, ys)
        r, b = population_reliance(mi, SQUARE)
        gap_min = min(gap_min, r - b)
        mi_max = max(mi_max, abs(r - b))
    elapsed = time.perf_counter() - start
    ok = gap_min >= -1e-12 and mi_max <= 1e-12 and general_min > 1e-6 and elapsed < 10
    assert record(3, ok, f"min r-b {gap_min:.2e}, max |r-b| under independence {mi_max:.2e}, "
                         f"min r-b otherwise {general_min:.2e}")


def kl_by_cells(p):
    """Expected KL by explicit loops over (a, b, c)."""
    _, n1, n2 = p.shape
    p12 = p.sum(axis=0)
    p1 = p12.sum(axis=1)
    total = 0.0
    for a, b, c in itertools.product(range(n1), range(n1), range(n2)):
        u = p[1, a, c] / p12[a, c]
        v = p[1, b, c] / p12[b, c]
        total += p12[a, c] * p1[b] * (u * math.log(u / v) + (1 - u) * math.log((1 - u) / (1 - v)))
    return total


def test_criterion_4_kl_identity():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(4000 + seed)
        joint = random_joint(rng, 2, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        r, b = population_reliance(joint, CROSS_ENTROPY)
        worst = max(worst, abs((r - b) - kl_by_cells(joint.p)), abs(expected_kl(joint) - kl_by_cells(joint.p)))
    elapsed = time.perf_counter() - start
    assert record(4, worst <= 1e-8 and elapsed < 10, f"max diff {worst:.2e}")


def test_criterion_5_bounds_containment():
    start = time.perf_counter()
    violations = checks = 0
    for seed in range(50):
        rng = np.random.default_rng(5000 + seed)
        data, part = categorical_data(rng, int(rng.integers(2, 60)), int(rng.integers(1, 5)))
        g = random_linear_oracle(rng, ("x1", "w0"), logistic=True)
        shrink, widen = rng.uniform(0.2, 1.0), rng.uniform(0.0, 1.0)
        lo = Oracle(lambda X, g=g, s=shrink: s * g(X), g.columns, PROBABILITY)
        hi = Oracle(lambda X, g=g, s=shrink, w=widen: s * g(X) + w * (1 - s * g(X)), g.columns, PROBABILITY)
        loss = CROSS_ENTROPY if seed % 2 else SQUARE
        iv = reliance_bounds(data, BoundedOracle(lo, hi), loss, part)
        for k in range(20):
            t = random_linear_oracle(np.random.default_rng(k + 100 * seed), g.columns, logistic=True)
            f = Oracle(lambda X, t=t, lo=lo, hi=hi: lo(X) + t(X) * (hi(X) - lo(X)), g.columns, PROBABILITY)
            r = estimate_reliance(data, f, loss, part).r_hat
            checks += 1
            violations += not iv.contains(r, tol=1e-12)
    elapsed = time.perf_counter() - start
    assert record(5, violations == 0 and elapsed < 30, f"{violations} violations in {checks} checks")


def test_criterion_6_equivalent_ranking():
    start = time.perf_counter()
    ok, worst = True, 0.0
    for seed in range(20):
        rng = np.random.default_rng(6000 + seed)
        groups = {}
        for g in ("g1", "g2", "g3"):
            data, part = categorical_data(rng, int(rng.integers(8, 25)), int(rng.integers(2, 5)))
            groups[g] = (data, random_linear_oracle(rng, ("x1", "w0"), logistic=True))
        chk = cross_distribution_check(groups, SQUARE, part, seed=seed, rows=200)
        m = chk["rows"]
        pick_rng = np.random.default_rng(seed)
        picks = {g: np.sort(pick_rng.choice(groups[g][0].n, size=m, replace=False)) for g in sorted(groups)}
        direct = {k: stacked_cross_reliance(groups, part, picks, k) for k in groups}
        sub = {g: groups[g][0].take(picks[g]) for g in groups}
        est = {g: estimate_reliance(sub[g], groups[g][1], SQUARE, part) for g in groups}
        for k in groups:
            implied = est[k].r_hat + sum(est[i].b_hat for i in groups if i != k)
            worst = max(worst, abs(direct[k] - implied), abs(chk["cross"][k] - direct[k]))
        ok &= order_groups(direct, 1e-10) == order_groups({g: e.normalized for g, e in est.items()}, 1e-10)
        ok &= chk["orderings_agree"]
    elapsed = time.perf_counter() - start
    assert record(6, ok and worst <= 1e-10 and elapsed < 20, f"max identity diff {worst:.2e}, orderings agree {ok}")


@pytest.fixture(scope="module")
def admissions_run():
    start = time.perf_counter()
    data = admissions.simulate(admissions.DEFAULT_N, admissions.DEFAULT_SEED)
    result = admissions.run_band_analysis(admissions.DEFAULT_N, admissions.DEFAULT_SEED)
    return data, result, time.perf_counter() - start


class TestCriterion7Admissions:
    """Full-scale admissions run (n = 10000, seed 7), one sub-check per claim."""

    def test_respondent_count(self, admissions_run):
        data, result, _ = admissions_run
        count = int(data["z"].sum())
        assert record("7a", 8100 <= count <= 8500, f"respondents {count}, target [8100, 8500]")

    def test_respondent_acceptance_rate(self, admissions_run):
        _, result, _ = admissions_run
        rate = result.acceptance_rate
        assert record("7b", abs(rate - 0.13) <= 0.02, f"respondent acceptance {rate:.4f}, target 0.13 +- 0.02")

    def test_logistic_accuracy(self, admissions_run):
        _, result, _ = admissions_run
        assert record("7c", result.accuracy >= 0.99, f"in-sample accuracy {result.accuracy:.4f}")

    def test_race_and_sex_above_score(self, admissions_run):
        _, result, _ = admissions_run
        claims = result.ordering_claims()
        b = result.bands
        detail = ", ".join(f"{k} [{b[k].r_min:.4f}, {b[k].r_max:.4f}]" for k in ("race", "sex", "score"))
        assert record("7d", claims["race_above_score"] and claims["sex_above_score"], detail)

    def test_race_sex_overlap(self, admissions_run):
        _, result, _ = admissions_run
        assert record("7e", result.ordering_claims()["race_sex_overlap"], "race and sex bands intersect")

    def test_truth_inside_bands(self, admissions_run):
        _, result, _ = admissions_run
        inside = result.truth_inside()
        detail = ", ".join(f"{k} {result.truth[k]:.4f}" for k in inside)
        assert record("7f", all(inside.values()), f"enumerated truth {detail}")

    def test_runtime(self, admissions_run):
        elapsed = admissions_run[2]
        assert record("7g", elapsed < 120, f"{elapsed:.1f}s")


def test_criterion_8_huber():
    start = time.perf_counter()
    ols_diff = obj_rel = 0.0
    for seed in range(10):
        d = regression_data(np.random.default_rng(8000 + seed), n=300, contaminate=0.15)
        cols = ("a", "b", "g")
        big = fit_huber(d, "y", cols, tuning_c=1e9).diagnostics.coefficients
        ols = fit_ols(d, "y", cols).diagnostics.coefficients
        ols_diff = max(ols_diff, float(np.max(np.abs(np.subtract(big, ols)))))
        f = fit_huber(d, "y", cols)
        X, y, s = design(d), d["y"], f.diagnostics.scale
        ours = huber_objective(np.asarray(f.diagnostics.coefficients), X, y, s)
        ref = minimize(huber_objective, np.zeros(X.shape[1]), args=(X, y, s), method="BFGS",
                       options={"gtol": 1e-10})
        obj_rel = max(obj_rel, abs(ours - ref.fun) / ref.fun)
    elapsed = time.perf_counter() - start
    ok = ols_diff <= 1e-6 and obj_rel <= 1e-4 and elapsed < 30
    assert record(8, ok, f"max |huber(c=1e9) - ols| {ols_diff:.2e}, max objective rel diff {obj_rel:.2e}")


def parity_data(rng, n, effect):
    x1, x2 = rng.integers(0, 2, n), rng.normal(size=n)
    y = 1.0 + x2 + effect * x1 + rng.normal(size=n)
    schema = [ColumnSchema("x1", "binary"), ColumnSchema("x2", "real"), ColumnSchema("y", "real", "outcome")]
    return Dataset(schema, {"x1": x1, "x2": x2, "y": y})


@pytest.mark.slow
def test_criterion_9_parity_calibration():
    start = time.perf_counter()
    spec, part = FitterSpec("ols", ("x1", "x2")), Partition(("x1",), ("x2",), "y")
    rejections = 0
    for rep in range(200):
        data = parity_data(np.random.default_rng(9000 + rep), 1000, effect=0.0)
        rejections += parity_test(data, spec, part, B=500, seed=rep).p_value <= 0.05
    size = rejections / 200
    hits = 0
    for rep in range(100):
        data = parity_data(np.random.default_rng(9500 + rep), 2000, effect=0.3)
        hits += parity_test(data, spec, part, B=500, seed=rep).p_value <= 0.05
    power = hits / 100
    elapsed = time.perf_counter() - start
    ok = 0.01 <= size <= 0.10 and power >= 0.95 and elapsed < 900
    assert record(9, ok, f"size {size:.3f} (n=1000, B=500, 200 reps), power {power:.2f} (n=2000, 100 reps), "
                         f"{elapsed:.0f}s")


def hand_values():
    """Normalized reliance of the bundled fixture, from closed forms on raw CSV.

    Rates in the fixture are exact linear functions of the covariates, so
    each exact fit has zero baseline and, for a coefficient ``beta`` on the
    audited covariate, ``r - b = 2 * beta^2 * var(x, ddof=1)``.
    """
    coef = {"justice_a": {"gender": 3, "experience": 1, "alignment": 0},
            "justice_b": {"gender": 0, "experience": 2, "alignment": 4},
            "justice_c": {"gender": 6, "experience": 0, "alignment": 2}}
    intercept = {"justice_a": 2, "justice_b": 5, "justice_c": 1}
    rows = list(csv.DictReader(open(FIXTURE_CSV, newline="")))
    out = {}
    for g in coef:
        mine = [r for r in rows if r["justice"] == g]
        for r in mine:
            rate = int(r["interruptions"]) * 1000 / int(r["advocate_tokens"])
            assert rate == intercept[g] + sum(coef[g][c] * int(r[c]) for c in coef[g])
        for c, beta in coef[g].items():
            out[(g, c)] = 2 * beta ** 2 * float(np.var([int(r[c]) for r in mine], ddof=1))
    return out


class TestCriterion10Pipeline:
    """Chunk-format per-group pipeline: Huber fit, categorical reliance, ranking."""

    def test_fixture_reproduces_hand_values(self, tmp_path, capsys):
        expected = hand_values()
        # worked by hand from the fixture's covariate counts
        by_hand = {("justice_c", "gender"): 144 / 7, ("justice_a", "gender"): 5.0,
                   ("justice_b", "experience"): 934 / 33, ("justice_a", "experience"): 83 / 15,
                   ("justice_b", "alignment"): 96 / 11, ("justice_c", "alignment"): 16 / 7}
        for key, v in by_hand.items():
            assert expected[key] == pytest.approx(v, abs=1e-12)
        code = main(["rank", "--config", FIXTURE_INI, "--out", str(tmp_path), "--validate"])
        capsys.readouterr()
        report = json.loads((tmp_path / "ranking.json").read_text())
        worst, methods = 0.0, set()
        for (g, c), v in expected.items():
            est = report["groups"][g]["estimates"][c]
            worst = max(worst, abs(est["normalized"] - v))
            methods.add(est["method"])
        orders_ok = all(report["orderings"][c] == order_groups({g: expected[(g, c)] for g in
                                                                ("justice_a", "justice_b", "justice_c")}, 1e-8)
                        for c in ("gender", "experience", "alignment"))
        fitters = {report["groups"][g]["fitter"]["fitter"] for g in report["groups"]}
        ok = code == 0 and worst <= 1e-8 and orders_ok and methods == {"categorical"} and fitters == {"huber"}
        assert record("10a", ok, f"max diff {worst:.2e}, orderings match {orders_ok}")

    def test_user_supplied_chunks(self, tmp_path, capsys):
        rng = np.random.default_rng(10)
        path = tmp_path / "user.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["justice", "gender", "experience", "alignment", "interruptions", "advocate_tokens"])
            for k in range(90):
                w.writerow([("roberts", "kagan", "alito")[k % 3], rng.integers(0, 2), rng.integers(0, 30),
                            rng.integers(0, 2), rng.integers(0, 40), rng.integers(200, 3000)])
        code = main(["rank", "--config", FIXTURE_INI, "--input", str(path), "--out", str(tmp_path)])
        capsys.readouterr()
        report = json.loads((tmp_path / "ranking.json").read_text())
        ok = code == 0 and sorted(report["groups"]) == ["alito", "kagan", "roberts"] and \
            all(sorted(o) == ["alito", "kagan", "roberts"] for o in report["orderings"].values())
        assert record("10b", ok, "user chunk CSV ranked per justice")
