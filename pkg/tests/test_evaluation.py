"""Divergence math and the experiment runner."""

import numpy as np
import pytest

from gmsynth.errors import AllZeroScores, DimensionMismatch, GmsError
from gmsynth.evaluation import (
    LN2,
    DiscreteDistribution,
    ExperimentReport,
    OracleScenario,
    ReportRow,
    default_scenarios,
    evaluate_jsd,
    jsd,
    normalize,
    run_table2,
    scenario_dataset,
)
from gmsynth.materials import default_glassy_user


class TestNormalize:
    def test_equal_scores(self):
        assert np.array_equal(normalize([5.0, 5.0]).weights, [0.5, 0.5])

    def test_single_winner(self):
        assert np.array_equal(normalize([10.0, 0.0, 0.0]).weights, [1.0, 0.0, 0.0])

    def test_direct_fractions(self):
        w = normalize([1.0, 2.0, 3.0]).weights
        assert np.allclose(w, [1 / 6, 1 / 3, 1 / 2], atol=1e-15)

    def test_negative_scores_clamped_first(self):
        w = normalize([-2.0, 1.0, 1.0]).weights
        assert np.array_equal(w, [0.0, 0.5, 0.5])

    def test_all_zero_rejected(self):
        with pytest.raises(AllZeroScores):
            normalize([0.0, 0.0])
        with pytest.raises(AllZeroScores):
            normalize([-1.0, -2.0])

    def test_distribution_invariants(self):
        with pytest.raises(GmsError):
            DiscreteDistribution(weights=np.array([0.5, 0.6]))
        with pytest.raises(GmsError):
            DiscreteDistribution(weights=np.array([1.5, -0.5]))


class TestJsd:
    def test_identical_is_zero(self):
        p = normalize([1.0, 2.0, 3.0])
        assert jsd(p, p) == 0.0

    def test_disjoint_supports_reach_ln2(self):
        assert jsd(normalize([1.0, 0.0]), normalize([0.0, 1.0])) == pytest.approx(
            LN2, abs=1e-12
        )

    def test_hand_case(self):
        # p=(1,0), q=(1/2,1/2): 0.5*ln(4/3) + 0.25*ln(2/3) + 0.25*ln(2)
        value = jsd(normalize([1.0, 0.0]), normalize([0.5, 0.5]))
        expected = 0.5 * np.log(4 / 3) + 0.25 * np.log(2 / 3) + 0.25 * np.log(2.0)
        assert value == pytest.approx(expected, abs=1e-14)
        assert value == pytest.approx(0.2158, abs=1e-4)

    def test_symmetry_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = normalize(rng.random(20))
            q = normalize(rng.random(20))
            assert jsd(p, q) == pytest.approx(jsd(q, p), abs=1e-12)

    def test_bounded_by_ln2(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = rng.integers(2, 30)
            p = normalize(np.maximum(rng.normal(size=n), 0) + 1e-12)
            q = normalize(np.maximum(rng.normal(size=n), 0) + 1e-12)
            value = jsd(p, q)
            assert 0.0 <= value <= LN2 + 1e-12

    def test_support_mismatch(self):
        with pytest.raises(DimensionMismatch):
            jsd(normalize([1.0, 1.0]), normalize([1.0, 1.0, 1.0]))
        p = normalize([1.0, 1.0], support=("a", "b"))
        q = normalize([1.0, 1.0], support=("a", "c"))
        with pytest.raises(DimensionMismatch):
            jsd(p, q)


class TestScenarios:
    def test_default_grid_covers_both_dimensionalities(self):
        scenarios = default_scenarios(ms=(19, 38))
        names = [s.name for s in scenarios]
        assert "glassy-m19" in names and "glassy-m38" in names
        assert all(s.m in (19, 38) for s in scenarios)

    def test_dataset_deterministic(self):
        sc = OracleScenario("glassy-m19", 19, default_glassy_user(19, seed=0), 0)
        X1, t1 = scenario_dataset(sc, total=100)
        X2, t2 = scenario_dataset(sc, total=100)
        assert np.array_equal(X1, X2) and np.array_equal(t1, t2)


class TestRunTable2:
    def test_perfect_model_reaches_zero(self):
        # predicting the oracle exactly collapses the divergence
        truth = np.array([0.0, 3.0, 7.0, 0.0, 5.0])
        assert jsd(normalize(truth), normalize(truth)) == 0.0

    def test_small_sweep_produces_rows(self):
        user = default_glassy_user(6, seed=0)
        scenarios = [OracleScenario("glassy-m6", 6, user, 0)]
        report = run_table2(
            oracles=scenarios, ns=(40,), optimizers=("rprop",), total=120, max_iters=20
        )
        assert len(report.rows) == 1
        row = report.rows[0]
        assert row.status == "ok"
        assert 0.0 <= row.jsd <= LN2 + 1e-12
        assert row.seconds > 0

    def test_csv_shape(self):
        report = ExperimentReport(rows=[ReportRow("glassy-m19", 19, 250, "rprop", 0.1234, 1.5)])
        lines = report.to_csv().strip().splitlines()
        assert lines[0] == "scene,m,n,optimizer,jsd,seconds,status"
        assert lines[1].startswith("glassy-m19,19,250,rprop,0.1234,")

    def test_rejects_n_exceeding_total(self):
        user = default_glassy_user(6, seed=0)
        with pytest.raises(GmsError):
            run_table2(
                oracles=[OracleScenario("glassy-m6", 6, user, 0)],
                ns=(120,),
                optimizers=("rprop",),
                total=120,
            )
