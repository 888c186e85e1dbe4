"""
Tests for metrics, the threshold sweep, baselines, the tuner and dataset statistics
"""

import csv

import numpy as np
import pytest

from conftest import make_bundle, separable_set
from ovid.core.baselines import (
    RuleThresholds,
    aggregate_features,
    forest_baseline,
    grid_search_rules,
    rule_baseline,
)
from ovid.core.evaluation import (
    ConfusionCounts,
    confusion,
    metrics,
    pr_sweep,
    random_baseline,
)
from ovid.core.revert_miner import mine_dataset
from ovid.core.statistics import dataset_statistics
from ovid.core.tuner import FULL_MODEL, random_search, run_ablation_study, sample_configs
from ovid.errors import EmptyEvaluation
from ovid.models.features import D_EDIT, D_USER, EDIT_FEATURE_NAMES, USER_CONTRIBUTIONS
from ovid.models.ovid_config import SEARCH_SPACE, OvidConfig
from ovid.services.reports import EvalReport, EvalRow, write_pr_curve

D_C = 20
FAST = OvidConfig(d_h=8, n_head=2, n_pred=1, max_epochs=2, batch_size=16)


def test_metrics_oracle():
    """Known counts give known precision, recall, F1 and accuracy"""
    m = metrics(ConfusionCounts(tp=8, fp=2, tn=85, fn=5))
    assert m.precision == pytest.approx(0.8)
    assert m.recall == pytest.approx(8 / 13)
    assert m.f1 == pytest.approx(2 * 0.8 * (8 / 13) / (0.8 + 8 / 13))
    assert m.accuracy == pytest.approx(0.93)


def test_metrics_without_predicted_positives():
    """Precision is 1 when nothing is flagged; F1 is 0 when recall is 0"""
    m = metrics(ConfusionCounts(tp=0, fp=0, tn=5, fn=5))
    assert m.precision == 1.0
    assert m.recall == 0.0
    assert m.f1 == 0.0


def test_metrics_empty():
    """An empty evaluation is an error"""
    with pytest.raises(EmptyEvaluation):
        metrics(ConfusionCounts())


def test_confusion_counts():
    """Each prediction/label pair lands in one cell"""
    cc = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (cc.tp, cc.fp, cc.tn, cc.fn) == (2, 1, 1, 1)
    assert cc.total == 5


def test_pr_sweep_endpoints_and_monotonic_recall():
    """Threshold 0 flags every positive score, threshold 1 flags nothing"""
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 2, size=200)
    scores = np.clip(labels * 0.3 + rng.uniform(0.01, 0.7, size=200), 0.0, 0.99)
    curve = pr_sweep(list(zip(scores, labels)), n_points=100)

    assert len(curve.points) == 101
    assert curve.points[0].threshold == 0.0
    assert curve.points[-1].threshold == 1.0
    assert curve.points[0].recall == 1.0
    assert curve.points[0].precision == pytest.approx(labels.mean())
    assert curve.points[-1].recall == 0.0
    assert curve.points[-1].precision == 1.0
    recalls = [p.recall for p in curve.points]
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))


def test_pr_curve_csv(tmp_path):
    """The CSV has a header and one row per threshold"""
    curve = pr_sweep([(0.2, 0), (0.8, 1)], n_points=4)
    path = tmp_path / "pr_curve.csv"
    write_pr_curve(path, curve)
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["threshold", "precision", "recall"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_random_baseline():
    """A seeded fair coin"""
    a = random_baseline(10_000, seed=3)
    assert np.array_equal(a, random_baseline(10_000, seed=3))
    assert set(np.unique(a)) == {0, 1}
    assert 0.47 < a.mean() < 0.53


def raw_bundle(cid, label, name_changed, contributions=200.0, version=2.0, n_edits=2):
    """Unnormalized bundle whose edits differ only in name_changed"""
    m_e = np.zeros((D_EDIT, n_edits))
    m_e[EDIT_FEATURE_NAMES.index("version_number")] = version
    m_e[EDIT_FEATURE_NAMES.index("n_valid_tags")] = 3.0
    m_e[EDIT_FEATURE_NAMES.index("name_changed"), 0] = name_changed
    x_u = np.zeros(D_USER)
    x_u[USER_CONTRIBUTIONS] = contributions
    return make_bundle(changeset_id=cid, label=label, x_u=x_u, m_e=m_e, d_c=D_C)


def test_rule_thresholds_direction():
    """low_* rules fire at or below, the others at or above their threshold"""
    newcomer = raw_bundle(1, 1, 0.0, contributions=5.0)
    veteran = raw_bundle(2, 0, 0.0, contributions=6.0)
    assert list(rule_baseline([newcomer, veteran], RuleThresholds(low_contributions=5))) == [1, 0]
    assert list(rule_baseline([newcomer, veteran], RuleThresholds(high_version=2))) == [1, 1]
    assert list(rule_baseline([newcomer, veteran], RuleThresholds())) == [0, 0]


def test_rule_min_score():
    """An edit needs min_score firing rules"""
    b = raw_bundle(1, 1, 1.0)
    assert list(rule_baseline([b], RuleThresholds(name_changed=1, min_score=2))) == [0]
    assert list(rule_baseline([b], RuleThresholds(name_changed=1, high_version=2, min_score=2))) == [1]


def test_rule_grid_search_finds_separating_rule():
    """Renames separate the classes, and the search finds a perfect threshold vector"""
    bundles = [raw_bundle(i, i % 2, float(i % 2)) for i in range(20)]
    thresholds, f1 = grid_search_rules(bundles)
    assert f1 == 1.0
    assert list(rule_baseline(bundles, thresholds)) == [b.label for b in bundles]


def test_aggregate_features():
    """Changeset, user, edit mean and edit max; zeros without edits"""
    bundle = make_bundle(d_c=D_C, n_edits=3)
    agg = aggregate_features(bundle)
    assert agg.shape == (D_C + D_USER + 2 * D_EDIT,)
    assert np.allclose(agg[D_C + D_USER : D_C + D_USER + D_EDIT], bundle.m_e.mean(axis=1))

    empty = make_bundle(d_c=D_C, m_e=np.zeros((D_EDIT, 0)))
    assert not aggregate_features(empty)[D_C + D_USER :].any()


def test_forest_baseline():
    """The forest learns the separable set and is reproducible"""
    train, test = separable_set(64, D_C, seed=0), separable_set(32, D_C, seed=1)
    predicted = forest_baseline(train, test, seed=0, n_estimators=25)
    assert np.mean(predicted == np.array([b.label for b in test])) >= 0.9
    assert np.array_equal(predicted, forest_baseline(train, test, seed=0, n_estimators=25))


def test_sample_configs():
    """Draws come from the search space, differ per trial and repeat per seed"""
    configs = sample_configs(10, seed=1, base=OvidConfig(batch_size=32))
    assert configs == sample_configs(10, seed=1, base=OvidConfig(batch_size=32))
    assert len({c.seed for c in configs}) == 10
    for config in configs:
        assert config.batch_size == 32
        for name, options in SEARCH_SPACE.items():
            assert getattr(config, name) in options


def test_random_search_picks_best_trial():
    """The winner has the highest validation F1 of all trials"""
    train, val = separable_set(32, D_C, seed=0), separable_set(16, D_C, seed=1)
    best, trials, result = random_search(train, val, n_trials=2, seed=0, base=FAST, threads=1)
    assert [t.index for t in trials] == [0, 1]
    assert best.metrics.f1 == max(t.metrics.f1 for t in trials)
    assert result.model.config == best.config


def test_ablation_study_rows():
    """The full model comes first, then the requested variants"""
    train, val, test = (separable_set(16, D_C, seed=s) for s in (0, 1, 2))
    rows = run_ablation_study(train, val, test, FAST, variants=["-Edits", "-User"])
    assert [r.variant for r in rows] == [FULL_MODEL, "-Edits", "-User"]
    assert all(r.counts.total == 16 for r in rows)


def test_dataset_statistics(fixture_store):
    """Per-class medians over the mined dataset"""
    examples = mine_dataset(fixture_store, seed=0)
    stats = dataset_statistics(examples, fixture_store)
    assert stats.all.changesets == 40
    assert stats.vandalism.changesets == 20
    assert stats.vandalism.users == 20
    assert stats.vandalism.median_edits == 1.0
    assert stats.missing == 0
    assert stats.first_change < stats.last_change


def test_report_table_lists_notes():
    """Rows are tabulated and notes follow the table"""
    cc = ConfusionCounts(tp=1, fp=1, tn=1, fn=1)
    report = EvalReport(
        rows=[EvalRow(system="Rules", split="test", examples=4, counts=cc, metrics=metrics(cc), note="approximate")]
    )
    table = report.table()
    assert "Rules" in table
    assert "* Rules: approximate" in table
