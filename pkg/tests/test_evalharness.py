"""Harness tests: synthetic-recovery oracles, exclusion accounting, the leakage
guard, and seeded determinism of reports."""

import pytest

from skillspace.corpus import DeltaRecord
from skillspace.embed import TrainConfig, train
from skillspace.evalharness import (
    EvalConfig,
    LeakageDetected,
    NoEligibleDevelopers,
    PrRecord,
    eval_new_apis,
    eval_new_contributors,
    eval_new_projects,
    eval_pr_acceptance,
    eval_self_reported,
    read_pr_csv,
    read_survey_csv,
)
from skillspace.report import regression_rows, render_csv, ttest_rows
from skillspace.stats import SingleClass

from _synthetic import cluster_corpus, random_model, synthetic_prs, synthetic_survey


@pytest.fixture(scope="module")
def small_world():
    corpus = cluster_corpus(n_deltas=700, n_devs=12, apis_per_cluster=14,
                            n_projects=8, seed=42)
    cfg = TrainConfig(dim=16, epochs=10, min_count=2, negatives=5, seed=7)
    model, _ = train(corpus.train, cfg)
    return corpus, model


class TestH1:
    def test_cluster_recovery(self, small_world):
        corpus, model = small_world
        cfg = EvalConfig(cutoff=corpus.cutoff, seed=3)
        table = eval_new_apis(model, corpus.train, corpus.test, cfg)
        assert len(table.entries) == 1
        label, result = table.entries[0]
        assert label == corpus.language
        assert result.mean_diff > 0
        assert result.p_value < 0.01

    def test_no_new_apis_counted(self, small_world):
        corpus, model = small_world
        # stale_dev's only test delta reuses APIs from their own train history
        stale_dev = corpus.train[0].developer
        known = sorted({a for r in corpus.train if r.developer == stale_dev
                        for a in r.apis})
        stale = DeltaRecord(corpus.language, corpus.train[0].project,
                            corpus.cutoff + 999_999, stale_dev, tuple(known))
        other_tests = [r for r in corpus.test if r.developer != stale_dev]
        cfg = EvalConfig(cutoff=corpus.cutoff, seed=3)
        table = eval_new_apis(model, corpus.train, other_tests + [stale], cfg)
        assert table.meta["excluded_no_new"] == 1

    def test_pooled_granularity(self, small_world):
        corpus, model = small_world
        cfg = EvalConfig(cutoff=corpus.cutoff, seed=3, per_language=False)
        table = eval_new_apis(model, corpus.train, corpus.test, cfg)
        assert table.entries[0][0] == "ALL"
        assert table.meta["granularity"] == "pooled"

    def test_no_eligible_developers(self, small_world):
        corpus, model = small_world
        cfg = EvalConfig(cutoff=corpus.cutoff, seed=3)
        with pytest.raises(NoEligibleDevelopers):
            eval_new_apis(model, corpus.train, [], cfg)

    def test_deterministic_reports(self, small_world):
        corpus, model = small_world
        cfg = EvalConfig(cutoff=corpus.cutoff, seed=9)
        a = eval_new_apis(model, corpus.train, corpus.test, cfg)
        b = eval_new_apis(model, corpus.train, corpus.test, cfg)
        assert render_csv(ttest_rows(a.entries), a.meta) == \
            render_csv(ttest_rows(b.entries), b.meta)

    def test_seed_changes_controls(self, small_world):
        corpus, model = small_world
        a = eval_new_apis(model, corpus.train, corpus.test,
                          EvalConfig(cutoff=corpus.cutoff, seed=1))
        b = eval_new_apis(model, corpus.train, corpus.test,
                          EvalConfig(cutoff=corpus.cutoff, seed=2))
        assert a.entries[0][1].mean_diff != b.entries[0][1].mean_diff


class TestH2:
    def test_cluster_recovery(self, small_world):
        corpus, model = small_world
        cfg = EvalConfig(cutoff=corpus.cutoff, seed=5)
        table = eval_new_projects(model, corpus.train, corpus.test, cfg)
        label, result = table.entries[0]
        assert label == "ALL"
        assert result.mean_diff > 0
        assert result.p_value < 0.01


class TestH3:
    def test_cluster_recovery(self, small_world):
        corpus, model = small_world
        cfg = EvalConfig(cutoff=corpus.cutoff, seed=5)
        table = eval_new_contributors(model, corpus.train, corpus.test, cfg)
        _, result = table.entries[0]
        assert result.mean_diff > 0
        assert result.p_value < 0.01
        assert table.meta["projects_used"] >= 1


class TestLeakageGuard:
    def test_training_past_cutoff_rejected(self, small_world):
        corpus, model = small_world
        leaky_cfg = EvalConfig(cutoff=model.meta["max_train_timestamp"], seed=1)
        with pytest.raises(LeakageDetected):
            eval_new_apis(model, corpus.train, corpus.test, leaky_cfg)

    def test_applies_to_h4_h5(self):
        model = random_model()
        model.meta["max_train_timestamp"] = 100
        with pytest.raises(LeakageDetected):
            eval_pr_acceptance(model, synthetic_prs(model, n_prs=10),
                               EvalConfig(cutoff=50, seed=1))


class TestH4:
    def test_generator_recovery(self):
        model = random_model(n_apis=20, n_devs=40, n_projects=15, dim=16, seed=6)
        prs = synthetic_prs(model, n_prs=3000, seed=21, beta_sim=1.0)
        result = eval_pr_acceptance(model, prs, EvalConfig(cutoff=1, seed=2))
        coef, se, p = result.coefficient("similarity")
        assert abs(coef - 1.0) <= 2.0 * se
        assert result.vif is not None
        assert all(v < 2.5 for v in result.vif.values())

    def test_all_accepted_single_class(self):
        model = random_model(seed=7)
        prs = [pr.__class__(**{**pr.__dict__, "accepted": 1})
               for pr in synthetic_prs(model, n_prs=60, seed=3)]
        with pytest.raises(SingleClass):
            eval_pr_acceptance(model, prs, EvalConfig(cutoff=1, seed=2))

    def test_unresolvable_dropped_with_warning(self):
        model = random_model(seed=8)
        prs = synthetic_prs(model, n_prs=300, seed=4)
        ghosts = [PrRecord(developer="ghost", project="nowhere", accepted=i % 2)
                  for i in range(400)]
        with pytest.warns(UserWarning, match="dropped"):
            result = eval_pr_acceptance(model, prs + ghosts, EvalConfig(cutoff=1, seed=2))
        assert result.meta["prs_dropped"] == 400

    def test_csv_round_trip(self, tmp_path):
        model = random_model(seed=9)
        prs = synthetic_prs(model, n_prs=25, seed=5)
        path = tmp_path / "prs.csv"
        from skillspace.evalharness import PR_CSV_COLUMNS
        import csv as csvmod

        with open(path, "w", newline="") as fh:
            writer = csvmod.writer(fh)
            writer.writerow(PR_CSV_COLUMNS)
            for pr in prs:
                writer.writerow([getattr(pr, c) for c in PR_CSV_COLUMNS])
        assert read_pr_csv(str(path)) == prs

    def test_csv_validation(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("developer,project,accepted\nd,p,2\n")
        with pytest.raises(ValueError):
            read_pr_csv(str(path))


class TestH5:
    def test_generator_recovery(self):
        model = random_model(n_apis=25, n_devs=60, dim=16, seed=10)
        apis = ["lib00", "lib01", "lib02"]
        surveys = synthetic_survey(model, apis, n_respondents=150, seed=12)
        cfg = EvalConfig(cutoff=1, seed=13, n_random=10)
        model_a, model_b = eval_self_reported(model, surveys, cfg)
        coef_b, se_b, p_b = model_b.coefficient("alignment")
        assert coef_b > 0
        assert p_b < 0.01
        coef_a, _, p_a = model_a.coefficient("score")
        assert coef_a > 0
        assert p_a < 0.01
        assert set(model_a.names) == {"api:lib00", "api:lib01", "api:lib02",
                                      "log_commits", "score"}

    def test_survey_csv_round_trip(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("developer,api,score,commits\nd1,react,4,120\nd2,vue,1,7\n")
        rows = read_survey_csv(str(path))
        assert rows[0].developer == "d1" and rows[0].score == 4
        assert rows[1].commits == 7.0

    def test_survey_score_validated(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("developer,api,score,commits\nd1,react,9,120\n")
        with pytest.raises(ValueError):
            read_survey_csv(str(path))

    def test_unresolvable_rows_counted(self):
        model = random_model(seed=14)
        surveys = synthetic_survey(model, ["lib00"], n_respondents=20, seed=15)
        from skillspace.evalharness import SurveyRecord
        surveys.append(SurveyRecord("ghost", "lib00", 3, 50.0))
        _, model_b = eval_self_reported(model, surveys, EvalConfig(cutoff=1, seed=16))
        assert model_b.meta["dropped_unresolvable"] == 1

    def test_regression_rows_render(self):
        model = random_model(seed=17)
        surveys = synthetic_survey(model, ["lib00", "lib01"], n_respondents=60, seed=18)
        model_a, _ = eval_self_reported(model, surveys, EvalConfig(cutoff=1, seed=19))
        rows = regression_rows(model_a)
        assert rows[0][0] == "predictor"
        assert len(rows) == len(model_a.names) + 1


class TestEvalConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            EvalConfig(cutoff=1, n_random=0)
        with pytest.raises(ValueError):
            EvalConfig(cutoff=1, aggregation="median")
