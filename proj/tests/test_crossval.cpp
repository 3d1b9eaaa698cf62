#include <doctest.h>

#include "resset/cohortsim.hpp"
#include "resset/crossval.hpp"

using namespace resset;

namespace {

struct Fixture {
  Dataset data;
  Index n_d = 0;
  Index n_t = 0;
};

Fixture small_cohort() {
  SimConfig sim;
  sim.n_patients = 40;
  sim.disease_vocab = 10;
  sim.treatment_vocab = 6;
  sim.visits_max = 5;
  sim.seed = 13;
  Cohort co = generate(sim);
  return {std::move(co.data), co.diseases.size(), co.treatments.size()};
}

TrainConfig quick_cfg() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.fold_count = 3;
  cfg.model.embed_dim = 4;
  cfg.model.hidden_dim = 4;
  cfg.model.dropout = 0.0;
  cfg.model.topk_max = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("crossval") {

TEST_CASE("fold evaluation fills the metrics the task defines") {
  Fixture fx = small_cohort();
  TrainConfig cfg = quick_cfg();

  CrossvalResult r = run_crossval(fx.data, ModelKind::bow, Task::readmission, cfg, fx.n_d,
                                  fx.n_t, 3);
  REQUIRE(r.report.folds.size() == 3);
  REQUIRE(r.fold_models.size() == 3);
  CHECK(r.report.task == "readmission");
  for (const FoldMetrics& m : r.report.folds) {
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc >= 0.0);
    CHECK(*m.auc <= 1.0);
    CHECK(m.p_at.empty());
  }

  CrossvalResult d = run_crossval(fx.data, ModelKind::bow, Task::disease, cfg, fx.n_d, fx.n_t,
                                  3);
  CHECK(d.report.task == "disease");
  for (const FoldMetrics& m : d.report.folds) {
    CHECK_FALSE(m.auc.has_value());
    REQUIRE(m.p_at.size() == 2);  // precision at 1..topk_max
    for (const auto& [k, v] : m.p_at) {
      CHECK(k >= 1);
      CHECK(k <= 2);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("held-out evaluation of a single trained model") {
  Fixture fx = small_cohort();
  Dataset train(fx.data.begin(), fx.data.begin() + 30);
  Dataset test(fx.data.begin() + 30, fx.data.end());
  TrainConfig cfg = quick_cfg();
  ModelParams trained = train_model(train, ModelKind::resset, Task::treatment, cfg, fx.n_d,
                                    fx.n_t, 5);
  FoldMetrics m = evaluate_fold(trained, test);
  CHECK_FALSE(m.auc.has_value());
  REQUIRE(m.p_at.count(1) == 1);
  CHECK(m.p_at.at(1) >= 0.0);
  CHECK(m.p_at.at(1) <= 1.0);
}

TEST_CASE("runs are reproducible and thread count is invisible") {
  Fixture fx = small_cohort();
  TrainConfig cfg = quick_cfg();

  CrossvalResult a = run_crossval(fx.data, ModelKind::resset, Task::readmission, cfg, fx.n_d,
                                  fx.n_t, 3, 1);
  CrossvalResult b = run_crossval(fx.data, ModelKind::resset, Task::readmission, cfg, fx.n_d,
                                  fx.n_t, 3, 1);
  CrossvalResult c = run_crossval(fx.data, ModelKind::resset, Task::readmission, cfg, fx.n_d,
                                  fx.n_t, 3, 4);
  CHECK(a.report.to_json() == b.report.to_json());
  CHECK(a.report.to_json() == c.report.to_json());

  CrossvalResult other = run_crossval(fx.data, ModelKind::resset, Task::readmission, cfg,
                                      fx.n_d, fx.n_t, 4, 1);
  CHECK(a.report.to_json() != other.report.to_json());
}

}  // TEST_SUITE
