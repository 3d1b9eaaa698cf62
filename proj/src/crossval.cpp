#include "resset/crossval.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace resset {

FoldMetrics evaluate_fold(const ModelParams& params, const Dataset& test) {
  if (test.empty()) throw std::invalid_argument("evaluate_fold: empty test set");
  FoldMetrics fm;
  if (params.task == Task::readmission) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(test.size());
    for (const Trajectory& t : test) {
      if (t.readmit != 0 && t.readmit != 1) {
        throw std::invalid_argument("evaluate_fold: patient " + t.id + " lacks a label");
      }
      scores.push_back(predict_readmission(params, t));
      labels.push_back(t.readmit);
    }
    fm.auc = auc(scores, labels);
    return fm;
  }
  const int kmax = params.cfg.topk_max;
  std::vector<double> sums(static_cast<size_t>(kmax), 0.0);
  size_t events = 0;
  for (const Trajectory& t : test) {
    for (const ScoredEvent& ev : predict_multilabel(params, t)) {
      std::vector<int32_t> ranked = topk(ev.scores, kmax);
      for (int k = 1; k <= kmax; ++k) {
        sums[static_cast<size_t>(k - 1)] += precision_at_k(ranked, ev.target_ids, k);
      }
      ++events;
    }
  }
  if (events == 0) throw std::invalid_argument("evaluate_fold: test set yields no events");
  for (int k = 1; k <= kmax; ++k) {
    fm.p_at[k] = sums[static_cast<size_t>(k - 1)] / static_cast<double>(events);
  }
  return fm;
}

CrossvalResult run_crossval(const Dataset& data, ModelKind kind, Task task,
                            const TrainConfig& cfg, Index n_disease, Index n_treatment,
                            uint64_t seed, int jobs) {
  if (jobs < 1) throw std::invalid_argument("run_crossval: jobs must be >= 1");
  auto folds = make_folds(data.size(), cfg.fold_count, seed);
  const size_t n_folds = folds.size();

  CrossvalResult result;
  result.report.task = to_string(task);
  result.report.folds.resize(n_folds);
  result.fold_models.resize(n_folds);

  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run_fold = [&](size_t f) {
    Dataset train, test;
    for (size_t id : folds[f].first) train.push_back(data[id]);
    for (size_t id : folds[f].second) test.push_back(data[id]);
    ModelParams params = train_model(train, kind, task, cfg, n_disease, n_treatment,
                                     Rng::mix(seed, static_cast<uint64_t>(f)));
    result.report.folds[f] = evaluate_fold(params, test);
    result.fold_models[f] = std::move(params);
  };

  if (jobs == 1) {
    for (size_t f = 0; f < n_folds; ++f) run_fold(f);
  } else {
    auto worker = [&] {
      for (size_t f = next.fetch_add(1); f < n_folds; f = next.fetch_add(1)) {
        try {
          run_fold(f);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> threads;
    const size_t n_threads = std::min(static_cast<size_t>(jobs), n_folds);
    threads.reserve(n_threads);
    for (size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return result;
}

}  // namespace resset
