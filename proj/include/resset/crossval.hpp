#pragma once

#include <cstdint>
#include <vector>

#include "resset/metrics.hpp"
#include "resset/trainer.hpp"

namespace resset {

/// Task metrics of one trained model on held-out patients: AUC of the final
/// readmission probability, or mean precision at 1..topk_max over events.
FoldMetrics evaluate_fold(const ModelParams& params, const Dataset& test);

struct CrossvalResult {
  EvalReport report;
  std::vector<ModelParams> fold_models;
};

/// make_folds(fold_count) -> train per fold (fold seed derived from seed and
/// fold index) -> evaluate on the held-out fold. jobs > 1 trains folds on
/// worker threads; every fold is self-contained, so the result is identical
/// for any jobs value.
CrossvalResult run_crossval(const Dataset& data, ModelKind kind, Task task,
                            const TrainConfig& cfg, Index n_disease, Index n_treatment,
                            uint64_t seed, int jobs = 1);

}  // namespace resset
