#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "resset/baselines.hpp"
#include "resset/config.hpp"
#include "resset/model.hpp"

namespace resset {

struct TrainConfig {
  double lr = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 20;
  int batch_size = 16;
  int fold_count = 5;
  LogRegOptions logreg;  // the bow kind trains by convex descent, not Adam
  ModelConfig model;

  static const std::vector<std::string>& keys();  // trainer keys + model keys
  static TrainConfig from_config(const Config& cfg);
  void validate() const;
};

/// First/second moment tensors aligned with ModelParams::entries() order.
struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  int64_t step = 0;

  static AdamState init(const ModelParams& params);
};

/// One bias-corrected Adam update. grads align with entries(); non-finite
/// gradients abort, naming the parameter.
void adam_step(ModelParams& params, const std::vector<Mat>& grads, AdamState& state,
               const TrainConfig& cfg);

/// Patient-level partition into fold_count (train, test) index pairs; test
/// sets are disjoint, cover everything, and differ in size by at most one.
std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> make_folds(size_t n_patients,
                                                                            int fold_count,
                                                                            uint64_t seed);

struct TrainLog {
  std::vector<double> epoch_mean_loss;  // per-event mean, one entry per epoch
};

/// Fits any model kind on the whole dataset. resset / flat-lstm run the
/// minibatch Adam loop; bow runs the logistic-regression descent. The result
/// is a deterministic function of (data, kind, task, cfg, vocab sizes, seed).
ModelParams train_model(const Dataset& data, ModelKind kind, Task task, const TrainConfig& cfg,
                        Index n_disease, Index n_treatment, uint64_t seed,
                        TrainLog* log = nullptr);

/// Model file: versioned JSON with config, vocab hashes and every tensor at
/// full precision. save -> load -> save is byte-identical.
void save_model(const ModelParams& params, uint64_t disease_hash, uint64_t treatment_hash,
                const std::string& path);

/// Refuses files whose vocab hashes disagree with the given vocabularies.
ModelParams load_model(const std::string& path, const CodeVocab& diseases,
                       const CodeVocab& treatments);

}  // namespace resset
