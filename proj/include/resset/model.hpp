#pragma once

#include <string>
#include <utility>
#include <vector>

#include "resset/codespace.hpp"
#include "resset/config.hpp"
#include "resset/data.hpp"
#include "resset/heads.hpp"
#include "resset/interaction.hpp"
#include "resset/recurrent.hpp"
#include "resset/setfn.hpp"

namespace resset {

enum class Task { readmission, disease, treatment };
enum class ModelKind { resset, bow, flat_lstm };
enum class MultilabelLoss { masked_softmax, sigmoid_bce };

Task parse_task(const std::string& name);
std::string to_string(Task task);
ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);
MultilabelLoss parse_multilabel_loss(const std::string& name);
std::string to_string(MultilabelLoss loss);

/// Architecture and loss knobs shared by every model kind.
struct ModelConfig {
  Index embed_dim = 32;
  Index hidden_dim = 32;
  int max_visits = 10;  // history window: only this many most recent visits
  double dropout = 0.5;
  InteractionMode interaction = InteractionMode::subtractive;
  PoolingMode pooling = PoolingMode::last;
  double exp_alpha = 0.1;
  double epsilon = 1e-6;
  double state_norm_beta = 0.0;
  int head_layers = 1;
  MultilabelLoss multilabel_loss = MultilabelLoss::masked_softmax;
  int topk_max = 3;
  int max_tokens = 100;  // flat-lstm history cap, most recent kept

  static const std::vector<std::string>& keys();
  static ModelConfig from_config(const Config& cfg);
  void validate() const;

  SetFnConfig setfn() const { return SetFnConfig{epsilon}; }
};

/// Every trainable tensor of one model. The bow kind uses only the head
/// (a linear map over count features); the other kinds use all three parts.
struct ModelParams {
  ModelKind kind = ModelKind::resset;
  Task task = Task::readmission;
  ModelConfig cfg;
  EmbeddingTable embeddings;
  LstmParams lstm;
  HeadParams head;

  /// Stable (name, tensor) views in a fixed order; the optimizer, the
  /// gradient checker and the model file all walk this list.
  std::vector<std::pair<std::string, Tensor*>> entries();
  std::vector<std::pair<std::string, const Tensor*>> entries() const;
};

Index target_vocab(Task task, Index n_disease, Index n_treatment);
Index bow_feature_dim(Index n_disease, Index n_treatment);

/// Fresh parameters for the given shape, deterministic in the seed.
ModelParams init_params(ModelKind kind, Task task, const ModelConfig& cfg, Index n_disease,
                        Index n_treatment, uint64_t seed);

/// One prediction event: the visits the model may look at and what it must
/// predict. For readmission, target_ids is empty and label carries y.
/// Trajectories are truncated to the recent window before events are cut,
/// so every model kind sees the same history.
struct Event {
  Trajectory inputs;
  std::vector<int32_t> target_ids;  // disease/treatment tasks
  int label = -1;                   // readmission task
};

/// readmission: one event per labeled patient (full record).
/// disease: one event per consecutive visit pair, predicting the next dx bag.
/// treatment: one event per visit, current tx withheld.
/// Events with empty targets are skipped; readmission requires a 0/1 label.
std::vector<Event> build_events(const Trajectory& t, Task task, int max_visits);

/// On-tape handles for one forward pass over a shared parameter snapshot.
struct ModelLeaves {
  Value embeddings;
  LstmLeaves lstm;
  HeadLeaves head;
};

ModelLeaves register_params(Tape& tape, const ModelParams& params, bool requires_grad);

/// Leaf handles in ModelParams::entries() order, for gradient extraction.
std::vector<Value> leaf_list(const ModelLeaves& leaves, ModelKind kind);

/// Inverse of leaf_list: reassemble the leaves struct from handles laid out
/// in entries() order (shape comes from params). Gradient checkers rebuild
/// the forward pass from raw parameter leaves this way.
ModelLeaves leaves_from_list(std::span<const Value> leaves, const ModelParams& params);

/// Illness-state sequence h_1..h_T of the truncated record, evaluation mode
/// (no dropout). Not defined for the bow kind.
std::vector<Tensor> eval_states(const ModelParams& params, const Trajectory& t);

/// Scalar loss of one event. Training mode applies input dropout (resset,
/// flat_lstm) and random within-visit token order (flat_lstm); evaluation
/// is deterministic. rng may be null outside training.
Value event_loss(const ModelLeaves& leaves, const ModelParams& params, const Event& ev,
                 Rng* dropout_rng, Rng* order_rng, bool training);

/// Per-event probability or score outputs, computed on a throwaway
/// evaluation tape.
double predict_readmission(const ModelParams& params, const Trajectory& t);

/// p_1..p_T: readmission probability after each successive visit.
std::vector<double> readmission_curve(const ModelParams& params, const Trajectory& t);

struct ScoredEvent {
  Tensor scores;  // over the target vocabulary
  std::vector<int32_t> target_ids;
};

/// Scores for every multilabel event of the trajectory (disease/treatment).
std::vector<ScoredEvent> predict_multilabel(const ModelParams& params, const Trajectory& t);

}  // namespace resset
