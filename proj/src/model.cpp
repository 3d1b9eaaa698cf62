#include "resset/model.hpp"

#include <stdexcept>

#include "resset/baselines.hpp"

namespace resset {

Task parse_task(const std::string& name) {
  if (name == "readmission") return Task::readmission;
  if (name == "disease") return Task::disease;
  if (name == "treatment") return Task::treatment;
  throw std::invalid_argument("unknown task: " + name);
}

std::string to_string(Task task) {
  switch (task) {
    case Task::readmission: return "readmission";
    case Task::disease: return "disease";
    case Task::treatment: return "treatment";
  }
  throw std::logic_error("unreachable");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "resset") return ModelKind::resset;
  if (name == "bow") return ModelKind::bow;
  if (name == "flat-lstm") return ModelKind::flat_lstm;
  throw std::invalid_argument("unknown model: " + name);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::resset: return "resset";
    case ModelKind::bow: return "bow";
    case ModelKind::flat_lstm: return "flat-lstm";
  }
  throw std::logic_error("unreachable");
}

MultilabelLoss parse_multilabel_loss(const std::string& name) {
  if (name == "masked_softmax") return MultilabelLoss::masked_softmax;
  if (name == "sigmoid_bce") return MultilabelLoss::sigmoid_bce;
  throw std::invalid_argument("unknown multilabel loss: " + name);
}

std::string to_string(MultilabelLoss loss) {
  return loss == MultilabelLoss::masked_softmax ? "masked_softmax" : "sigmoid_bce";
}

const std::vector<std::string>& ModelConfig::keys() {
  static const std::vector<std::string> k = {
      "embed_dim",   "hidden_dim",      "max_visits", "dropout",    "interaction",
      "pooling",     "exp_alpha",       "epsilon",    "state_norm_beta",
      "head_layers", "multilabel_loss", "topk_max",   "max_tokens"};
  return k;
}

ModelConfig ModelConfig::from_config(const Config& cfg) {
  ModelConfig m;
  m.embed_dim = cfg.get_int("embed_dim", static_cast<int>(m.embed_dim));
  m.hidden_dim = cfg.get_int("hidden_dim", static_cast<int>(m.hidden_dim));
  m.max_visits = cfg.get_int("max_visits", m.max_visits);
  m.dropout = cfg.get_double("dropout", m.dropout);
  m.interaction = parse_interaction(cfg.get_string("interaction", to_string(m.interaction)));
  m.pooling = parse_pooling(cfg.get_string("pooling", to_string(m.pooling)));
  m.exp_alpha = cfg.get_double("exp_alpha", m.exp_alpha);
  m.epsilon = cfg.get_double("epsilon", m.epsilon);
  m.state_norm_beta = cfg.get_double("state_norm_beta", m.state_norm_beta);
  m.head_layers = cfg.get_int("head_layers", m.head_layers);
  m.multilabel_loss =
      parse_multilabel_loss(cfg.get_string("multilabel_loss", to_string(m.multilabel_loss)));
  m.topk_max = cfg.get_int("topk_max", m.topk_max);
  m.max_tokens = cfg.get_int("max_tokens", m.max_tokens);
  m.validate();
  return m;
}

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("dims must be >= 1");
  if (max_visits < 1) throw std::invalid_argument("max_visits must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (exp_alpha < 0.0 || exp_alpha > 1.0) {
    throw std::invalid_argument("exp_alpha must lie in [0, 1]");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (state_norm_beta < 0.0) throw std::invalid_argument("state_norm_beta must be >= 0");
  if (head_layers < 1) throw std::invalid_argument("head_layers must be >= 1");
  if (topk_max < 1) throw std::invalid_argument("topk_max must be >= 1");
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::entries() {
  std::vector<std::pair<std::string, Tensor*>> out;
  if (kind != ModelKind::bow) {
    out.emplace_back("embeddings", &embeddings.weights);
    out.emplace_back("lstm.w_forget", &lstm.w_forget);
    out.emplace_back("lstm.w_input", &lstm.w_input);
    out.emplace_back("lstm.w_output", &lstm.w_output);
    out.emplace_back("lstm.w_cell", &lstm.w_cell);
    out.emplace_back("lstm.b_forget", &lstm.b_forget);
    out.emplace_back("lstm.b_input", &lstm.b_input);
    out.emplace_back("lstm.b_output", &lstm.b_output);
    out.emplace_back("lstm.b_cell", &lstm.b_cell);
  }
  for (size_t i = 0; i < head.weights.size(); ++i) {
    out.emplace_back("head.w" + std::to_string(i), &head.weights[i]);
    out.emplace_back("head.b" + std::to_string(i), &head.biases[i]);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::entries() const {
  auto mut = const_cast<ModelParams*>(this)->entries();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

Index target_vocab(Task task, Index n_disease, Index n_treatment) {
  switch (task) {
    case Task::readmission: return 1;
    case Task::disease: return n_disease;
    case Task::treatment: return n_treatment;
  }
  throw std::logic_error("unreachable");
}

Index bow_feature_dim(Index n_disease, Index n_treatment) { return n_disease + n_treatment; }

ModelParams init_params(ModelKind kind, Task task, const ModelConfig& cfg, Index n_disease,
                        Index n_treatment, uint64_t seed) {
  cfg.validate();
  if (n_disease < 1 || n_treatment < 0) throw std::invalid_argument("init_params: bad vocab");
  ModelParams p;
  p.kind = kind;
  p.task = task;
  p.cfg = cfg;
  const Index out_dim = target_vocab(task, n_disease, n_treatment);
  if (kind == ModelKind::bow) {
    // Linear convex model started at zero; head_layers does not apply.
    // The embedding table stays empty but its vocab sizes still describe
    // the feature layout.
    p.embeddings.n_disease = n_disease;
    p.embeddings.n_treatment = n_treatment;
    const Index feat = bow_feature_dim(n_disease, n_treatment);
    p.head.weights = {Tensor::zeros(out_dim, feat)};
    p.head.biases = {Tensor::zeros(out_dim)};
    return p;
  }
  p.embeddings = init_embeddings(n_disease, n_treatment, cfg.embed_dim, seed);
  p.lstm = init_lstm(cfg.embed_dim, cfg.hidden_dim, seed);
  p.head = init_head(cfg.hidden_dim, out_dim, cfg.head_layers, seed);
  return p;
}

std::vector<Event> build_events(const Trajectory& full, Task task, int max_visits) {
  const Trajectory t = truncate_to_recent(full, static_cast<size_t>(max_visits));
  std::vector<Event> events;
  switch (task) {
    case Task::readmission: {
      if (t.readmit != 0 && t.readmit != 1) {
        throw std::invalid_argument("build_events: patient " + t.id + " has no readmit label");
      }
      Event ev;
      ev.inputs = t;
      ev.label = t.readmit;
      events.push_back(std::move(ev));
      break;
    }
    case Task::disease: {
      for (size_t i = 0; i + 1 < t.visits.size(); ++i) {
        if (t.visits[i + 1].dx.empty()) continue;
        Event ev;
        ev.inputs.id = t.id;
        ev.inputs.visits.assign(t.visits.begin(),
                                t.visits.begin() + static_cast<ptrdiff_t>(i) + 1);
        ev.target_ids = t.visits[i + 1].dx;
        events.push_back(std::move(ev));
      }
      break;
    }
    case Task::treatment: {
      for (size_t i = 0; i < t.visits.size(); ++i) {
        if (t.visits[i].tx.empty()) continue;
        TreatmentEvent te = treatment_task_inputs(t, i);
        Event ev;
        ev.inputs = std::move(te.inputs);
        ev.target_ids = std::move(te.target);
        events.push_back(std::move(ev));
      }
      break;
    }
  }
  return events;
}

ModelLeaves register_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  ModelLeaves leaves;
  if (params.kind != ModelKind::bow) {
    leaves.embeddings = tape.leaf(params.embeddings.weights, requires_grad);
    leaves.lstm = register_lstm(tape, params.lstm, requires_grad);
  }
  leaves.head = register_head(tape, params.head, requires_grad);
  return leaves;
}

std::vector<Value> leaf_list(const ModelLeaves& leaves, ModelKind kind) {
  std::vector<Value> out;
  if (kind != ModelKind::bow) {
    out.push_back(leaves.embeddings);
    out.push_back(leaves.lstm.w_forget);
    out.push_back(leaves.lstm.w_input);
    out.push_back(leaves.lstm.w_output);
    out.push_back(leaves.lstm.w_cell);
    out.push_back(leaves.lstm.b_forget);
    out.push_back(leaves.lstm.b_input);
    out.push_back(leaves.lstm.b_output);
    out.push_back(leaves.lstm.b_cell);
  }
  for (size_t i = 0; i < leaves.head.weights.size(); ++i) {
    out.push_back(leaves.head.weights[i]);
    out.push_back(leaves.head.biases[i]);
  }
  return out;
}

ModelLeaves leaves_from_list(std::span<const Value> leaves, const ModelParams& params) {
  const size_t head_count = 2 * params.head.weights.size();
  const size_t want = (params.kind == ModelKind::bow ? 0 : 9) + head_count;
  if (leaves.size() != want) {
    throw std::invalid_argument("leaves_from_list: expected " + std::to_string(want) +
                                " leaves, got " + std::to_string(leaves.size()));
  }
  ModelLeaves out;
  size_t i = 0;
  if (params.kind != ModelKind::bow) {
    out.embeddings = leaves[i++];
    out.lstm.w_forget = leaves[i++];
    out.lstm.w_input = leaves[i++];
    out.lstm.w_output = leaves[i++];
    out.lstm.w_cell = leaves[i++];
    out.lstm.b_forget = leaves[i++];
    out.lstm.b_input = leaves[i++];
    out.lstm.b_output = leaves[i++];
    out.lstm.b_cell = leaves[i++];
  }
  for (size_t l = 0; l < params.head.weights.size(); ++l) {
    out.head.weights.push_back(leaves[i++]);
    out.head.biases.push_back(leaves[i++]);
  }
  return out;
}

namespace {

std::vector<int> global_rows(const EmbeddingTable& emb, std::span<const int32_t> ids,
                             bool treatment) {
  std::vector<int> rows;
  rows.reserve(ids.size());
  for (int32_t id : ids) {
    rows.push_back(static_cast<int>(treatment ? emb.treatment_row(id) : emb.disease_row(id)));
  }
  return rows;
}

/// Per-visit interaction vectors for the resset kind.
std::vector<Value> resset_inputs(const ModelLeaves& leaves, const ModelParams& params,
                                 const std::vector<Visit>& visits) {
  std::vector<Value> inputs;
  inputs.reserve(visits.size());
  for (const Visit& v : visits) {
    inputs.push_back(interact(params.cfg.interaction, leaves.embeddings,
                              global_rows(params.embeddings, v.dx, false),
                              global_rows(params.embeddings, v.tx, true), params.cfg.setfn()));
  }
  return inputs;
}

/// Per-token embedding rows for the flat kind; a record with no codes at all
/// degenerates to one zero step.
std::vector<Value> flat_inputs(const ModelLeaves& leaves, const ModelParams& params,
                               const std::vector<Visit>& visits, Rng* order_rng, bool training) {
  std::vector<int> rows =
      training ? flat_tokens_shuffled(visits, params.embeddings, params.cfg.max_tokens, *order_rng)
               : flat_tokens(visits, params.embeddings, params.cfg.max_tokens);
  Tape& tape = *leaves.head.weights[0].tape;
  if (rows.empty()) return {tape.zeros(params.cfg.embed_dim)};
  return lookup(leaves.embeddings, rows);
}

struct Forward {
  Value pooled;
  std::vector<Value> states;
};

Forward run_sequence(const ModelLeaves& leaves, const ModelParams& params,
                     const std::vector<Visit>& visits, Rng* dropout_rng, Rng* order_rng,
                     bool training) {
  std::vector<Value> inputs = params.kind == ModelKind::resset
                                  ? resset_inputs(leaves, params, visits)
                                  : flat_inputs(leaves, params, visits, order_rng, training);
  Forward f;
  f.states = unroll(leaves.lstm, inputs, /*relu_input=*/true, params.cfg.dropout, dropout_rng,
                    training);
  f.pooled = pool(f.states, params.cfg.pooling, params.cfg.exp_alpha);
  return f;
}

Value bow_pooled(const ModelLeaves& leaves, const ModelParams& params,
                 const std::vector<Visit>& visits) {
  Tape& tape = *leaves.head.weights[0].tape;
  Tensor feats = bow_features(visits, params.embeddings.n_disease, params.embeddings.n_treatment);
  return tape.constant(std::move(feats));
}

Value multilabel_event_loss(const ModelLeaves& leaves, const ModelParams& params, Value pooled,
                            std::span<const int32_t> target) {
  Value z = head_logits(pooled, leaves.head);
  if (params.cfg.multilabel_loss == MultilabelLoss::masked_softmax) {
    return masked_softmax_loss(softmax(z), target);
  }
  return sigmoid_bce_loss(z, target);
}

}  // namespace

Value event_loss(const ModelLeaves& leaves, const ModelParams& params, const Event& ev,
                 Rng* dropout_rng, Rng* order_rng, bool training) {
  Value pooled;
  Value penalty;
  bool has_penalty = false;
  if (params.kind == ModelKind::bow) {
    pooled = bow_pooled(leaves, params, ev.inputs.visits);
  } else {
    Forward f = run_sequence(leaves, params, ev.inputs.visits, dropout_rng, order_rng, training);
    pooled = f.pooled;
    if (params.cfg.state_norm_beta > 0.0 && f.states.size() > 1) {
      penalty = state_norm_penalty(f.states, params.cfg.state_norm_beta);
      has_penalty = true;
    }
  }
  Value loss;
  if (params.task == Task::readmission) {
    Value z = head_logits(pooled, leaves.head);
    loss = readmission_loss(z, ev.label);
  } else {
    loss = multilabel_event_loss(leaves, params, pooled, ev.target_ids);
  }
  return has_penalty ? loss + penalty : loss;
}

namespace {

/// Evaluation forward on a throwaway no-grad tape.
Value eval_pooled(Tape& tape, const ModelParams& params, const std::vector<Visit>& visits,
                  ModelLeaves& leaves) {
  leaves = register_params(tape, params, /*requires_grad=*/false);
  if (params.kind == ModelKind::bow) return bow_pooled(leaves, params, visits);
  return run_sequence(leaves, params, visits, nullptr, nullptr, /*training=*/false).pooled;
}

}  // namespace

std::vector<Tensor> eval_states(const ModelParams& params, const Trajectory& t) {
  if (params.kind == ModelKind::bow) {
    throw std::invalid_argument("eval_states: bow models carry no state sequence");
  }
  const Trajectory recent = truncate_to_recent(t, static_cast<size_t>(params.cfg.max_visits));
  Tape tape(/*grad_enabled=*/false);
  ModelLeaves leaves = register_params(tape, params, /*requires_grad=*/false);
  Forward f = run_sequence(leaves, params, recent.visits, nullptr, nullptr, /*training=*/false);
  std::vector<Tensor> out;
  out.reserve(f.states.size());
  for (Value h : f.states) out.push_back(h.tensor());
  return out;
}

double predict_readmission(const ModelParams& params, const Trajectory& t) {
  if (params.task != Task::readmission) {
    throw std::invalid_argument("predict_readmission: model task is " + to_string(params.task));
  }
  const Trajectory recent = truncate_to_recent(t, static_cast<size_t>(params.cfg.max_visits));
  Tape tape(/*grad_enabled=*/false);
  ModelLeaves leaves;
  Value pooled = eval_pooled(tape, params, recent.visits, leaves);
  return sigmoid(head_logits(pooled, leaves.head)).tensor().as_scalar();
}

std::vector<double> readmission_curve(const ModelParams& params, const Trajectory& t) {
  if (params.task != Task::readmission) {
    throw std::invalid_argument("readmission_curve: model task is " + to_string(params.task));
  }
  std::vector<double> probs;
  probs.reserve(t.visits.size());
  for (size_t upto = 1; upto <= t.visits.size(); ++upto) {
    Trajectory prefix;
    prefix.id = t.id;
    prefix.visits.assign(t.visits.begin(), t.visits.begin() + static_cast<ptrdiff_t>(upto));
    probs.push_back(predict_readmission(params, prefix));
  }
  return probs;
}

std::vector<ScoredEvent> predict_multilabel(const ModelParams& params, const Trajectory& t) {
  if (params.task == Task::readmission) {
    throw std::invalid_argument("predict_multilabel: model task is readmission");
  }
  std::vector<ScoredEvent> out;
  for (const Event& ev : build_events(t, params.task, params.cfg.max_visits)) {
    Tape tape(/*grad_enabled=*/false);
    ModelLeaves leaves;
    Value pooled = eval_pooled(tape, params, ev.inputs.visits, leaves);
    Value z = head_logits(pooled, leaves.head);
    Value scores =
        params.cfg.multilabel_loss == MultilabelLoss::masked_softmax ? softmax(z) : sigmoid(z);
    out.push_back(ScoredEvent{scores.tensor(), ev.target_ids});
  }
  return out;
}

}  // namespace resset
