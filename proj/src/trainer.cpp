#include "resset/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace resset {

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> v = {"lr",         "adam_beta1", "adam_beta2",
                                  "adam_eps",   "epochs",     "batch_size",
                                  "fold_count", "logreg_l2",  "logreg_max_iters"};
    const auto& m = ModelConfig::keys();
    v.insert(v.end(), m.begin(), m.end());
    return v;
  }();
  return k;
}

TrainConfig TrainConfig::from_config(const Config& cfg) {
  TrainConfig t;
  t.lr = cfg.get_double("lr", t.lr);
  t.adam_beta1 = cfg.get_double("adam_beta1", t.adam_beta1);
  t.adam_beta2 = cfg.get_double("adam_beta2", t.adam_beta2);
  t.adam_eps = cfg.get_double("adam_eps", t.adam_eps);
  t.epochs = cfg.get_int("epochs", t.epochs);
  t.batch_size = cfg.get_int("batch_size", t.batch_size);
  t.fold_count = cfg.get_int("fold_count", t.fold_count);
  t.logreg.l2 = cfg.get_double("logreg_l2", t.logreg.l2);
  t.logreg.max_iters = cfg.get_int("logreg_max_iters", t.logreg.max_iters);
  t.model = ModelConfig::from_config(cfg);
  t.validate();
  return t;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be > 0");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (fold_count < 2) throw std::invalid_argument("fold_count must be >= 2");
  if (!(logreg.l2 >= 0.0)) throw std::invalid_argument("logreg_l2 must be >= 0");
  if (logreg.max_iters < 1) throw std::invalid_argument("logreg_max_iters must be >= 1");
  model.validate();
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState st;
  for (const auto& [name, t] : params.entries()) {
    st.m.push_back(Mat::Zero(t->rows(), t->cols()));
    st.v.push_back(Mat::Zero(t->rows(), t->cols()));
  }
  return st;
}

void adam_step(ModelParams& params, const std::vector<Mat>& grads, AdamState& state,
               const TrainConfig& cfg) {
  auto entries = params.entries();
  if (grads.size() != entries.size() || state.m.size() != entries.size()) {
    throw std::invalid_argument("adam_step: gradient/state list misaligned");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < entries.size(); ++i) {
    auto& [name, tensor] = entries[i];
    const Mat& g = grads[i];
    if (g.rows() != tensor->rows() || g.cols() != tensor->cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch at " + name);
    }
    if (!g.allFinite()) {
      throw std::runtime_error("adam_step: non-finite gradient in " + name);
    }
    state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * g;
    state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
    Mat update = cfg.lr *
                 ((state.m[i] / bc1).array() / ((state.v[i] / bc2).array().sqrt() + cfg.adam_eps))
                     .matrix();
    *tensor = Tensor(tensor->mat() - update);
  }
}

std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> make_folds(size_t n_patients,
                                                                            int fold_count,
                                                                            uint64_t seed) {
  if (fold_count < 2) throw std::invalid_argument("make_folds: fold_count must be >= 2");
  if (n_patients < static_cast<size_t>(fold_count)) {
    throw std::invalid_argument("make_folds: fewer patients than folds");
  }
  std::vector<size_t> ids(n_patients);
  std::iota(ids.begin(), ids.end(), size_t{0});
  Rng rng(Rng::mix(seed, 0xF07D5));
  rng.shuffle(ids);
  std::vector<std::pair<std::vector<size_t>, std::vector<size_t>>> folds(
      static_cast<size_t>(fold_count));
  for (size_t i = 0; i < ids.size(); ++i) {
    folds[i % static_cast<size_t>(fold_count)].second.push_back(ids[i]);
  }
  for (auto& [train, test] : folds) {
    std::sort(test.begin(), test.end());
    for (size_t id = 0; id < n_patients; ++id) {
      if (!std::binary_search(test.begin(), test.end(), id)) train.push_back(id);
    }
  }
  return folds;
}

namespace {

ModelParams train_bow(const Dataset& data, Task task, const TrainConfig& cfg, Index n_disease,
                      Index n_treatment) {
  std::vector<Event> events;
  for (const Trajectory& t : data) {
    auto ev = build_events(t, task, cfg.model.max_visits);
    events.insert(events.end(), std::make_move_iterator(ev.begin()),
                  std::make_move_iterator(ev.end()));
  }
  if (events.empty()) throw std::invalid_argument("train_model: dataset yields no events");
  const Index feat = bow_feature_dim(n_disease, n_treatment);
  Mat x(static_cast<Index>(events.size()), feat);
  for (size_t i = 0; i < events.size(); ++i) {
    x.row(static_cast<Index>(i)) =
        bow_features(events[i].inputs.visits, n_disease, n_treatment).mat().transpose();
  }
  ModelParams params;
  params.kind = ModelKind::bow;
  params.task = task;
  params.cfg = cfg.model;
  params.embeddings.n_disease = n_disease;
  params.embeddings.n_treatment = n_treatment;
  LogRegModel fit;
  if (task == Task::readmission) {
    std::vector<int> labels;
    labels.reserve(events.size());
    for (const Event& ev : events) labels.push_back(ev.label);
    fit = train_logreg_binary(x, labels, cfg.logreg);
  } else {
    std::vector<std::vector<int32_t>> targets;
    targets.reserve(events.size());
    for (const Event& ev : events) targets.push_back(ev.target_ids);
    fit = train_logreg_multilabel(x, targets, target_vocab(task, n_disease, n_treatment),
                                  cfg.logreg);
  }
  params.head.weights = {fit.weights};
  params.head.biases = {fit.bias};
  return params;
}

}  // namespace

ModelParams train_model(const Dataset& data, ModelKind kind, Task task, const TrainConfig& cfg,
                        Index n_disease, Index n_treatment, uint64_t seed, TrainLog* log) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_model: empty dataset");
  for (const Trajectory& t : data) {
    if (t.visits.size() < 2) {
      throw std::invalid_argument("train_model: patient " + t.id + " has fewer than 2 visits");
    }
  }
  if (kind == ModelKind::bow) return train_bow(data, task, cfg, n_disease, n_treatment);

  ModelParams params = init_params(kind, task, cfg.model, n_disease, n_treatment, seed);
  std::vector<std::vector<Event>> events;
  std::vector<size_t> pool;  // patients that contribute at least one event
  events.reserve(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    events.push_back(build_events(data[i], task, cfg.model.max_visits));
    if (!events.back().empty()) pool.push_back(i);
  }
  if (pool.empty()) throw std::invalid_argument("train_model: dataset yields no events");

  AdamState state = AdamState::init(params);
  Rng shuffle_rng = Rng(seed).split(0x5F1E);
  Rng dropout_rng = Rng(seed).split(0xD707);
  Rng order_rng = Rng(seed).split(0x07DE);
  if (log) log->epoch_mean_loss.clear();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(pool);
    double epoch_loss = 0.0;
    size_t epoch_events = 0;
    size_t batch_id = 0;
    for (size_t start = 0; start < pool.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(pool.size(), start + static_cast<size_t>(cfg.batch_size));
      Tape tape;
      ModelLeaves leaves = register_params(tape, params, /*requires_grad=*/true);
      std::vector<Value> losses;
      try {
        for (size_t p = start; p < end; ++p) {
          for (const Event& ev : events[pool[p]]) {
            losses.push_back(
                event_loss(leaves, params, ev, &dropout_rng, &order_rng, /*training=*/true));
          }
        }
        Value total = scale(add_chain(losses), 1.0 / static_cast<double>(losses.size()));
        tape.backward(total);
        epoch_loss += total.scalar() * static_cast<double>(losses.size());
        epoch_events += losses.size();
        std::vector<Mat> grads;
        for (Value leaf : leaf_list(leaves, kind)) grads.push_back(leaf.grad());
        adam_step(params, grads, state, cfg);
      } catch (const std::exception& e) {
        throw std::runtime_error("train_model: epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(batch_id) + ": " + e.what());
      }
      ++batch_id;
    }
    if (log) log->epoch_mean_loss.push_back(epoch_loss / static_cast<double>(epoch_events));
  }
  return params;
}

namespace {

nlohmann::json tensor_json(const Tensor& t) {
  nlohmann::json data = nlohmann::json::array();
  for (Index r = 0; r < t.rows(); ++r) {
    for (Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
  }
  return nlohmann::json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::move(data)}};
}

Tensor tensor_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw std::invalid_argument("model file: malformed tensor " + name);
  }
  const Index rows = j["rows"].get<Index>();
  const Index cols = j["cols"].get<Index>();
  const auto& data = j["data"];
  if (rows < 0 || cols < 0 || data.size() != static_cast<size_t>(rows * cols)) {
    throw std::invalid_argument("model file: bad shape for tensor " + name);
  }
  Mat m(rows, cols);
  size_t k = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return Tensor(std::move(m));
}

nlohmann::json config_json(const ModelConfig& cfg) {
  return nlohmann::json{{"embed_dim", cfg.embed_dim},
                        {"hidden_dim", cfg.hidden_dim},
                        {"max_visits", cfg.max_visits},
                        {"dropout", cfg.dropout},
                        {"interaction", to_string(cfg.interaction)},
                        {"pooling", to_string(cfg.pooling)},
                        {"exp_alpha", cfg.exp_alpha},
                        {"epsilon", cfg.epsilon},
                        {"state_norm_beta", cfg.state_norm_beta},
                        {"head_layers", cfg.head_layers},
                        {"multilabel_loss", to_string(cfg.multilabel_loss)},
                        {"topk_max", cfg.topk_max},
                        {"max_tokens", cfg.max_tokens}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.embed_dim = j.at("embed_dim").get<Index>();
  cfg.hidden_dim = j.at("hidden_dim").get<Index>();
  cfg.max_visits = j.at("max_visits").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.interaction = parse_interaction(j.at("interaction").get<std::string>());
  cfg.pooling = parse_pooling(j.at("pooling").get<std::string>());
  cfg.exp_alpha = j.at("exp_alpha").get<double>();
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.state_norm_beta = j.at("state_norm_beta").get<double>();
  cfg.head_layers = j.at("head_layers").get<int>();
  cfg.multilabel_loss = parse_multilabel_loss(j.at("multilabel_loss").get<std::string>());
  cfg.topk_max = j.at("topk_max").get<int>();
  cfg.max_tokens = j.at("max_tokens").get<int>();
  cfg.validate();
  return cfg;
}

}  // namespace

void save_model(const ModelParams& params, uint64_t disease_hash, uint64_t treatment_hash,
                const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = to_string(params.kind);
  j["task"] = to_string(params.task);
  j["config"] = config_json(params.cfg);
  j["n_disease"] = params.embeddings.n_disease;
  j["n_treatment"] = params.embeddings.n_treatment;
  // Hashes as decimal strings: they exceed JSON's exact integer range.
  j["vocab_hash"] = {{"disease", std::to_string(disease_hash)},
                     {"treatment", std::to_string(treatment_hash)}};
  nlohmann::json tensors;
  for (const auto& [name, t] : params.entries()) tensors[name] = tensor_json(*t);
  j["params"] = std::move(tensors);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

ModelParams load_model(const std::string& path, const CodeVocab& diseases,
                       const CodeVocab& treatments) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw std::invalid_argument("load_model: " + path + " is not a model file");
  }
  if (j.value("version", 0) != 1) {
    throw std::invalid_argument("load_model: unsupported version in " + path);
  }
  const auto& vh = j.at("vocab_hash");
  if (vh.at("disease").get<std::string>() != std::to_string(diseases.content_hash()) ||
      vh.at("treatment").get<std::string>() != std::to_string(treatments.content_hash())) {
    throw std::invalid_argument("load_model: vocabulary mismatch for " + path);
  }
  const auto n_disease = j.at("n_disease").get<Index>();
  const auto n_treatment = j.at("n_treatment").get<Index>();
  if (n_disease != diseases.size() || n_treatment != treatments.size()) {
    throw std::invalid_argument("load_model: vocabulary size mismatch for " + path);
  }
  const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
  const Task task = parse_task(j.at("task").get<std::string>());
  const ModelConfig cfg = config_from_json(j.at("config"));
  ModelParams params = init_params(kind, task, cfg, n_disease, n_treatment, /*seed=*/0);
  const auto& tensors = j.at("params");
  for (auto& [name, tensor] : params.entries()) {
    if (!tensors.contains(name)) {
      throw std::invalid_argument("load_model: missing tensor " + name);
    }
    Tensor loaded = tensor_from_json(tensors[name], name);
    if (!loaded.same_shape(*tensor)) {
      throw std::invalid_argument("load_model: shape mismatch for tensor " + name);
    }
    *tensor = std::move(loaded);
  }
  if (tensors.size() != params.entries().size()) {
    throw std::invalid_argument("load_model: unexpected extra tensors in " + path);
  }
  return params;
}

}  // namespace resset
