#include "resset/cohortsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "resset/baselines.hpp"
#include "resset/metrics.hpp"
#include "resset/rng.hpp"
#include "resset/trainer.hpp"

namespace resset {

const std::vector<std::string>& SimConfig::keys() {
  static const std::vector<std::string> k = {
      "n_patients", "disease_vocab", "treatment_vocab", "latent_states",
      "visits_min", "visits_max",    "dx_min",          "dx_max",
      "tx_min",     "tx_max",        "treatment_efficacy", "coding_noise",
      "treat_prob", "worsen_prob",   "exchangeable",    "seed"};
  return k;
}

SimConfig SimConfig::from_config(const Config& cfg) {
  SimConfig s;
  s.n_patients = cfg.get_int("n_patients", s.n_patients);
  s.disease_vocab = cfg.get_int("disease_vocab", s.disease_vocab);
  s.treatment_vocab = cfg.get_int("treatment_vocab", s.treatment_vocab);
  s.latent_states = cfg.get_int("latent_states", s.latent_states);
  s.visits_min = cfg.get_int("visits_min", s.visits_min);
  s.visits_max = cfg.get_int("visits_max", s.visits_max);
  s.dx_min = cfg.get_int("dx_min", s.dx_min);
  s.dx_max = cfg.get_int("dx_max", s.dx_max);
  s.tx_min = cfg.get_int("tx_min", s.tx_min);
  s.tx_max = cfg.get_int("tx_max", s.tx_max);
  s.treatment_efficacy = cfg.get_double("treatment_efficacy", s.treatment_efficacy);
  s.coding_noise = cfg.get_double("coding_noise", s.coding_noise);
  s.treat_prob = cfg.get_double("treat_prob", s.treat_prob);
  s.worsen_prob = cfg.get_double("worsen_prob", s.worsen_prob);
  s.exchangeable = cfg.get_bool("exchangeable", s.exchangeable);
  s.seed = cfg.get_u64("seed", s.seed);
  s.validate();
  return s;
}

void SimConfig::validate() const {
  if (n_patients < 1) throw std::invalid_argument("sim: n_patients must be >= 1");
  if (disease_vocab < 1 || treatment_vocab < 1) {
    throw std::invalid_argument("sim: vocab sizes must be >= 1");
  }
  if (latent_states < 2) throw std::invalid_argument("sim: latent_states must be >= 2");
  if (visits_min < 2) throw std::invalid_argument("sim: visits_min must be >= 2");
  if (visits_max < visits_min) throw std::invalid_argument("sim: visits_max < visits_min");
  if (dx_min < 1 || dx_max < dx_min || dx_max > disease_vocab) {
    throw std::invalid_argument("sim: bad dx emission range");
  }
  if (tx_min < 0 || tx_max < tx_min || tx_max > treatment_vocab) {
    throw std::invalid_argument("sim: bad tx emission range");
  }
  for (auto [p, name] : {std::pair{treatment_efficacy, "treatment_efficacy"},
                         std::pair{coding_noise, "coding_noise"},
                         std::pair{treat_prob, "treat_prob"},
                         std::pair{worsen_prob, "worsen_prob"}}) {
    if (p < 0.0 || p > 1.0) {
      throw std::invalid_argument(std::string("sim: ") + name + " must lie in [0, 1]");
    }
  }
}

namespace {

/// The indicated treatment for a disease, a fixed many-to-one map.
int indicated_treatment(int disease, int disease_vocab, int treatment_vocab) {
  return disease * treatment_vocab / disease_vocab;
}

/// Distinct diseases for one visit at severity s: each draw lands in the
/// current band with high probability, anywhere otherwise.
std::vector<int32_t> sample_diseases(Rng& rng, const SimConfig& cfg, int state, int count) {
  std::vector<int32_t> out;
  int guard = 0;
  while (static_cast<int>(out.size()) < count && guard < 1000) {
    ++guard;
    int d;
    if (rng.uniform() < 0.75) {
      // in-band draw
      int lo = state * cfg.disease_vocab / cfg.latent_states;
      int hi = std::max(lo, (state + 1) * cfg.disease_vocab / cfg.latent_states - 1);
      d = rng.uniform_int(lo, hi);
    } else {
      d = rng.uniform_int(0, cfg.disease_vocab - 1);
    }
    if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void apply_coding_noise(Rng& rng, std::vector<int32_t>& bag, int vocab, double noise,
                        bool keep_one) {
  if (noise <= 0.0) return;
  std::vector<int32_t> original = bag;
  bag.erase(std::remove_if(bag.begin(), bag.end(),
                           [&](int32_t) { return rng.bernoulli(noise); }),
            bag.end());
  if (rng.bernoulli(noise)) bag.push_back(rng.uniform_int(0, vocab - 1));
  if (keep_one && bag.empty() && !original.empty()) {
    bag.push_back(original[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(original.size()) - 1))]);
  }
  std::sort(bag.begin(), bag.end());
  bag.erase(std::unique(bag.begin(), bag.end()), bag.end());
}

}  // namespace

Cohort generate(const SimConfig& cfg) {
  cfg.validate();
  Cohort cohort;
  std::vector<std::string> dcodes, tcodes;
  for (int i = 0; i < cfg.disease_vocab; ++i) dcodes.push_back("D" + std::to_string(i));
  for (int i = 0; i < cfg.treatment_vocab; ++i) tcodes.push_back("T" + std::to_string(i));
  cohort.diseases = CodeVocab(CodeKind::disease, std::move(dcodes));
  cohort.treatments = CodeVocab(CodeKind::treatment, std::move(tcodes));

  const int k = cfg.latent_states;
  // Mildly front-loaded prior leaves headroom for the chain to worsen.
  std::vector<double> prior(static_cast<size_t>(k));
  for (int s = 0; s < k; ++s) prior[static_cast<size_t>(s)] = static_cast<double>(k - s);

  for (int pid = 0; pid < cfg.n_patients; ++pid) {
    Rng rng(Rng::mix(cfg.seed, 0xC0C0 + static_cast<uint64_t>(pid)));
    Trajectory traj;
    traj.id = "P" + std::to_string(pid);
    const int n_visits = rng.uniform_int(cfg.visits_min, cfg.visits_max);
    std::vector<int> states;
    int s = static_cast<int>(rng.categorical(prior));
    for (int t = 0; t < n_visits; ++t) {
      if (cfg.exchangeable && t > 0) s = static_cast<int>(rng.categorical(prior));
      states.push_back(s);

      Visit visit;
      const int n_dx = rng.uniform_int(cfg.dx_min, cfg.dx_max);
      visit.dx = sample_diseases(rng, cfg, s, n_dx);

      // Indicated treatments for the visit's diseases, each given with
      // probability treat_prob, padded with unrelated treatments up to the
      // sampled bag size.
      const int n_tx = rng.uniform_int(cfg.tx_min, cfg.tx_max);
      size_t treated = 0;
      std::vector<int32_t> tx;
      for (int32_t d : visit.dx) {
        if (rng.bernoulli(cfg.treat_prob)) {
          tx.push_back(indicated_treatment(d, cfg.disease_vocab, cfg.treatment_vocab));
          ++treated;
        }
      }
      while (static_cast<int>(tx.size()) < n_tx) {
        tx.push_back(rng.uniform_int(0, cfg.treatment_vocab - 1));
      }
      std::sort(tx.begin(), tx.end());
      tx.erase(std::unique(tx.begin(), tx.end()), tx.end());
      visit.tx = std::move(tx);

      if (!cfg.exchangeable && t + 1 < n_visits) {
        const double treated_frac =
            visit.dx.empty() ? 0.0
                             : static_cast<double>(treated) / static_cast<double>(visit.dx.size());
        if (rng.bernoulli(cfg.treatment_efficacy * treated_frac)) {
          s = std::max(0, s - 1);
        } else if (rng.bernoulli(cfg.worsen_prob)) {
          s = std::min(k - 1, s + 1);
        }
      }

      apply_coding_noise(rng, visit.dx, cfg.disease_vocab, cfg.coding_noise, /*keep_one=*/true);
      apply_coding_noise(rng, visit.tx, cfg.treatment_vocab, cfg.coding_noise, /*keep_one=*/false);
      traj.visits.push_back(std::move(visit));
    }

    double severity;
    if (cfg.exchangeable) {
      // Order carries nothing: the label reads the mean state instead of the
      // final one.
      double sum = 0.0;
      for (int st : states) sum += st;
      severity = sum / static_cast<double>(states.size());
    } else {
      severity = static_cast<double>(states.back());
    }
    const double p_readmit = 0.05 + 0.9 * severity / static_cast<double>(k - 1);
    traj.readmit = rng.bernoulli(p_readmit) ? 1 : 0;

    cohort.latents.push_back(std::move(states));
    cohort.data.push_back(std::move(traj));
  }
  return cohort;
}

void save_latents(const std::string& path, const Cohort& cohort) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_latents: cannot open " + path);
  for (size_t i = 0; i < cohort.data.size(); ++i) {
    nlohmann::json j{{"id", cohort.data[i].id}, {"states", cohort.latents[i]}};
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_latents: write failed for " + path);
}

CohortStats cohort_stats(const Dataset& data) {
  CohortStats st;
  st.patients = data.size();
  size_t positives = 0;
  for (const Trajectory& t : data) {
    st.visits += t.visits.size();
    for (const Visit& v : t.visits) {
      st.disease_tokens += v.dx.size();
      st.treatment_tokens += v.tx.size();
    }
    if (t.readmit == 1) ++positives;
  }
  if (st.patients > 0) {
    st.mean_visits = static_cast<double>(st.visits) / static_cast<double>(st.patients);
    st.positive_rate = static_cast<double>(positives) / static_cast<double>(st.patients);
  }
  if (st.visits > 0) {
    st.mean_dx_per_visit = static_cast<double>(st.disease_tokens) / static_cast<double>(st.visits);
    st.mean_tx_per_visit =
        static_cast<double>(st.treatment_tokens) / static_cast<double>(st.visits);
  }
  return st;
}

std::string CohortStats::to_json() const {
  nlohmann::json j{{"patients", patients},
                   {"visits", visits},
                   {"disease_tokens", disease_tokens},
                   {"treatment_tokens", treatment_tokens},
                   {"mean_visits", mean_visits},
                   {"mean_dx_per_visit", mean_dx_per_visit},
                   {"mean_tx_per_visit", mean_tx_per_visit},
                   {"positive_rate", positive_rate}};
  return j.dump(2) + "\n";
}

namespace {

/// Recency-weighted count features over the last window visits: a code seen
/// r visits before the end contributes gamma^r. Depends on visit order,
/// unlike plain counts.
Mat recency_features(const Dataset& data, Index n_disease, Index n_treatment, int window,
                     double gamma) {
  const Index dim = n_disease + n_treatment;
  Mat x = Mat::Zero(static_cast<Index>(data.size()), dim);
  for (size_t i = 0; i < data.size(); ++i) {
    const auto& visits = data[i].visits;
    const size_t take = std::min(visits.size(), static_cast<size_t>(window));
    for (size_t r = 0; r < take; ++r) {
      const Visit& v = visits[visits.size() - 1 - r];
      const double w = std::pow(gamma, static_cast<double>(r));
      for (int32_t id : v.dx) x(static_cast<Index>(i), id) += w;
      for (int32_t id : v.tx) x(static_cast<Index>(i), n_disease + id) += w;
    }
  }
  return x;
}

double probe_auc(const Mat& x, const std::vector<int>& labels, uint64_t seed) {
  auto folds = make_folds(static_cast<size_t>(x.rows()), 5, seed);
  double total = 0.0;
  for (const auto& [train_ids, test_ids] : folds) {
    Mat xtr(static_cast<Index>(train_ids.size()), x.cols());
    std::vector<int> ytr;
    ytr.reserve(train_ids.size());
    for (size_t i = 0; i < train_ids.size(); ++i) {
      xtr.row(static_cast<Index>(i)) = x.row(static_cast<Index>(train_ids[i]));
      ytr.push_back(labels[train_ids[i]]);
    }
    LogRegOptions opt;
    opt.max_iters = 300;  // the probe needs a ranking, not convergence
    LogRegModel model = train_logreg_binary(xtr, ytr, opt);
    std::vector<double> scores;
    std::vector<int> ytest;
    scores.reserve(test_ids.size());
    for (size_t id : test_ids) {
      scores.push_back((x.row(static_cast<Index>(id)) * model.weights.mat().transpose())(0, 0) +
                       model.bias(0, 0));
      ytest.push_back(labels[id]);
    }
    total += auc(scores, ytest);
  }
  return total / static_cast<double>(folds.size());
}

}  // namespace

ProbeResult order_sensitivity_probe(const Dataset& data, Index n_disease, Index n_treatment,
                                    uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const Trajectory& t : data) {
    if (t.readmit != 0 && t.readmit != 1) {
      throw std::invalid_argument("order_sensitivity_probe: patient " + t.id + " lacks a label");
    }
    labels.push_back(t.readmit);
  }
  const int window = 10;
  const double gamma = 0.5;

  ProbeResult r;
  r.auc_true_order =
      probe_auc(recency_features(data, n_disease, n_treatment, window, gamma), labels, seed);

  // The shuffled side is an estimate of order-blind performance; averaging a
  // few independent shuffles keeps a single unlucky permutation from faking
  // a gap on exchangeable data.
  const int repeats = 3;
  double total = 0.0;
  for (int rep = 0; rep < repeats; ++rep) {
    Dataset shuffled = data;
    Rng rng(Rng::mix(seed, 0x0DDE + static_cast<uint64_t>(rep)));
    for (Trajectory& t : shuffled) rng.shuffle(t.visits);
    total += probe_auc(recency_features(shuffled, n_disease, n_treatment, window, gamma), labels,
                       seed);
  }
  r.auc_shuffled = total / static_cast<double>(repeats);
  return r;
}

}  // namespace resset
