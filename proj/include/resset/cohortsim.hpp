#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resset/codespace.hpp"
#include "resset/config.hpp"
#include "resset/data.hpp"

namespace resset {

/// Generator knobs. The planted mechanism is a K-state latent severity chain
/// per patient: diseases are emitted from severity-banded distributions,
/// indicated treatments (when actually given) make improvement likely, and
/// the readmission label depends on the final state, so the label carries
/// information about visit order by construction.
struct SimConfig {
  int n_patients = 2000;
  int disease_vocab = 50;
  int treatment_vocab = 100;
  int latent_states = 4;
  int visits_min = 2;
  int visits_max = 10;
  int dx_min = 1;
  int dx_max = 6;
  int tx_min = 0;
  int tx_max = 5;
  double treatment_efficacy = 0.8;  // improvement odds scale with this
  double coding_noise = 0.05;       // per-code drop rate, per-visit add rate
  double treat_prob = 0.6;          // chance each indicated treatment is given
  double worsen_prob = 0.45;        // chance of worsening when not improving
  bool exchangeable = false;        // ablation: iid states, order carries nothing
  uint64_t seed = 42;

  static const std::vector<std::string>& keys();
  static SimConfig from_config(const Config& cfg);
  void validate() const;
};

struct Cohort {
  Dataset data;
  std::vector<std::vector<int>> latents;  // per patient: s_1..s_T
  CodeVocab diseases;
  CodeVocab treatments;
};

/// Deterministic in cfg.seed; patients draw from independent streams keyed
/// by (seed, patient index), so generation order cannot matter.
Cohort generate(const SimConfig& cfg);

/// {"id": ..., "states": [...]} per line, for probes and diagnostics only;
/// models never read this file.
void save_latents(const std::string& path, const Cohort& cohort);

struct CohortStats {
  size_t patients = 0;
  size_t visits = 0;
  size_t disease_tokens = 0;
  size_t treatment_tokens = 0;
  double mean_visits = 0.0;
  double mean_dx_per_visit = 0.0;
  double mean_tx_per_visit = 0.0;
  double positive_rate = 0.0;

  std::string to_json() const;
};

CohortStats cohort_stats(const Dataset& data);

struct ProbeResult {
  double auc_true_order = 0.0;
  double auc_shuffled = 0.0;

  double gap() const { return auc_true_order - auc_shuffled; }
};

/// Fits a logistic model on recency-weighted code counts twice, once on the
/// real visit order and once on per-patient shuffles (averaged over three
/// independent shuffles), and returns both 5-fold cross-validated AUCs.
/// A healthy planted sequence signal shows up as a positive gap; an
/// exchangeable cohort shows none. Plain counts would be unaffected by the
/// shuffle, so the gap isolates order information.
ProbeResult order_sensitivity_probe(const Dataset& data, Index n_disease, Index n_treatment,
                                    uint64_t seed = 1234);

}  // namespace resset
