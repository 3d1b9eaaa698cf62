// Command-line front end: cohort generation, training, evaluation,
// prediction and embedding export, all reproducible from a single seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "resset/cohortsim.hpp"
#include "resset/crossval.hpp"
#include "resset/trainer.hpp"

namespace fs = std::filesystem;
using namespace resset;

namespace {

struct CommonArgs {
  std::string data;
  std::string task = "readmission";
  std::string model = "resset";
  std::string config;
  uint64_t seed = 42;
  std::string out;
  int jobs = 1;
  bool seed_given = false;
};

Config load_config_or_empty(const std::string& path) {
  return path.empty() ? Config{} : Config::load(path);
}

/// Vocab files live beside the dataset: <dir>/diseases.vocab, treatments.vocab.
std::pair<CodeVocab, CodeVocab> load_vocabs_near(const std::string& data_path) {
  fs::path dir = fs::path(data_path);
  if (!fs::is_directory(dir)) dir = dir.parent_path();
  fs::path d = dir / "diseases.vocab";
  fs::path t = dir / "treatments.vocab";
  if (!fs::exists(d) || !fs::exists(t)) {
    throw std::runtime_error("expected vocab files " + d.string() + " and " + t.string());
  }
  return {CodeVocab::load(d.string(), CodeKind::disease),
          CodeVocab::load(t.string(), CodeKind::treatment)};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

int cmd_gen(const CommonArgs& args) {
  Config file_cfg = load_config_or_empty(args.config);
  file_cfg.require_known(SimConfig::keys());
  SimConfig sim = SimConfig::from_config(file_cfg);
  if (args.seed_given) sim.seed = args.seed;
  if (args.out.empty()) throw std::runtime_error("gen: --out directory is required");
  fs::create_directories(args.out);

  Cohort cohort = generate(sim);
  const fs::path dir(args.out);
  cohort.diseases.save((dir / "diseases.vocab").string());
  cohort.treatments.save((dir / "treatments.vocab").string());
  save_jsonl((dir / "cohort.jsonl").string(), cohort.data, cohort.diseases, cohort.treatments);
  save_latents((dir / "cohort.latents.jsonl").string(), cohort);

  CohortStats stats = cohort_stats(cohort.data);
  write_text((dir / "stats.json").string(), stats.to_json());

  nlohmann::json probe_json;
  try {
    ProbeResult probe = order_sensitivity_probe(cohort.data, cohort.diseases.size(),
                                                cohort.treatments.size(), sim.seed);
    probe_json = {{"auc_true_order", probe.auc_true_order},
                  {"auc_shuffled", probe.auc_shuffled},
                  {"gap", probe.gap()}};
  } catch (const std::exception& e) {
    // Cohorts too small for a cross-validated probe still generate fine.
    probe_json = {{"error", e.what()}};
  }
  nlohmann::json summary{{"stats", nlohmann::json::parse(stats.to_json())},
                         {"order_probe", std::move(probe_json)}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_crossval(const CommonArgs& args) {
  if (args.data.empty()) throw std::runtime_error("crossval: --data is required");
  if (args.out.empty()) throw std::runtime_error("crossval: --out directory is required");
  Config file_cfg = load_config_or_empty(args.config);
  file_cfg.require_known(TrainConfig::keys());
  TrainConfig cfg = TrainConfig::from_config(file_cfg);
  auto [diseases, treatments] = load_vocabs_near(args.data);
  Dataset data = load_jsonl(args.data, diseases, treatments);
  const Task task = parse_task(args.task);
  const ModelKind kind = parse_model_kind(args.model);

  CrossvalResult result = run_crossval(data, kind, task, cfg, diseases.size(),
                                       treatments.size(), args.seed, args.jobs);
  fs::create_directories(args.out);
  const fs::path dir(args.out);
  write_text((dir / "report.json").string(), result.report.to_json());
  for (size_t f = 0; f < result.fold_models.size(); ++f) {
    save_model(result.fold_models[f], diseases.content_hash(), treatments.content_hash(),
               (dir / ("fold" + std::to_string(f) + ".model.json")).string());
  }
  std::cout << result.report.to_json();
  return 0;
}

int cmd_train(const CommonArgs& args) {
  if (args.data.empty()) throw std::runtime_error("train: --data is required");
  if (args.out.empty()) throw std::runtime_error("train: --out model path is required");
  Config file_cfg = load_config_or_empty(args.config);
  file_cfg.require_known(TrainConfig::keys());
  TrainConfig cfg = TrainConfig::from_config(file_cfg);
  auto [diseases, treatments] = load_vocabs_near(args.data);
  Dataset data = load_jsonl(args.data, diseases, treatments);

  TrainLog log;
  ModelParams params = train_model(data, parse_model_kind(args.model), parse_task(args.task),
                                   cfg, diseases.size(), treatments.size(), args.seed, &log);
  save_model(params, diseases.content_hash(), treatments.content_hash(), args.out);
  nlohmann::json j{{"model", args.out}, {"epoch_mean_loss", log.epoch_mean_loss}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  if (args.data.empty()) throw std::runtime_error("eval: --data is required");
  if (args.model.empty()) throw std::runtime_error("eval: --model model file is required");
  auto [diseases, treatments] = load_vocabs_near(args.data);
  Dataset data = load_jsonl(args.data, diseases, treatments);
  ModelParams params = load_model(args.model, diseases, treatments);

  EvalReport report;
  report.task = to_string(params.task);
  report.folds.push_back(evaluate_fold(params, data));
  if (!args.out.empty()) write_text(args.out, report.to_json());
  std::cout << report.to_json();
  return 0;
}

int cmd_predict(const CommonArgs& args) {
  if (args.data.empty()) throw std::runtime_error("predict: --data is required");
  if (args.model.empty()) throw std::runtime_error("predict: --model model file is required");
  auto [diseases, treatments] = load_vocabs_near(args.data);
  ModelParams params = load_model(args.model, diseases, treatments);
  LoadStats stats;
  Dataset data = load_jsonl(args.data, diseases, treatments, /*allow_unknown=*/true, &stats);

  nlohmann::json preds = nlohmann::json::array();
  for (const Trajectory& t : data) {
    nlohmann::json j{{"id", t.id}};
    if (params.task == Task::readmission) {
      std::vector<double> curve = readmission_curve(params, t);
      j["per_visit"] = curve;
      j["final"] = curve.back();
    } else {
      nlohmann::json events = nlohmann::json::array();
      for (const ScoredEvent& ev : predict_multilabel(params, t)) {
        std::vector<int32_t> ids = topk(ev.scores, params.cfg.topk_max);
        nlohmann::json codes = nlohmann::json::array();
        nlohmann::json scores = nlohmann::json::array();
        const CodeVocab& vocab = params.task == Task::disease ? diseases : treatments;
        for (int32_t id : ids) {
          codes.push_back(vocab.code(id));
          scores.push_back(ev.scores(id));
        }
        events.push_back(nlohmann::json{{"topk", std::move(codes)}, {"scores", std::move(scores)}});
      }
      j["events"] = std::move(events);
    }
    preds.push_back(std::move(j));
  }
  nlohmann::json out{{"predictions", std::move(preds)},
                     {"unknown_codes", stats.unknown_codes}};
  if (stats.unknown_codes > 0) {
    std::cerr << "warning: dropped " << stats.unknown_codes << " unknown code(s)\n";
  }
  const std::string text = out.dump(2) + "\n";
  if (!args.out.empty()) write_text(args.out, text);
  std::cout << text;
  return 0;
}

int cmd_export_embeddings(const CommonArgs& args) {
  if (args.data.empty()) {
    throw std::runtime_error("export-embeddings: --data (dataset or its directory) is required");
  }
  if (args.model.empty()) throw std::runtime_error("export-embeddings: --model is required");
  if (args.out.empty()) throw std::runtime_error("export-embeddings: --out path is required");
  auto [diseases, treatments] = load_vocabs_near(args.data);
  ModelParams params = load_model(args.model, diseases, treatments);
  if (params.kind == ModelKind::bow) {
    throw std::runtime_error("export-embeddings: bow models have no embedding table");
  }
  export_embeddings(params.embeddings, diseases, treatments, args.out);
  std::cout << nlohmann::json{{"out", args.out},
                              {"rows", params.embeddings.rows()}}
                   .dump()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent sequences-of-sets models for medical-record risk prediction"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* cmd, bool model_is_file) {
    cmd->add_option("--data", args.data, "dataset JSONL (vocab files expected beside it)");
    cmd->add_option("--task", args.task, "readmission | disease | treatment");
    cmd->add_option("--model", args.model,
                    model_is_file ? "trained model file" : "resset | bow | flat-lstm");
    cmd->add_option("--config", args.config, "flat key=value config file");
    cmd->add_option("--seed", args.seed, "root seed for all randomness")
        ->each([&](const std::string&) { args.seed_given = true; });
    cmd->add_option("--out", args.out, "output file or directory");
    cmd->add_option("--jobs", args.jobs, "parallel fold workers (crossval)");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic cohort");
  CLI::App* crossval = app.add_subcommand("crossval", "k-fold cross-validated evaluation");
  CLI::App* train = app.add_subcommand("train", "fit one model on the whole dataset");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a saved model on a dataset");
  CLI::App* predict = app.add_subcommand("predict", "per-patient predictions from a saved model");
  CLI::App* exporte = app.add_subcommand("export-embeddings", "dump the embedding table as CSV");
  for (CLI::App* cmd : {gen, crossval, train}) add_common(cmd, false);
  for (CLI::App* cmd : {eval, predict, exporte}) add_common(cmd, true);

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen(args);
    if (crossval->parsed()) return cmd_crossval(args);
    if (train->parsed()) return cmd_train(args);
    if (eval->parsed()) return cmd_eval(args);
    if (predict->parsed()) return cmd_predict(args);
    if (exporte->parsed()) return cmd_export_embeddings(args);
    throw std::runtime_error("no subcommand");
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
