#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gamenet/baselines.hpp"
#include "gamenet/errors.hpp"
#include "gamenet/graphs.hpp"
#include "gamenet/metrics.hpp"
#include "gamenet/model.hpp"
#include "gamenet/synthetic.hpp"
#include "gamenet/train.hpp"

namespace fs = std::filesystem;
using namespace gamenet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitArgument = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ArgumentError(what + " path is required");
  if (!fs::exists(path)) throw DataError(what + " not found: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

struct DataInputs {
  fs::path records;
  fs::path vocab_dir;
  fs::path ddi;
};

void add_data_flags(CLI::App* cmd, DataInputs& in, bool need_ddi) {
  cmd->add_option("--records", in.records, "Patient records (JSON lines)")->required();
  cmd->add_option("--vocab-dir", in.vocab_dir, "Directory holding diagnosis.txt, procedure.txt, medication.txt")
      ->required();
  auto* ddi = cmd->add_option("--ddi", in.ddi, "Drug-drug interaction pairs (TSV)");
  if (need_ddi) ddi->required();
}

struct LoadedData {
  Vocabularies vocab;
  std::vector<PatientRecord> records;
};

LoadedData load_data(const DataInputs& in, const LoadOptions& options = {}) {
  require_file(in.records, "records file");
  require_file(in.vocab_dir, "vocabulary directory");
  LoadedData data;
  data.vocab = Vocabularies::load(in.vocab_dir);
  auto loaded = load_records(in.records, data.vocab, options);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  if (loaded.dropped_short_patients > 0) {
    std::cerr << "dropped " << loaded.dropped_short_patients << " patients with fewer than " << options.min_visits
              << " visits\n";
  }
  data.records = std::move(loaded.records);
  return data;
}

Eigen::MatrixXd load_ddi(const fs::path& path, const CodeVocabulary& medications) {
  require_file(path, "DDI file");
  auto ddi = build_ddi_adjacency(read_ddi_pairs(path), medications);
  for (const auto& w : ddi.warnings) std::cerr << "warning: " << w << '\n';
  return std::move(ddi.adjacency);
}

// gen-data

struct GenDataArgs {
  fs::path out;
  std::uint64_t seed = 0;
  SyntheticConfig config;
};

int cmd_gen_data(const GenDataArgs& args) {
  if (args.config.num_patients <= 0) throw ArgumentError("--patients must be positive");
  if (args.out.empty()) throw ArgumentError("--out is required");
  const auto cohort = generate_synthetic_cohort(args.config, args.seed);
  write_cohort(args.out, cohort);
  std::cout << format_statistics(cohort_statistics(cohort.records, cohort.vocab, cohort.ddi_pairs));
  std::cout << "wrote " << (args.out / "records.jsonl").string() << ", " << (args.out / "vocab").string() << "/, "
            << (args.out / "ddi.tsv").string() << '\n';
  return kExitOk;
}

// graphs

struct GraphsArgs {
  DataInputs data;
  fs::path out;
  std::uint64_t seed = 0;
};

void write_matrix_tsv(const fs::path& path, const Eigen::MatrixXd& m) {
  std::ostringstream text;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) text << (j ? "\t" : "") << m(i, j);
    text << '\n';
  }
  write_text(path, text.str());
}

int cmd_graphs(const GraphsArgs& args) {
  const auto data = load_data(args.data);
  const auto split = split_dataset(data.records, args.seed);
  const int n_meds = data.vocab.medication.size();
  const Eigen::MatrixXd ehr = build_ehr_adjacency(split.train, n_meds);
  const Eigen::MatrixXd ddi = load_ddi(args.data.ddi, data.vocab.medication);
  write_matrix_tsv(args.out / "ehr_adjacency.tsv", ehr);
  write_matrix_tsv(args.out / "ddi_adjacency.tsv", ddi);
  std::cout << "EHR graph: " << static_cast<long>(ehr.sum() / 2) << " edges over " << n_meds << " medications\n"
            << "DDI graph: " << static_cast<long>(ddi.sum() / 2) << " edges\n";
  return kExitOk;
}

// train

struct TrainArgs {
  DataInputs data;
  fs::path out;
  TrainConfig config;
  int dim = ModelConfig{}.dim;
  double init_range = ModelConfig{}.init_range;
  bool no_ddi_loss = false;
  bool quiet = false;
};

int cmd_train(TrainArgs args) {
  if (args.out.empty()) throw ArgumentError("--out is required");
  args.config.use_ddi_loss = !args.no_ddi_loss;
  args.config.loss.pi_margin = 1.0 - args.config.loss.pi_bce;
  args.config.validate();

  const auto data = load_data(args.data);
  const auto split = split_dataset(data.records, args.config.seed);
  const int n_meds = data.vocab.medication.size();
  const GraphSet graphs = GraphSet::from_adjacency(build_ehr_adjacency(split.train, n_meds),
                                                   load_ddi(args.data.ddi, data.vocab.medication));

  ModelConfig model;
  model.num_diagnoses = data.vocab.diagnosis.size();
  model.num_procedures = data.vocab.procedure.size();
  model.num_medications = n_meds;
  model.dim = args.dim;
  model.init_range = args.init_range;
  model.validate();

  std::cout << "train/validation/test patients: " << split.train.size() << '/' << split.validation.size() << '/'
            << split.test.size() << '\n';
  const auto result = train(split, graphs, model, args.config, [&](const EpochLog& e) {
    if (args.quiet) return;
    std::cout << "epoch " << e.epoch << "  loss " << e.mean_prediction_loss << "  ddi-branch " << e.ddi_branch_count
              << "  val jaccard " << e.validation.jaccard << "  val ddi " << e.validation.ddi_rate
              << (e.best ? "  *" : "") << '\n';
  });
  const auto paths = save_training(args.out, result, graphs, args.config);
  std::cout << "best epoch " << result.best_epoch << " (validation jaccard " << result.best_validation_jaccard
            << ")\nwrote " << paths.checkpoint.string() << ", " << paths.log.string() << '\n';
  return kExitOk;
}

// evaluate

struct EvaluateArgs {
  DataInputs data;
  fs::path checkpoint;
  fs::path out;
  std::uint64_t seed = 0;
  std::vector<std::string> baselines;
  bool ground_truth = false;
  std::string split = "test";
  int threads = 1;
};

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.out.empty()) throw ArgumentError("--out is required");
  if (args.threads <= 0) throw ArgumentError("--threads must be positive");
  const auto data = load_data(args.data);
  const auto split = split_dataset(data.records, args.seed);
  const std::vector<PatientRecord>* target = &split.test;
  if (args.split == "validation")
    target = &split.validation;
  else if (args.split == "train")
    target = &split.train;

  std::optional<LoadedModel> model;
  if (!args.checkpoint.empty()) {
    require_file(args.checkpoint, "checkpoint");
    model = load_model(args.checkpoint);
    if (model->model.num_diagnoses != data.vocab.diagnosis.size() ||
        model->model.num_procedures != data.vocab.procedure.size() ||
        model->model.num_medications != data.vocab.medication.size()) {
      throw DataError("checkpoint vocabulary sizes do not match --vocab-dir");
    }
  }
  Eigen::MatrixXd ddi;
  if (!args.data.ddi.empty())
    ddi = load_ddi(args.data.ddi, data.vocab.medication);
  else if (model)
    ddi = model->graphs.ddi_adjacency;
  else
    throw ArgumentError("--ddi is required without --checkpoint");
  if (!model && args.baselines.empty() && !args.ground_truth) {
    throw ArgumentError("nothing to evaluate: give --checkpoint, --baseline or --ground-truth");
  }

  std::vector<EvalReport> reports;
  const int n_meds = data.vocab.medication.size();
  for (const auto& b : args.baselines) {
    std::vector<PatientPredictions> preds;
    if (b == "nearest") {
      for (const auto& p : *target) preds.push_back(nearest_baseline(p));
      reports.push_back(evaluate("Nearest", *target, preds, ddi));
    } else {
      const auto lr = lr_train(split.train, data.vocab.diagnosis.size(), data.vocab.procedure.size(), n_meds);
      for (const auto& p : *target) preds.push_back(lr.predict_patient(p));
      reports.push_back(evaluate("LR", *target, preds, ddi));
    }
  }
  if (model) {
    const auto preds = predict_patients(model->parameters, model->graphs, *target, args.threads);
    const bool with_ddi =
        model->metadata.value("train_config", nlohmann::ordered_json::object()).value("use_ddi_loss", true);
    reports.push_back(evaluate(with_ddi ? "GAMENet" : "GAMENet (w/o DDI)", *target, preds, ddi));
  }
  if (args.ground_truth) {
    reports.push_back(evaluate("Ground truth", *target, ground_truth_predictions(*target, n_meds), ddi));
  }

  nlohmann::json doc;
  doc["split"] = args.split;
  doc["seed"] = args.seed;
  doc["reports"] = nlohmann::json::array();
  for (const auto& r : reports) doc["reports"].push_back(to_json(r));
  const std::string table = format_report_table(reports);
  write_text(args.out / "report.json", doc.dump(2) + "\n");
  write_text(args.out / "report.txt", table);
  std::cout << table;
  return kExitOk;
}

// recommend

struct RecommendArgs {
  DataInputs data;
  fs::path checkpoint;
  fs::path out;
  std::string patient;
  int topk = 5;
};

template <typename Label>
nlohmann::json top_entries(const Eigen::VectorXd& weights, int k, Label label) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return weights(a) > weights(b); });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(k)));
  nlohmann::json out = nlohmann::json::array();
  for (auto i : order) out.push_back(label(i, weights(i)));
  return out;
}

int cmd_recommend(const RecommendArgs& args) {
  if (args.topk <= 0) throw ArgumentError("--topk must be positive");
  require_file(args.checkpoint, "checkpoint");
  const auto data = load_data(args.data, LoadOptions{1, false});
  const auto model = load_model(args.checkpoint);
  if (model.model.num_medications != data.vocab.medication.size() ||
      model.model.num_diagnoses != data.vocab.diagnosis.size() ||
      model.model.num_procedures != data.vocab.procedure.size()) {
    throw DataError("checkpoint vocabulary sizes do not match --vocab-dir");
  }
  if (data.records.empty()) throw DataError("no patients in " + args.data.records.string());
  const PatientRecord* patient = &data.records.front();
  if (!args.patient.empty()) {
    auto it = std::find_if(data.records.begin(), data.records.end(),
                           [&](const auto& r) { return r.patient_id == args.patient; });
    if (it == data.records.end()) throw DataError("patient '" + args.patient + "' not found");
    patient = &*it;
  }

  const auto& meds = data.vocab.medication;
  const int k = std::min(args.topk, meds.size());
  const auto rec = recommend(model.parameters, model.graphs, *patient);
  nlohmann::json doc;
  doc["patient_id"] = patient->patient_id;
  doc["topk"] = k;
  doc["visits"] = nlohmann::json::array();
  for (std::size_t t = 0; t < rec.visits.size(); ++t) {
    const auto& pred = rec.visits[t];
    const auto& att = rec.attention[t];
    nlohmann::json v;
    v["visit"] = t;
    v["medications"] = nlohmann::json::array();
    for (int m : pred.labels)
      v["medications"].push_back({{"code", meds.code(m)}, {"probability", pred.probabilities(m)}});
    v["probabilities"] =
        std::vector<double>(pred.probabilities.data(), pred.probabilities.data() + pred.probabilities.size());
    auto med_label = [&](Eigen::Index i, double w) {
      return nlohmann::json{{"code", meds.code(static_cast<int>(i))}, {"weight", w}};
    };
    v["attention"]["memory_bank"] = top_entries(att.content, k, med_label);
    v["attention"]["history_visits"] = top_entries(
        att.temporal, k, [](Eigen::Index i, double w) { return nlohmann::json{{"visit", i}, {"weight", w}}; });
    v["attention"]["history_medications"] =
        att.medication.size() ? top_entries(att.medication, k, med_label) : nlohmann::json::array();
    doc["visits"].push_back(std::move(v));
  }
  const std::string text = doc.dump(2) + "\n";
  if (args.out.empty())
    std::cout << text;
  else
    write_text(args.out, text);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-augmented memory network for medication recommendation"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic cohort");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--patients", gen.config.num_patients, "Number of patients")->capture_default_str();
  gen_cmd->add_option("--diagnoses", gen.config.num_diagnoses, "Diagnosis vocabulary size")->capture_default_str();
  gen_cmd->add_option("--procedures", gen.config.num_procedures, "Procedure vocabulary size")->capture_default_str();
  gen_cmd->add_option("--medications", gen.config.num_medications, "Medication vocabulary size")->capture_default_str();
  gen_cmd->add_option("--clusters", gen.config.num_clusters, "Latent condition clusters")->capture_default_str();
  gen_cmd->add_option("--ddi-pairs", gen.config.ddi_pairs, "Interaction pairs")->capture_default_str();

  GraphsArgs graphs;
  auto* graphs_cmd = app.add_subcommand("graphs", "Build the EHR and DDI adjacency matrices");
  add_data_flags(graphs_cmd, graphs.data, true);
  graphs_cmd->add_option("--out", graphs.out, "Output directory")->required();
  graphs_cmd->add_option("--seed", graphs.seed, "Split seed (the EHR graph uses training patients only)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_data_flags(train_cmd, tr.data, true);
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--seed", tr.config.seed, "Random seed (split, init, order, dropout, annealing)");
  train_cmd->add_option("--epochs", tr.config.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--dim", tr.dim, "Embedding and memory width d")->capture_default_str();
  train_cmd->add_option("--init-range", tr.init_range, "Initial weights drawn from U(-r, r)")->capture_default_str();
  train_cmd->add_option("--lr", tr.config.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--dropout", tr.config.dropout, "Embedding dropout")->capture_default_str();
  train_cmd->add_option("--ddi-target", tr.config.loss.target_ddi_rate, "Target DDI rate s")->capture_default_str();
  train_cmd->add_option("--temp", tr.config.loss.initial_temperature, "Initial temperature")->capture_default_str();
  train_cmd->add_option("--temp-decay", tr.config.loss.temperature_decay, "Temperature decay per update")
      ->capture_default_str();
  train_cmd->add_option("--pi0", tr.config.loss.pi_bce, "BCE weight in the prediction loss")->capture_default_str();
  train_cmd->add_flag("--no-ddi-loss", tr.no_ddi_loss, "Always optimise the prediction loss");
  train_cmd->add_option("--threads", tr.config.threads, "Validation worker threads")->capture_default_str();
  train_cmd->add_flag("--quiet", tr.quiet, "Suppress per-epoch output");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model and baselines on a data split");
  add_data_flags(eval_cmd, ev.data, false);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint");
  eval_cmd->add_option("--out", ev.out, "Output directory for report.json and report.txt")->required();
  eval_cmd->add_option("--seed", ev.seed, "Split seed (use the training seed)");
  eval_cmd->add_option("--baseline", ev.baselines, "Baseline to include (repeatable)")
      ->check(CLI::IsMember({"nearest", "lr"}));
  eval_cmd->add_flag("--ground-truth", ev.ground_truth, "Include the ground truth scored against itself");
  eval_cmd->add_option("--split", ev.split, "Patients to score")
      ->check(CLI::IsMember({"train", "validation", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--threads", ev.threads, "Prediction worker threads")->capture_default_str();

  RecommendArgs rc;
  auto* rec_cmd = app.add_subcommand("recommend", "Recommend medications for one patient");
  add_data_flags(rec_cmd, rc.data, false);
  rec_cmd->add_option("--checkpoint", rc.checkpoint, "Trained checkpoint")->required();
  rec_cmd->add_option("--patient", rc.patient, "Patient id (default: first record)");
  rec_cmd->add_option("--topk", rc.topk, "Attention entries to report")->capture_default_str();
  rec_cmd->add_option("--out", rc.out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitArgument;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen);
    if (*graphs_cmd) return cmd_graphs(graphs);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_evaluate(ev);
    if (*rec_cmd) return cmd_recommend(rc);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitArgument;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
