#include "gamenet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gamenet {

std::string_view to_string(CodeKind kind) {
  switch (kind) {
    case CodeKind::diagnosis:
      return "diagnosis";
    case CodeKind::procedure:
      return "procedure";
    case CodeKind::medication:
      return "medication";
  }
  return "unknown";
}

CodeVocabulary::CodeVocabulary(CodeKind kind, std::vector<std::string> codes) : kind_(kind) {
  for (auto& c : codes) {
    if (find(c)) throw DataError("duplicate " + std::string(to_string(kind)) + " code '" + c + "'");
    add(c);
  }
}

int CodeVocabulary::add(const std::string& code) {
  if (auto existing = find(code)) return *existing;
  const int idx = size();
  codes_.push_back(code);
  index_.emplace(code, idx);
  return idx;
}

std::optional<int> CodeVocabulary::find(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void CodeVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary: " + path.string());
  for (const auto& c : codes_) out << c << '\n';
}

CodeVocabulary CodeVocabulary::load(const std::filesystem::path& path, CodeKind kind) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + std::string(to_string(kind)) + " vocabulary: " + path.string());
  CodeVocabulary vocab(kind);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (vocab.find(line)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate code '" + line + "'");
    }
    vocab.add(line);
  }
  return vocab;
}

const CodeVocabulary& Vocabularies::of(CodeKind kind) const {
  switch (kind) {
    case CodeKind::diagnosis:
      return diagnosis;
    case CodeKind::procedure:
      return procedure;
    case CodeKind::medication:
      return medication;
  }
  return medication;
}

Vocabularies Vocabularies::load(const std::filesystem::path& dir) {
  return Vocabularies{CodeVocabulary::load(dir / "diagnosis.txt", CodeKind::diagnosis),
                      CodeVocabulary::load(dir / "procedure.txt", CodeKind::procedure),
                      CodeVocabulary::load(dir / "medication.txt", CodeKind::medication)};
}

void Vocabularies::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  diagnosis.save(dir / "diagnosis.txt");
  procedure.save(dir / "procedure.txt");
  medication.save(dir / "medication.txt");
}

CodeSet make_code_set(std::vector<int> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return indices;
}

Eigen::VectorXd multi_hot(const CodeSet& codes, int size) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
  for (int c : codes) {
    if (c < 0 || c >= size)
      throw DimensionError("multi_hot: index " + std::to_string(c) + " >= " + std::to_string(size));
    v(c) = 1.0;
  }
  return v;
}

namespace {

CodeSet resolve_codes(const nlohmann::json& list, const CodeVocabulary& vocab, std::size_t line_no) {
  if (!list.is_array()) {
    throw DataError("line " + std::to_string(line_no) + ": " + std::string(to_string(vocab.kind())) +
                    " codes must be an array");
  }
  std::vector<int> out;
  out.reserve(list.size());
  for (const auto& item : list) {
    if (!item.is_string()) {
      throw DataError("line " + std::to_string(line_no) + ": codes must be strings");
    }
    const auto& code = item.get_ref<const std::string&>();
    auto idx = vocab.find(code);
    if (!idx) {
      throw DataError("line " + std::to_string(line_no) + ": unknown " + std::string(to_string(vocab.kind())) +
                      " code '" + code + "'");
    }
    out.push_back(*idx);
  }
  return make_code_set(std::move(out));
}

PatientRecord parse_line(const std::string& line, std::size_t line_no, const Vocabularies& vocab,
                         const LoadOptions& options) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object() || !obj.contains("patient_id") || !obj["patient_id"].is_string() || !obj.contains("visits") ||
      !obj["visits"].is_array()) {
    throw DataError("line " + std::to_string(line_no) + ": expected {\"patient_id\": string, \"visits\": [...]}");
  }
  PatientRecord record;
  record.patient_id = obj["patient_id"].get<std::string>();
  for (const auto& v : obj["visits"]) {
    if (!v.is_object()) throw DataError("line " + std::to_string(line_no) + ": visit must be an object");
    auto field = [&](const char* key) { return v.contains(key) ? v[key] : nlohmann::json::array(); };
    Visit visit{resolve_codes(field("dx"), vocab.diagnosis, line_no),
                resolve_codes(field("px"), vocab.procedure, line_no),
                resolve_codes(field("rx"), vocab.medication, line_no)};
    if (options.require_medications && visit.medications.empty()) {
      throw DataError("line " + std::to_string(line_no) + ": visit " + std::to_string(record.visits.size() + 1) +
                      " of patient '" + record.patient_id + "' has no medications");
    }
    record.visits.push_back(std::move(visit));
  }
  return record;
}

}  // namespace

LoadResult parse_records(std::string_view text, const Vocabularies& vocab, const LoadOptions& options) {
  LoadResult result;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto record = parse_line(line, line_no, vocab, options);
    if (record.visits.size() < options.min_visits) {
      ++result.dropped_short_patients;
      continue;
    }
    result.records.push_back(std::move(record));
  }
  if (result.dropped_short_patients > 0) {
    result.warnings.push_back("dropped " + std::to_string(result.dropped_short_patients) +
                              " patient(s) with fewer than " + std::to_string(options.min_visits) + " visit(s)");
  }
  return result;
}

LoadResult load_records(const std::filesystem::path& path, const Vocabularies& vocab, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open records file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_records(buffer.str(), vocab, options);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_record(const PatientRecord& record, const Vocabularies& vocab) {
  auto codes = [](const CodeSet& set, const CodeVocabulary& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (int c : set) arr.push_back(v.code(c));
    return arr;
  };
  nlohmann::ordered_json obj;
  obj["patient_id"] = record.patient_id;
  obj["visits"] = nlohmann::ordered_json::array();
  for (const auto& visit : record.visits) {
    nlohmann::ordered_json v;
    v["dx"] = codes(visit.diagnoses, vocab.diagnosis);
    v["px"] = codes(visit.procedures, vocab.procedure);
    v["rx"] = codes(visit.medications, vocab.medication);
    obj["visits"].push_back(std::move(v));
  }
  return obj.dump();
}

void save_records(const std::filesystem::path& path, const std::vector<PatientRecord>& records,
                  const Vocabularies& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write records: " + path.string());
  for (const auto& r : records) out << serialize_record(r, vocab) << '\n';
}

DatasetSplit split_dataset(std::vector<PatientRecord> records, std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 6) {
    throw std::invalid_argument("split_dataset: need at least 6 patients, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 2.0 / 3.0));
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 6.0));

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dest = i < n_train ? split.train : (i < n_train + n_val ? split.validation : split.test);
    dest.push_back(std::move(records[order[i]]));
  }
  return split;
}

}  // namespace gamenet
