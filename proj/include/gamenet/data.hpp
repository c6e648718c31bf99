#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gamenet/errors.hpp"

namespace gamenet {

enum class CodeKind { diagnosis, procedure, medication };

std::string_view to_string(CodeKind kind);

/// Bijection between code strings and 0..size()-1.
class CodeVocabulary {
 public:
  explicit CodeVocabulary(CodeKind kind = CodeKind::diagnosis) : kind_(kind) {}
  CodeVocabulary(CodeKind kind, std::vector<std::string> codes);

  /// Returns the index of `code`, inserting it at the end when new.
  int add(const std::string& code);
  std::optional<int> find(std::string_view code) const;
  const std::string& code(int index) const { return codes_.at(static_cast<std::size_t>(index)); }
  int size() const { return static_cast<int>(codes_.size()); }
  CodeKind kind() const { return kind_; }
  const std::vector<std::string>& codes() const { return codes_; }

  /// One code per line; line number is the index.
  void save(const std::filesystem::path& path) const;
  static CodeVocabulary load(const std::filesystem::path& path, CodeKind kind);

  friend bool operator==(const CodeVocabulary& a, const CodeVocabulary& b) {
    return a.kind_ == b.kind_ && a.codes_ == b.codes_;
  }

 private:
  CodeKind kind_;
  std::vector<std::string> codes_;
  std::unordered_map<std::string, int, std::hash<std::string>> index_;
};

struct Vocabularies {
  CodeVocabulary diagnosis{CodeKind::diagnosis};
  CodeVocabulary procedure{CodeKind::procedure};
  CodeVocabulary medication{CodeKind::medication};

  const CodeVocabulary& of(CodeKind kind) const;

  /// Reads diagnosis.txt, procedure.txt and medication.txt from `dir`.
  static Vocabularies load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
};

/// Sparse multi-hot: sorted, unique code indices.
using CodeSet = std::vector<int>;

CodeSet make_code_set(std::vector<int> indices);
Eigen::VectorXd multi_hot(const CodeSet& codes, int size);

struct Visit {
  CodeSet diagnoses;
  CodeSet procedures;
  CodeSet medications;

  friend bool operator==(const Visit&, const Visit&) = default;
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Visit> visits;  // temporal order

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct LoadOptions {
  std::size_t min_visits = 2;
  bool require_medications = true;
};

struct LoadResult {
  std::vector<PatientRecord> records;
  std::size_t dropped_short_patients = 0;
  std::vector<std::string> warnings;
};

/// Newline-delimited JSON, one patient per line:
///   {"patient_id": "...", "visits": [{"dx": [...], "px": [...], "rx": [...]}, ...]}
/// Unknown codes and malformed lines raise DataError naming the line.
LoadResult load_records(const std::filesystem::path& path, const Vocabularies& vocab, const LoadOptions& options = {});
LoadResult parse_records(std::string_view text, const Vocabularies& vocab, const LoadOptions& options = {});

void save_records(const std::filesystem::path& path, const std::vector<PatientRecord>& records,
                  const Vocabularies& vocab);
std::string serialize_record(const PatientRecord& record, const Vocabularies& vocab);

struct DatasetSplit {
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> validation;
  std::vector<PatientRecord> test;
};

/// Seeded shuffle by patient, then a 2/3 : 1/6 : 1/6 partition.
DatasetSplit split_dataset(std::vector<PatientRecord> records, std::uint64_t seed);

}  // namespace gamenet
