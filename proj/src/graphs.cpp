#include "gamenet/graphs.hpp"

#include <fstream>
#include <set>

namespace gamenet {

Eigen::MatrixXd build_ehr_adjacency(std::span<const PatientRecord> records, int num_medications) {
  std::set<CodeSet> combinations;
  for (const auto& r : records) {
    for (const auto& v : r.visits) {
      if (!v.medications.empty()) combinations.insert(v.medications);
    }
  }
  Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(num_medications, static_cast<Eigen::Index>(combinations.size()));
  Eigen::Index col = 0;
  for (const auto& combo : combinations) {
    for (int m : combo) {
      if (m < 0 || m >= num_medications) {
        throw DimensionError("build_ehr_adjacency: medication index " + std::to_string(m) + " out of range");
      }
      incidence(m, col) = 1.0;
    }
    ++col;
  }
  Eigen::MatrixXd a = incidence * incidence.transpose();
  a = (a.array() > 0.0).cast<double>().matrix();
  a.diagonal().setZero();
  return a;
}

std::vector<CodePair> read_ddi_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open DDI file: " + path.string());
  std::vector<CodePair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'codeA<TAB>codeB'");
    }
    pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return pairs;
}

void write_ddi_pairs(const std::filesystem::path& path, std::span<const CodePair> pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write DDI file: " + path.string());
  for (const auto& [a, b] : pairs) out << a << '\t' << b << '\n';
}

DdiAdjacency build_ddi_adjacency(std::span<const CodePair> pairs, const CodeVocabulary& medications) {
  DdiAdjacency out;
  out.adjacency = Eigen::MatrixXd::Zero(medications.size(), medications.size());
  for (const auto& [a, b] : pairs) {
    auto i = medications.find(a);
    auto j = medications.find(b);
    if (!i || !j) {
      ++out.unknown_pairs;
      continue;
    }
    if (*i == *j) {
      ++out.self_pairs;
      out.warnings.push_back("rejected self-interaction pair '" + a + "'");
      continue;
    }
    out.adjacency(*i, *j) = 1.0;
    out.adjacency(*j, *i) = 1.0;
  }
  if (out.unknown_pairs > 0) {
    out.warnings.push_back("skipped " + std::to_string(out.unknown_pairs) +
                           " DDI pair(s) naming medications outside the vocabulary");
  }
  return out;
}

GraphSet GraphSet::from_adjacency(Eigen::MatrixXd ehr, Eigen::MatrixXd ddi) {
  if (ehr.rows() != ddi.rows() || !is_simple_graph(ehr) || !is_simple_graph(ddi)) {
    throw DimensionError("GraphSet: adjacencies must be matching symmetric 0/1 matrices with zero diagonal");
  }
  GraphSet g;
  g.ehr_normalized = normalize_adjacency(ehr);
  g.ddi_normalized = normalize_adjacency(ddi);
  g.ehr_adjacency = std::move(ehr);
  g.ddi_adjacency = std::move(ddi);
  return g;
}

bool is_simple_graph(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return false;
  if (a != a.transpose()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    if (v != 0.0 && v != 1.0) return false;
  }
  return a.diagonal().isZero(0.0);
}

}  // namespace gamenet
