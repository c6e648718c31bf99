#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gamenet/data.hpp"

namespace gamenet {

/// Renormalised adjacency D^{-1/2} (A + I) D^{-1/2}, with D the degree matrix
/// of A + I. Every node has degree >= 1, so the result is always defined.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> normalize_adjacency(
    const Eigen::MatrixBase<Derived>& adjacency) {
  using Scalar = typename Derived::Scalar;
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (adjacency.rows() != adjacency.cols()) {
    throw DimensionError("normalize_adjacency: matrix must be square");
  }
  MatrixType a = adjacency + MatrixType::Identity(adjacency.rows(), adjacency.cols());
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

/// Co-prescription graph over medications. Distinct medication sets of the
/// given visits form the columns of a bipartite incidence matrix B; the
/// result is B B^T binarised with a zero diagonal.
Eigen::MatrixXd build_ehr_adjacency(std::span<const PatientRecord> records, int num_medications);

using CodePair = std::pair<std::string, std::string>;

/// Tab-separated "codeA<TAB>codeB" lines. Malformed lines raise DataError.
std::vector<CodePair> read_ddi_pairs(const std::filesystem::path& path);
void write_ddi_pairs(const std::filesystem::path& path, std::span<const CodePair> pairs);

struct DdiAdjacency {
  Eigen::MatrixXd adjacency;
  std::size_t unknown_pairs = 0;
  std::size_t self_pairs = 0;
  std::vector<std::string> warnings;
};

/// Symmetric 0/1 interaction matrix. Pairs naming codes outside the
/// vocabulary are skipped and self-pairs rejected; both are reported.
DdiAdjacency build_ddi_adjacency(std::span<const CodePair> pairs, const CodeVocabulary& medications);

/// Raw and normalised graphs the memory bank is built from.
struct GraphSet {
  Eigen::MatrixXd ehr_adjacency;
  Eigen::MatrixXd ddi_adjacency;
  Eigen::MatrixXd ehr_normalized;
  Eigen::MatrixXd ddi_normalized;

  static GraphSet from_adjacency(Eigen::MatrixXd ehr, Eigen::MatrixXd ddi);
};

/// True when `a` is square, symmetric, 0/1 and has a zero diagonal.
bool is_simple_graph(const Eigen::MatrixXd& a);

}  // namespace gamenet
