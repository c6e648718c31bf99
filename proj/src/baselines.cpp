#include "gamenet/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCore>

namespace gamenet {

PatientPredictions nearest_baseline(const PatientRecord& patient) {
  PatientPredictions out;
  for (std::size_t t = 0; t < patient.visits.size(); ++t) {
    out.labels.push_back(t == 0 ? CodeSet{} : patient.visits[t - 1].medications);
  }
  return out;
}

LrModel::LrModel(Eigen::MatrixXd weights, Eigen::VectorXd bias, int num_diagnoses, int num_procedures)
    : weights_(std::move(weights)),
      bias_(std::move(bias)),
      num_diagnoses_(num_diagnoses),
      num_procedures_(num_procedures) {
  if (weights_.rows() != num_diagnoses + num_procedures || weights_.cols() != bias_.size()) {
    throw DimensionError("LrModel: weight matrix does not match feature/label counts");
  }
}

Eigen::VectorXd LrModel::features(const Visit& visit) const {
  Eigen::VectorXd x(num_diagnoses_ + num_procedures_);
  x << multi_hot(visit.diagnoses, num_diagnoses_), multi_hot(visit.procedures, num_procedures_);
  return x;
}

Eigen::VectorXd LrModel::predict_proba(const Visit& visit) const {
  const Eigen::VectorXd z = weights_.transpose() * features(visit) + bias_;
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

CodeSet LrModel::predict(const Visit& visit) const {
  const auto p = predict_proba(visit);
  CodeSet out;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (p(j) > 0.5) out.push_back(static_cast<int>(j));
  }
  return out;
}

PatientPredictions LrModel::predict_patient(const PatientRecord& patient) const {
  PatientPredictions out;
  for (const auto& v : patient.visits) {
    out.probabilities.push_back(predict_proba(v));
    out.labels.push_back(predict(v));
  }
  return out;
}

LrTrainingData lr_training_data(std::span<const PatientRecord> patients, int num_diagnoses, int num_procedures,
                                int num_medications) {
  Eigen::Index n = 0;
  for (const auto& p : patients) n += static_cast<Eigen::Index>(p.visits.size());
  LrTrainingData data;
  data.num_diagnoses = num_diagnoses;
  data.num_procedures = num_procedures;
  data.inputs = Eigen::MatrixXd::Zero(n, num_diagnoses + num_procedures);
  data.labels = Eigen::MatrixXd::Zero(n, num_medications);
  Eigen::Index row = 0;
  for (const auto& p : patients) {
    for (const auto& v : p.visits) {
      for (int c : v.diagnoses) data.inputs(row, c) = 1.0;
      for (int c : v.procedures) data.inputs(row, num_diagnoses + c) = 1.0;
      for (int m : v.medications) data.labels(row, m) = 1.0;
      ++row;
    }
  }
  return data;
}

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

// Largest eigenvalue of A^T A for A = [X 1], by power iteration.
double gram_spectral_norm(const Eigen::SparseMatrix<double>& x) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(x.cols() + 1).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd av = x * v.head(x.cols()) + Eigen::VectorXd::Constant(x.rows(), v(x.cols()));
    Eigen::VectorXd w(x.cols() + 1);
    w << x.transpose() * av, av.sum();
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= 1e-9 * next) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace

LrModel lr_train(const LrTrainingData& data, const LrConfig& config) {
  if (config.l2_penalty < 0) throw std::invalid_argument("lr_train: L2 penalty must be non-negative");
  const Eigen::SparseMatrix<double> x = data.inputs.sparseView();
  const auto& y = data.labels;
  const Eigen::Index n = x.rows();
  const Eigen::Index f = x.cols();
  const Eigen::Index m = y.cols();
  if (n == 0) throw std::invalid_argument("lr_train: no training visits");

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(f, m);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(m);
  const double lipschitz = 0.25 * gram_spectral_norm(x) + config.l2_penalty;
  const double step = 1.0 / lipschitz;

  auto gradient = [&](const Eigen::MatrixXd& ww, const Eigen::RowVectorXd& bb, Eigen::MatrixXd& gw,
                      Eigen::RowVectorXd& gb) {
    Eigen::MatrixXd z = x * ww;
    z.rowwise() += bb;
    const Eigen::MatrixXd residual = sigmoid(z) - y;
    gw = x.transpose() * residual + config.l2_penalty * ww;
    gb = residual.colwise().sum();
  };

  Eigen::MatrixXd yw = w, gw;
  Eigen::RowVectorXd yb = b, gb;
  double t = 1.0;
  int iter = 0;
  bool converged = false;
  for (; iter < config.max_iterations; ++iter) {
    gradient(yw, yb, gw, gb);
    if (std::max(gw.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff()) < config.tolerance) {
      w = yw;
      b = yb;
      converged = true;
      break;
    }
    const Eigen::MatrixXd w_next = yw - step * gw;
    const Eigen::RowVectorXd b_next = yb - step * gb;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // Restart momentum when it points uphill.
    const double uphill = (gw.cwiseProduct(w_next - w)).sum() + gb.dot(b_next - b);
    if (uphill > 0) {
      t = 1.0;
      yw = w_next;
      yb = b_next;
    } else {
      const double momentum = (t - 1.0) / t_next;
      yw = w_next + momentum * (w_next - w);
      yb = b_next + momentum * (b_next - b);
      t = t_next;
    }
    w = w_next;
    b = b_next;
  }

  // Constant labels: the unregularised optimum is at infinity, so pin them to
  // the (clamped) empirical frequency instead.
  for (Eigen::Index j = 0; j < m; ++j) {
    const double positives = y.col(j).sum();
    if (positives == 0.0 || positives == static_cast<double>(n)) {
      const double freq = std::clamp(positives / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
      w.col(j).setZero();
      b(j) = std::log(freq / (1.0 - freq));
    }
  }

  LrModel model(std::move(w), b.transpose(), data.num_diagnoses, data.num_procedures);
  model.iterations = iter;
  model.converged = converged;
  return model;
}

LrModel lr_train(std::span<const PatientRecord> patients, int num_diagnoses, int num_procedures, int num_medications,
                 const LrConfig& config) {
  return lr_train(lr_training_data(patients, num_diagnoses, num_procedures, num_medications), config);
}

}  // namespace gamenet
