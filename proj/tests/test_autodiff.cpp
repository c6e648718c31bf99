#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "gamenet/autodiff.hpp"
#include "gamenet/errors.hpp"
#include "gamenet/grad_check.hpp"
#include "gamenet/gru.hpp"
#include "test_util.hpp"

using namespace gamenet;
using Tape = ad::Tape<double>;
using Var = ad::Var<double>;
using test_util::random_matrix;

namespace {

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::MatrixXd col(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

/// Checks d/dparams of sum(weights .* op(params)) by central differences.
void check_op(const std::string& label, ParameterSet<double> params,
              const std::function<Var(Tape&, const Bindings<double>&)>& op, std::mt19937_64& rng) {
  Eigen::MatrixXd weights;
  {
    Tape tape;
    Bindings<double> vars(tape, params);
    const Var out = op(tape, vars);
    weights = random_matrix(out.rows(), out.cols(), rng);
  }
  auto loss = [&](Tape& tape, const Bindings<double>& vars) {
    return ad::sum(ad::mul(op(tape, vars), tape.constant(weights)));
  };
  const auto report = finite_difference_check<double>(loss, params);
  INFO(label << ": worst tensor " << report.worst_tensor << " analytic " << report.worst_analytic << " numeric "
             << report.worst_numeric);
  CHECK(report.max_relative_error < 1e-4);
}

}  // namespace

TEST_CASE("matmul examples") {
  Tape tape;
  const Var a = tape.variable(Eigen::MatrixXd::Identity(2, 2));
  const Var b = tape.constant(mat({{1, 2}, {3, 4}}));
  CHECK(ad::matmul(a, b).value() == mat({{1, 2}, {3, 4}}));
  CHECK(ad::matmul(tape.constant(mat({{1, 2}})), tape.constant(col({3, 4}))).value()(0, 0) == 11.0);
}

TEST_CASE("matmul gradient of sum(a b)") {
  Tape tape;
  const Var a = tape.variable(mat({{1, 0}, {0, 1}}));
  const Var b = tape.constant(mat({{2, 0}, {0, 2}}));
  tape.backward(ad::sum(ad::matmul(a, b)));
  CHECK(tape.gradient(a) == mat({{2, 2}, {2, 2}}));

  ParameterSet<double> params;
  params.add("a", mat({{1, 0}, {0, 1}}));
  const auto report = finite_difference_check<double>(
      [&](Tape& t, const Bindings<double>& v) {
        return ad::sum(ad::matmul(v["a"], t.constant(mat({{2, 0}, {0, 2}}))));
      },
      params);
  CHECK(report.max_relative_error < 1e-8);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  const Var a = tape.constant(Eigen::MatrixXd::Zero(2, 3));
  const Var b = tape.constant(Eigen::MatrixXd::Zero(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("elementwise examples") {
  Tape tape;
  CHECK(ad::sigmoid(tape.constant(col({0}))).value()(0, 0) == 0.5);
  CHECK(ad::tanh(tape.constant(col({0}))).value()(0, 0) == 0.0);
  CHECK(ad::mul(tape.constant(col({1, 2})), tape.constant(col({3, 4}))).value() == col({3, 8}));
  CHECK(ad::add(tape.constant(col({1, 2})), tape.constant(col({3, 4}))).value() == col({4, 6}));
  CHECK(ad::sub(tape.constant(col({1, 2})), tape.constant(col({3, 4}))).value() == col({-2, -2}));
  CHECK(ad::scale(tape.constant(col({1, 2})), 3.0).value() == col({3, 6}));
  CHECK_THROWS_AS(ad::add(tape.constant(col({1, 2})), tape.constant(col({1, 2, 3}))), DimensionError);
  CHECK_THROWS_AS(ad::mul(tape.constant(col({1, 2})), tape.constant(mat({{1, 2}}))), DimensionError);
}

TEST_CASE("sigmoid stays finite and accurate for large inputs") {
  Tape tape;
  const auto s = ad::sigmoid(tape.constant(col({-800, 800, -40}))).value();
  CHECK(s(0, 0) == 0.0);
  CHECK(s(1, 0) == 1.0);
  CHECK(s(2, 0) == doctest::Approx(std::exp(-40.0) / (1 + std::exp(-40.0))).epsilon(1e-12));
}

TEST_CASE("softmax examples and invariants") {
  Tape tape;
  CHECK(ad::softmax(tape.constant(col({0, 0}))).value() == col({0.5, 0.5}));
  CHECK(ad::softmax(tape.constant(col({1000, 1000}))).value() == col({0.5, 0.5}));
  const auto s = ad::softmax(tape.constant(col({0, std::log(3.0)}))).value();
  CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s(1, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK_THROWS(ad::softmax(tape.constant(Eigen::MatrixXd(0, 1))));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::MatrixXd x = random_matrix(1 + trial % 8, 1, rng, 20.0);
    const auto p = ad::softmax(tape.constant(x)).value();
    CHECK((p.array() >= 0).all());
    CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    const auto shifted = ad::softmax(tape.constant((x.array() + 7.5).matrix())).value();
    CHECK((shifted - p).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("concat examples") {
  Tape tape;
  const Var a = tape.constant(col({1}));
  const Var b = tape.constant(col({2, 3}));
  CHECK(ad::concat({a, b}).value() == col({1, 2, 3}));
  CHECK(ad::concat({tape.constant(Eigen::MatrixXd(0, 1)), a}).value() == col({1}));
  CHECK_THROWS(ad::concat(std::span<const Var>()));
}

TEST_CASE("gradient accumulates over repeated uses") {
  Tape tape;
  const Var x = tape.variable(col({1.5, -2.0}));
  // f = sum(x*x) + sum(x): df/dx = 2x + 1
  tape.backward(ad::add(ad::sum(ad::mul(x, x)), ad::sum(x)));
  CHECK(tape.gradient(x) == col({4.0, -3.0}));
}

TEST_CASE("non-finite values raise NumericalError") {
  Tape tape;
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(tape.variable(col({std::nan("")})), NumericalError);
  const Var big = tape.constant(col({1e308}));
  CHECK_THROWS_AS(ad::scale(big, 10.0), NumericalError);
  CHECK_THROWS_AS(ad::add(tape.constant(col({inf})), tape.constant(col({1}))), NumericalError);
}

TEST_CASE("backward requires a scalar root") {
  Tape tape;
  const Var x = tape.variable(col({1, 2}));
  CHECK_THROWS_AS(tape.backward(x), DimensionError);
}

TEST_CASE("every op matches finite differences on random inputs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng() % 8);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng() % 8);
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 8);
    ParameterSet<double> p;
    p.add("a", random_matrix(m, k, rng));
    p.add("b", random_matrix(k, n, rng));
    p.add("c", random_matrix(m, k, rng));
    p.add("u", random_matrix(m, 1, rng));
    p.add("v", random_matrix(k, 1, rng));
    p.add("s", random_matrix(1, 1, rng));

    check_op("matmul", p, [](Tape&, const Bindings<double>& v) { return ad::matmul(v["a"], v["b"]); }, rng);
    check_op("transpose", p, [](Tape&, const Bindings<double>& v) { return ad::transpose(v["a"]); }, rng);
    check_op("add", p, [](Tape&, const Bindings<double>& v) { return ad::add(v["a"], v["c"]); }, rng);
    check_op("sub", p, [](Tape&, const Bindings<double>& v) { return ad::sub(v["a"], v["c"]); }, rng);
    check_op("mul", p, [](Tape&, const Bindings<double>& v) { return ad::mul(v["a"], v["c"]); }, rng);
    check_op("scale", p, [](Tape&, const Bindings<double>& v) { return ad::scale(v["a"], -1.7); }, rng);
    check_op("scalar_mul", p, [](Tape&, const Bindings<double>& v) { return ad::scalar_mul(v["s"], v["a"]); }, rng);
    check_op("sigmoid", p, [](Tape&, const Bindings<double>& v) { return ad::sigmoid(v["a"]); }, rng);
    check_op("tanh", p, [](Tape&, const Bindings<double>& v) { return ad::tanh(v["a"]); }, rng);
    check_op("sum", p, [](Tape&, const Bindings<double>& v) { return ad::sum(v["a"]); }, rng);
    check_op("softmax", p, [](Tape&, const Bindings<double>& v) { return ad::softmax(v["u"]); }, rng);
    check_op("concat", p, [](Tape&, const Bindings<double>& v) { return ad::concat({v["u"], v["v"], v["u"]}); }, rng);
    check_op(
        "stack_rows", p,
        [](Tape&, const Bindings<double>& v) {
          const std::vector<Var> rows{v["v"], v["v"], ad::scale(v["v"], 2.0)};
          return ad::stack_rows(std::span<const Var>(rows));
        },
        rng);
    check_op(
        "embedding_sum", p,
        [m](Tape&, const Bindings<double>& v) {
          std::vector<int> rows{0};
          if (m > 2) rows.push_back(static_cast<int>(m - 1));
          return ad::embedding_sum(v["a"], std::span<const int>(rows));
        },
        rng);
    const Eigen::VectorXd targets = (random_matrix(m, 1, rng).array() > 0).cast<double>().matrix();
    check_op(
        "bce_with_logits", p, [&](Tape&, const Bindings<double>& v) { return ad::bce_with_logits(v["u"], targets); },
        rng);
  }
}

TEST_CASE("embedding_sum of no rows is the zero vector") {
  Tape tape;
  const Var table = tape.variable(Eigen::MatrixXd::Ones(4, 3));
  const auto out = ad::embedding_sum(table, std::span<const int>()).value();
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 1);
  CHECK(out.isZero());
  const std::vector<int> bad{4};
  CHECK_THROWS_AS(ad::embedding_sum(table, std::span<const int>(bad)), DimensionError);
}

TEST_CASE("bce_with_logits matches the log-likelihood formula") {
  Tape tape;
  const Eigen::VectorXd y = col({1, 0, 1});
  const Eigen::MatrixXd z = col({0.3, -2.0, 40.0});
  const double value = ad::bce_with_logits(tape.constant(z), y).value()(0, 0);
  double expected = 0;
  for (int i = 0; i < 3; ++i) {
    const double p = 1 / (1 + std::exp(-z(i, 0)));
    expected -= y(i) > 0 ? std::log(p) : std::log1p(-p);
  }
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(ad::bce_with_logits(tape.constant(col({0})), Eigen::VectorXd(Eigen::VectorXd::Ones(1))).value()(0, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("dropout") {
  std::mt19937_64 rng(5);
  Tape tape;
  const Eigen::MatrixXd x = col({1.0, -2.0, 3.0});
  CHECK(ad::dropout(tape.constant(x), 0.0, true, rng).value() == x);
  CHECK(ad::dropout(tape.constant(x), 0.4, false, rng).value() == x);
  CHECK_THROWS_AS(ad::dropout(tape.constant(x), 1.0, true, rng), std::invalid_argument);
  CHECK_THROWS_AS(ad::dropout(tape.constant(x), -0.1, true, rng), std::invalid_argument);

  // Kept entries are scaled by 1/(1-p); the mean converges to the input.
  Eigen::VectorXd total = Eigen::VectorXd::Zero(3);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    Tape t;
    const auto out = ad::dropout(t.constant(x), 0.4, true, rng).value();
    for (int j = 0; j < 3; ++j) {
      CHECK_MESSAGE((out(j, 0) == 0.0 || std::abs(out(j, 0) - x(j, 0) / 0.6) < 1e-12), "unexpected dropout value");
    }
    total += out.col(0);
  }
  const Eigen::VectorXd mean = total / draws;
  for (int j = 0; j < 3; ++j) CHECK(std::abs(mean(j) - x(j, 0)) <= 0.01 * std::abs(x(j, 0)));
}

TEST_CASE("dropout is deterministic for a seeded generator and passes gradients through the mask") {
  std::mt19937_64 a(9), b(9);
  Tape tape;
  const Var x = tape.variable(Eigen::MatrixXd::Ones(8, 1));
  const Var ya = ad::dropout(x, 0.5, true, a);
  Tape other;
  const Var yb = ad::dropout(other.constant(Eigen::MatrixXd::Ones(8, 1)), 0.5, true, b);
  CHECK(ya.value() == yb.value());
  tape.backward(ad::sum(ya));
  CHECK(tape.gradient(x) == ya.value());
}

TEST_CASE("finite_difference_check examples") {
  std::mt19937_64 rng(2);
  ParameterSet<double> params;
  params.add("theta", random_matrix(4, 3, rng));
  const auto squares = finite_difference_check<double>(
      [](Tape&, const Bindings<double>& v) { return ad::sum(ad::mul(v["theta"], v["theta"])); }, params);
  CHECK(squares.max_relative_error < 1e-6);

  const auto constant = finite_difference_check<double>(
      [](Tape& t, const Bindings<double>&) { return t.constant(Eigen::MatrixXd::Constant(1, 1, 3.0)); }, params);
  CHECK(constant.max_relative_error == 0.0);

  // A wrong gradient is detected.
  const auto wrong = finite_difference_check<double>(
      [](Tape& t, const Bindings<double>& v) {
        const Var x = v["theta"];
        return t.record("broken", Eigen::MatrixXd::Constant(1, 1, x.value().squaredNorm()), {x},
                        [x](Tape& tp, const Eigen::MatrixXd& g) { tp.accumulate(x, g(0, 0) * x.value()); });
      },
      params);
  CHECK(wrong.max_relative_error > 0.1);
  CHECK(wrong.worst_tensor == "theta");
}

TEST_CASE("gru_cell gate algebra") {
  const int d = 3;
  ParameterSet<double> zero;
  for (const char* t : kGruTensorNames) zero.add(std::string("g.") + t, Eigen::MatrixXd::Zero(d, t[0] == 'b' ? 1 : d));
  Tape tape;
  Bindings<double> vars(tape, zero);
  const auto g = GruVars<double>::bind(vars, "g");
  const Eigen::MatrixXd v = col({1.0, -2.0, 4.0});
  const auto out = gru_cell(tape.constant(col({7, 8, 9})), tape.constant(v), g).value();
  CHECK((out - 0.5 * v).cwiseAbs().maxCoeff() < 1e-15);

  std::mt19937_64 rng(1);
  ParameterSet<double> random;
  for (const char* t : kGruTensorNames) {
    random.add(std::string("g.") + t, t[0] == 'b' ? Eigen::MatrixXd::Zero(d, 1) : random_matrix(d, d, rng));
  }
  Tape t2;
  Bindings<double> v2(t2, random);
  const auto origin = gru_cell(t2.constant(Eigen::MatrixXd::Zero(d, 1)), t2.constant(Eigen::MatrixXd::Zero(d, 1)),
                               GruVars<double>::bind(v2, "g"))
                          .value();
  CHECK(origin.isZero(0.0));

  CHECK_THROWS_AS(gru_cell(t2.constant(Eigen::MatrixXd::Zero(d + 1, 1)), t2.constant(Eigen::MatrixXd::Zero(d, 1)),
                           GruVars<double>::bind(v2, "g")),
                  DimensionError);
}

TEST_CASE("gru_cell matches a scalar reference implementation") {
  const int d = 4, in = 3;
  std::mt19937_64 rng(17);
  ParameterSet<double> p;
  for (const char* t : kGruTensorNames) {
    const Eigen::Index cols = t[0] == 'b' ? 1 : (t[0] == 'W' ? in : d);
    p.add(std::string("g.") + t, random_matrix(d, cols, rng));
  }
  const Eigen::MatrixXd x = random_matrix(in, 1, rng);
  const Eigen::MatrixXd h = random_matrix(d, 1, rng);

  Tape tape;
  Bindings<double> vars(tape, p);
  const auto out = gru_cell(tape.constant(x), tape.constant(h), GruVars<double>::bind(vars, "g")).value();

  auto P = [&](const char* n) -> const Eigen::MatrixXd& { return p.at(std::string("g.") + n); };
  auto sig = [](double z) { return 1 / (1 + std::exp(-z)); };
  for (int i = 0; i < d; ++i) {
    auto lin = [&](const char* w, const char* u, const char* b, const Eigen::MatrixXd& hh) {
      double s = P(b)(i, 0);
      for (int j = 0; j < in; ++j) s += P(w)(i, j) * x(j, 0);
      for (int j = 0; j < d; ++j) s += P(u)(i, j) * hh(j, 0);
      return s;
    };
    const double z = sig(lin("W_z", "U_z", "b_z", h));
    Eigen::MatrixXd rh(d, 1);
    for (int j = 0; j < d; ++j) {
      double s = P("b_r")(j, 0);
      for (int k = 0; k < in; ++k) s += P("W_r")(j, k) * x(k, 0);
      for (int k = 0; k < d; ++k) s += P("U_r")(j, k) * h(k, 0);
      rh(j, 0) = sig(s) * h(j, 0);
    }
    const double n = std::tanh(lin("W_h", "U_h", "b_h", rh));
    CHECK(out(i, 0) == doctest::Approx((1 - z) * h(i, 0) + z * n).epsilon(1e-13));
  }
}

TEST_CASE("gru_cell gradients match finite differences") {
  const int d = 5;
  std::mt19937_64 rng(23);
  ParameterSet<double> p;
  for (const char* t : kGruTensorNames) p.add(std::string("g.") + t, random_matrix(d, t[0] == 'b' ? 1 : d, rng));
  p.add("x", random_matrix(d, 1, rng));
  p.add("h", random_matrix(d, 1, rng));
  const auto report = finite_difference_check<double>(
      [](Tape&, const Bindings<double>& v) {
        const auto g = GruVars<double>::bind(v, "g");
        // Two steps so the recurrent path is exercised.
        const Var h1 = gru_cell(v["x"], v["h"], g);
        return ad::sum(gru_cell(v["x"], h1, g));
      },
      p);
  CHECK(report.max_relative_error < 1e-4);
}
