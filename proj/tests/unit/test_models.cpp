#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles/oracles.hpp"
#include "parkcast/common/error.hpp"
#include "parkcast/models/adam.hpp"
#include "parkcast/models/forest.hpp"
#include "parkcast/models/linear.hpp"
#include "parkcast/models/lstm.hpp"
#include "parkcast/models/model.hpp"
#include "parkcast/models/svr.hpp"

using namespace parkcast;
using namespace parkcast::models;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

oracle::Mat to_mat(const MatrixXd& m) {
  oracle::Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct Problem {
  MatrixXd X;
  VectorXd y;
};

Problem random_problem(std::uint64_t seed, int n, int p, double noise = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  Problem pr{MatrixXd(n, p), VectorXd(n)};
  VectorXd w(p);
  for (int j = 0; j < p; ++j) w(j) = g(rng);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) pr.X(i, j) = g(rng);
    pr.y(i) = pr.X.row(i).dot(w) + 0.5 + noise * g(rng);
  }
  return pr;
}

features::FeatureFrame frame_of(const MatrixXd& X, std::vector<int> groups = {}) {
  features::FeatureFrame f;
  for (Eigen::Index c = 0; c < X.cols(); ++c) f.columns.push_back("x" + std::to_string(c));
  f.values = X;
  f.groups = groups.empty() ? std::vector<int>(static_cast<std::size_t>(X.rows()), 1) : std::move(groups);
  return f;
}

}  // namespace

TEST_CASE("adam matches a scalar reference") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 1);
  VectorXd theta(4);
  theta << 0.5, -1.0, 2.0, 0.0;
  std::vector<oracle::ScalarAdam> ref(4);
  std::vector<double> ref_theta = to_vec(theta);
  AdamState state(4, AdamConfig{});
  for (int step = 0; step < 200; ++step) {
    VectorXd grad(4);
    for (int j = 0; j < 4; ++j) grad(j) = g(rng);
    adam_update(theta, grad, state);
    for (int j = 0; j < 4; ++j) ref_theta[j] = ref[j].step(ref_theta[j], grad(j));
  }
  for (int j = 0; j < 4; ++j) CHECK(theta(j) == doctest::Approx(ref_theta[j]).epsilon(1e-14));
  CHECK(state.step == 200);
}

TEST_CASE("adam leaves parameters alone on a zero gradient from a fresh state") {
  VectorXd theta(3);
  theta << 1, 2, 3;
  const VectorXd before = theta;
  AdamState state(3, AdamConfig{});
  adam_update(theta, VectorXd::Zero(3), state);
  CHECK(theta == before);
  CHECK_THROWS_AS(adam_update(theta, VectorXd::Zero(2), state), ArgumentError);
}

TEST_CASE("adam first step moves by the learning rate") {
  VectorXd theta = VectorXd::Zero(2);
  VectorXd grad(2);
  grad << 3.0, -0.01;
  AdamState state(2, AdamConfig{});
  adam_update(theta, grad, state);
  CHECK(theta(0) == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(theta(1) == doctest::Approx(1e-3).epsilon(1e-4));
}

TEST_CASE("ridge and least squares agree with normal-equation oracles") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pr = random_problem(seed, 40, 5);
    for (const double lambda : {0.0, 0.01, 1.0, 25.0}) {
      const auto fit = fit_linear(pr.X, pr.y, {lambda == 0 ? Penalty::none : Penalty::l2, lambda});
      const auto want = oracle::ridge(to_mat(pr.X), to_vec(pr.y), lambda);
      for (int j = 0; j < 5; ++j) CHECK(fit.weights(j) == doctest::Approx(want[j]).epsilon(1e-9));
      CHECK(fit.bias == doctest::Approx(want[5]).epsilon(1e-9));
    }
  }
}

TEST_CASE("least squares recovers an exact plane") {
  MatrixXd X(6, 2);
  X << 0, 0, 1, 0, 0, 1, 1, 1, 2, 3, 3, 1;
  VectorXd y = 2.0 * X.col(0) - 3.0 * X.col(1) + VectorXd::Constant(6, 0.5);
  const auto fit = fit_linear(X, y, {Penalty::none, 0.0});
  CHECK(fit.weights(0) == doctest::Approx(2.0));
  CHECK(fit.weights(1) == doctest::Approx(-3.0));
  CHECK(fit.bias == doctest::Approx(0.5));
  const VectorXd pred = predict_linear(fit, X);
  CHECK((pred - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("collinear columns are rank deficient without a penalty") {
  auto pr = random_problem(3, 20, 3);
  pr.X.col(2) = pr.X.col(0) * 2.0;
  CHECK_THROWS_AS(fit_linear(pr.X, pr.y, {Penalty::none, 0.0}), RankError);
  CHECK_NOTHROW(fit_linear(pr.X, pr.y, {Penalty::l2, 0.01}));
  CHECK_THROWS_AS(fit_linear(pr.X, pr.y, {Penalty::l2, -1.0}), ArgumentError);
}

TEST_CASE("lasso solutions satisfy the optimality conditions") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto pr = random_problem(seed, 50, 6, 0.5);
    for (const double lambda : {0.01, 0.1, 0.5}) {
      const auto fit = fit_linear(pr.X, pr.y, {Penalty::l1, lambda});
      CHECK(fit.duality_gap <= 1e-8);
      CHECK(oracle::lasso_kkt_violation(to_mat(pr.X), to_vec(pr.y), lambda, to_vec(fit.weights), fit.bias) < 1e-4);
    }
    const auto huge = fit_linear(pr.X, pr.y, {Penalty::l1, 1e3});
    CHECK(huge.weights.isZero());
    CHECK(huge.bias == doctest::Approx(pr.y.mean()));
  }
}

TEST_CASE("penalty names") {
  CHECK(parse_penalty("ridge") == Penalty::l2);
  CHECK(parse_penalty("L1") == Penalty::l1);
  CHECK(to_string(Penalty::none) == "none");
  CHECK_THROWS_AS(parse_penalty("elastic"), ArgumentError);
}

TEST_CASE("SVR dual matches a projected-gradient oracle on small problems") {
  const double C = 1.0, eps = 0.1;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto pr = random_problem(seed, 5, 2, 0.3);
    for (const auto kernel : {Kernel{KernelType::linear, 0.0}, Kernel{KernelType::rbf, 0.5}}) {
      const MatrixXd K = kernel_matrix(kernel, pr.X);
      SvrOptions opts;
      opts.tolerance = 1e-10;
      const auto dual = solve_svr_dual(K, pr.y, C, eps, opts);
      const double want = oracle::svr_dual_optimum(to_mat(K), to_vec(pr.y), C, eps);
      CHECK(dual.objective == doctest::Approx(want).epsilon(1e-9));
      CHECK(std::fabs(dual.objective - want) < 1e-6);
    }
  }
}

TEST_CASE("converged SVR fits satisfy KKT") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto pr = random_problem(seed, 60, 3, 0.3);
    const Kernel kernel{seed % 2 ? KernelType::rbf : KernelType::linear, 0.0};
    const double C = seed % 3 == 0 ? 10.0 : 1.0;
    const auto fit = fit_svr(pr.X, pr.y, C, 0.1, kernel);
    const Kernel used = fit.kernel;
    const MatrixXd K = kernel_matrix(used, pr.X);
    const auto dual = solve_svr_dual(K, pr.y, C, 0.1);
    const std::size_t n = 60;
    std::vector<double> a(n), as(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = dual.alpha(static_cast<Eigen::Index>(i));
      as[i] = dual.alpha(static_cast<Eigen::Index>(n + i));
    }
    CHECK(oracle::svr_kkt_violation(to_mat(K), to_vec(pr.y), C, 0.1, a, as, dual.bias) < 1e-3);
    CHECK(fit.max_violation < 1e-3);
    // Predictions come from the support vectors alone.
    const VectorXd pred = predict_svr(fit, pr.X);
    for (std::size_t i = 0; i < n; ++i) {
      double f = dual.bias;
      for (std::size_t j = 0; j < n; ++j) f += (a[j] - as[j]) * K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      CHECK(pred(static_cast<Eigen::Index>(i)) == doctest::Approx(f).epsilon(1e-9));
    }
  }
}

TEST_CASE("SVR inputs are validated") {
  const auto pr = random_problem(1, 10, 2);
  CHECK_THROWS_AS(fit_svr(pr.X, pr.y, 0.0, 0.1, {}), ArgumentError);
  CHECK_THROWS_AS(fit_svr(pr.X, pr.y, 1.0, -0.1, {}), ArgumentError);
  SvrOptions tight;
  tight.max_sweeps = 0;
  CHECK_THROWS_AS(solve_svr_dual(kernel_matrix({KernelType::rbf, 1.0}, pr.X), pr.y, 1.0, 0.0, tight), ConvergenceError);
  CHECK(scale_gamma(pr.X) > 0);
}

TEST_CASE("a stump splits where the exhaustive scan says") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 10);
  for (int k = 0; k < 30; ++k) {
    MatrixXd X(25, 1);
    VectorXd y(25);
    for (int i = 0; i < 25; ++i) {
      X(i, 0) = std::round(u(rng) * 4) / 4;
      y(i) = (X(i, 0) > 4 ? 3.0 : 0.0) + u(rng) * 0.3;
    }
    ForestOptions o;
    o.max_depth = 1;
    o.bootstrap = false;
    o.max_features = 1;
    std::vector<std::size_t> all(25);
    std::iota(all.begin(), all.end(), 0);
    const auto tree = grow_tree(X, y, all, o, 9);
    const auto [lo, hi] = oracle::best_stump_interval(to_vec(X.col(0)), to_vec(y));
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].threshold > lo);
    CHECK(tree.nodes[0].threshold <= hi);
    CHECK(tree.depth() == 1);
  }
}

TEST_CASE("forests are deterministic and bounded by their leaves") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pr = random_problem(seed, 50, 4, 0.5);
    ForestOptions o;
    o.n_trees = 20;
    o.seed = seed;
    const auto a = fit_rfr(pr.X, pr.y, o);
    const auto b = fit_rfr(pr.X, pr.y, o);
    const MatrixXd probe = random_problem(seed + 100, 40, 4).X * 3.0;
    const VectorXd pa = predict_forest(a, probe), pb = predict_forest(b, probe);
    CHECK(pa == pb);
    double lo = 1e300, hi = -1e300;
    for (const auto& t : a.trees) {
      for (const auto& node : t.nodes) {
        if (node.feature < 0) {
          lo = std::min(lo, node.value);
          hi = std::max(hi, node.value);
        }
      }
    }
    CHECK(pa.minCoeff() >= lo);
    CHECK(pa.maxCoeff() <= hi);
    o.seed = seed + 1;
    CHECK(predict_forest(fit_rfr(pr.X, pr.y, o), probe) != pa);
  }
}

TEST_CASE("forest options are validated") {
  const auto pr = random_problem(1, 10, 2);
  ForestOptions o;
  o.n_trees = 0;
  CHECK_THROWS_AS(fit_rfr(pr.X, pr.y, o), ArgumentError);
  o = {};
  o.min_samples_leaf = 6;
  CHECK_THROWS_AS(fit_rfr(pr.X, pr.y, o), ArgumentError);
  CHECK(tree_seed(1, 0) != tree_seed(1, 1));
  CHECK(tree_seed(1, 0) != tree_seed(2, 0));
}

TEST_CASE("a constant target yields that constant") {
  MatrixXd X = random_problem(2, 12, 3).X;
  VectorXd y = VectorXd::Constant(12, 0.37);
  ForestOptions o;
  o.n_trees = 5;
  const auto f = fit_rfr(X, y, o);
  CHECK((predict_forest(f, X).array() - 0.37).abs().maxCoeff() < 1e-15);
  for (const auto& t : f.trees) CHECK(t.nodes.size() == 1);
}

TEST_CASE("LSTM gradient matches central differences") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 1);
  const int p = 3, H = 2, L = 3;
  auto params = init_lstm(p, H, L, 5);
  std::vector<Sequence> seqs;
  std::vector<double> targets;
  for (int k = 0; k < 6; ++k) {
    Sequence s(L, p);
    for (int r = 0; r < L; ++r)
      for (int c = 0; c < p; ++c) s(r, c) = g(rng);
    seqs.push_back(s);
    targets.push_back(g(rng) * 0.5);
  }
  VectorXd grad;
  const double loss = lstm_loss_and_gradient(params, seqs, targets, grad);
  CHECK(loss > 0);
  REQUIRE(grad.size() == params.theta.size());
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < params.theta.size(); ++k) {
    auto plus = params, minus = params;
    plus.theta(k) += h;
    minus.theta(k) -= h;
    VectorXd unused;
    const double fd = (lstm_loss_and_gradient(plus, seqs, targets, unused) - lstm_loss_and_gradient(minus, seqs, targets, unused)) / (2 * h);
    const double denom = std::max({std::fabs(fd), std::fabs(grad(k)), 1e-7});
    worst = std::max(worst, std::fabs(fd - grad(k)) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("LSTM forward gates stay in range") {
  auto params = init_lstm(2, 4, 3, 1);
  Sequence s(3, 2);
  s << 1, -2, 0.5, 3, -1, 0;
  GateTrace trace;
  const double out = lstm_forward(params, s, &trace);
  CHECK(std::isfinite(out));
  REQUIRE(trace.input.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    for (const auto* gate : {&trace.input[t], &trace.forget[t], &trace.output[t]}) {
      CHECK((gate->array() >= 0).all());
      CHECK((gate->array() <= 1).all());
    }
    CHECK((trace.candidate[t].array().abs() <= 1).all());
    CHECK((trace.hidden[t].array().abs() <= 1).all());
  }
  CHECK(params.theta.size() == LstmParams::size_for(2, 4));
  CHECK(init_lstm(2, 4, 3, 1) == params);
}

TEST_CASE("sequence windows pad each group with its first row") {
  MatrixXd X(5, 1);
  X << 1, 2, 3, 4, 5;
  const std::vector<int> groups{1, 2, 1, 2, 1};
  const auto seqs = make_sequences(X, groups, 3);
  REQUIRE(seqs.size() == 5);
  CHECK(seqs[0](0, 0) == 1);
  CHECK(seqs[0](2, 0) == 1);
  CHECK(seqs[2](0, 0) == 1);
  CHECK(seqs[2](1, 0) == 1);
  CHECK(seqs[2](2, 0) == 3);
  CHECK(seqs[4](0, 0) == 1);
  CHECK(seqs[4](1, 0) == 3);
  CHECK(seqs[4](2, 0) == 5);
  CHECK(seqs[3](1, 0) == 2);
  CHECK(seqs[3](2, 0) == 4);
  CHECK_THROWS_AS(make_sequences(X, groups, 0), ArgumentError);
  CHECK_THROWS_AS(make_sequences(X, std::vector<int>{1, 2}, 3), ArgumentError);
}

TEST_CASE("LSTM training lowers the loss and is reproducible") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  std::vector<Sequence> seqs;
  std::vector<double> targets;
  for (int k = 0; k < 64; ++k) {
    Sequence s(3, 2);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 2; ++c) s(r, c) = g(rng);
    seqs.push_back(s);
    targets.push_back(0.5 * std::tanh(s(2, 0) - s(1, 1)));
  }
  LstmOptions o;
  o.units = 8;
  o.epochs = 60;
  o.batch_size = 16;
  o.lookback = 3;
  o.learning_rate = 1e-2;
  o.seed = 4;
  const auto a = fit_lstm(seqs, targets, o);
  const auto b = fit_lstm(seqs, targets, o);
  CHECK(a.params == b.params);
  REQUIRE(a.history.train_mse.size() == 60);
  CHECK(a.history.train_mse.back() < 0.5 * a.history.train_mse.front());
  o.batch_size = 0;
  CHECK_THROWS_AS(fit_lstm(seqs, targets, o), ArgumentError);
}

TEST_CASE("hyperparameters resolve with defaults and reject unknown keys") {
  std::vector<std::string> taken;
  const auto h = resolve_hyperparameters(Family::rfr, {{"n_trees", 10}}, &taken);
  CHECK(h["n_trees"] == 10);
  CHECK(h["min_samples_leaf"] == 1);
  CHECK(std::find(taken.begin(), taken.end(), "n_trees") == taken.end());
  CHECK(std::find(taken.begin(), taken.end(), "max_depth") != taken.end());
  const auto lin = resolve_hyperparameters(Family::linear, nlohmann::ordered_json::object());
  CHECK(lin["penalty"] == "l2");
  CHECK(lin["lambda"] == 0.01);
  CHECK_THROWS(resolve_hyperparameters(Family::svr, {{"kernal", "rbf"}}));
  CHECK_THROWS(resolve_hyperparameters(Family::lstm, {{"units", "many"}}));
  CHECK(parse_family("forest") == Family::rfr);
  CHECK(display_name(Family::linear) == "Linear Regression");
  CHECK_THROWS_AS(parse_family("xgboost"), ArgumentError);
}

TEST_CASE("every family round-trips through JSON with identical predictions") {
  const auto pr = random_problem(9, 40, 3, 0.2);
  std::vector<int> groups(40);
  for (int i = 0; i < 40; ++i) groups[i] = 1 + i % 4;
  const auto frame = frame_of(pr.X, groups);
  for (const auto family : all_families()) {
    FitRequest req;
    req.family = family;
    req.seed = 3;
    req.sidecar_fingerprint = "feedfacecafebeef";
    if (family == Family::lstm) req.hyperparameters = {{"units", 4}, {"epochs", 3}, {"batch_size", 8}};
    if (family == Family::rfr) req.hyperparameters = {{"n_trees", 10}};
    const auto model = fit_model(req, frame, pr.y);
    const auto back = model_from_json(model_to_json(model));
    CHECK(model_to_json(back) == model_to_json(model));
    CHECK(predict(back, frame) == predict(model, frame));
    CHECK(back.feature_layout.sidecar_fingerprint == "feedfacecafebeef");
    CHECK(model.train_fingerprint == training_fingerprint(family, model.hyperparameters, 3, frame, pr.y));
  }
}

TEST_CASE("layout mismatches name the offending columns") {
  const auto pr = random_problem(2, 20, 3);
  FitRequest req;
  const auto model = fit_model(req, frame_of(pr.X), pr.y);
  auto other = frame_of(pr.X);
  other.columns[1] = "surprise";
  try {
    predict(model, other);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("surprise") != std::string::npos);
    CHECK(msg.find("x1") != std::string::npos);
  }
  auto swapped = frame_of(pr.X);
  std::swap(swapped.columns[0], swapped.columns[2]);
  CHECK_THROWS_AS(predict(model, swapped), SchemaError);
}

TEST_CASE("corrupt model documents are rejected") {
  CHECK_THROWS_AS(model_from_json("{"), ParseError);
  CHECK_THROWS_AS(model_from_json(R"({"format":"parkcast-model","version":99})"), SchemaError);
  const auto pr = random_problem(2, 20, 3);
  FitRequest req;
  req.family = Family::rfr;
  req.hyperparameters = {{"n_trees", 2}};
  auto j = nlohmann::json::parse(model_to_json(fit_model(req, frame_of(pr.X), pr.y)));
  j["feature_layout"]["hash"] = "0000000000000000";
  CHECK_THROWS_AS(model_from_json(j.dump()), SchemaError);
}
