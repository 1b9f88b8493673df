#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "oracles/fixtures.hpp"
#include "oracles/oracles.hpp"
#include "parkcast/common/error.hpp"
#include "parkcast/common/fingerprint.hpp"
#include "parkcast/evaltune/metrics.hpp"
#include "parkcast/evaltune/report.hpp"
#include "parkcast/evaltune/search.hpp"
#include "parkcast/evaltune/split.hpp"

using namespace parkcast;
using namespace parkcast::evaltune;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::ordered_json;

namespace {

std::vector<double> randvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

features::FeatureFrame frame_of(const MatrixXd& X) {
  features::FeatureFrame f;
  for (Eigen::Index c = 0; c < X.cols(); ++c) f.columns.push_back("x" + std::to_string(c));
  f.values = X;
  f.groups.assign(static_cast<std::size_t>(X.rows()), 1);
  return f;
}

ReportRow row(const std::string& name, double rmse, double mae, double r2) {
  ReportRow r;
  r.model = name;
  r.rmse = rmse;
  r.mae = mae;
  r.r2 = r2;
  return r;
}

}  // namespace

TEST_CASE("metric hand cases") {
  const std::vector<double> y{0.5, 0.7}, p{0.6, 0.4};
  CHECK(std::fabs(mae(y, p) - 0.2) < 1e-15);
  CHECK(std::fabs(rmse(y, p) - std::sqrt(0.05)) < 1e-15);
  CHECK(mae(y, y) == 0.0);
  CHECK(rmse(y, y) == 0.0);
  CHECK(r2(y, y) == 1.0);
  const std::vector<double> y3{1, 2, 3}, m3{2, 2, 2};
  CHECK(r2(y3, m3) == 0.0);
  CHECK(denormalize_error(0.0, 94.5) == 0.0);
}

TEST_CASE("metrics agree with definitional oracles") {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + rng() % 200;
    const auto y = randvec(rng, n), p = randvec(rng, n);
    CHECK(std::fabs(mae(y, p) - oracle::mae(y, p)) < 1e-12);
    CHECK(std::fabs(rmse(y, p) - oracle::rmse(y, p)) < 1e-12);
    CHECK(std::fabs(r2(y, p) - oracle::r2(y, p)) < 1e-12);
  }
}

TEST_CASE("rmse dominates mae") {
  std::mt19937_64 rng(22);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng() % 30;
    const auto y = randvec(rng, n), p = randvec(rng, n);
    CHECK(rmse(y, p) >= mae(y, p) - 1e-15);
  }
}

TEST_CASE("a worse-than-mean predictor has negative r2") {
  const std::vector<double> y{1, 2, 3, 4}, p{4, 3, 2, 1};
  CHECK(r2(y, p) < 0);
  CHECK(std::fabs(r2(y, p) - oracle::r2(y, p)) < 1e-12);
}

TEST_CASE("metric input errors") {
  const std::vector<double> a{1, 2}, b{1};
  CHECK_THROWS_AS(mae(a, b), ArgumentError);
  CHECK_THROWS_AS(rmse({}, {}), ArgumentError);
  CHECK_THROWS_AS(r2(std::vector<double>{2, 2}, a), UndefinedError);
  CHECK_THROWS_AS(denormalize_error(0.1, 0.0), ArgumentError);
}

TEST_CASE("errors convert to vehicles") {
  CHECK(denormalize_error(0.112, 94.5) == doctest::Approx(10.584).epsilon(1e-12));
  CHECK(denormalize_error(0.142, 94.5) == doctest::Approx(13.419).epsilon(1e-12));
  CHECK(std::round(denormalize_error(0.112, 94.5) * 10) / 10 == doctest::Approx(10.6));
  CHECK(std::round(denormalize_error(0.142, 94.5) * 10) / 10 == doctest::Approx(13.4));
}

TEST_CASE("train/test split sizes and determinism") {
  const auto a = train_test_split(144);
  CHECK(a.train.size() == 100);
  CHECK(a.test.size() == 44);
  CHECK(a.train.front() == 0);
  CHECK(a.train.back() == 99);
  CHECK(a.test.front() == 100);
  const auto b = train_test_split(10);
  CHECK(b.train.size() == 7);
  CHECK(b.test.size() == 3);
  const auto r1 = train_test_split(50, 0.7, SplitMode::random, 9);
  const auto r2 = train_test_split(50, 0.7, SplitMode::random, 9);
  CHECK(r1.train == r2.train);
  CHECK(r1.test == r2.test);
  CHECK(train_test_split(50, 0.7, SplitMode::random, 10).train != r1.train);
  std::set<std::size_t> all(r1.train.begin(), r1.train.end());
  all.insert(r1.test.begin(), r1.test.end());
  CHECK(all.size() == 50);
  CHECK(std::is_sorted(r1.test.begin(), r1.test.end()));
  CHECK_THROWS_AS(train_test_split(9), ArgumentError);
  CHECK_THROWS_AS(train_test_split(20, 1.0), ArgumentError);
  CHECK(parse_split_mode("random") == SplitMode::random);
  CHECK_THROWS_AS(parse_split_mode("shuffle-ish"), ArgumentError);
}

TEST_CASE("kfold sizes") {
  std::vector<std::size_t> ten(10), nine(9);
  std::iota(ten.begin(), ten.end(), 0);
  std::iota(nine.begin(), nine.end(), 0);
  const auto f10 = kfold(ten);
  REQUIRE(f10.size() == 3);
  CHECK(f10[0].size() == 4);
  CHECK(f10[1].size() == 3);
  CHECK(f10[2].size() == 3);
  for (const auto& f : kfold(nine)) CHECK(f.size() == 3);
  CHECK_THROWS_AS(kfold(std::span<const std::size_t>(ten.data(), 2)), ArgumentError);
  CHECK_THROWS_AS(kfold(ten, 1), ArgumentError);
}

TEST_CASE("kfold partitions are disjoint, exhaustive and balanced") {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 3 + rng() % 200;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 1000);
    const auto mode = c % 2 ? SplitMode::random : SplitMode::chronological;
    const auto folds = kfold(idx, 3, mode, static_cast<std::uint64_t>(c));
    std::set<std::size_t> seen;
    std::size_t total = 0, lo = n, hi = 0;
    for (const auto& f : folds) {
      seen.insert(f.begin(), f.end());
      total += f.size();
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    CHECK(total == n);
    CHECK(seen.size() == n);
    CHECK(*seen.begin() == 1000);
    CHECK(hi - lo <= 1);
    if (mode == SplitMode::chronological) {
      for (std::size_t j = 0; j + 1 < folds.size(); ++j) CHECK(folds[j].back() < folds[j + 1].front());
    }
  }
}

TEST_CASE("forward chaining never trains on the future") {
  std::vector<std::size_t> idx(31);
  std::iota(idx.begin(), idx.end(), 0);
  const auto folds = kfold(idx, 4);
  const auto pairs = fold_pairs(folds, SplitMode::chronological);
  REQUIRE(pairs.size() == 3);
  for (const auto& p : pairs) {
    CHECK(*std::max_element(p.train.begin(), p.train.end()) < *std::min_element(p.validate.begin(), p.validate.end()));
  }
  CHECK(pairs[2].train.size() == folds[0].size() + folds[1].size() + folds[2].size());
  const auto rnd = fold_pairs(kfold(idx, 4, SplitMode::random, 2), SplitMode::random);
  REQUIRE(rnd.size() == 4);
  for (const auto& p : rnd) CHECK(p.train.size() + p.validate.size() == 31);
}

TEST_CASE("grids enumerate the Cartesian product in declared order") {
  SearchSpace s;
  s.subspaces.push_back({Dimension::choice("a", {1, 2}), Dimension::choice("b", {"x", "y", "z"})});
  const auto cells = s.grid_cells();
  REQUIRE(cells.size() == 6);
  CHECK(cells[0] == ordered_json{{"a", 1}, {"b", "x"}});
  CHECK(cells[1] == ordered_json{{"a", 1}, {"b", "y"}});
  CHECK(cells[3] == ordered_json{{"a", 2}, {"b", "x"}});
  std::set<std::string> distinct;
  for (const auto& c : cells) distinct.insert(c.dump());
  CHECK(distinct.size() == 6);
  SearchSpace ranged;
  ranged.subspaces.push_back({Dimension::uniform("c", 0, 1)});
  CHECK_FALSE(ranged.is_grid());
  CHECK_THROWS_AS(ranged.grid_cells(), ArgumentError);
  CHECK(SearchSpace::from_json(ordered_json::parse(s.to_json().dump())).grid_cells() == cells);
}

TEST_CASE("grid search evaluates every cell and returns the table argmin") {
  const auto d = fixture::planted_ridge(1);
  const auto X = frame_of(d.X);
  SearchSpace s;
  s.subspaces.push_back({Dimension::choice("penalty", {"l2", "none"}), Dimension::choice("lambda", {0.0, 1.0, 10.0})});
  const auto res = grid_search(models::Family::linear, s, X, d.y);
  REQUIRE(res.table.size() == 6);
  std::size_t arg = 0;
  for (std::size_t i = 0; i < res.table.size(); ++i) {
    CHECK(res.table[i].ok);
    CHECK(res.table[i].fold_rmse.size() == 2);
    CHECK(res.table[i].params == s.grid_cells()[i]);
    if (res.table[i].mean_rmse < res.table[arg].mean_rmse) arg = i;
  }
  CHECK(res.best_index == arg);
  CHECK(res.best == res.table[arg].params);
  CHECK(res.best_score == res.table[arg].mean_rmse);
  const auto csv = cv_table_csv(res);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("a one-point grid returns that point") {
  const auto d = fixture::planted_ridge(2);
  SearchSpace s;
  s.subspaces.push_back({Dimension::choice("lambda", {3.0})});
  const auto res = grid_search(models::Family::linear, s, frame_of(d.X), d.y);
  CHECK(res.table.size() == 1);
  CHECK(res.best["lambda"] == 3.0);
  CHECK(res.best_score == res.table[0].mean_rmse);
}

TEST_CASE("planted ridge optimum is recovered") {
  const std::vector<double> grid{0.0, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto d = fixture::planted_ridge(seed);
    std::size_t want = 0;
    std::vector<double> scores;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      scores.push_back(fixture::ridge_cv_rmse(d, grid[i]));
      if (scores[i] < scores[want]) want = i;
    }
    SearchSpace s;
    std::vector<ordered_json> values(grid.begin(), grid.end());
    s.subspaces.push_back({Dimension::choice("lambda", values)});
    const auto res = grid_search(models::Family::linear, s, frame_of(d.X), d.y);
    CHECK(res.best["lambda"].get<double>() == grid[want]);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(res.table[i].mean_rmse == doctest::Approx(scores[i]).epsilon(1e-9));
    // Neither unregularised nor maximal shrinkage wins on this fixture.
    CHECK(want > 0);
    CHECK(want + 1 < grid.size());
  }
}

TEST_CASE("search result is invariant under axis reordering") {
  const auto d = fixture::planted_ridge(3);
  SearchSpace ab, ba;
  ab.subspaces.push_back({Dimension::choice("penalty", {"l2", "l1"}), Dimension::choice("lambda", {0.01, 1.0, 10.0})});
  ba.subspaces.push_back({Dimension::choice("lambda", {0.01, 1.0, 10.0}), Dimension::choice("penalty", {"l2", "l1"})});
  const auto r1 = grid_search(models::Family::linear, ab, frame_of(d.X), d.y);
  const auto r2 = grid_search(models::Family::linear, ba, frame_of(d.X), d.y);
  CHECK(r1.best["penalty"] == r2.best["penalty"]);
  CHECK(r1.best["lambda"] == r2.best["lambda"]);
  CHECK(r1.best_score == r2.best_score);
}

TEST_CASE("ties go to the earliest cell and failures are excluded") {
  const auto d = fixture::planted_ridge(4);
  const auto X = frame_of(d.X);
  std::vector<ordered_json> cells;
  for (int i = 0; i < 5; ++i) cells.push_back({{"i", i}});
  const CellEvaluator flat = [](const ordered_json& p, const features::FeatureFrame&, const VectorXd&,
                                const features::FeatureFrame& v) {
    if (p["i"] == 0) throw ArgumentError("cell 0 refuses");
    return VectorXd::Zero(v.rows()).eval();
  };
  const auto res = evaluate_cells(cells, flat, X, d.y, {});
  CHECK_FALSE(res.table[0].ok);
  CHECK(res.table[0].error.find("refuses") != std::string::npos);
  CHECK(res.best_index == 1);
  CHECK(res.table.size() == 5);

  const CellEvaluator broken = [](const ordered_json&, const features::FeatureFrame&, const VectorXd&,
                                  const features::FeatureFrame&) -> VectorXd { throw RankError("nope"); };
  CHECK_THROWS_AS(evaluate_cells(cells, broken, X, d.y, {}), SearchError);
  CHECK_THROWS_AS(evaluate_cells({}, flat, X, d.y, {}), ArgumentError);
}

TEST_CASE("random search draws reproducibly and reports its own minimum") {
  const auto d = fixture::planted_ridge(5);
  SearchSpace s;
  s.subspaces.push_back({Dimension::choice("penalty", {"l2"}), Dimension::log_uniform("lambda", 0.01, 100.0)});
  const auto one = random_search(models::Family::linear, s, 1, 7, frame_of(d.X), d.y);
  CHECK(one.table.size() == 1);
  CHECK(s.sample(6, 3) == s.sample(6, 3));
  CHECK(s.sample(6, 3) != s.sample(6, 4));
  for (const auto& c : s.sample(50, 1)) {
    const double l = c["lambda"].get<double>();
    CHECK(l >= 0.01);
    CHECK(l <= 100.0);
  }
  const auto res = random_search(models::Family::linear, s, 8, 7, frame_of(d.X), d.y);
  double best = 1e300;
  for (const auto& c : res.table) best = std::min(best, c.mean_rmse);
  CHECK(res.best_score == best);
  SearchSpace ints;
  ints.subspaces.push_back({Dimension::integer("n", 2, 4)});
  for (const auto& c : ints.sample(30, 2)) {
    CHECK(c["n"].is_number_integer());
    CHECK(c["n"].get<int>() >= 2);
    CHECK(c["n"].get<int>() <= 4);
  }
}

TEST_CASE("report rows sort by RMSE descending, stably") {
  std::vector<ReportRow> rows{row("RFR", 0.142, 0.112, 0.582), row("Linear Regression", 0.208, 0.178, 0.051),
                              row("LSTM", 0.149, 0.139, 0.457), row("SVR", 0.173, 0.135, 0.353),
                              row("Twin", 0.149, 0.1, 0.4)};
  sort_rows(rows);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.model);
  CHECK(names == std::vector<std::string>{"Linear Regression", "SVR", "LSTM", "Twin", "RFR"});
}

TEST_CASE("published values render the golden table byte for byte") {
  EvaluationReport rep;
  rep.rows = {row("RFR", 0.142, 0.112, 0.582), row("LSTM", 0.149, 0.139, 0.457),
              row("Linear Regression", 0.208, 0.178, 0.051), row("SVR", 0.173, 0.135, 0.353)};
  sort_rows(rep.rows);
  CHECK(render_table(rep) == read_file(PARKCAST_TEST_DATA "/report_golden.txt"));
}

TEST_CASE("an empty report renders the header only") {
  const auto t = render_table(EvaluationReport{});
  CHECK(std::count(t.begin(), t.end(), '\n') == 2);
  CHECK(t.rfind("| Model", 0) == 0);
}

TEST_CASE("reports round-trip through JSON") {
  EvaluationReport rep;
  auto r = row("SVR", 0.173, 0.135, 0.353);
  r.family = models::Family::svr;
  r.hyperparameters = {{"kernel", "rbf"}, {"C", 1.0}};
  r.defaults_taken = {"gamma"};
  r.cv_rmse = 0.2;
  r.rmse_vehicles = 16.3485;
  rep.rows.push_back(r);
  rep.failures.push_back({models::Family::lstm, "diverged"});
  rep.evaluation_log.push_back({models::Family::svr, "aa", "bb"});
  rep.dataset_fingerprint = "0123456789abcdef";
  rep.vehicle_scale = 94.5;
  const auto back = EvaluationReport::from_json(ordered_json::parse(rep.to_json().dump()));
  CHECK(back.to_json() == rep.to_json());
  CHECK(render_table(back) == render_table(rep));
}

TEST_CASE("compare_models tunes, refits and scores each family once") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  const int n = 120;
  MatrixXd X(n, 2);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = u(rng);
    X(i, 1) = u(rng);
    y(i) = (X(i, 0) > 0 ? 1.0 : -1.0) * std::fabs(X(i, 1)) + 0.05 * u(rng);
  }
  const auto plan = train_test_split(n);
  const auto frame = frame_of(X);
  const auto train = frame.select_rows(plan.train), test = frame.select_rows(plan.test);
  VectorXd ytr(static_cast<Eigen::Index>(plan.train.size())), yte(static_cast<Eigen::Index>(plan.test.size()));
  for (std::size_t i = 0; i < plan.train.size(); ++i) ytr(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(plan.train[i]));
  for (std::size_t i = 0; i < plan.test.size(); ++i) yte(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(plan.test[i]));

  std::map<models::Family, SearchSpace> spaces;
  spaces[models::Family::linear] = default_space(models::Family::linear);
  SearchSpace forest;
  forest.subspaces.push_back({Dimension::choice("n_trees", {30}), Dimension::choice("min_samples_leaf", {1, 3})});
  spaces[models::Family::rfr] = forest;
  SearchSpace bad;
  bad.subspaces.push_back({Dimension::choice("C", {-1.0})});
  spaces[models::Family::svr] = bad;
  CompareOptions opts;
  opts.vehicle_scale = 94.5;
  const auto res = compare_models(train, ytr, test, yte, {models::Family::linear, models::Family::rfr, models::Family::svr},
                                  spaces, opts);
  REQUIRE(res.report.rows.size() == 2);
  REQUIRE(res.report.failures.size() == 1);
  CHECK(res.report.failures[0].family == models::Family::svr);
  CHECK(res.report.rows[0].model == "Linear Regression");
  CHECK(res.report.rows[1].model == "RFR");
  CHECK(res.report.rows[1].rmse < res.report.rows[0].rmse);
  for (const auto& r : res.report.rows) {
    CHECK(0 <= r.mae);
    CHECK(r.mae <= r.rmse);
    CHECK(r.r2 <= 1);
    REQUIRE(r.rmse_vehicles.has_value());
    CHECK(*r.rmse_vehicles == doctest::Approx(r.rmse * 94.5));
    CHECK(r.cv_rmse.has_value());
  }
  CHECK(res.report.evaluation_log.size() == 2);
  std::set<models::Family> logged;
  for (const auto& e : res.report.evaluation_log) logged.insert(e.family);
  CHECK(logged.size() == 2);
  // The refitted models reproduce the reported scores.
  for (std::size_t i = 0; i < res.models.size(); ++i) {
    const VectorXd p = models::predict(res.models[i], test);
    CHECK(rmse(as_span(yte), as_span(p)) == doctest::Approx(res.report.rows[i].rmse).epsilon(1e-12));
  }
  const auto single = compare_models(train, ytr, test, yte, {models::Family::linear}, spaces, opts);
  CHECK(single.report.rows.size() == 1);
}
