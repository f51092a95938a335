#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles/dense.hpp"
#include "sparsecps/errors.hpp"
#include "sparsecps/metrics.hpp"

using namespace sparsecps;

namespace {

std::vector<Position> random_positions(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  std::vector<Position> p(static_cast<std::size_t>(n));
  for (auto& x : p) x = {u(rng), u(rng), u(rng)};
  return p;
}

Eigen::MatrixXd random_symmetric(Index n, std::mt19937_64& rng) {
  const Eigen::MatrixXd a = oracle::normal_matrix(n, n, rng);
  return a + a.transpose();
}

}  // namespace

TEST_CASE("supra-threshold connections") {
  const ConnectionSet empty = supra_threshold(Eigen::MatrixXd::Zero(4, 4));
  CHECK(empty.pairs.empty());
  CHECK(empty.threshold == 0.0);
  CHECK_FALSE(empty.has_nonnull);

  Eigen::MatrixXd one = Eigen::MatrixXd::Zero(4, 4);
  one(1, 3) = one(3, 1) = -0.2;
  const ConnectionSet single = supra_threshold(one);
  REQUIRE(single.pairs.size() == 1);
  CHECK(single.pairs[0].i == 1);
  CHECK(single.pairs[0].j == 3);
  CHECK(single.pairs[0].weight == 0.2);

  Eigen::MatrixXd three = Eigen::MatrixXd::Identity(3, 3) * 50.0;  // diagonal ignored
  three(0, 1) = 1.0;
  three(0, 2) = 0.6;
  three(1, 2) = -0.4;
  const ConnectionSet s = supra_threshold(three, 0.5);
  CHECK(s.threshold == 0.5);
  REQUIRE(s.pairs.size() == 2);
  CHECK(s.pairs[0].weight == 1.0);
  CHECK(s.pairs[1].weight == 0.6);
  for (const auto& c : s.pairs) CHECK(c.weight >= s.threshold);

  CHECK_THROWS_AS(supra_threshold(Eigen::MatrixXd::Zero(2, 3)), ShapeError);
  CHECK_THROWS_AS(supra_threshold(one, 0.0), ConfigError);
}

TEST_CASE("pair distance") {
  const Position a(0.01, 0.02, 0.03), b(-0.04, 0.0, 0.05);
  CHECK(pair_distance({a, b}, {a, b}) == 0.0);
  CHECK(pair_distance({a, b}, {b, a}) == 0.0);
  const Position o = Position::Zero();
  CHECK(pair_distance({o, {1, 0, 0}}, {o, o}) == doctest::Approx(std::sqrt(0.5)));

  std::mt19937_64 rng(70);
  for (int k = 0; k < 200; ++k) {
    const auto p = random_positions(4, rng);
    const PositionPair w{p[0], p[1]}, v{p[2], p[3]};
    const double d = pair_distance(w, v);
    CHECK(d >= 0.0);
    CHECK(pair_distance(v, w) == d);
    CHECK(pair_distance({p[1], p[0]}, v) == d);
    CHECK(pair_distance(w, {p[3], p[2]}) == d);
  }
}

TEST_CASE("error metric examples") {
  const std::vector<Position> pos{{0, 0, 0}, {0.05, 0, 0}, {0, 0.05, 0}};
  Eigen::MatrixXd part = Eigen::MatrixXd::Zero(3, 3);
  part(0, 1) = part(1, 0) = 2.0;
  CHECK(err_metric(part, pos, {{pos[0], pos[1]}}) == 0.0);
  CHECK(err_metric(Eigen::MatrixXd::Zero(3, 3), pos, {{pos[0], pos[1]}}) == 0.0);

  // The true pair sits 0.03 m from the reconstructed one in every coordinate
  // of one endpoint: distance sqrt(0.5 * 2 * 0.03^2) = 0.03.
  const PositionPair shifted{{0.03, 0.03, 0.0}, pos[1]};
  CHECK(err_metric(part, pos, {shifted}) == doctest::Approx(0.03));

  // Two terms: weights 1 and 0.5, nearest distances computed by hand.
  part(0, 2) = part(2, 0) = -1.0;
  const PositionPair t{pos[0], pos[1]};
  const double d02 = pair_distance({pos[0], pos[2]}, t);
  CHECK(err_metric(part, pos, {t}) == doctest::Approx(0.5 * d02));

  CHECK_THROWS_AS(err_metric(part, pos, {}), ConfigError);
  CHECK_THROWS_AS(err_metric(part, {pos[0]}, {t}), ShapeError);
}

TEST_CASE("error metric is scale invariant") {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> alpha(1e-6, 1e6);
  for (int k = 0; k < 200; ++k) {
    const auto pos = random_positions(8, rng);
    const Eigen::MatrixXd part = random_symmetric(8, rng);
    const std::vector<PositionPair> truth{{pos[0], pos[1]}, {pos[2], pos[5]}};
    const double base = err_metric(part, pos, truth);
    // Power-of-two scaling is exact in floating point, so the metric is too.
    const double pow2 = std::ldexp(1.0, static_cast<int>(k % 41) - 20);
    CHECK(err_metric(pow2 * part, pos, truth) == base);
    // General scaling rounds each entry, so agreement is to rounding error.
    const double a = alpha(rng);
    CHECK(std::abs(err_metric(a * part, pos, truth) - base) <= 1e-12 * std::max(base, 1e-300));
  }
}

TEST_CASE("error metric is permutation equivariant") {
  std::mt19937_64 rng(72);
  for (int k = 0; k < 100; ++k) {
    const Index n = 7;
    const auto pos = random_positions(n, rng);
    const Eigen::MatrixXd part = random_symmetric(n, rng);
    const std::vector<PositionPair> truth{{pos[1], pos[4]}};
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    // New label a holds old source perm[a].
    Eigen::MatrixXd relabelled(n, n);
    std::vector<Position> moved(n);
    for (Index a = 0; a < n; ++a) {
      moved[a] = pos[perm[a]];
      for (Index b = 0; b < n; ++b) relabelled(a, b) = part(perm[a], perm[b]);
    }
    CHECK(err_metric(relabelled, moved, truth) == doctest::Approx(err_metric(part, pos, truth)));
    CHECK(supra_threshold(relabelled).pairs.size() == supra_threshold(part).pairs.size());
  }
}

TEST_CASE("error metric is nonincreasing in the threshold fraction") {
  std::mt19937_64 rng(73);
  for (int k = 0; k < 100; ++k) {
    const auto pos = random_positions(6, rng);
    const Eigen::MatrixXd part = random_symmetric(6, rng);
    const std::vector<PositionPair> truth{{pos[0], pos[3]}};
    double prev = std::numeric_limits<double>::infinity();
    for (double f : {0.05, 0.2, 0.5, 0.8, 1.0}) {
      const double e = err_metric(part, pos, truth, f);
      CHECK(e <= prev);
      prev = e;
    }
  }
}

TEST_CASE("evaluate") {
  // Fine sources on a line every 1 cm; the coarse space keeps every other one.
  std::vector<Position> fine, coarse;
  for (int j = 0; j < 10; ++j) fine.emplace_back(0.01 * j, 0.0, 0.0);
  for (int j = 0; j < 10; j += 2) coarse.push_back(fine[j]);
  const std::vector<std::pair<Index, Index>> truth{{1, 6}};

  // The nearest coarse pair to fine (1, 6) is coarse (0, 3) or (1, 3): both
  // shift one endpoint by 1 cm, giving sqrt(0.5 * 1e-4).
  CrossSpectrum est;
  est.matrix = Eigen::MatrixXcd::Zero(5, 5);
  est.matrix(0, 3) = est.matrix(3, 0) = 4.0;
  const EvalReport r = evaluate(est, truth, fine, coarse);
  CHECK(r.count_re == 1);
  CHECK(r.err_re == doctest::Approx(std::sqrt(0.5 * 1e-4)));
  CHECK(r.has_nonnull_re);
  CHECK(r.count_im == 0);
  CHECK_FALSE(r.has_nonnull_im);
  CHECK(r.err_im == 0.0);

  est.matrix.setZero();
  const EvalReport z = evaluate(est, truth, fine, coarse);
  CHECK(z.err_re == 0.0);
  CHECK(z.err_im == 0.0);
  CHECK_FALSE(z.has_nonnull_re);
  CHECK_FALSE(z.has_nonnull_im);

  est.matrix(1, 2) = {0.0, 1.0};
  est.matrix(2, 1) = {0.0, -1.0};
  const EvalReport im = evaluate(est, truth, fine, coarse);
  CHECK(im.count_im == 1);
  CHECK(im.count_re == 0);

  est.matrix = Eigen::MatrixXcd::Zero(4, 4);
  CHECK_THROWS_AS(evaluate(est, truth, fine, coarse), ShapeError);
  est.matrix = Eigen::MatrixXcd::Zero(5, 5);
  CHECK_THROWS_AS(evaluate(est, {{1, 10}}, fine, coarse), ShapeError);
}

TEST_CASE("sparsity table") {
  CHECK(sparsity_table({}).empty());

  EvalReport null_run;
  const auto all_null = sparsity_table({{"g", null_run}, {"g", null_run}});
  REQUIRE(all_null.size() == 2);
  CHECK(all_null[0].part == SpectrumPart::real);
  CHECK(all_null[1].part == SpectrumPart::imag);
  CHECK(all_null[0].percent_nonnull == 0.0);
  CHECK_FALSE(all_null[0].count_range);
  CHECK_FALSE(all_null[0].mean_count);

  EvalReport four;
  four.count_re = 4;
  four.has_nonnull_re = true;
  const auto single = sparsity_table({{"g", four}});
  CHECK(single[0].percent_nonnull == 100.0);
  CHECK(*single[0].count_range == std::pair<Index, Index>{4, 4});
  CHECK(*single[0].mean_count == 4.0);
  CHECK(single[1].percent_nonnull == 0.0);

  std::vector<LabelledReport> runs;
  for (Index c : {1, 3, 5}) {
    EvalReport r;
    r.count_im = c;
    r.has_nonnull_im = true;
    runs.push_back({"b", r});
  }
  runs.push_back({"b", null_run});
  runs.insert(runs.begin(), {"a", four});
  const auto rows = sparsity_table(runs);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].group == "a");
  CHECK(rows[2].group == "b");
  CHECK(rows[3].part == SpectrumPart::imag);
  CHECK(rows[3].runs == 4);
  CHECK(rows[3].percent_nonnull == 75.0);
  CHECK(*rows[3].count_range == std::pair<Index, Index>{1, 5});
  CHECK(*rows[3].mean_count == 3.0);
}
