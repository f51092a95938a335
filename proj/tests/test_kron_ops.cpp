#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles/dense.hpp"
#include "sparsecps/errors.hpp"
#include "sparsecps/kron_ops.hpp"

using namespace sparsecps;

namespace {

LeadField make(const Eigen::MatrixXd& g) {
  LeadField lf;
  lf.entries = g;
  return lf;
}

std::vector<Index> one_based(const std::vector<Index>& v) {
  std::vector<Index> out(v);
  for (Index& x : out) ++x;
  return out;
}

}  // namespace

TEST_CASE("permutations follow the closed form") {
  CHECK(one_based(build_permutations(2, 2).row) == std::vector<Index>{1, 3, 2, 4});
  CHECK(one_based(build_permutations(1, 5).row) == std::vector<Index>{1});
  CHECK(one_based(build_permutations(2, 3).col) == std::vector<Index>{1, 3, 5, 2, 4, 6});
  CHECK_THROWS_AS(build_permutations(0, 3), ConfigError);
}

TEST_CASE("permutations are bijections") {
  for (Index m = 1; m <= 9; ++m)
    for (Index n = 1; n <= 9; ++n) {
      const auto p = build_permutations(m, n);
      auto row = p.row, col = p.col;
      std::sort(row.begin(), row.end());
      std::sort(col.begin(), col.end());
      std::vector<Index> want_row(m * m), want_col(n * m);
      std::iota(want_row.begin(), want_row.end(), 0);
      std::iota(want_col.begin(), want_col.end(), 0);
      CHECK(row == want_row);
      CHECK(col == want_col);
    }
}

TEST_CASE("apply on small closed-form cases") {
  const KronOperator id(make(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(id.apply(Eigen::Vector4d(1, 2, 3, 4)) == Eigen::VectorXd(Eigen::Vector4d(1, 2, 3, 4)));
  CHECK(id.apply_transpose(Eigen::Vector4d(1, 0, 0, 1)) ==
        Eigen::VectorXd(Eigen::Vector4d(1, 0, 0, 1)));

  const KronOperator scalar(make(Eigen::MatrixXd::Constant(1, 1, 2.0)));
  CHECK(scalar.apply(Eigen::VectorXd::Constant(1, 5.0))[0] == 20.0);

  std::mt19937_64 rng(3);
  const KronOperator wide(make(oracle::normal_matrix(2, 5, rng)));
  CHECK(wide.apply_transpose(Eigen::VectorXd::Zero(4)).isZero(0.0));
}

TEST_CASE("apply and apply_transpose match the dense oracle") {
  std::mt19937_64 rng(4);
  for (auto [m, n] : {std::pair<Index, Index>{3, 4}, {2, 5}, {5, 2}, {1, 7}, {6, 1}, {8, 8}}) {
    const Eigen::MatrixXd g = oracle::normal_matrix(m, n, rng);
    const Eigen::MatrixXd k = oracle::kron_self(g);
    const KronOperator op(make(g));
    const Eigen::VectorXd x = oracle::normal_vector(n * n, rng);
    const Eigen::VectorXd y = oracle::normal_vector(m * m, rng);
    CHECK(oracle::max_rel_diff(op.apply(x), k * x) < 1e-12);
    CHECK(oracle::max_rel_diff(op.apply_transpose(y), k.transpose() * y) < 1e-12);
  }
}

TEST_CASE("apply equals vec(G X G^T)") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd g = oracle::normal_matrix(4, 6, rng);
  const Eigen::MatrixXd x = oracle::normal_matrix(6, 6, rng);
  const KronOperator op(make(g));
  CHECK(oracle::max_rel_diff(op.apply(oracle::vec(x)), oracle::vec(g * x * g.transpose())) <
        1e-12);
}

TEST_CASE("adjointness") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<Index> size(1, 9);
    const Index m = size(rng), n = size(rng);
    const KronOperator op(make(oracle::normal_matrix(m, n, rng)));
    const Eigen::VectorXd x = oracle::normal_vector(n * n, rng);
    const Eigen::VectorXd y = oracle::normal_vector(m * m, rng);
    const double lhs = op.apply(x).dot(y), rhs = x.dot(op.apply_transpose(y));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max({std::abs(lhs), std::abs(rhs), 1.0}));
  }
}

TEST_CASE("block operator has no cross-coupling") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd g = oracle::normal_matrix(3, 4, rng);
  const KronOperator op(make(g));
  const Eigen::VectorXd x = oracle::normal_vector(16, rng);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(16);

  auto [a1, a2] = op.apply_block(x, zero);
  CHECK(a1 == op.apply(x));
  CHECK(a2.isZero(0.0));
  auto [b1, b2] = op.apply_block(zero, x);
  CHECK(b1.isZero(0.0));
  CHECK(b2 == op.apply(x));

  const Eigen::VectorXd s1 = oracle::normal_vector(16, rng), s2 = oracle::normal_vector(16, rng);
  Eigen::VectorXd stacked(32);
  stacked << s1, s2;
  const Eigen::VectorXd want = oracle::block_diagonal(oracle::kron_self(g)) * stacked;
  auto [c1, c2] = op.apply_block(s1, s2);
  Eigen::VectorXd got(18);
  got << c1, c2;
  CHECK(oracle::max_rel_diff(got, want) < 1e-12);

  const Eigen::VectorXd d1 = oracle::normal_vector(9, rng), d2 = oracle::normal_vector(9, rng);
  Eigen::VectorXd dstack(18);
  dstack << d1, d2;
  const Eigen::VectorXd want_t = oracle::block_diagonal(oracle::kron_self(g)).transpose() * dstack;
  auto [t1, t2] = op.apply_block_transpose(d1, d2);
  Eigen::VectorXd got_t(32);
  got_t << t1, t2;
  CHECK(oracle::max_rel_diff(got_t, want_t) < 1e-12);
}

TEST_CASE("serial and parallel execution are bit-identical") {
  std::mt19937_64 rng(8);
  const KronOperator op(make(oracle::normal_matrix(30, 100, rng)));
  const Eigen::VectorXd x = oracle::normal_vector(100 * 100, rng);
  const Eigen::VectorXd y = oracle::normal_vector(30 * 30, rng);
  KronWorkspace ws;
  Eigen::VectorXd a(900), b(900), c(10000), d(10000);
  op.apply({x.data(), 10000}, {a.data(), 900}, ws, Execution::serial);
  op.apply({x.data(), 10000}, {b.data(), 900}, ws, Execution::parallel);
  op.apply_transpose({y.data(), 900}, {c.data(), 10000}, ws, Execution::serial);
  op.apply_transpose({y.data(), 900}, {d.data(), 10000}, ws, Execution::parallel);
  CHECK(a == b);
  CHECK(c == d);
}

TEST_CASE("shape errors") {
  const KronOperator op(make(Eigen::MatrixXd::Ones(2, 3)));
  CHECK_THROWS_AS(op.apply(Eigen::VectorXd::Zero(8)), ShapeError);
  CHECK_THROWS_AS(op.apply_transpose(Eigen::VectorXd::Zero(9)), ShapeError);
  CHECK_THROWS_AS(op.apply_block(Eigen::VectorXd::Zero(9), Eigen::VectorXd::Zero(4)), ShapeError);

  LeadField bad = make(Eigen::MatrixXd::Ones(2, 3));
  bad.entries(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(KronOperator{bad});
  LeadField wrong_positions = make(Eigen::MatrixXd::Ones(2, 3));
  wrong_positions.source_positions = std::vector<Eigen::Vector3d>(2, Eigen::Vector3d::Zero());
  CHECK_THROWS(wrong_positions.validate());
}

TEST_CASE("Lipschitz constant") {
  CHECK(lipschitz_constant(make(Eigen::MatrixXd::Identity(2, 2))) == doctest::Approx(2.0));
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  CHECK(lipschitz_constant(make(d)) == doctest::Approx(162.0).epsilon(1e-12));

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd g = oracle::normal_matrix(4, 6, rng);
    const double want = oracle::lipschitz_svd(g);
    CHECK(std::abs(lipschitz_constant(make(g)) - want) <= 1e-8 * want);
  }
}

TEST_CASE("Lipschitz constant properties") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd g = oracle::normal_matrix(5, 5, rng);
    const double l = lipschitz_constant(make(g));
    CHECK(std::abs(l - lipschitz_constant(make(g.transpose()))) <= 1e-8 * l);
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd v = oracle::normal_vector(5, rng);
      const double rayleigh = (g * v).squaredNorm() / v.squaredNorm();
      CHECK(l >= 2.0 * rayleigh * rayleigh * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("Lipschitz constant rejects a zero lead field and reports non-convergence") {
  CHECK_THROWS_AS(lipschitz_constant(make(Eigen::MatrixXd::Zero(3, 3))), InputError);

  // Two nearly equal top eigenvalues make power iteration crawl.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
  g(0, 0) = 1.0;
  g(1, 1) = 1.0 - 1e-9;
  Eigen::MatrixXd rot(2, 2);
  rot << std::cos(0.3), -std::sin(0.3), std::sin(0.3), std::cos(0.3);
  try {
    max_gram_eigenvalue(make(rot * g), {1e-16, 3});
    FAIL("expected EstimationError");
  } catch (const EstimationError& e) {
    CHECK(e.last_estimate() > 0.0);
  }
}

TEST_CASE("power iteration survives a start vector in the null space") {
  // G^T G annihilates the all-ones start vector.
  Eigen::MatrixXd g(1, 2);
  g << 1.0, -1.0;
  CHECK(lipschitz_constant(make(g)) == doctest::Approx(2.0 * 4.0).epsilon(1e-9));
}
