#include <omp.h>

#include <random>
#include <vector>

#include "doctest.h"
#include "oracles/dense.hpp"
#include "sparsecps/kernels.hpp"

using namespace sparsecps::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("block products match Eigen for every tile remainder") {
  std::mt19937_64 rng(11);
  for (std::ptrdiff_t rows : {1, 3, 7})
    for (std::ptrdiff_t cols : {1, 2, 5})
      for (std::ptrdiff_t blocks : {1, 2, 3, 4, 5, 9}) {
        const auto a = random_values(rows * cols, rng);
        const auto in = random_values(cols * blocks, rng);
        std::vector<double> out(rows * blocks, -1.0);
        multiply_blocks_serial({a.data(), rows, cols}, in, out, blocks);
        const Eigen::Map<const Eigen::MatrixXd> am(a.data(), rows, cols);
        const Eigen::Map<const Eigen::MatrixXd> xm(in.data(), cols, blocks);
        const Eigen::MatrixXd want = am * xm;
        const Eigen::Map<const Eigen::VectorXd> got(out.data(), rows * blocks);
        CHECK(oracle::max_rel_diff(got, oracle::vec(want)) < 1e-14);
      }
}

TEST_CASE("parallel block products are bit-identical to the serial reference") {
  std::mt19937_64 rng(12);
  const std::ptrdiff_t rows = 37, cols = 53, blocks = 101;  // above the parallel cutoff
  const auto a = random_values(rows * cols, rng);
  const auto in = random_values(cols * blocks, rng);
  std::vector<double> serial(rows * blocks), parallel(rows * blocks);
  multiply_blocks_serial({a.data(), rows, cols}, in, serial, blocks);
  for (int threads : {1, 2, 3, 4}) {
    omp_set_num_threads(threads);
    std::fill(parallel.begin(), parallel.end(), 0.0);
    multiply_blocks_parallel({a.data(), rows, cols}, in, parallel, blocks);
    CHECK(serial == parallel);
  }
}

TEST_CASE("gather reads through the index") {
  const std::vector<double> in{10, 20, 30, 40};
  const std::vector<std::ptrdiff_t> index{3, 0, 2, 1};
  std::vector<double> out(4);
  gather(in, index, out);
  CHECK(out == std::vector<double>{40, 10, 30, 20});
}
