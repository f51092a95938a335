#pragma once

// Matrix-free Kronecker apply against the assembled m^2 x n^2 operator.

#include <cstdint>
#include <optional>
#include <vector>

#include "sparsecps/kron_ops.hpp"

namespace sparsecps::bench {

struct KronComparison {
  Index m = 0;
  Index n = 0;
  double matrix_free_seconds = 0.0;  // median of the repeats, parallel kernels
  double serial_seconds = 0.0;       // median of the repeats, serial kernels
  double dense_seconds = 0.0;        // assemble G (x) G once and multiply
  double dense_multiply_seconds = 0.0;
  double speedup = 0.0;              // dense_seconds / matrix_free_seconds
  double max_relative_error = 0.0;   // forward and transpose, against the dense product
  std::int64_t dense_bytes = 0;
  // Peak-RSS growth across the matrix-free runs; empty where the platform
  // does not allow resetting the high-water mark.
  std::optional<std::int64_t> matrix_free_peak_growth;
};

// Dense G (x) G, column-major vec convention.
Eigen::MatrixXd assemble_kron(const Eigen::MatrixXd& g);

KronComparison compare_kron(Index m, Index n, std::uint64_t seed, int repeats = 5);

// Linux only: resets VmHWM and returns the current value, in bytes.
std::optional<std::int64_t> reset_peak_rss();
std::optional<std::int64_t> peak_rss();

}  // namespace sparsecps::bench
