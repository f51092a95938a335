#pragma once

// Matrix-free products with G (x) G, its transpose, and the block-diagonal
// operator diag(G (x) G, G (x) G) acting on split real/imaginary spectra.
//
// All vectors use column-major vectorization: vec(X)[j*rows + i] = X(i, j).
// (G (x) G) vec(X) = vec(G X G^T) is evaluated as
//   1. n products G * x_block           (x split into n blocks of length n)
//   2. gather by the column permutation (an m x n -> n x m transpose)
//   3. m products G * y_block
//   4. gather by the row permutation    (an m x m transpose)
// which costs O(max(m, n) m n) and never forms the m^2 x n^2 matrix.

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace sparsecps {

using Index = std::ptrdiff_t;

struct LeadField {
  Eigen::MatrixXd entries;  // m sensors x n sources
  std::optional<std::vector<Eigen::Vector3d>> source_positions;  // meters

  Index sensors() const { return entries.rows(); }
  Index sources() const { return entries.cols(); }

  // Throws ShapeError/InputError when the invariants do not hold.
  void validate() const;
};

// 0-based gather indices. For the product with an m x n matrix:
//   row[i] = (i mod m) * m + floor(i / m),   i < m^2
//   col[j] = (j mod n) * m + floor(j / n),   j < n m
struct KronPermutations {
  std::vector<Index> row;
  std::vector<Index> col;
};

KronPermutations build_permutations(Index m, Index n);

// Scratch storage reused across calls in a hot loop.
struct KronWorkspace {
  std::vector<double> stage;
  std::vector<double> gathered;
  std::vector<double> product;
};

enum class Execution { serial, parallel };

class KronOperator {
 public:
  explicit KronOperator(LeadField lead_field);

  const LeadField& lead_field() const { return lead_field_; }
  Index sensors() const { return m_; }
  Index sources() const { return n_; }

  const KronPermutations& permutations() const { return forward_perm_; }
  const KronPermutations& transpose_permutations() const { return adjoint_perm_; }

  // (G (x) G) x, x of length n^2.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  void apply(std::span<const double> x, std::span<double> out, KronWorkspace& ws,
             Execution exec = Execution::parallel) const;

  // (G^T (x) G^T) y, y of length m^2.
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const;
  void apply_transpose(std::span<const double> y, std::span<double> out,
                       KronWorkspace& ws, Execution exec = Execution::parallel) const;

  // Block-diagonal action on the stacked (real; imaginary) vector.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> apply_block(const Eigen::VectorXd& s1,
                                                          const Eigen::VectorXd& s2) const;
  std::pair<Eigen::VectorXd, Eigen::VectorXd> apply_block_transpose(
      const Eigen::VectorXd& d1, const Eigen::VectorXd& d2) const;

 private:
  LeadField lead_field_;
  Eigen::MatrixXd transposed_;  // G^T, column-major
  Index m_;
  Index n_;
  KronPermutations forward_perm_;
  KronPermutations adjoint_perm_;  // built for the n x m matrix G^T
};

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

// Largest eigenvalue of G^T G by power iteration applied as G^T (G v).
double max_gram_eigenvalue(const LeadField& lead_field, PowerIterationOptions opts = {});

// L = 2 * lambda_max(G^T G)^2, the Lipschitz constant of the gradient of
// ||diag(G(x)G, G(x)G) s - d||^2.
double lipschitz_constant(const LeadField& lead_field, double tol = 1e-10);

}  // namespace sparsecps
