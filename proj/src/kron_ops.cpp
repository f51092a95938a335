#include "sparsecps/kron_ops.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sparsecps/errors.hpp"
#include "sparsecps/kernels.hpp"

namespace sparsecps {
namespace {

void require_length(std::size_t got, Index want, const char* what) {
  if (static_cast<Index>(got) != want) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) +
                     ", got " + std::to_string(got));
  }
}

void multiply(Execution exec, kernels::MatrixView a, std::span<const double> in,
              std::span<double> out, Index blocks) {
  if (exec == Execution::parallel)
    kernels::multiply_blocks_parallel(a, in, out, blocks);
  else
    kernels::multiply_blocks_serial(a, in, out, blocks);
}

// The four steps for a rows x cols matrix `a` with its permutations.
void kron_product(const Eigen::MatrixXd& a, const KronPermutations& perm,
                  std::span<const double> x, std::span<double> out, KronWorkspace& ws,
                  Execution exec) {
  const Index rows = a.rows();
  const Index cols = a.cols();
  const std::size_t mid = static_cast<std::size_t>(rows * cols);
  ws.stage.resize(mid);
  ws.gathered.resize(mid);
  ws.product.resize(static_cast<std::size_t>(rows * rows));

  const kernels::MatrixView view{a.data(), rows, cols};
  multiply(exec, view, x, ws.stage, cols);
  kernels::gather(ws.stage, perm.col, ws.gathered);
  multiply(exec, view, ws.gathered, ws.product, rows);
  kernels::gather(ws.product, perm.row, out);
}

}  // namespace

void LeadField::validate() const {
  if (entries.rows() < 1 || entries.cols() < 1)
    throw ShapeError("lead field must have at least one row and one column");
  if (!entries.allFinite()) throw InputError("lead field has non-finite entries");
  if (source_positions && static_cast<Index>(source_positions->size()) != entries.cols()) {
    throw ShapeError("lead field has " + std::to_string(entries.cols()) + " sources but " +
                     std::to_string(source_positions->size()) + " positions");
  }
}

KronPermutations build_permutations(Index m, Index n) {
  if (m < 1 || n < 1) throw ConfigError("build_permutations: m and n must be positive");
  KronPermutations p;
  p.row.resize(static_cast<std::size_t>(m * m));
  p.col.resize(static_cast<std::size_t>(n * m));
  for (Index i = 0; i < m * m; ++i) p.row[i] = (i % m) * m + i / m;
  for (Index j = 0; j < n * m; ++j) p.col[j] = (j % n) * m + j / n;
  return p;
}

KronOperator::KronOperator(LeadField lead_field)
    : lead_field_(std::move(lead_field)),
      transposed_(lead_field_.entries.transpose()),
      m_(lead_field_.entries.rows()),
      n_(lead_field_.entries.cols()) {
  lead_field_.validate();
  forward_perm_ = build_permutations(m_, n_);
  adjoint_perm_ = build_permutations(n_, m_);
}

void KronOperator::apply(std::span<const double> x, std::span<double> out,
                         KronWorkspace& ws, Execution exec) const {
  require_length(x.size(), n_ * n_, "KronOperator::apply input");
  require_length(out.size(), m_ * m_, "KronOperator::apply output");
  kron_product(lead_field_.entries, forward_perm_, x, out, ws, exec);
}

void KronOperator::apply_transpose(std::span<const double> y, std::span<double> out,
                                   KronWorkspace& ws, Execution exec) const {
  require_length(y.size(), m_ * m_, "KronOperator::apply_transpose input");
  require_length(out.size(), n_ * n_, "KronOperator::apply_transpose output");
  kron_product(transposed_, adjoint_perm_, y, out, ws, exec);
}

Eigen::VectorXd KronOperator::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(m_ * m_);
  KronWorkspace ws;
  apply(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
        std::span<double>(out.data(), static_cast<std::size_t>(out.size())), ws);
  return out;
}

Eigen::VectorXd KronOperator::apply_transpose(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(n_ * n_);
  KronWorkspace ws;
  apply_transpose(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                  std::span<double>(out.data(), static_cast<std::size_t>(out.size())), ws);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> KronOperator::apply_block(
    const Eigen::VectorXd& s1, const Eigen::VectorXd& s2) const {
  require_length(static_cast<std::size_t>(s1.size()), n_ * n_, "apply_block real part");
  require_length(static_cast<std::size_t>(s2.size()), n_ * n_, "apply_block imaginary part");
  return {apply(s1), apply(s2)};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> KronOperator::apply_block_transpose(
    const Eigen::VectorXd& d1, const Eigen::VectorXd& d2) const {
  require_length(static_cast<std::size_t>(d1.size()), m_ * m_, "apply_block_transpose real part");
  require_length(static_cast<std::size_t>(d2.size()), m_ * m_,
                 "apply_block_transpose imaginary part");
  return {apply_transpose(d1), apply_transpose(d2)};
}

double max_gram_eigenvalue(const LeadField& lead_field, PowerIterationOptions opts) {
  lead_field.validate();
  const Eigen::MatrixXd& g = lead_field.entries;
  const Index n = g.cols();
  if (g.squaredNorm() == 0.0) throw InputError("max_gram_eigenvalue: G is zero");

  Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
  Eigen::VectorXd w = g.transpose() * (g * v);
  if (w.norm() == 0.0) {
    // Start vector lies in the null space of G; fall back to a fixed pseudo-random one.
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    for (Index i = 0; i < n; ++i) v[i] = normal(rng);
    v.normalize();
    w = g.transpose() * (g * v);
  }
  double estimate = v.dot(w);
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    w = g.transpose() * (g * v);
    const double next = v.dot(w);
    if (std::abs(next - estimate) < opts.tolerance * std::abs(next)) return next;
    estimate = next;
  }
  throw EstimationError("power iteration did not converge in " +
                            std::to_string(opts.max_iterations) + " iterations",
                        estimate);
}

double lipschitz_constant(const LeadField& lead_field, double tol) {
  if (!(tol > 0.0)) throw ConfigError("lipschitz_constant: tolerance must be positive");
  const double top = max_gram_eigenvalue(lead_field, {tol, 10000});
  return 2.0 * top * top;
}

}  // namespace sparsecps
