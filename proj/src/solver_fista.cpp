#include "sparsecps/solver_fista.hpp"

#include <cassert>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>

#include "sparsecps/errors.hpp"

namespace sparsecps {
namespace {

std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> view(Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

struct ObservedData {
  Eigen::VectorXd re;
  Eigen::VectorXd im;
};

ObservedData split_observed(const KronOperator& op, const CrossSpectrum& observed) {
  const Index m = op.sensors();
  if (observed.matrix.rows() != m || observed.matrix.cols() != m)
    throw ShapeError("observed spectrum must be " + std::to_string(m) + " x " +
                     std::to_string(m));
  if (!observed.is_hermitian(1e-10)) throw InputError("observed spectrum is not Hermitian");
  const SplitSpectrum s = SplitSpectrum::from(observed);
  return {s.real_part, s.imag_part};
}

// Averages v with its transpose (sign +1) or negated transpose (sign -1).
// A no-op in exact arithmetic; in floating point it stops rounding error from
// accumulating in the operator's null space, where nothing else damps it.
// The results are bitwise (anti)symmetric, and the antisymmetric diagonal is
// exactly zero.
void project_symmetry(Eigen::VectorXd& v, Index n, double sign) {
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i <= j; ++i) {
      const double a = v[j * n + i], b = v[i * n + j];
      v[j * n + i] = 0.5 * (a + sign * b);
      v[i * n + j] = 0.5 * (b + sign * a);
    }
  }
}

// Per-solve scratch so the hot loop never allocates.
struct GradientStep {
  const KronOperator& op;
  KronWorkspace ws;
  Eigen::VectorXd residual;
  Eigen::VectorXd back;

  explicit GradientStep(const KronOperator& o)
      : op(o), residual(o.sensors() * o.sensors()), back(o.sources() * o.sources()) {}

  // out = shrink(P(w - (2/L) G^T (G w - d)), lambda / L), P the symmetry projection
  void prox(const Eigen::VectorXd& w, const Eigen::VectorXd& d, double lipschitz,
            double threshold, double sign, Eigen::VectorXd& out) {
    op.apply(view(w), view(residual), ws);
    residual -= d;
    op.apply_transpose(view(residual), view(back), ws);
    out = w - (2.0 / lipschitz) * back;
    project_symmetry(out, op.sources(), sign);
    for (Index i = 0; i < out.size(); ++i) {
      const double x = out[i];
      const double mag = std::abs(x) - threshold;
      out[i] = mag > 0.0 ? std::copysign(mag, x) : 0.0;
    }
  }
};

double relative_change(const SplitSpectrum& s, const SplitSpectrum& prev) {
  const double num = (s.real_part - prev.real_part).lpNorm<1>() +
                     (s.imag_part - prev.imag_part).lpNorm<1>();
  const double den = s.real_part.lpNorm<1>() + s.imag_part.lpNorm<1>();
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

double max_abs_entry(const SplitSpectrum& s) {
  return std::max(s.real_part.size() ? s.real_part.cwiseAbs().maxCoeff() : 0.0,
                  s.imag_part.size() ? s.imag_part.cwiseAbs().maxCoeff() : 0.0);
}

}  // namespace

SplitSpectrum SplitSpectrum::zeros(Index n) {
  return {Eigen::VectorXd::Zero(n * n), Eigen::VectorXd::Zero(n * n), n};
}

SplitSpectrum SplitSpectrum::from(const CrossSpectrum& s) {
  const Index n = s.channels();
  SplitSpectrum out;
  out.n = n;
  out.real_part = Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(s.matrix.real()).data(), n * n);
  out.imag_part = Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(s.matrix.imag()).data(), n * n);
  return out;
}

CrossSpectrum SplitSpectrum::assemble(double frequency_hz) const {
  CrossSpectrum out;
  out.frequency_hz = frequency_hz;
  out.matrix.resize(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      out.matrix(i, j) = {real_part[j * n + i], imag_part[j * n + i]};
  return out;
}

double SplitSpectrum::symmetry_defect() const {
  double defect = 0.0;
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i <= j; ++i) {
      defect = std::max(defect, std::abs(real_part[j * n + i] - real_part[i * n + j]));
      defect = std::max(defect, std::abs(imag_part[j * n + i] + imag_part[i * n + j]));
    }
  }
  return defect;
}

Index SplitSpectrum::nonzeros() const {
  return (real_part.array() != 0.0).count() + (imag_part.array() != 0.0).count();
}

void FistaConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("FISTA lambda must be positive");
  if (!(lipschitz > 0.0)) throw ConfigError("FISTA Lipschitz constant must be positive");
  if (max_iterations < 1) throw ConfigError("FISTA max_iterations must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("FISTA tolerance must be positive");
  if (trace_interval < 0) throw ConfigError("FISTA trace_interval must be nonnegative");
}

Eigen::VectorXd shrink(const Eigen::VectorXd& x, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("shrink: threshold must be positive");
  Eigen::VectorXd out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double mag = std::abs(x[i]) - alpha;
    out[i] = mag > 0.0 ? std::copysign(mag, x[i]) : 0.0;
  }
  return out;
}

double objective(const KronOperator& op, const SplitSpectrum& s, const Eigen::VectorXd& data_re,
                 const Eigen::VectorXd& data_im, double lambda) {
  const Index m2 = op.sensors() * op.sensors();
  if (data_re.size() != m2 || data_im.size() != m2)
    throw ShapeError("objective: data must have length m^2");
  const auto [y1, y2] = op.apply_block(s.real_part, s.imag_part);
  return (y1 - data_re).squaredNorm() + (y2 - data_im).squaredNorm() +
         lambda * (s.real_part.lpNorm<1>() + s.imag_part.lpNorm<1>());
}

SplitSpectrum smooth_gradient(const KronOperator& op, const SplitSpectrum& w,
                              const Eigen::VectorXd& data_re, const Eigen::VectorXd& data_im) {
  const auto [y1, y2] = op.apply_block(w.real_part, w.imag_part);
  auto [g1, g2] = op.apply_block_transpose(y1 - data_re, y2 - data_im);
  return {2.0 * g1, 2.0 * g2, w.n};
}

SplitSpectrum random_hermitian_init(Index n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("random_hermitian_init: n must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd re(n, n), im(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      re(i, j) = normal(rng);
      im(i, j) = normal(rng);
    }
  }
  const Eigen::MatrixXd sym = 0.5 * (re + re.transpose());
  const Eigen::MatrixXd anti = 0.5 * (im - im.transpose());
  return {Eigen::Map<const Eigen::VectorXd>(sym.data(), n * n),
          Eigen::Map<const Eigen::VectorXd>(anti.data(), n * n), n};
}

FistaResult fista_solve(const KronOperator& op, const CrossSpectrum& observed,
                        const FistaConfig& cfg, const IterationObserver& observer) {
  return fista_solve_from(op, observed, cfg, random_hermitian_init(op.sources(), cfg.seed),
                          observer);
}

FistaResult fista_solve_from(const KronOperator& op, const CrossSpectrum& observed,
                             const FistaConfig& cfg, SplitSpectrum start,
                             const IterationObserver& observer) {
  cfg.validate();
  const ObservedData data = split_observed(op, observed);
  const Index n = op.sources();
  if (start.n != n || start.real_part.size() != n * n || start.imag_part.size() != n * n)
    throw ShapeError("FISTA start point does not match the operator's source count");

  const double threshold = cfg.lambda / cfg.lipschitz;
  FistaResult result;
  result.objective_trace.push_back(objective(op, start, data.re, data.im, cfg.lambda));

  SplitSpectrum prev = start;
  SplitSpectrum s = start;
  SplitSpectrum w = std::move(start);
  GradientStep real_step(op);
  GradientStep imag_step(op);

  // t_0 = 1: the first momentum coefficient is then zero.
  double t = 1.0;
  double change = std::numeric_limits<double>::infinity();
  int k = 0;
  while (k < cfg.max_iterations) {
    ++k;
    std::swap(prev, s);
#pragma omp parallel sections if (n * n > 4096)
    {
#pragma omp section
      real_step.prox(w.real_part, data.re, cfg.lipschitz, threshold, 1.0, s.real_part);
#pragma omp section
      imag_step.prox(w.imag_part, data.im, cfg.lipschitz, threshold, -1.0, s.imag_part);
    }

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    w.real_part = s.real_part + momentum * (s.real_part - prev.real_part);
    w.imag_part = s.imag_part + momentum * (s.imag_part - prev.imag_part);
    t = t_next;

    change = relative_change(s, prev);
    assert(s.symmetry_defect() <= 1e-10 * std::max(1.0, max_abs_entry(s)));
    assert(w.symmetry_defect() <= 1e-10 * std::max(1.0, max_abs_entry(w)));
    if (observer) observer(k, s, w);
    if (cfg.trace_interval > 0 && k % cfg.trace_interval == 0)
      result.objective_trace.push_back(objective(op, s, data.re, data.im, cfg.lambda));
    if (change < cfg.tolerance) break;
  }

  result.iterations_run = k;
  result.final_change = change;
  result.converged = change < cfg.tolerance;
  if (cfg.trace_interval == 0 || k % cfg.trace_interval != 0)
    result.objective_trace.push_back(objective(op, s, data.re, data.im, cfg.lambda));
  const double defect_scale = std::max(1.0, max_abs_entry(s));
  if (s.symmetry_defect() > 1e-10 * defect_scale)
    throw EstimationError("FISTA iterate lost Hermitian symmetry", s.symmetry_defect());
  result.estimate = std::move(s);
  return result;
}

double lambda_star(const KronOperator& op, const CrossSpectrum& observed) {
  const ObservedData data = split_observed(op, observed);
  const auto [g1, g2] = op.apply_block_transpose(data.re, data.im);
  const double top = std::max(g1.size() ? g1.cwiseAbs().maxCoeff() : 0.0,
                              g2.size() ? g2.cwiseAbs().maxCoeff() : 0.0);
  return 2.0 * top;
}

std::vector<double> default_scaling_factors() {
  std::vector<double> out(4);
  for (int i = 0; i < 4; ++i) out[i] = std::pow(10.0, -2.0 + static_cast<double>(i) / 3.0);
  return out;
}

std::vector<LambdaRun> lambda_grid(const KronOperator& op, const CrossSpectrum& observed,
                                   const std::vector<double>& scaling_factors,
                                   const FistaConfig& base) {
  for (double kappa : scaling_factors)
    if (!(kappa > 0.0)) throw ConfigError("lambda_grid: scaling factors must be positive");
  std::vector<LambdaRun> runs;
  if (scaling_factors.empty()) return runs;
  const double top = lambda_star(op, observed);
  runs.reserve(scaling_factors.size());
  for (double kappa : scaling_factors) {
    FistaConfig cfg = base;
    cfg.lambda = kappa * top;
    LambdaRun run;
    run.scale = kappa;
    run.lambda = cfg.lambda;
    if (cfg.lambda > 0.0) {
      run.result = fista_solve(op, observed, cfg);
    } else {
      // Zero data: the minimiser is zero for every lambda.
      run.result.estimate = SplitSpectrum::zeros(op.sources());
      run.result.converged = true;
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace sparsecps
