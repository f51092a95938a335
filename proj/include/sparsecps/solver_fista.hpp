#pragma once

// One-step estimator: l1-regularised least squares on the split real /
// imaginary vectorised cross-spectrum,
//   min_s ||G(x)G s1 - Re vec S_y||^2 + ||G(x)G s2 - Im vec S_y||^2 + lambda ||s||_1,
// solved with FISTA from a random Hermitian start. Starting Hermitian keeps
// every iterate split as (symmetric, antisymmetric).

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "sparsecps/kron_ops.hpp"
#include "sparsecps/spectral.hpp"

namespace sparsecps {

struct SplitSpectrum {
  Eigen::VectorXd real_part;  // vec(Re S), symmetric
  Eigen::VectorXd imag_part;  // vec(Im S), antisymmetric
  Index n = 0;

  static SplitSpectrum zeros(Index n);
  static SplitSpectrum from(const CrossSpectrum& s);
  CrossSpectrum assemble(double frequency_hz) const;

  // Largest |s1[i,j] - s1[j,i]| and |s2[i,j] + s2[j,i]| over all i, j.
  double symmetry_defect() const;
  bool satisfies_invariants(double abs_tol = 1e-12) const {
    return symmetry_defect() <= abs_tol;
  }
  Index nonzeros() const;
};

struct FistaConfig {
  double lambda = 0.0;
  double lipschitz = 0.0;
  int max_iterations = 5000;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
  // Record the objective every `trace_interval` iterations; 0 records only
  // the start and end values.
  int trace_interval = 0;

  void validate() const;
};

struct FistaResult {
  SplitSpectrum estimate;
  int iterations_run = 0;
  double final_change = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;
};

// Called after every iteration k >= 1 with the current s_k and w_k.
using IterationObserver =
    std::function<void(int iteration, const SplitSpectrum& s, const SplitSpectrum& w)>;

// (|x_i| - alpha)^+ sign(x_i)
Eigen::VectorXd shrink(const Eigen::VectorXd& x, double alpha);

double objective(const KronOperator& op, const SplitSpectrum& s, const Eigen::VectorXd& data_re,
                 const Eigen::VectorXd& data_im, double lambda);

// Gradient 2 G^T (G w - d) of the smooth term, blockwise.
SplitSpectrum smooth_gradient(const KronOperator& op, const SplitSpectrum& w,
                              const Eigen::VectorXd& data_re, const Eigen::VectorXd& data_im);

// (A + A^H)/2 for A with independent standard normal real and imaginary parts.
SplitSpectrum random_hermitian_init(Index n, std::uint64_t seed);

FistaResult fista_solve(const KronOperator& op, const CrossSpectrum& observed,
                        const FistaConfig& cfg, const IterationObserver& observer = {});

// Solve from an explicit start point instead of the seeded random one.
FistaResult fista_solve_from(const KronOperator& op, const CrossSpectrum& observed,
                             const FistaConfig& cfg, SplitSpectrum start,
                             const IterationObserver& observer = {});

// 2 ||G^T d||_inf over both blocks: any lambda at or above this gives the
// all-zero minimiser.
double lambda_star(const KronOperator& op, const CrossSpectrum& observed);

// Four factors evenly spaced in log-space over [1e-2, 1e-1].
std::vector<double> default_scaling_factors();

struct LambdaRun {
  double scale = 0.0;
  double lambda = 0.0;
  FistaResult result;
};

// fista_solve at lambda = kappa * lambda_star for each kappa. `base` supplies
// every solver setting except lambda.
std::vector<LambdaRun> lambda_grid(const KronOperator& op, const CrossSpectrum& observed,
                                   const std::vector<double>& scaling_factors,
                                   const FistaConfig& base);

}  // namespace sparsecps
