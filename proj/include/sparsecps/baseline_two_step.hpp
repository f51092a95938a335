#pragma once

// Two-step comparator: Tikhonov source estimates per time point, then the
// Welch cross-spectrum of the estimated sources.

#include <Eigen/Dense>
#include <vector>

#include "sparsecps/kron_ops.hpp"
#include "sparsecps/spectral.hpp"

namespace sparsecps {

// x_lambda(t) = (G^T G + lambda I)^{-1} G^T y(t), through one thin SVD of G
// shared by every time point and every lambda.
class TikhonovSolver {
 public:
  explicit TikhonovSolver(const LeadField& lead_field);

  // n x m matrix V diag(s / (s^2 + lambda)) U^T.
  Eigen::MatrixXd inverse_operator(double lambda) const;
  TimeSeriesSet estimate(const TimeSeriesSet& observations, double lambda) const;

  const Eigen::VectorXd& singular_values() const { return singular_values_; }

 private:
  Index m_;
  Index n_;
  Eigen::MatrixXd u_;
  Eigen::MatrixXd v_;
  Eigen::VectorXd singular_values_;
};

TimeSeriesSet tikhonov_estimate(const LeadField& lead_field, const TimeSeriesSet& observations,
                                double lambda);

CrossSpectrum two_step_cps(const LeadField& lead_field, const TimeSeriesSet& observations,
                           double tikhonov_lambda, const WelchConfig& welch_cfg,
                           Index frequency_bin);

// [0.1, 1, 10, 100] * 10^(-snr_db / 10)
std::vector<double> default_lambda_grid(double snr_db);

// Scales the record so the mean per-sensor variance is one. The Tikhonov
// grid is defined relative to data on this scale.
TimeSeriesSet normalize_sensor_variance(const TimeSeriesSet& observations);

}  // namespace sparsecps
