#include "sparsecps/baseline_two_step.hpp"

#include <cmath>
#include <string>

#include "sparsecps/errors.hpp"

namespace sparsecps {

TikhonovSolver::TikhonovSolver(const LeadField& lead_field)
    : m_(lead_field.sensors()), n_(lead_field.sources()) {
  lead_field.validate();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(lead_field.entries,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  u_ = svd.matrixU();
  v_ = svd.matrixV();
  singular_values_ = svd.singularValues();
}

Eigen::MatrixXd TikhonovSolver::inverse_operator(double lambda) const {
  if (!(lambda > 0.0)) throw ConfigError("Tikhonov lambda must be positive");
  Eigen::VectorXd filter(singular_values_.size());
  for (Index i = 0; i < filter.size(); ++i) {
    const double s = singular_values_[i];
    filter[i] = s / (s * s + lambda);
  }
  return v_ * filter.asDiagonal() * u_.transpose();
}

TimeSeriesSet TikhonovSolver::estimate(const TimeSeriesSet& observations, double lambda) const {
  observations.validate();
  if (observations.channels() != m_)
    throw ShapeError("observations have " + std::to_string(observations.channels()) +
                     " channels, lead field has " + std::to_string(m_) + " sensors");
  const Eigen::MatrixXd k = inverse_operator(lambda);
  TimeSeriesSet out;
  out.sampling_rate = observations.sampling_rate;
  out.samples = observations.samples * k.transpose();
  return out;
}

TimeSeriesSet tikhonov_estimate(const LeadField& lead_field, const TimeSeriesSet& observations,
                                double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("Tikhonov lambda must be positive");
  return TikhonovSolver(lead_field).estimate(observations, lambda);
}

CrossSpectrum two_step_cps(const LeadField& lead_field, const TimeSeriesSet& observations,
                           double tikhonov_lambda, const WelchConfig& welch_cfg,
                           Index frequency_bin) {
  const TimeSeriesSet sources = tikhonov_estimate(lead_field, observations, tikhonov_lambda);
  return welch_cross_spectrum(sources, welch_cfg, frequency_bin);
}

std::vector<double> default_lambda_grid(double snr_db) {
  const double base = std::pow(10.0, -snr_db / 10.0);
  return {0.1 * base, 1.0 * base, 10.0 * base, 100.0 * base};
}

TimeSeriesSet normalize_sensor_variance(const TimeSeriesSet& observations) {
  observations.validate();
  const Eigen::MatrixXd& y = observations.samples;
  const Eigen::RowVectorXd mean = y.colwise().mean();
  const double variance =
      (y.rowwise() - mean).squaredNorm() / static_cast<double>(y.rows() * y.cols());
  TimeSeriesSet out = observations;
  if (variance > 0.0) out.samples /= std::sqrt(variance);
  return out;
}

}  // namespace sparsecps
