#include "sparsecps/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sparsecps/errors.hpp"

namespace sparsecps {
namespace {

constexpr double kGolden = 2.399963229728653;  // pi (3 - sqrt 5)

Eigen::Vector3d on_sphere(double z, double phi, double radius) {
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  return radius * Eigen::Vector3d(rho * std::cos(phi), rho * std::sin(phi), z);
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<double> filter_forward(const Eigen::VectorXd& h, const std::vector<double>& x) {
  const Index taps = h.size();
  const Index len = static_cast<Index>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (Index t = 0; t < len; ++t) {
    double acc = 0.0;
    const Index kmax = std::min(taps - 1, t);
    for (Index k = 0; k <= kmax; ++k) acc += h[k] * x[t - k];
    y[t] = acc;
  }
  return y;
}

}  // namespace

bool coupling_allows(Coupling c, int row, int col) {
  if (row == col) return true;
  if (row == 1 && col == 0) return true;
  return c == Coupling::config2 && row == 2 && col == 0;
}

MvarModel draw_mvar(Coupling config, Rng& rng, const MvarDrawOptions& opts) {
  if (opts.order < 1) throw ConfigError("MVAR order must be positive");
  std::normal_distribution<double> normal(0.0, opts.coefficient_std);
  MvarModel model;
  model.order = opts.order;
  model.mask = config;
  model.innovation_std = 1.0;
  model.coefficients.assign(static_cast<std::size_t>(opts.order), Eigen::Matrix3d::Zero());
  // Both masks are lower triangular, so the companion spectrum is the union of
  // the three scalar AR spectra on the diagonal. Rejecting each diagonal
  // separately samples the same conditional law as rejecting whole models.
  for (int c = 0; c < 3; ++c) {
    MvarModel scalar;
    scalar.order = opts.order;
    bool stable = false;
    for (int draw = 0; draw < opts.max_draws && !stable; ++draw) {
      scalar.coefficients.assign(static_cast<std::size_t>(opts.order), Eigen::Matrix3d::Zero());
      for (auto& a : scalar.coefficients) a(0, 0) = normal(rng);
      stable = check_stability(scalar);
    }
    if (!stable)
      throw SamplingError("draw_mvar: no stable AR polynomial for channel " +
                          std::to_string(c + 1) + " in " + std::to_string(opts.max_draws) +
                          " draws");
    for (int k = 0; k < opts.order; ++k) model.coefficients[k](c, c) = scalar.coefficients[k](0, 0);
  }
  for (auto& a : model.coefficients)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < r; ++c)
        if (coupling_allows(config, r, c)) a(r, c) = normal(rng);
  if (!check_stability(model)) throw SamplingError("draw_mvar: assembled model is not stable");
  return model;
}

double companion_spectral_radius(const MvarModel& model) {
  const int p = model.order;
  if (p == 0) return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(3 * p, 3 * p);
  for (int k = 0; k < p; ++k) companion.block(0, 3 * k, 3, 3) = model.coefficients[k];
  if (p > 1) companion.block(3, 0, 3 * (p - 1), 3 * (p - 1)).setIdentity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool check_stability(const MvarModel& model) {
  return companion_spectral_radius(model) < 1.0 - 1e-10;
}

TimeSeriesSet simulate_mvar(const MvarModel& model, Index samples, Index burn_in, Rng& rng,
                            double sampling_rate) {
  std::normal_distribution<double> normal(0.0, model.innovation_std);
  Eigen::MatrixXd innovations(samples + burn_in, 3);
  for (Index t = 0; t < innovations.rows(); ++t)
    for (int c = 0; c < 3; ++c) innovations(t, c) = normal(rng);
  return simulate_mvar(model, innovations, burn_in, sampling_rate);
}

TimeSeriesSet simulate_mvar(const MvarModel& model, const Eigen::MatrixXd& innovations,
                            Index burn_in, double sampling_rate) {
  if (!check_stability(model)) throw InputError("simulate_mvar: model is not stable");
  if (innovations.cols() != 3) throw ShapeError("simulate_mvar: innovations must have 3 columns");
  if (burn_in < 0 || innovations.rows() - burn_in < 2)
    throw ConfigError("simulate_mvar: need at least 2 samples after burn-in");
  const Index total = innovations.rows();
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(total, 3);
  for (Index t = 0; t < total; ++t) {
    Eigen::Vector3d acc = innovations.row(t).transpose();
    for (int k = 1; k <= model.order && k <= t; ++k)
      acc += model.coefficients[k - 1] * z.row(t - k).transpose();
    z.row(t) = acc.transpose();
  }
  TimeSeriesSet out;
  out.sampling_rate = sampling_rate;
  out.samples = z.bottomRows(total - burn_in);
  return out;
}

Eigen::VectorXd design_bandpass(double f_lo, double f_hi, double sampling_rate,
                                FirOptions opts) {
  if (!(f_lo > 0.0 && f_lo < f_hi && f_hi < sampling_rate / 2.0))
    throw ConfigError("band-pass edges must satisfy 0 < f_lo < f_hi < fs/2");
  if (opts.taps < 2) throw ConfigError("band-pass filter needs at least 2 taps");
  const Index taps = opts.taps;
  const Eigen::VectorXd window = hamming_window(taps);
  const double centre = 0.5 * static_cast<double>(taps - 1);
  const double lo = f_lo / sampling_rate;
  const double hi = f_hi / sampling_rate;
  auto lowpass = [](double cutoff, double t) {
    if (t == 0.0) return 2.0 * cutoff;
    return std::sin(2.0 * std::numbers::pi * cutoff * t) / (std::numbers::pi * t);
  };
  Eigen::VectorXd h(taps);
  for (Index k = 0; k < taps; ++k) {
    const double t = static_cast<double>(k) - centre;
    h[k] = window[k] * (lowpass(hi, t) - lowpass(lo, t));
  }
  h /= fir_gain(h, 0.5 * (f_lo + f_hi), sampling_rate);
  return h;
}

double fir_gain(const Eigen::VectorXd& taps, double f, double sampling_rate) {
  std::complex<double> acc(0.0, 0.0);
  for (Index k = 0; k < taps.size(); ++k) {
    const double angle = -2.0 * std::numbers::pi * f * static_cast<double>(k) / sampling_rate;
    acc += taps[k] * std::complex<double>(std::cos(angle), std::sin(angle));
  }
  return std::abs(acc);
}

TimeSeriesSet bandpass(const TimeSeriesSet& series, double f_lo, double f_hi, FirOptions opts) {
  series.validate();
  const Eigen::VectorXd h = design_bandpass(f_lo, f_hi, series.sampling_rate, opts);
  TimeSeriesSet out = series;
  const Index len = series.length();
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < series.channels(); ++c) {
    std::vector<double> x(static_cast<std::size_t>(len));
    for (Index t = 0; t < len; ++t) x[t] = series.samples(t, c);
    std::vector<double> y = filter_forward(h, x);
    std::reverse(y.begin(), y.end());
    y = filter_forward(h, y);
    std::reverse(y.begin(), y.end());
    for (Index t = 0; t < len; ++t) out.samples(t, c) = y[t];
  }
  return out;
}

bool accept_signals(const TimeSeriesSet& series, std::pair<double, double> band,
                    const WelchConfig& welch_cfg, const SignalCriteria& criteria) {
  const Eigen::RowVectorXd norms = series.samples.colwise().norm();
  const double strongest = norms.maxCoeff();
  const double weakest = norms.minCoeff();
  if (!(strongest < criteria.max_norm_ratio * weakest)) return false;

  const std::vector<CrossSpectrum> spectra = welch_full_spectrum(series, welch_cfg);
  double band_sum = 0.0;
  double all_sum = 0.0;
  Index band_bins = 0;
  for (const CrossSpectrum& s : spectra) {
    const double power = s.matrix.diagonal().real().sum();
    all_sum += power;
    if (s.frequency_hz >= band.first && s.frequency_hz <= band.second) {
      band_sum += power;
      ++band_bins;
    }
  }
  if (band_bins == 0) throw ConfigError("accept_signals: band contains no frequency bins");
  const double band_mean = band_sum / static_cast<double>(band_bins);
  const double all_mean = all_sum / static_cast<double>(spectra.size());
  return band_mean >= criteria.min_band_power_ratio * all_mean;
}

std::array<Index, 3> select_sources(const std::vector<Eigen::Vector3d>& positions,
                                    const Eigen::VectorXd& column_norms, Rng& rng,
                                    const SourceConstraints& constraints) {
  const Index n = static_cast<Index>(positions.size());
  if (n < 3) throw ConfigError("select_sources: need at least 3 candidate sources");
  if (column_norms.size() != n) throw ShapeError("select_sources: one norm per position needed");
  std::uniform_int_distribution<Index> pick(0, n - 1);
  Index distance_failures = 0;
  Index norm_failures = 0;
  double closest_seen = std::numeric_limits<double>::infinity();
  for (int draw = 0; draw < constraints.max_draws; ++draw) {
    const std::array<Index, 3> idx{pick(rng), pick(rng), pick(rng)};
    if (idx[0] == idx[1] || idx[0] == idx[2] || idx[1] == idx[2]) continue;
    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a) {
      for (int b = a + 1; b < 3 && ok; ++b) {
        const double dist = (positions[idx[a]] - positions[idx[b]]).norm();
        closest_seen = std::min(closest_seen, dist);
        if (!(dist > constraints.min_distance)) {
          ++distance_failures;
          ok = false;
          break;
        }
        const double ratio = column_norms[idx[a]] / column_norms[idx[b]];
        if (ratio < constraints.min_norm_ratio || ratio > constraints.max_norm_ratio) {
          ++norm_failures;
          ok = false;
        }
      }
    }
    if (ok) return idx;
  }
  std::ostringstream msg;
  msg << "select_sources: no valid triplet in " << constraints.max_draws << " draws ("
      << distance_failures << " failed the " << constraints.min_distance
      << " m distance constraint, " << norm_failures << " failed the norm ratio range ["
      << constraints.min_norm_ratio << ", " << constraints.max_norm_ratio
      << "]; closest pair seen " << closest_seen << " m)";
  throw SamplingError(msg.str());
}

std::vector<std::pair<Index, Index>> true_pairs_for(Coupling config,
                                                    const std::array<Index, 3>& indices) {
  std::vector<std::pair<Index, Index>> pairs{{indices[0], indices[1]}};
  if (config == Coupling::config2) pairs.emplace_back(indices[0], indices[2]);
  return pairs;
}

std::pair<MvarModel, TimeSeriesSet> draw_source_time_courses(Coupling config, Rng& rng,
                                                             const TimeCourseOptions& opts) {
  for (int attempt = 0; attempt < opts.max_signal_draws; ++attempt) {
    MvarModel model = draw_mvar(config, rng, opts.mvar);
    TimeSeriesSet z = simulate_mvar(model, opts.samples, opts.burn_in, rng, opts.sampling_rate);
    if (!accept_signals(z, opts.band, opts.welch)) continue;
    return {std::move(model), bandpass(z, opts.band.first, opts.band.second)};
  }
  throw SamplingError("no MVAR triplet passed the signal criteria in " +
                      std::to_string(opts.max_signal_draws) + " attempts");
}

GroundTruth draw_ground_truth(Coupling config, const LeadField& fine, Rng& rng,
                              const TimeCourseOptions& opts,
                              const SourceConstraints& constraints) {
  fine.validate();
  if (!fine.source_positions) throw InputError("fine lead field needs source positions");
  GroundTruth truth;
  truth.configuration = config;
  auto [model, series] = draw_source_time_courses(config, rng, opts);
  truth.model = std::move(model);
  truth.source_series = std::move(series);
  const Eigen::VectorXd norms = fine.entries.colwise().norm().transpose();
  truth.source_indices = select_sources(*fine.source_positions, norms, rng, constraints);
  truth.true_pairs = true_pairs_for(config, truth.source_indices);
  return truth;
}

TimeSeriesSet generate_observations(const LeadField& fine, const GroundTruth& truth,
                                    double snr_db, Rng& rng) {
  fine.validate();
  const Index m = fine.sensors();
  for (Index idx : truth.source_indices)
    if (idx < 0 || idx >= fine.sources())
      throw ShapeError("ground-truth source index outside the lead field");
  if (truth.source_series.channels() != 3)
    throw ShapeError("ground truth must carry three source time courses");

  Eigen::MatrixXd columns(m, 3);
  for (int k = 0; k < 3; ++k) columns.col(k) = fine.entries.col(truth.source_indices[k]);
  TimeSeriesSet out;
  out.sampling_rate = truth.source_series.sampling_rate;
  out.samples = truth.source_series.samples * columns.transpose();

  const Index total = out.samples.rows();
  if (std::isinf(snr_db) && snr_db > 0) return out;
  const double signal_energy = out.samples.squaredNorm();
  const double variance = signal_energy / (static_cast<double>(total * m) *
                                           std::pow(10.0, snr_db / 10.0));
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  for (Index t = 0; t < total; ++t)
    for (Index c = 0; c < m; ++c) out.samples(t, c) += normal(rng);
  return out;
}

double dipole_field(const Eigen::Vector3d& sensor, const Eigen::Vector3d& normal,
                    const Eigen::Vector3d& source, const Eigen::Vector3d& orientation) {
  const Eigen::Vector3d d = sensor - source;
  const double r = d.norm();
  return orientation.cross(d).dot(normal) / (r * r * r);
}

LeadField leadfield_from_geometry(const std::vector<Eigen::Vector3d>& sensors,
                                  const std::vector<Eigen::Vector3d>& normals,
                                  const std::vector<Eigen::Vector3d>& sources,
                                  const std::vector<Eigen::Vector3d>& orientations) {
  if (sensors.size() != normals.size() || sources.size() != orientations.size())
    throw ShapeError("leadfield_from_geometry: mismatched geometry arrays");
  const Index m = static_cast<Index>(sensors.size());
  const Index n = static_cast<Index>(sources.size());
  LeadField lf;
  lf.entries.resize(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i)
      lf.entries(i, j) = dipole_field(sensors[i], normals[i], sources[j], orientations[j]);
  lf.source_positions = sources;
  return lf;
}

LeadField synthetic_leadfield(Index m, Index n, std::uint64_t seed, HeadGeometry geo) {
  if (m < 1 || n < 1) throw ConfigError("synthetic_leadfield: m and n must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double twist = 2.0 * std::numbers::pi * unit(rng);
  const double base_angle = 2.0 * std::numbers::pi * unit(rng);

  // Sources cover the cap z >= -0.5 of the inner shell.
  std::vector<Eigen::Vector3d> sources(static_cast<std::size_t>(n));
  std::vector<Eigen::Vector3d> orientations(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    const double z = 1.0 - 1.5 * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    const double phi = twist + kGolden * static_cast<double>(j);
    const double radius = geo.source_radius * (1.0 + 0.05 * (unit(rng) - 0.5));
    sources[j] = on_sphere(z, phi, radius);
    const Eigen::Vector3d radial = sources[j].normalized();
    Eigen::Vector3d e_phi(-std::sin(phi), std::cos(phi), 0.0);
    const Eigen::Vector3d e_theta = e_phi.cross(radial).normalized();
    const double psi = base_angle + 0.3 * (unit(rng) - 0.5);
    orientations[j] = std::cos(psi) * e_phi + std::sin(psi) * e_theta;
  }

  // Sensors cover the upper hemisphere of the outer shell, radial normals.
  std::vector<Eigen::Vector3d> sensors(static_cast<std::size_t>(m));
  std::vector<Eigen::Vector3d> normals(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const double z = 1.0 - (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    sensors[i] = on_sphere(z, kGolden * static_cast<double>(i), geo.sensor_radius);
    normals[i] = sensors[i].normalized();
  }

  LeadField lf = leadfield_from_geometry(sensors, normals, sources, orientations);
  std::vector<double> norms(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) norms[j] = lf.entries.col(j).norm();
  const double scale = median(norms);
  if (scale > 0.0) lf.entries /= scale;
  return lf;
}

CoarseLeadField coarsen_leadfield(const LeadField& fine, Index factor) {
  fine.validate();
  if (factor < 1) throw ConfigError("coarsen_leadfield: factor must be at least 1");
  const Index n = fine.sources();
  CoarseLeadField out;
  for (Index j = 0; j < n; j += factor) out.kept.push_back(j);
  const Index kept = static_cast<Index>(out.kept.size());
  out.lead_field.entries.resize(fine.sensors(), kept);
  for (Index k = 0; k < kept; ++k) out.lead_field.entries.col(k) = fine.entries.col(out.kept[k]);

  out.fine_to_coarse.resize(static_cast<std::size_t>(n));
  if (fine.source_positions) {
    std::vector<Eigen::Vector3d> coarse_pos;
    coarse_pos.reserve(static_cast<std::size_t>(kept));
    for (Index j : out.kept) coarse_pos.push_back((*fine.source_positions)[j]);
    for (Index j = 0; j < n; ++j) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index k = 0; k < kept; ++k) {
        const double d = ((*fine.source_positions)[j] - coarse_pos[k]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      out.fine_to_coarse[j] = best;
    }
    out.lead_field.source_positions = std::move(coarse_pos);
  } else {
    // Without geometry, fall back to index proximity.
    for (Index j = 0; j < n; ++j)
      out.fine_to_coarse[j] = std::min((j + factor / 2) / factor, kept - 1);
  }
  return out;
}

Rng substream(std::uint64_t root_seed, const std::string& label, std::uint64_t index) {
  std::vector<std::uint32_t> material{static_cast<std::uint32_t>(root_seed),
                                      static_cast<std::uint32_t>(root_seed >> 32),
                                      static_cast<std::uint32_t>(index),
                                      static_cast<std::uint32_t>(index >> 32)};
  for (char ch : label) material.push_back(static_cast<unsigned char>(ch));
  std::seed_seq seq(material.begin(), material.end());
  return Rng(seq);
}

}  // namespace sparsecps
