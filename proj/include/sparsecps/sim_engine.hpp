#pragma once

// Synthetic ground truth and sensor data: three MVAR-coupled sources on a
// synthetic spherical head model, band-limited to the alpha band, projected
// through a fine lead field and corrupted by white Gaussian noise.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sparsecps/kron_ops.hpp"
#include "sparsecps/spectral.hpp"

namespace sparsecps {

using Rng = std::mt19937_64;

// Config1: 1 -> 2 coupling, source 3 independent.
// Config2: 1 -> 2 and 1 -> 3.
enum class Coupling { config1 = 1, config2 = 2 };

// Whether coefficient (row, col), 0-based, may be nonzero.
bool coupling_allows(Coupling c, int row, int col);

struct MvarModel {
  int order = 0;
  std::vector<Eigen::Matrix3d> coefficients;  // A(1) .. A(P)
  Coupling mask = Coupling::config1;
  double innovation_std = 1.0;
};

struct MvarDrawOptions {
  int order = 5;
  double coefficient_std = 0.9;
  int max_draws = 10000;
};

MvarModel draw_mvar(Coupling config, Rng& rng, const MvarDrawOptions& opts = {});

// Spectral radius of the 3P x 3P companion matrix.
double companion_spectral_radius(const MvarModel& model);
bool check_stability(const MvarModel& model);

// z(t) = sum_k A(k) z(t-k) + eps(t) from zero initial conditions; the first
// `burn_in` samples are discarded.
TimeSeriesSet simulate_mvar(const MvarModel& model, Index samples, Index burn_in, Rng& rng,
                            double sampling_rate = 256.0);
// Same recursion driven by explicit innovations, (samples + burn_in) x 3.
TimeSeriesSet simulate_mvar(const MvarModel& model, const Eigen::MatrixXd& innovations,
                            Index burn_in, double sampling_rate = 256.0);

struct FirOptions {
  Index taps = 64;
};

// Hamming-windowed linear-phase band-pass, scaled to unit gain at the band
// centre.
Eigen::VectorXd design_bandpass(double f_lo, double f_hi, double sampling_rate,
                                FirOptions opts = {});
// |H(f)| of an FIR at frequency f.
double fir_gain(const Eigen::VectorXd& taps, double f, double sampling_rate);

// Zero-phase forward-backward FIR filtering; output keeps length T.
TimeSeriesSet bandpass(const TimeSeriesSet& series, double f_lo, double f_hi,
                       FirOptions opts = {});

struct SignalCriteria {
  double max_norm_ratio = 3.0;
  double min_band_power_ratio = 1.2;
};

bool accept_signals(const TimeSeriesSet& series, std::pair<double, double> band,
                    const WelchConfig& welch_cfg, const SignalCriteria& criteria = {});

struct SourceConstraints {
  double min_distance = 0.04;  // meters
  double min_norm_ratio = 0.8;
  double max_norm_ratio = 1.25;
  int max_draws = 100000;
};

std::array<Index, 3> select_sources(const std::vector<Eigen::Vector3d>& positions,
                                    const Eigen::VectorXd& column_norms, Rng& rng,
                                    const SourceConstraints& constraints = {});

struct GroundTruth {
  Coupling configuration = Coupling::config1;
  std::array<Index, 3> source_indices{};        // into the fine source space
  std::vector<std::pair<Index, Index>> true_pairs;  // fine indices
  TimeSeriesSet source_series;                  // T x 3
  MvarModel model;
};

// True pairs for a configuration, expressed through `indices`.
std::vector<std::pair<Index, Index>> true_pairs_for(Coupling config,
                                                    const std::array<Index, 3>& indices);

struct TimeCourseOptions {
  Index samples = 10000;
  Index burn_in = 1000;
  double sampling_rate = 256.0;
  std::pair<double, double> band{8.0, 12.0};
  WelchConfig welch{};
  MvarDrawOptions mvar{};
  int max_signal_draws = 10000;
};

// Draw models and simulate until the triplet passes accept_signals (checked
// on the unfiltered MVAR output), then band-pass filter.
std::pair<MvarModel, TimeSeriesSet> draw_source_time_courses(Coupling config, Rng& rng,
                                                             const TimeCourseOptions& opts);

GroundTruth draw_ground_truth(Coupling config, const LeadField& fine, Rng& rng,
                              const TimeCourseOptions& opts = {},
                              const SourceConstraints& constraints = {});

// y = G x + e with x nonzero on the three true sources and
// e ~ N(0, sigma^2 I), sigma^2 = ||G x||_F^2 / (T m 10^(snr/10)).
TimeSeriesSet generate_observations(const LeadField& fine, const GroundTruth& truth,
                                    double snr_db, Rng& rng);

struct HeadGeometry {
  double source_radius = 0.07;
  double sensor_radius = 0.11;
};

// Magnetic field component along `normal` at `sensor` from a current dipole
// `orientation` at `source`: ((q x d) . n) / |d|^3 with d = sensor - source.
double dipole_field(const Eigen::Vector3d& sensor, const Eigen::Vector3d& normal,
                    const Eigen::Vector3d& source, const Eigen::Vector3d& orientation);

LeadField leadfield_from_geometry(const std::vector<Eigen::Vector3d>& sensors,
                                  const std::vector<Eigen::Vector3d>& normals,
                                  const std::vector<Eigen::Vector3d>& sources,
                                  const std::vector<Eigen::Vector3d>& orientations);

// Sources on a cortical shell, sensors on an outer helmet, tangential
// dipoles; scaled so the median column norm is one. Deterministic in seed.
LeadField synthetic_leadfield(Index m, Index n, std::uint64_t seed, HeadGeometry geo = {});

struct CoarseLeadField {
  LeadField lead_field;
  std::vector<Index> kept;          // fine index of every coarse column
  std::vector<Index> fine_to_coarse;  // nearest coarse source per fine source
};

CoarseLeadField coarsen_leadfield(const LeadField& fine, Index factor);

// Independent, reproducible substream for (root seed, stream label, index).
Rng substream(std::uint64_t root_seed, const std::string& label, std::uint64_t index = 0);

}  // namespace sparsecps
