#pragma once

// Welch cross-power spectra, the Hermitian spectrum type, and the exact
// forward map S_y = G S_x G^T + S_e.

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

#include "sparsecps/kron_ops.hpp"

namespace sparsecps {

struct CrossSpectrum {
  double frequency_hz = 0.0;
  Eigen::MatrixXcd matrix;

  Index channels() const { return matrix.rows(); }

  // Hermitian with real, nonnegative diagonal, to `rel_tol` times the
  // largest entry magnitude.
  bool satisfies_invariants(double rel_tol = 1e-10) const;
  bool is_hermitian(double rel_tol = 1e-10) const;
};

// Samples are stored T x d (one column per channel).
struct TimeSeriesSet {
  Eigen::MatrixXd samples;
  double sampling_rate = 256.0;

  Index length() const { return samples.rows(); }
  Index channels() const { return samples.cols(); }
  void validate() const;
};

struct WelchConfig {
  Index segment_length = 256;
  double overlap_fraction = 0.5;

  Index hop() const;
  // Number of full segments that fit in `total` samples; the tail that would
  // overrun the series end is dropped.
  Index segment_count(Index total) const;
  void validate(Index total) const;
};

// w(t) = 0.54 - 0.46 cos(2 pi t / (len - 1)); [1.0] for len == 1.
Eigen::VectorXd hamming_window(Index length);

// S(f) = L / (P W) * sum_p xhat_p(f) xhat_p(f)^H with
// xhat_p(f) = (1/L) sum_t x_p(t) w(t) exp(-2 pi i t f / L), W = (1/L) sum w^2.
CrossSpectrum welch_cross_spectrum(const TimeSeriesSet& series, const WelchConfig& cfg,
                                   Index frequency_bin);

// Every bin 0..L-1, bin b at b * fs / L Hz.
std::vector<CrossSpectrum> welch_full_spectrum(const TimeSeriesSet& series,
                                               const WelchConfig& cfg);

CrossSpectrum forward_cross_spectrum(const LeadField& lead_field, const CrossSpectrum& sx,
                                     const CrossSpectrum& se);

// Bin in [f_lo, f_hi] maximising |S_ij|; ties go to the lowest bin.
// Channel indices are 0-based.
Index peak_bin(const std::vector<CrossSpectrum>& spectra, std::pair<Index, Index> channel_pair,
               std::pair<double, double> band);

}  // namespace sparsecps
