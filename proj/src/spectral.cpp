#include "sparsecps/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "sparsecps/errors.hpp"

namespace sparsecps {
namespace {

using Complex = std::complex<double>;

double max_abs(const Eigen::MatrixXcd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void hermitize(Eigen::MatrixXcd& s) {
  const Eigen::MatrixXcd h = s.adjoint();
  s = (s + h) * 0.5;
  for (Index i = 0; i < s.rows(); ++i) s(i, i) = Complex(s(i, i).real(), 0.0);
}

double welch_scale(const WelchConfig& cfg, const Eigen::VectorXd& window, Index segments) {
  const double len = static_cast<double>(cfg.segment_length);
  const double power = window.squaredNorm() / len;
  return len / (static_cast<double>(segments) * power);
}

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace

bool CrossSpectrum::is_hermitian(double rel_tol) const {
  if (matrix.rows() != matrix.cols()) return false;
  const double scale = std::max(max_abs(matrix), 1e-300);
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool CrossSpectrum::satisfies_invariants(double rel_tol) const {
  if (!is_hermitian(rel_tol)) return false;
  const double scale = std::max(max_abs(matrix), 1e-300);
  for (Index i = 0; i < matrix.rows(); ++i) {
    if (std::abs(matrix(i, i).imag()) > rel_tol * scale) return false;
    if (matrix(i, i).real() < -rel_tol * scale) return false;
  }
  return true;
}

void TimeSeriesSet::validate() const {
  if (samples.rows() < 2) throw ShapeError("time series needs at least 2 samples");
  if (samples.cols() < 1) throw ShapeError("time series needs at least one channel");
  if (!samples.allFinite()) throw InputError("time series has non-finite samples");
  if (!(sampling_rate > 0.0)) throw ConfigError("sampling rate must be positive");
}

Index WelchConfig::hop() const {
  const auto overlap = static_cast<Index>(std::floor(overlap_fraction * segment_length));
  return segment_length - overlap;
}

Index WelchConfig::segment_count(Index total) const {
  if (total < segment_length) return 0;
  return (total - segment_length) / hop() + 1;
}

void WelchConfig::validate(Index total) const {
  if (segment_length < 1) throw ConfigError("Welch segment length must be positive");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw ConfigError("Welch overlap fraction must lie in [0, 1)");
  if (hop() < 1) throw ConfigError("Welch hop must be at least one sample");
  if (segment_length > total) {
    throw ConfigError("series of length " + std::to_string(total) +
                      " is shorter than one Welch segment (" + std::to_string(segment_length) +
                      ")");
  }
}

Eigen::VectorXd hamming_window(Index length) {
  if (length < 1) throw ConfigError("hamming_window: length must be positive");
  if (length == 1) return Eigen::VectorXd::Ones(1);
  Eigen::VectorXd w(length);
  const double denom = static_cast<double>(length - 1);
  for (Index t = 0; t < length; ++t)
    w[t] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / denom);
  return w;
}

CrossSpectrum welch_cross_spectrum(const TimeSeriesSet& series, const WelchConfig& cfg,
                                   Index frequency_bin) {
  series.validate();
  cfg.validate(series.length());
  const Index len = cfg.segment_length;
  if (frequency_bin < 0 || frequency_bin >= len)
    throw ConfigError("frequency bin " + std::to_string(frequency_bin) + " outside 0.." +
                      std::to_string(len - 1));

  const Eigen::VectorXd window = hamming_window(len);
  const Index segments = cfg.segment_count(series.length());
  const Index d = series.channels();

  // exp(-2 pi i t f / L) depends only on (t f) mod L.
  Eigen::VectorXcd twiddle(len);
  for (Index t = 0; t < len; ++t) {
    const Index phase = (t * frequency_bin) % len;
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(phase) / len;
    twiddle[t] = Complex(std::cos(angle), std::sin(angle)) * window[t] / static_cast<double>(len);
  }

  Eigen::MatrixXcd coeffs(d, segments);
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < d; ++c) {
    for (Index p = 0; p < segments; ++p) {
      const Index start = p * cfg.hop();
      Complex acc(0.0, 0.0);
      for (Index t = 0; t < len; ++t) acc += series.samples(start + t, c) * twiddle[t];
      coeffs(c, p) = acc;
    }
  }

  CrossSpectrum out;
  out.frequency_hz = static_cast<double>(frequency_bin) * series.sampling_rate / len;
  out.matrix = welch_scale(cfg, window, segments) * (coeffs * coeffs.adjoint());
  hermitize(out.matrix);
  return out;
}

std::vector<CrossSpectrum> welch_full_spectrum(const TimeSeriesSet& series,
                                               const WelchConfig& cfg) {
  series.validate();
  cfg.validate(series.length());
  const Index len = cfg.segment_length;
  const Index half = len / 2 + 1;
  const Index segments = cfg.segment_count(series.length());
  const Index d = series.channels();
  const Eigen::VectorXd window = hamming_window(len);

  std::unique_ptr<double, FftwFree> probe_in(fftw_alloc_real(static_cast<size_t>(len)));
  std::unique_ptr<fftw_complex, FftwFree> probe_out(fftw_alloc_complex(static_cast<size_t>(half)));
  std::unique_ptr<fftw_plan_s, PlanDestroy> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(len), probe_in.get(), probe_out.get(),
                                    FFTW_ESTIMATE));
  }

  // coeffs[bin] is d x P.
  std::vector<Eigen::MatrixXcd> coeffs(static_cast<size_t>(half), Eigen::MatrixXcd(d, segments));
  const double inv_len = 1.0 / static_cast<double>(len);

#pragma omp parallel
  {
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(static_cast<size_t>(len)));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(static_cast<size_t>(half)));
#pragma omp for schedule(static)
    for (Index c = 0; c < d; ++c) {
      for (Index p = 0; p < segments; ++p) {
        const Index start = p * cfg.hop();
        for (Index t = 0; t < len; ++t) in.get()[t] = series.samples(start + t, c) * window[t];
        fftw_execute_dft_r2c(plan.get(), in.get(), out.get());
        for (Index k = 0; k < half; ++k)
          coeffs[k](c, p) = Complex(out.get()[k][0], out.get()[k][1]) * inv_len;
      }
    }
  }

  const double scale = welch_scale(cfg, window, segments);
  std::vector<CrossSpectrum> spectra(static_cast<size_t>(len));
#pragma omp parallel for schedule(static)
  for (Index k = 0; k < half; ++k) {
    CrossSpectrum& s = spectra[k];
    s.frequency_hz = static_cast<double>(k) * series.sampling_rate / len;
    s.matrix = scale * (coeffs[k] * coeffs[k].adjoint());
    hermitize(s.matrix);
  }
  // Real input: S(L - k) = conj(S(k)).
  for (Index k = half; k < len; ++k) {
    spectra[k].frequency_hz = static_cast<double>(k) * series.sampling_rate / len;
    spectra[k].matrix = spectra[len - k].matrix.conjugate();
  }
  return spectra;
}

CrossSpectrum forward_cross_spectrum(const LeadField& lead_field, const CrossSpectrum& sx,
                                     const CrossSpectrum& se) {
  lead_field.validate();
  const Index m = lead_field.sensors();
  const Index n = lead_field.sources();
  if (sx.matrix.rows() != n || sx.matrix.cols() != n)
    throw ShapeError("forward_cross_spectrum: source spectrum must be " + std::to_string(n) +
                     " x " + std::to_string(n));
  if (se.matrix.rows() != m || se.matrix.cols() != m)
    throw ShapeError("forward_cross_spectrum: noise spectrum must be " + std::to_string(m) +
                     " x " + std::to_string(m));
  const Eigen::MatrixXcd g = lead_field.entries.cast<Complex>();
  CrossSpectrum out;
  out.frequency_hz = sx.frequency_hz;
  out.matrix = g * sx.matrix * g.transpose() + se.matrix;
  hermitize(out.matrix);
  return out;
}

Index peak_bin(const std::vector<CrossSpectrum>& spectra, std::pair<Index, Index> channel_pair,
               std::pair<double, double> band) {
  const auto [i, j] = channel_pair;
  Index best = -1;
  double best_value = -1.0;
  for (Index b = 0; b < static_cast<Index>(spectra.size()); ++b) {
    const CrossSpectrum& s = spectra[b];
    if (s.frequency_hz < band.first || s.frequency_hz > band.second) continue;
    if (i < 0 || j < 0 || i >= s.channels() || j >= s.channels())
      throw ConfigError("peak_bin: channel pair out of range");
    const double value = std::abs(s.matrix(i, j));
    if (value > best_value) {
      best_value = value;
      best = b;
    }
  }
  if (best < 0) throw ConfigError("peak_bin: no bins inside the requested band");
  return best;
}

}  // namespace sparsecps
