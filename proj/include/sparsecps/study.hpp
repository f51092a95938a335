#pragma once

// End-to-end synthetic study: simulate repetitions, estimate with the
// one-step and two-step methods over their lambda grids, evaluate, and
// aggregate. The CLI is a thin layer over these functions.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sparsecps/baseline_two_step.hpp"
#include "sparsecps/kron_ops.hpp"
#include "sparsecps/metrics.hpp"
#include "sparsecps/sim_engine.hpp"
#include "sparsecps/solver_fista.hpp"
#include "sparsecps/spectral.hpp"

namespace sparsecps::study {

inline constexpr const char* kVersion = "0.1.0";

struct SimulationSpec {
  Coupling configuration = Coupling::config1;
  Index sensors = 30;
  Index n_sources_total = 400;  // fine source space
  Index coarsen_factor = 4;
  double snr_db = 5.0;
  Index duration_samples = 10000;
  double sampling_rate = 256.0;
  std::pair<double, double> band{8.0, 12.0};
  std::uint64_t seed = 1;
  int repetitions = 20;

  void validate(Index segment_length = 256) const;
};

nlohmann::json to_json(const SimulationSpec& spec);
SimulationSpec spec_from_json(const nlohmann::json& j);

struct Geometry {
  LeadField fine;
  CoarseLeadField coarse;
};

// Lead fields depend only on (sensors, fine size, factor, seed).
Geometry build_geometry(const SimulationSpec& spec);

nlohmann::json truth_to_json(const GroundTruth& truth);
// Restores configuration, indices, pairs and the MVAR model; not the series.
GroundTruth truth_from_json(const nlohmann::json& j);

struct RunManifest {
  SimulationSpec spec;
  std::map<std::string, std::string> files;  // role -> path relative to the run directory
  std::map<std::string, double> timing;      // stage -> seconds
  std::string version = kVersion;
  std::uint64_t root_seed = 1;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);  // throws IoError

struct Repetition {
  GroundTruth truth;
  TimeSeriesSet observations;
};

Repetition simulate_repetition(const SimulationSpec& spec, const LeadField& fine, int repetition);

enum class Method { one_step, two_step };
std::string to_string(Method m);
Method method_from_string(const std::string& s);  // throws ConfigError

struct EstimateOptions {
  WelchConfig welch{};
  std::pair<double, double> band{8.0, 12.0};
  std::pair<Index, Index> channel_pair{0, 1};  // 0-based sensor pair for the peak search
  std::vector<double> lambda_scales = default_scaling_factors();
  // Empty: default_lambda_grid(snr_db) on variance-normalised data.
  std::vector<double> tikhonov_lambdas;
  double snr_db = 5.0;
  int max_iterations = 5000;
  double tolerance = 1e-5;
  std::uint64_t seed = 1;
};

struct Estimate {
  Method method = Method::one_step;
  int repetition = 0;
  int lambda_index = 0;  // 1-based, ascending lambda
  double scale = 0.0;    // kappa (one-step) or the Tikhonov lambda itself
  double lambda = 0.0;
  Index bin = 0;
  CrossSpectrum spectrum;
  int iterations = 0;
  bool converged = true;
};

nlohmann::json estimate_meta(const Estimate& e);

// Peak of |S_ij| over the band, from the full Welch spectrum.
Index select_frequency_bin(const TimeSeriesSet& observations, const EstimateOptions& opts);

// Solver context shared by every repetition on one coarse lead field.
class Estimator {
 public:
  explicit Estimator(const LeadField& coarse);

  std::vector<Estimate> one_step(const TimeSeriesSet& observations, const EstimateOptions& opts,
                                 int repetition) const;
  std::vector<Estimate> two_step(const TimeSeriesSet& observations, const EstimateOptions& opts,
                                 int repetition) const;
  std::vector<Estimate> run(Method method, const TimeSeriesSet& observations,
                            const EstimateOptions& opts, int repetition) const;

  const KronOperator& kron() const { return kron_; }
  double lipschitz() const { return lipschitz_; }

 private:
  KronOperator kron_;
  double lipschitz_;
  TikhonovSolver tikhonov_;
};

struct EvalRow {
  Method method = Method::one_step;
  int configuration = 1;
  int repetition = 0;
  int lambda_index = 0;
  double lambda = 0.0;
  double scale = 0.0;
  EvalReport report;
};

EvalRow evaluate_estimate(const Estimate& e, const GroundTruth& truth, const Geometry& geo,
                          double fraction = 0.5);

std::string eval_header();
std::string format_eval_row(const EvalRow& row);
EvalRow parse_eval_row(const std::string& line);  // throws IoError

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};
// Linear interpolation between order statistics.
Quartiles quartiles(std::vector<double> values);

struct MethodSummary {
  Method method;
  int configuration;
  Quartiles err_re;
  Quartiles err_im;
  Quartiles count_re;
  Quartiles count_im;
  Index repetitions = 0;
};

struct StudyReport {
  std::vector<SparsityRow> sparsity;          // one-step rows, per configuration and lambda
  std::vector<EvalRow> best;                  // best lambda per (method, config, repetition)
  std::vector<MethodSummary> summaries;       // over `best`
};

// Best lambda minimises err_re + err_im; ties go to the lowest lambda.
std::vector<EvalRow> select_best(const std::vector<EvalRow>& rows);
StudyReport build_report(const std::vector<EvalRow>& rows);
std::string format_sparsity_table(const std::vector<SparsityRow>& rows);
nlohmann::json report_json(const StudyReport& report);

struct StudyRun {
  std::vector<EvalRow> rows;
  double seconds = 0.0;
};

// Simulate, estimate with both methods, and evaluate, all in memory.
StudyRun run_study(const SimulationSpec& spec, const EstimateOptions& opts, int jobs = 1);

}  // namespace sparsecps::study
