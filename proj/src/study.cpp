#include "sparsecps/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

#include "sparsecps/errors.hpp"
#include "sparsecps/io.hpp"

namespace sparsecps::study {

void SimulationSpec::validate(Index segment_length) const {
  if (sensors < 1) throw ConfigError("sensor count must be positive");
  if (n_sources_total < 3) throw ConfigError("the fine source space needs at least 3 sources");
  if (coarsen_factor < 1) throw ConfigError("coarsen factor must be at least 1");
  if (repetitions < 0) throw ConfigError("repetition count must be nonnegative");
  if (!(sampling_rate > 0.0)) throw ConfigError("sampling rate must be positive");
  if (duration_samples < 2 * segment_length)
    throw ConfigError("duration must be at least twice the Welch segment length");
  if (!(band.first > 0.0 && band.first < band.second && band.second < sampling_rate / 2.0))
    throw ConfigError("band must lie inside (0, fs/2)");
}

nlohmann::json to_json(const SimulationSpec& spec) {
  return {{"configuration", static_cast<int>(spec.configuration)},
          {"sensors", spec.sensors},
          {"n_sources_total", spec.n_sources_total},
          {"coarsen_factor", spec.coarsen_factor},
          {"snr_db", spec.snr_db},
          {"duration_samples", spec.duration_samples},
          {"sampling_rate", spec.sampling_rate},
          {"band", {spec.band.first, spec.band.second}},
          {"seed", spec.seed},
          {"repetitions", spec.repetitions}};
}

SimulationSpec spec_from_json(const nlohmann::json& j) try {
  SimulationSpec s;
  const int config = j.at("configuration").get<int>();
  if (config != 1 && config != 2) throw IoError("configuration must be 1 or 2");
  s.configuration = static_cast<Coupling>(config);
  s.sensors = j.at("sensors").get<Index>();
  s.n_sources_total = j.at("n_sources_total").get<Index>();
  s.coarsen_factor = j.at("coarsen_factor").get<Index>();
  s.snr_db = j.at("snr_db").get<double>();
  s.duration_samples = j.at("duration_samples").get<Index>();
  s.sampling_rate = j.at("sampling_rate").get<double>();
  s.band = {j.at("band").at(0).get<double>(), j.at("band").at(1).get<double>()};
  s.seed = j.at("seed").get<std::uint64_t>();
  s.repetitions = j.at("repetitions").get<int>();
  return s;
} catch (const nlohmann::json::exception& e) {
  throw IoError(std::string("malformed simulation spec: ") + e.what());
}

Geometry build_geometry(const SimulationSpec& spec) {
  Rng rng = substream(spec.seed, "leadfield");
  Geometry geo;
  geo.fine = synthetic_leadfield(spec.sensors, spec.n_sources_total, rng());
  geo.coarse = coarsen_leadfield(geo.fine, spec.coarsen_factor);
  return geo;
}

nlohmann::json truth_to_json(const GroundTruth& truth) {
  nlohmann::json coefficients = nlohmann::json::array();
  for (const Eigen::Matrix3d& a : truth.model.coefficients) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({a(r, 0), a(r, 1), a(r, 2)});
    coefficients.push_back(rows);
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [i, j] : truth.true_pairs) pairs.push_back({i, j});
  return {{"schema", "sparsecps.truth/1"},
          {"configuration", static_cast<int>(truth.configuration)},
          {"source_indices",
           {truth.source_indices[0], truth.source_indices[1], truth.source_indices[2]}},
          {"true_pairs", pairs},
          {"mvar",
           {{"order", truth.model.order},
            {"innovation_std", truth.model.innovation_std},
            {"coefficients", coefficients}}}};
}

GroundTruth truth_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "sparsecps.truth/1")
      throw IoError("unsupported ground-truth schema");
    GroundTruth t;
    const int config = j.at("configuration").get<int>();
    if (config != 1 && config != 2) throw IoError("configuration must be 1 or 2");
    t.configuration = static_cast<Coupling>(config);
    for (int k = 0; k < 3; ++k) t.source_indices[k] = j.at("source_indices").at(k).get<Index>();
    for (const auto& p : j.at("true_pairs"))
      t.true_pairs.emplace_back(p.at(0).get<Index>(), p.at(1).get<Index>());
    const auto& mvar = j.at("mvar");
    t.model.order = mvar.at("order").get<int>();
    t.model.mask = t.configuration;
    t.model.innovation_std = mvar.at("innovation_std").get<double>();
    for (const auto& rows : mvar.at("coefficients")) {
      Eigen::Matrix3d a;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = rows.at(r).at(c).get<double>();
      t.model.coefficients.push_back(a);
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed ground truth: ") + e.what());
  }
}

nlohmann::json to_json(const RunManifest& manifest) {
  return {{"schema", "sparsecps.manifest/1"}, {"version", manifest.version},
          {"root_seed", manifest.root_seed},  {"spec", to_json(manifest.spec)},
          {"files", manifest.files},          {"timing", manifest.timing}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "sparsecps.manifest/1")
      throw IoError("unsupported manifest schema");
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.root_seed = j.at("root_seed").get<std::uint64_t>();
    m.spec = spec_from_json(j.at("spec"));
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    m.timing = j.at("timing").get<std::map<std::string, double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
}

Repetition simulate_repetition(const SimulationSpec& spec, const LeadField& fine,
                               int repetition) {
  Rng rng = substream(spec.seed, "simulation", static_cast<std::uint64_t>(repetition));
  TimeCourseOptions opts;
  opts.samples = spec.duration_samples;
  opts.sampling_rate = spec.sampling_rate;
  opts.band = spec.band;
  Repetition rep;
  rep.truth = draw_ground_truth(spec.configuration, fine, rng, opts);
  rep.observations = generate_observations(fine, rep.truth, spec.snr_db, rng);
  return rep;
}

std::string to_string(Method m) { return m == Method::one_step ? "one-step" : "two-step"; }

Method method_from_string(const std::string& s) {
  if (s == "one-step") return Method::one_step;
  if (s == "two-step") return Method::two_step;
  throw ConfigError("unknown method '" + s + "' (expected one-step or two-step)");
}

nlohmann::json estimate_meta(const Estimate& e) {
  return {{"method", to_string(e.method)}, {"repetition", e.repetition},
          {"lambda_index", e.lambda_index}, {"scale", e.scale},
          {"lambda", e.lambda},             {"bin", e.bin},
          {"iterations", e.iterations},     {"converged", e.converged}};
}

namespace {

std::vector<CrossSpectrum> sensor_spectra(const TimeSeriesSet& obs, const EstimateOptions& opts) {
  return welch_full_spectrum(obs, opts.welch);
}

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

Index select_frequency_bin(const TimeSeriesSet& observations, const EstimateOptions& opts) {
  return peak_bin(sensor_spectra(observations, opts), opts.channel_pair, opts.band);
}

Estimator::Estimator(const LeadField& coarse)
    : kron_(coarse), lipschitz_(lipschitz_constant(coarse)), tikhonov_(coarse) {}

std::vector<Estimate> Estimator::one_step(const TimeSeriesSet& observations,
                                          const EstimateOptions& opts, int repetition) const {
  const std::vector<CrossSpectrum> spectra = sensor_spectra(observations, opts);
  const Index bin = peak_bin(spectra, opts.channel_pair, opts.band);
  const CrossSpectrum& observed = spectra[bin];

  FistaConfig base;
  base.lipschitz = lipschitz_;
  base.max_iterations = opts.max_iterations;
  base.tolerance = opts.tolerance;
  base.seed = substream(opts.seed, "init", static_cast<std::uint64_t>(repetition))();

  const std::vector<double> scales = sorted(opts.lambda_scales);
  const std::vector<LambdaRun> runs = lambda_grid(kron_, observed, scales, base);
  std::vector<Estimate> out;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    Estimate e;
    e.method = Method::one_step;
    e.repetition = repetition;
    e.lambda_index = static_cast<int>(k) + 1;
    e.scale = runs[k].scale;
    e.lambda = runs[k].lambda;
    e.bin = bin;
    e.spectrum = runs[k].result.estimate.assemble(observed.frequency_hz);
    e.iterations = runs[k].result.iterations_run;
    e.converged = runs[k].result.converged;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Estimate> Estimator::two_step(const TimeSeriesSet& observations,
                                          const EstimateOptions& opts, int repetition) const {
  const Index bin = select_frequency_bin(observations, opts);
  const TimeSeriesSet normalized = normalize_sensor_variance(observations);
  const std::vector<double> grid = sorted(
      opts.tikhonov_lambdas.empty() ? default_lambda_grid(opts.snr_db) : opts.tikhonov_lambdas);
  std::vector<Estimate> out;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Estimate e;
    e.method = Method::two_step;
    e.repetition = repetition;
    e.lambda_index = static_cast<int>(k) + 1;
    e.scale = grid[k];
    e.lambda = grid[k];
    e.bin = bin;
    e.spectrum = welch_cross_spectrum(tikhonov_.estimate(normalized, grid[k]), opts.welch, bin);
    e.iterations = 0;
    e.converged = true;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Estimate> Estimator::run(Method method, const TimeSeriesSet& observations,
                                     const EstimateOptions& opts, int repetition) const {
  return method == Method::one_step ? one_step(observations, opts, repetition)
                                    : two_step(observations, opts, repetition);
}

EvalRow evaluate_estimate(const Estimate& e, const GroundTruth& truth, const Geometry& geo,
                          double fraction) {
  if (!geo.fine.source_positions || !geo.coarse.lead_field.source_positions)
    throw InputError("evaluation needs source positions for both source spaces");
  EvalRow row;
  row.method = e.method;
  row.configuration = static_cast<int>(truth.configuration);
  row.repetition = e.repetition;
  row.lambda_index = e.lambda_index;
  row.lambda = e.lambda;
  row.scale = e.scale;
  row.report = evaluate(e.spectrum, truth.true_pairs, *geo.fine.source_positions,
                        *geo.coarse.lead_field.source_positions, fraction);
  return row;
}

std::string eval_header() {
  return "method\tconfiguration\trepetition\tlambda_index\tlambda\tscale\terr_re\terr_im\t"
         "count_re\tcount_im\tnonnull_re\tnonnull_im";
}

std::string format_eval_row(const EvalRow& r) {
  std::ostringstream out;
  out << to_string(r.method) << '\t' << r.configuration << '\t' << r.repetition << '\t'
      << r.lambda_index << '\t' << io::format_real(r.lambda) << '\t' << io::format_real(r.scale)
      << '\t' << io::format_real(r.report.err_re) << '\t' << io::format_real(r.report.err_im)
      << '\t' << r.report.count_re << '\t' << r.report.count_im << '\t'
      << (r.report.has_nonnull_re ? 1 : 0) << '\t' << (r.report.has_nonnull_im ? 1 : 0);
  return out.str();
}

EvalRow parse_eval_row(const std::string& line) {
  std::istringstream in(line);
  std::string method;
  EvalRow r;
  int nonnull_re = 0, nonnull_im = 0;
  if (!(in >> method >> r.configuration >> r.repetition >> r.lambda_index >> r.lambda >>
        r.scale >> r.report.err_re >> r.report.err_im >> r.report.count_re >>
        r.report.count_im >> nonnull_re >> nonnull_im))
    throw IoError("malformed evaluation row: " + line);
  try {
    r.method = method_from_string(method);
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  r.report.has_nonnull_re = nonnull_re != 0;
  r.report.has_nonnull_im = nonnull_im != 0;
  return r;
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) return {NAN, NAN, NAN};
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

std::vector<EvalRow> select_best(const std::vector<EvalRow>& rows) {
  std::map<std::tuple<int, int, int>, EvalRow> best;
  for (const EvalRow& r : rows) {
    const auto key = std::make_tuple(static_cast<int>(r.method), r.configuration, r.repetition);
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, r);
      continue;
    }
    const double sum = r.report.err_re + r.report.err_im;
    const double incumbent = it->second.report.err_re + it->second.report.err_im;
    if (sum < incumbent || (sum == incumbent && r.lambda < it->second.lambda)) it->second = r;
  }
  std::vector<EvalRow> out;
  for (auto& [key, row] : best) out.push_back(row);
  return out;
}

StudyReport build_report(const std::vector<EvalRow>& rows) {
  StudyReport report;

  std::vector<EvalRow> one_step;
  for (const EvalRow& r : rows)
    if (r.method == Method::one_step) one_step.push_back(r);
  std::stable_sort(one_step.begin(), one_step.end(), [](const EvalRow& a, const EvalRow& b) {
    if (a.configuration != b.configuration) return a.configuration < b.configuration;
    return a.lambda_index > b.lambda_index;
  });
  std::vector<LabelledReport> labelled;
  for (const EvalRow& r : one_step)
    labelled.push_back({"conf" + std::to_string(r.configuration) + " lambda" +
                            std::to_string(r.lambda_index),
                        r.report});
  report.sparsity = sparsity_table(labelled);

  report.best = select_best(rows);
  std::map<std::pair<int, int>, std::vector<const EvalRow*>> groups;
  for (const EvalRow& r : report.best)
    groups[{static_cast<int>(r.method), r.configuration}].push_back(&r);
  for (const auto& [key, members] : groups) {
    MethodSummary s;
    s.method = static_cast<Method>(key.first);
    s.configuration = key.second;
    s.repetitions = static_cast<Index>(members.size());
    std::vector<double> er, ei, cr, ci;
    for (const EvalRow* r : members) {
      er.push_back(r->report.err_re);
      ei.push_back(r->report.err_im);
      cr.push_back(static_cast<double>(r->report.count_re));
      ci.push_back(static_cast<double>(r->report.count_im));
    }
    s.err_re = quartiles(er);
    s.err_im = quartiles(ei);
    s.count_re = quartiles(cr);
    s.count_im = quartiles(ci);
    report.summaries.push_back(s);
  }
  return report;
}

std::string format_sparsity_table(const std::vector<SparsityRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "group" << std::setw(6) << "part" << std::setw(6)
      << "runs" << std::setw(10) << "nonnull%" << std::setw(14) << "(min,max)"
      << "mean\n";
  for (const SparsityRow& r : rows) {
    std::ostringstream pct, range, mean;
    pct << std::fixed << std::setprecision(1) << r.percent_nonnull;
    if (r.count_range)
      range << '(' << r.count_range->first << ", " << r.count_range->second << ')';
    else
      range << '-';
    if (r.mean_count)
      mean << std::fixed << std::setprecision(2) << *r.mean_count;
    else
      mean << '-';
    out << std::left << std::setw(18) << r.group << std::setw(6) << to_string(r.part)
        << std::setw(6) << r.runs << std::setw(10) << pct.str() << std::setw(14) << range.str()
        << mean.str() << '\n';
  }
  return out.str();
}

nlohmann::json report_json(const StudyReport& report) {
  auto q = [](const Quartiles& v) {
    return nlohmann::json{{"q1", v.q1}, {"median", v.median}, {"q3", v.q3}};
  };
  nlohmann::json j;
  j["schema"] = "sparsecps.report/1";
  j["sparsity"] = nlohmann::json::array();
  for (const SparsityRow& r : report.sparsity) {
    nlohmann::json row{{"group", r.group},
                       {"part", to_string(r.part)},
                       {"runs", r.runs},
                       {"percent_nonnull", r.percent_nonnull}};
    row["count_min"] = r.count_range ? nlohmann::json(r.count_range->first) : nlohmann::json();
    row["count_max"] = r.count_range ? nlohmann::json(r.count_range->second) : nlohmann::json();
    row["mean_count"] = r.mean_count ? nlohmann::json(*r.mean_count) : nlohmann::json();
    j["sparsity"].push_back(row);
  }
  j["best"] = nlohmann::json::array();
  for (const EvalRow& r : report.best)
    j["best"].push_back({{"method", to_string(r.method)},
                         {"configuration", r.configuration},
                         {"repetition", r.repetition},
                         {"lambda_index", r.lambda_index},
                         {"lambda", r.lambda},
                         {"err_re", r.report.err_re},
                         {"err_im", r.report.err_im},
                         {"count_re", r.report.count_re},
                         {"count_im", r.report.count_im}});
  j["summaries"] = nlohmann::json::array();
  for (const MethodSummary& s : report.summaries)
    j["summaries"].push_back({{"method", to_string(s.method)},
                              {"configuration", s.configuration},
                              {"repetitions", s.repetitions},
                              {"err_re", q(s.err_re)},
                              {"err_im", q(s.err_im)},
                              {"count_re", q(s.count_re)},
                              {"count_im", q(s.count_im)}});
  return j;
}

StudyRun run_study(const SimulationSpec& spec, const EstimateOptions& opts, int jobs) {
  spec.validate(opts.welch.segment_length);
  const auto start = std::chrono::steady_clock::now();
  const Geometry geo = build_geometry(spec);
  const Estimator estimator(geo.coarse.lead_field);

  std::vector<std::vector<EvalRow>> per_rep(static_cast<std::size_t>(spec.repetitions));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    try {
      const Repetition r = simulate_repetition(spec, geo.fine, rep);
      for (Method method : {Method::one_step, Method::two_step})
        for (const Estimate& e : estimator.run(method, r.observations, opts, rep))
          per_rep[rep].push_back(evaluate_estimate(e, r.truth, geo));
    } catch (...) {
#pragma omp critical(sparsecps_study_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  StudyRun run;
  for (auto& rows : per_rep)
    for (auto& row : rows) run.rows.push_back(std::move(row));
  run.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

}  // namespace sparsecps::study
