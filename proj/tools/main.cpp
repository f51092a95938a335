// sparsecps command-line front end.
//
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sparsecps/bench.hpp"
#include "sparsecps/errors.hpp"
#include "sparsecps/io.hpp"
#include "sparsecps/study.hpp"

namespace fs = std::filesystem;
using namespace sparsecps;
using namespace sparsecps::study;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Raised for inconsistent inputs found while aggregating; exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 1;
  int jobs = 1;
  fs::path out_dir = ".";
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_dir_opt = nullptr;
};

std::string rep_dir_name(int rep) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03d", rep);
  return buf;
}

std::string estimate_file_name(int rep, int lambda_index) {
  return rep_dir_name(rep) + "_lam" + std::to_string(lambda_index) + ".json";
}

RunManifest load_manifest(const fs::path& run_dir) {
  const fs::path path = run_dir / "manifest.json";
  if (!fs::exists(path)) throw IoError("no manifest.json in " + run_dir.string());
  return manifest_from_json(io::read_json(path));
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  int configuration = 1;
  SimulationSpec spec;
  std::vector<double> band{8.0, 12.0};
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  app.add_option("--config", a.configuration, "Coupling configuration")
      ->check(CLI::IsMember({1, 2}));
  app.add_option("--m", a.spec.sensors, "Number of sensors")->check(CLI::PositiveNumber);
  app.add_option("--n-fine", a.spec.n_sources_total, "Fine source-space size")
      ->check(CLI::Range(Index{3}, Index{1} << 24));
  app.add_option("--coarsen-factor", a.spec.coarsen_factor, "Keep every k-th fine source")
      ->check(CLI::PositiveNumber);
  app.add_option("--snr-db", a.spec.snr_db, "Sensor SNR in dB");
  app.add_option("--samples", a.spec.duration_samples, "Samples per repetition");
  app.add_option("--fs", a.spec.sampling_rate, "Sampling rate in Hz")->check(CLI::PositiveNumber);
  app.add_option("--reps", a.spec.repetitions, "Number of repetitions")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--band", a.band, "Band edges in Hz")->expected(2);
}

int cmd_simulate(SimulateArgs& a, const Globals& g) {
  a.spec.configuration = static_cast<Coupling>(a.configuration);
  a.spec.band = {a.band[0], a.band[1]};
  a.spec.seed = g.seed;
  a.spec.validate();

  const fs::path dir = g.out_dir;
  fs::create_directories(dir);
  RunManifest manifest;
  manifest.spec = a.spec;
  manifest.root_seed = g.seed;

  auto start = Clock::now();
  const Geometry geo = build_geometry(a.spec);
  manifest.timing["leadfield"] = seconds_since(start);

  start = Clock::now();
  io::write_leadfield(dir / "leadfield_fine.txt", dir / "positions_fine.txt", geo.fine);
  io::write_leadfield(dir / "leadfield_coarse.txt", dir / "positions_coarse.txt",
                      geo.coarse.lead_field);
  io::write_json(dir / "coarse_map.json", {{"kept", geo.coarse.kept},
                                           {"fine_to_coarse", geo.coarse.fine_to_coarse}});
  manifest.files = {{"leadfield_fine", "leadfield_fine.txt"},
                    {"positions_fine", "positions_fine.txt"},
                    {"leadfield_coarse", "leadfield_coarse.txt"},
                    {"positions_coarse", "positions_coarse.txt"},
                    {"coarse_map", "coarse_map.json"}};
  for (int rep = 0; rep < a.spec.repetitions; ++rep) {
    manifest.files[rep_dir_name(rep) + "/observations"] = rep_dir_name(rep) + "/observations.txt";
    manifest.files[rep_dir_name(rep) + "/truth"] = rep_dir_name(rep) + "/truth.json";
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(g.jobs)
  for (int rep = 0; rep < a.spec.repetitions; ++rep) {
    try {
      const Repetition r = simulate_repetition(a.spec, geo.fine, rep);
      const fs::path rep_dir = dir / rep_dir_name(rep);
      fs::create_directories(rep_dir);
      io::write_time_series(rep_dir / "observations.txt", r.observations);
      io::write_json(rep_dir / "truth.json", truth_to_json(r.truth));
    } catch (...) {
#pragma omp critical(sparsecps_cli_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  manifest.timing["simulate"] = seconds_since(start);

  io::write_json(dir / "manifest.json", to_json(manifest));
  std::cout << "wrote " << a.spec.repetitions << " repetition(s) to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  std::string method = "one-step";
  fs::path run_dir;
  fs::path leadfield, positions, observations;
  int rep_index = 0;
  std::vector<double> lambda_scales;
  std::vector<double> tikhonov_lambdas;
  std::optional<double> snr_db;
  int max_iter = 5000;
  double tol = 1e-5;
  Index segment_length = 256;
  double overlap = 0.5;
  std::vector<double> band;
  std::vector<Index> channel_pair{1, 2};
};

void add_estimate(CLI::App& app, EstimateArgs& a, bool with_method) {
  if (with_method)
    app.add_option("--method", a.method, "Estimator")
        ->check(CLI::IsMember({"one-step", "two-step"}));
  app.add_option("--run-dir", a.run_dir, "Directory written by `simulate`");
  app.add_option("--leadfield", a.leadfield, "Lead-field matrix file (instead of --run-dir)");
  app.add_option("--positions", a.positions, "Source positions for --leadfield");
  app.add_option("--observations", a.observations, "Time-series file (instead of --run-dir)");
  app.add_option("--rep-index", a.rep_index, "Repetition label for --observations")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--lambda-scale", a.lambda_scales,
                 "One-step kappa values; lambda = kappa * lambda_max (repeatable)")
      ->check(CLI::PositiveNumber);
  app.add_option("--tikhonov-lambda", a.tikhonov_lambdas, "Two-step lambdas (repeatable)")
      ->check(CLI::PositiveNumber);
  app.add_option("--snr-db", a.snr_db, "SNR for the default two-step grid");
  app.add_option("--max-iter", a.max_iter, "FISTA iteration cap")->check(CLI::PositiveNumber);
  app.add_option("--tol", a.tol, "FISTA relative-change tolerance")->check(CLI::PositiveNumber);
  app.add_option("--segment-length", a.segment_length, "Welch segment length")
      ->check(CLI::PositiveNumber);
  app.add_option("--overlap", a.overlap, "Welch overlap fraction")->check(CLI::Range(0.0, 0.99));
  app.add_option("--band", a.band, "Peak-search band in Hz")->expected(2);
  app.add_option("--channel-pair", a.channel_pair, "1-based sensor pair for the peak search")
      ->expected(2)
      ->check(CLI::PositiveNumber);
}

EstimateOptions estimate_options(const EstimateArgs& a, const Globals& g,
                                 const std::optional<RunManifest>& manifest) {
  EstimateOptions opts;
  opts.welch.segment_length = a.segment_length;
  opts.welch.overlap_fraction = a.overlap;
  if (!a.band.empty())
    opts.band = {a.band[0], a.band[1]};
  else if (manifest)
    opts.band = manifest->spec.band;
  if (a.channel_pair[0] == a.channel_pair[1])
    throw ConfigError("--channel-pair needs two distinct sensors");
  opts.channel_pair = {a.channel_pair[0] - 1, a.channel_pair[1] - 1};
  if (!a.lambda_scales.empty()) opts.lambda_scales = a.lambda_scales;
  opts.tikhonov_lambdas = a.tikhonov_lambdas;
  opts.snr_db = a.snr_db ? *a.snr_db : manifest ? manifest->spec.snr_db : 5.0;
  opts.max_iterations = a.max_iter;
  opts.tolerance = a.tol;
  opts.seed = (manifest && g.seed_opt->count() == 0) ? manifest->root_seed : g.seed;
  return opts;
}

void write_estimates(const fs::path& dir, const std::vector<Estimate>& estimates,
                     std::optional<int> configuration) {
  fs::create_directories(dir);
  for (const Estimate& e : estimates) {
    nlohmann::json meta = estimate_meta(e);
    if (configuration) meta["configuration"] = *configuration;
    io::write_cross_spectrum(dir / estimate_file_name(e.repetition, e.lambda_index), e.spectrum,
                             meta);
  }
}

int cmd_estimate(const EstimateArgs& a, const Globals& g) {
  const Method method = method_from_string(a.method);
  const bool standalone = !a.observations.empty();
  if (standalone && a.leadfield.empty())
    throw ConfigError("--observations needs --leadfield");
  if (!standalone && !a.leadfield.empty())
    throw ConfigError("--leadfield needs --observations");

  if (standalone) {
    const LeadField lf = io::read_leadfield(a.leadfield, a.positions);
    const TimeSeriesSet obs = io::read_time_series(a.observations);
    const EstimateOptions opts = estimate_options(a, g, std::nullopt);
    const Estimator estimator(lf);
    const auto estimates = estimator.run(method, obs, opts, a.rep_index);
    write_estimates(g.out_dir / "estimates" / to_string(method), estimates, std::nullopt);
    std::cout << "wrote " << estimates.size() << " estimate(s)\n";
    return 0;
  }

  const fs::path run_dir = a.run_dir.empty() ? g.out_dir : a.run_dir;
  const RunManifest manifest = load_manifest(run_dir);
  const fs::path out_root = g.out_dir_opt->count() > 0 ? g.out_dir : run_dir;
  const EstimateOptions opts = estimate_options(a, g, manifest);
  const LeadField coarse = io::read_leadfield(run_dir / manifest.files.at("leadfield_coarse"),
                                              run_dir / manifest.files.at("positions_coarse"));
  const Estimator estimator(coarse);
  const fs::path dir = out_root / "estimates" / to_string(method);
  const int reps = manifest.spec.repetitions;
  const int configuration = static_cast<int>(manifest.spec.configuration);

  std::exception_ptr failure;
  std::size_t written = 0;
#pragma omp parallel for schedule(dynamic) num_threads(g.jobs) reduction(+ : written)
  for (int rep = 0; rep < reps; ++rep) {
    try {
      const fs::path obs_path = run_dir / manifest.files.at(rep_dir_name(rep) + "/observations");
      const auto estimates = estimator.run(method, io::read_time_series(obs_path), opts, rep);
      write_estimates(dir, estimates, configuration);
      written += estimates.size();
    } catch (const std::exception& e) {
#pragma omp critical(sparsecps_cli_failure)
      if (!failure)
        failure = std::make_exception_ptr(
            std::runtime_error(rep_dir_name(rep) + ": " + e.what()));
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::cout << "wrote " << written << " estimate(s) to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  fs::path run_dir;
  fs::path estimate, truth, positions_fine, positions_coarse;
  fs::path output;
  double fraction = 0.5;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  app.add_option("--run-dir", a.run_dir, "Run directory with estimates/");
  app.add_option("--estimate", a.estimate, "Single estimate file (instead of --run-dir)");
  app.add_option("--truth", a.truth, "Ground-truth file for --estimate");
  app.add_option("--positions-fine", a.positions_fine, "Fine source positions for --estimate");
  app.add_option("--positions-coarse", a.positions_coarse,
                 "Coarse source positions for --estimate");
  app.add_option("--output", a.output, "Output table (default: <run-dir>/eval.tsv, or stdout)");
  app.add_option("--fraction", a.fraction, "Threshold as a fraction of the largest entry")
      ->check(CLI::Range(1e-12, 1.0));
}

EvalRow evaluate_file(const fs::path& estimate_path, const GroundTruth& truth,
                      const std::vector<Position>& fine, const std::vector<Position>& coarse,
                      double fraction) {
  nlohmann::json meta;
  const CrossSpectrum spectrum = io::read_cross_spectrum(estimate_path, &meta);
  try {
    EvalRow row;
    row.method = method_from_string(meta.at("method").get<std::string>());
    row.configuration = static_cast<int>(truth.configuration);
    row.repetition = meta.at("repetition").get<int>();
    row.lambda_index = meta.at("lambda_index").get<int>();
    row.lambda = meta.at("lambda").get<double>();
    row.scale = meta.at("scale").get<double>();
    row.report = evaluate(spectrum, truth.true_pairs, fine, coarse, fraction);
    return row;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(estimate_path.string() + ": incomplete meta: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(estimate_path.string() + ": " + e.what());
  }
}

int cmd_evaluate(const EvaluateArgs& a, const Globals& g) {
  std::vector<EvalRow> rows;
  fs::path output = a.output;
  if (!a.estimate.empty()) {
    if (a.truth.empty() || a.positions_fine.empty() || a.positions_coarse.empty())
      throw ConfigError("--estimate needs --truth, --positions-fine and --positions-coarse");
    rows.push_back(evaluate_file(a.estimate, truth_from_json(io::read_json(a.truth)),
                                 io::read_positions(a.positions_fine),
                                 io::read_positions(a.positions_coarse), a.fraction));
  } else {
    const fs::path run_dir = a.run_dir.empty() ? g.out_dir : a.run_dir;
    const RunManifest manifest = load_manifest(run_dir);
    const auto fine = io::read_positions(run_dir / manifest.files.at("positions_fine"));
    const auto coarse = io::read_positions(run_dir / manifest.files.at("positions_coarse"));
    std::map<int, GroundTruth> truths;
    std::vector<fs::path> files;
    const fs::path estimates = run_dir / "estimates";
    if (!fs::exists(estimates)) throw IoError("no estimates/ in " + run_dir.string());
    for (const auto& entry : fs::recursive_directory_iterator(estimates))
      if (entry.is_regular_file() && entry.path().extension() == ".json")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      nlohmann::json meta;
      io::read_cross_spectrum(f, &meta);
      const int rep = meta.value("repetition", -1);
      auto it = truths.find(rep);
      if (it == truths.end()) {
        const auto key = rep_dir_name(rep) + "/truth";
        if (rep < 0 || !manifest.files.count(key))
          throw IoError(f.string() + ": repetition not in the manifest");
        it = truths.emplace(rep, truth_from_json(io::read_json(run_dir / manifest.files.at(key))))
                 .first;
      }
      rows.push_back(evaluate_file(f, it->second, fine, coarse, a.fraction));
    }
    if (output.empty()) output = run_dir / "eval.tsv";
  }

  std::ostringstream table;
  table << eval_header() << "\n";
  for (const EvalRow& r : rows) table << format_eval_row(r) << "\n";
  if (output.empty()) {
    std::cout << table.str();
  } else {
    io::write_atomic(output, table.str());
    std::cout << "wrote " << rows.size() << " row(s) to " << output.string() << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::vector<fs::path> eval_files;
};

void add_report(CLI::App& app, ReportArgs& a) {
  app.add_option("--eval", a.eval_files, "Evaluation tables to aggregate (repeatable)");
}

std::vector<EvalRow> load_eval_rows(const std::vector<fs::path>& files) {
  struct Seen {
    std::string where;
    double scale;
  };
  std::vector<EvalRow> rows;
  std::vector<std::string> problems;
  std::map<std::tuple<int, int, int, int>, std::string> keys;
  std::map<std::tuple<int, int, int>, Seen> scales;
  for (const fs::path& file : files) {
    std::istringstream in(io::read_file(file));
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line) || line != eval_header())
      throw ValidationError(file.string() + ": missing or unexpected header");
    ++line_no;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = file.string() + ":" + std::to_string(line_no);
      EvalRow r;
      try {
        r = parse_eval_row(line);
      } catch (const IoError& e) {
        problems.push_back(where + ": " + e.what());
        continue;
      }
      const int m = static_cast<int>(r.method);
      const auto key = std::make_tuple(m, r.configuration, r.repetition, r.lambda_index);
      if (auto [it, fresh] = keys.emplace(key, where); !fresh) {
        problems.push_back(where + ": duplicate of " + it->second);
        continue;
      }
      const auto grid_key = std::make_tuple(m, r.configuration, r.lambda_index);
      if (auto [it, fresh] = scales.emplace(grid_key, Seen{where, r.scale});
          !fresh && it->second.scale != r.scale) {
        problems.push_back(where + ": lambda grid differs from " + it->second.where);
        continue;
      }
      rows.push_back(r);
    }
  }
  if (!problems.empty()) {
    std::string msg = "inconsistent evaluation tables:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return rows;
}

int cmd_report(ReportArgs& a, const Globals& g) {
  if (a.eval_files.empty()) a.eval_files.push_back(g.out_dir / "eval.tsv");
  const std::vector<EvalRow> rows = load_eval_rows(a.eval_files);
  const StudyReport report = build_report(rows);

  fs::create_directories(g.out_dir);
  io::write_atomic(g.out_dir / "table1.txt", format_sparsity_table(report.sparsity));
  io::write_json(g.out_dir / "summary.json", report_json(report));
  std::ostringstream best;
  best << eval_header() << "\n";
  for (const EvalRow& r : report.best) best << format_eval_row(r) << "\n";
  io::write_atomic(g.out_dir / "best_lambda.tsv", best.str());

  std::cout << format_sparsity_table(report.sparsity) << "\n";
  std::cout << "method\tconfiguration\treps\tmedian_err_re\tmedian_err_im\tmedian_count_re\t"
               "median_count_im\n";
  for (const MethodSummary& s : report.summaries)
    std::cout << to_string(s.method) << '\t' << s.configuration << '\t' << s.repetitions << '\t'
              << s.err_re.median << '\t' << s.err_im.median << '\t' << s.count_re.median << '\t'
              << s.count_im.median << '\n';
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  std::string sizes = "4x4,8x32,20x200";
  int repeats = 5;
  double min_speedup = 5.0;
  bool strict = false;
};

void add_bench(CLI::App& app, BenchArgs& a) {
  app.add_option("--sizes", a.sizes, "Comma-separated MxN list; empty for none");
  app.add_option("--repeats", a.repeats, "Timed matrix-free repeats per size")
      ->check(CLI::PositiveNumber);
  app.add_option("--min-speedup", a.min_speedup, "Speedup gate for m >= 20, n >= 200");
  app.add_flag("--strict", a.strict, "Exit 1 when a gate or memory check fails");
}

std::vector<std::pair<Index, Index>> parse_sizes(const std::string& text) {
  std::vector<std::pair<Index, Index>> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto x = item.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument(item);
      std::size_t used_m = 0, used_n = 0;
      const Index m = std::stoll(item.substr(0, x), &used_m);
      const Index n = std::stoll(item.substr(x + 1), &used_n);
      if (used_m != x || used_n != item.size() - x - 1 || m < 1 || n < 1)
        throw std::invalid_argument(item);
      out.emplace_back(m, n);
    } catch (const std::exception&) {
      throw ConfigError("bad size '" + item + "' (expected MxN with positive integers)");
    }
  }
  return out;
}

int cmd_bench(const BenchArgs& a, const Globals& g) {
  const auto sizes = parse_sizes(a.sizes);
  std::cout << "m\tn\tmatrix_free_s\tserial_s\tdense_s\tdense_multiply_s\tspeedup\t"
               "max_rel_err\tdense_bytes\tpeak_growth_bytes\tmemory\tgate\n";
  bool failed = false;
  for (const auto& [m, n] : sizes) {
    const bench::KronComparison c = bench::compare_kron(m, n, g.seed, a.repeats);
    std::string memory = "skip";
    std::string growth = "-";
    if (c.matrix_free_peak_growth) {
      growth = std::to_string(*c.matrix_free_peak_growth);
      // Below a few MB the dense matrix is under RSS resolution.
      if (c.dense_bytes < (std::int64_t{16} << 20))
        memory = "n/a";
      else
        memory = *c.matrix_free_peak_growth < c.dense_bytes / 2 ? "ok" : "fail";
    }
    std::string gate = "-";
    if (m >= 20 && n >= 200) gate = c.speedup >= a.min_speedup ? "pass" : "fail";
    failed = failed || gate == "fail" || memory == "fail" || c.max_relative_error > 1e-12;
    std::cout << m << '\t' << n << '\t' << c.matrix_free_seconds << '\t' << c.serial_seconds
              << '\t' << c.dense_seconds << '\t' << c.dense_multiply_seconds << '\t' << c.speedup
              << '\t' << c.max_relative_error << '\t' << c.dense_bytes << '\t' << growth << '\t'
              << memory << '\t' << gate << '\n';
  }
  return a.strict && failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse cross-power spectrum estimation and synthetic study harness"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Root seed for every random substream");
  app.add_option("--jobs", g.jobs, "Parallel repetitions")->check(CLI::PositiveNumber);
  g.out_dir_opt = app.add_option("--out-dir", g.out_dir, "Output directory");

  SimulateArgs sim;
  add_simulate(*app.add_subcommand("simulate", "Generate lead fields and observations"), sim);
  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate source cross-spectra");
  add_estimate(*estimate, est, true);
  EstimateArgs two;
  two.method = "two-step";
  auto* two_step = app.add_subcommand("two-step", "Alias of estimate --method two-step");
  add_estimate(*two_step, two, false);
  EvaluateArgs ev;
  add_evaluate(*app.add_subcommand("evaluate", "Score estimates against ground truth"), ev);
  ReportArgs rep;
  add_report(*app.add_subcommand("report", "Aggregate evaluation tables"), rep);
  BenchArgs bn;
  add_bench(*app.add_subcommand("bench", "Matrix-free versus dense Kronecker product"), bn);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "simulate") return cmd_simulate(sim, g);
    if (name == "estimate") return cmd_estimate(est, g);
    if (name == "two-step") return cmd_estimate(two, g);
    if (name == "evaluate") return cmd_evaluate(ev, g);
    if (name == "report") return cmd_report(rep, g);
    return cmd_bench(bn, g);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
