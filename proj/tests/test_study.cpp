#include <cmath>

#include "doctest.h"
#include "sparsecps/errors.hpp"
#include "sparsecps/study.hpp"

using namespace sparsecps;
using namespace sparsecps::study;

namespace {

EvalRow row(Method m, int config, int rep, int index, double lambda, double er, double ei) {
  EvalRow r;
  r.method = m;
  r.configuration = config;
  r.repetition = rep;
  r.lambda_index = index;
  r.lambda = lambda;
  r.scale = lambda;
  r.report.err_re = er;
  r.report.err_im = ei;
  return r;
}

SimulationSpec small_spec(Coupling c) {
  SimulationSpec s;
  s.configuration = c;
  s.sensors = 8;
  s.n_sources_total = 40;
  s.coarsen_factor = 2;
  s.duration_samples = 2048;
  s.repetitions = 2;
  s.seed = 17;
  return s;
}

}  // namespace

TEST_CASE("quartiles") {
  const Quartiles q = quartiles({5.0, 1.0, 3.0, 2.0, 4.0});
  CHECK(q.q1 == 2.0);
  CHECK(q.median == 3.0);
  CHECK(q.q3 == 4.0);
  const Quartiles even = quartiles({1.0, 2.0, 3.0, 4.0});
  CHECK(even.q1 == 1.75);
  CHECK(even.median == 2.5);
  CHECK(even.q3 == 3.25);
  CHECK(quartiles({7.0}).median == 7.0);
  CHECK(std::isnan(quartiles({}).median));
}

TEST_CASE("best lambda selection") {
  const std::vector<EvalRow> rows{
      row(Method::one_step, 1, 0, 1, 0.1, 0.5, 0.5), row(Method::one_step, 1, 0, 2, 0.2, 0.2, 0.1),
      row(Method::one_step, 1, 0, 3, 0.3, 0.1, 0.2), row(Method::two_step, 1, 0, 1, 1.0, 0.0, 1.0),
      row(Method::one_step, 1, 1, 1, 0.1, 0.4, 0.0)};
  const auto best = select_best(rows);
  REQUIRE(best.size() == 3);
  // Rep 0, one-step: indices 2 and 3 tie at 0.3; the lower lambda wins.
  CHECK(best[0].method == Method::one_step);
  CHECK(best[0].repetition == 0);
  CHECK(best[0].lambda_index == 2);
  CHECK(best[1].repetition == 1);
  CHECK(best[2].method == Method::two_step);

  // Order of appearance does not matter.
  std::vector<EvalRow> reversed(rows.rbegin(), rows.rend());
  CHECK(select_best(reversed)[0].lambda_index == 2);
}

TEST_CASE("evaluation rows round-trip") {
  EvalRow r = row(Method::two_step, 2, 7, 3, 0.123456789012345678, 1.0 / 3.0, 0.0);
  r.report.count_re = 4;
  r.report.count_im = 0;
  r.report.has_nonnull_re = true;
  const EvalRow back = parse_eval_row(format_eval_row(r));
  CHECK(back.method == r.method);
  CHECK(back.configuration == 2);
  CHECK(back.repetition == 7);
  CHECK(back.lambda_index == 3);
  CHECK(back.lambda == r.lambda);
  CHECK(back.report.err_re == r.report.err_re);
  CHECK(back.report.count_re == 4);
  CHECK(back.report.has_nonnull_re);
  CHECK_FALSE(back.report.has_nonnull_im);

  const std::string header = eval_header();
  CHECK(std::count(header.begin(), header.end(), '\t') == 11);
  CHECK_THROWS_AS(parse_eval_row("one-step\t1\t2"), IoError);
  CHECK_THROWS_AS(parse_eval_row("three-step\t1\t0\t1\t1\t1\t0\t0\t0\t0\t0\t0"), IoError);
}

TEST_CASE("methods") {
  CHECK(method_from_string(to_string(Method::one_step)) == Method::one_step);
  CHECK(method_from_string("two-step") == Method::two_step);
  CHECK_THROWS_AS(method_from_string("tikhonov"), ConfigError);
}

TEST_CASE("simulation spec") {
  const SimulationSpec s = small_spec(Coupling::config2);
  const SimulationSpec back = spec_from_json(to_json(s));
  CHECK(back.configuration == Coupling::config2);
  CHECK(back.sensors == 8);
  CHECK(back.n_sources_total == 40);
  CHECK(back.seed == 17);
  CHECK(back.band == s.band);

  s.validate();
  SimulationSpec bad = s;
  bad.duration_samples = 300;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.band = {12.0, 8.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.coarsen_factor = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  nlohmann::json j = to_json(s);
  j["configuration"] = 3;
  CHECK_THROWS_AS(spec_from_json(j), IoError);
  j.erase("configuration");
  CHECK_THROWS_AS(spec_from_json(j), IoError);
}

TEST_CASE("manifest and ground truth round-trip") {
  RunManifest m;
  m.spec = small_spec(Coupling::config1);
  m.root_seed = 17;
  m.files = {{"observations", "rep_000/observations.txt"}};
  m.timing = {{"simulate", 1.5}};
  const RunManifest back = manifest_from_json(to_json(m));
  CHECK(back.root_seed == 17);
  CHECK(back.files == m.files);
  CHECK(back.timing == m.timing);
  CHECK(back.version == kVersion);
  nlohmann::json bad = to_json(m);
  bad["schema"] = "x";
  CHECK_THROWS_AS(manifest_from_json(bad), IoError);
  bad = to_json(m);
  bad.erase("spec");
  CHECK_THROWS_AS(manifest_from_json(bad), IoError);

  const Geometry geo = build_geometry(m.spec);
  const Repetition rep = simulate_repetition(m.spec, geo.fine, 0);
  const GroundTruth t = truth_from_json(truth_to_json(rep.truth));
  CHECK(t.configuration == rep.truth.configuration);
  CHECK(t.source_indices == rep.truth.source_indices);
  CHECK(t.true_pairs == rep.truth.true_pairs);
  CHECK(t.model.order == rep.truth.model.order);
  CHECK(t.model.coefficients == rep.truth.model.coefficients);
  bad = truth_to_json(rep.truth);
  bad["true_pairs"][0] = "x";
  CHECK_THROWS_AS(truth_from_json(bad), IoError);
}

TEST_CASE("geometry and repetitions are reproducible") {
  const SimulationSpec s = small_spec(Coupling::config1);
  const Geometry a = build_geometry(s), b = build_geometry(s);
  CHECK(a.fine.entries == b.fine.entries);
  CHECK(a.coarse.lead_field.sources() == 20);
  CHECK(simulate_repetition(s, a.fine, 1).observations.samples ==
        simulate_repetition(s, b.fine, 1).observations.samples);
  CHECK(simulate_repetition(s, a.fine, 0).observations.samples !=
        simulate_repetition(s, a.fine, 1).observations.samples);
}

TEST_CASE("estimators over their grids") {
  const SimulationSpec s = small_spec(Coupling::config2);
  const Geometry geo = build_geometry(s);
  const Repetition rep = simulate_repetition(s, geo.fine, 0);
  const Estimator est(geo.coarse.lead_field);
  EstimateOptions opts;
  opts.seed = s.seed;

  const auto one = est.one_step(rep.observations, opts, 0);
  REQUIRE(one.size() == 4);
  const double lstar = one[0].lambda / one[0].scale;
  for (std::size_t k = 0; k < one.size(); ++k) {
    CHECK(one[k].lambda_index == static_cast<int>(k) + 1);
    CHECK(one[k].lambda == doctest::Approx(one[k].scale * lstar));
    if (k) CHECK(one[k].lambda > one[k - 1].lambda);
    CHECK(one[k].spectrum.channels() == 20);
    CHECK(one[k].spectrum.is_hermitian(1e-10));
    CHECK(one[k].bin == one[0].bin);
    const double f = one[k].spectrum.frequency_hz;
    CHECK(f >= 8.0);
    CHECK(f <= 12.0);
  }
  CHECK(est.one_step(rep.observations, opts, 0)[2].spectrum.matrix == one[2].spectrum.matrix);

  const auto two = est.two_step(rep.observations, opts, 0);
  REQUIRE(two.size() == 4);
  CHECK(two[0].bin == one[0].bin);
  for (std::size_t k = 1; k < two.size(); ++k) CHECK(two[k].lambda > two[k - 1].lambda);
  CHECK(two[0].lambda == doctest::Approx(0.1 * std::pow(10.0, -0.5)));

  const EvalRow r = evaluate_estimate(one[0], rep.truth, geo);
  CHECK(r.configuration == 2);
  CHECK(r.report.err_re >= 0.0);

  const nlohmann::json meta = estimate_meta(one[1]);
  CHECK(meta.at("lambda_index").get<int>() == 2);
  CHECK(meta.at("method").get<std::string>() == "one-step");
}

TEST_CASE("small study run") {
  const SimulationSpec s = small_spec(Coupling::config1);
  EstimateOptions opts;
  opts.seed = s.seed;
  const StudyRun serial = run_study(s, opts, 1);
  CHECK(serial.rows.size() == 2 * 8);
  const StudyRun parallel = run_study(s, opts, 2);
  REQUIRE(parallel.rows.size() == serial.rows.size());
  for (std::size_t k = 0; k < serial.rows.size(); ++k)
    CHECK(format_eval_row(parallel.rows[k]) == format_eval_row(serial.rows[k]));

  const StudyReport report = build_report(serial.rows);
  CHECK(report.best.size() == 4);
  CHECK(report.summaries.size() == 2);
  REQUIRE(report.sparsity.size() == 8);
  CHECK(report.sparsity[0].group == "conf1 lambda4");
  CHECK(report.sparsity[0].runs == 2);
  CHECK(report.sparsity.back().group == "conf1 lambda1");
  const std::string table = format_sparsity_table(report.sparsity);
  CHECK(table.find("conf1 lambda4") != std::string::npos);
  const nlohmann::json j = report_json(report);
  CHECK(j.at("summaries").size() == 2);
  CHECK(j.at("sparsity").size() == 8);

  SimulationSpec bad = s;
  bad.duration_samples = 100;
  CHECK_THROWS_AS(run_study(bad, opts, 1), ConfigError);
}
