#include "sparsecps/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "sparsecps/errors.hpp"

namespace sparsecps {

ConnectionSet supra_threshold(const Eigen::MatrixXd& part, double fraction) {
  if (part.rows() != part.cols()) throw ShapeError("supra_threshold: matrix must be square");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("supra_threshold: fraction must lie in (0, 1]");
  ConnectionSet out;
  const Index n = part.rows();
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < j; ++i) out.max_weight = std::max(out.max_weight, std::abs(part(i, j)));
  if (out.max_weight == 0.0) return out;
  out.has_nonnull = true;
  out.threshold = fraction * out.max_weight;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double w = std::abs(part(i, j));
      if (w >= out.threshold) out.pairs.push_back({i, j, w});
    }
  return out;
}

double pair_distance(const PositionPair& w, const PositionPair& v) {
  const double direct = (w.first - v.first).squaredNorm() + (w.second - v.second).squaredNorm();
  const double swapped = (w.first - v.second).squaredNorm() + (w.second - v.first).squaredNorm();
  return std::sqrt(0.5 * std::min(direct, swapped));
}

double err_metric(const Eigen::MatrixXd& part, const std::vector<Position>& positions,
                  const std::vector<PositionPair>& true_pairs, double fraction) {
  if (true_pairs.empty()) throw ConfigError("err_metric: at least one true pair is required");
  if (static_cast<Index>(positions.size()) != part.rows())
    throw ShapeError("err_metric: one position per source is required");
  const ConnectionSet rec = supra_threshold(part, fraction);
  double err = 0.0;
  for (const Connection& c : rec.pairs) {
    const PositionPair w{positions[c.i], positions[c.j]};
    double nearest = std::numeric_limits<double>::infinity();
    for (const PositionPair& v : true_pairs) nearest = std::min(nearest, pair_distance(w, v));
    err += c.weight / rec.max_weight * nearest;
  }
  return err;
}

EvalReport evaluate(const CrossSpectrum& estimate,
                    const std::vector<std::pair<Index, Index>>& true_pairs_fine,
                    const std::vector<Position>& positions_fine,
                    const std::vector<Position>& positions_coarse, double fraction) {
  if (estimate.channels() != static_cast<Index>(positions_coarse.size()))
    throw ShapeError("evaluate: estimate size does not match the coarse source space");
  std::vector<PositionPair> truth;
  for (const auto& [p, q] : true_pairs_fine) {
    if (p < 0 || q < 0 || p >= static_cast<Index>(positions_fine.size()) ||
        q >= static_cast<Index>(positions_fine.size()))
      throw ShapeError("evaluate: true pair index outside the fine source space");
    truth.emplace_back(positions_fine[p], positions_fine[q]);
  }
  const Eigen::MatrixXd re = estimate.matrix.real();
  const Eigen::MatrixXd im = estimate.matrix.imag();
  const ConnectionSet set_re = supra_threshold(re, fraction);
  const ConnectionSet set_im = supra_threshold(im, fraction);
  EvalReport r;
  r.err_re = err_metric(re, positions_coarse, truth, fraction);
  r.err_im = err_metric(im, positions_coarse, truth, fraction);
  r.count_re = static_cast<Index>(set_re.pairs.size());
  r.count_im = static_cast<Index>(set_im.pairs.size());
  r.has_nonnull_re = set_re.has_nonnull;
  r.has_nonnull_im = set_im.has_nonnull;
  return r;
}

std::string to_string(SpectrumPart part) { return part == SpectrumPart::real ? "real" : "imag"; }

std::vector<SparsityRow> sparsity_table(const std::vector<LabelledReport>& results) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvalReport*>> groups;
  for (const LabelledReport& r : results) {
    auto [it, inserted] = groups.try_emplace(r.group);
    if (inserted) order.push_back(r.group);
    it->second.push_back(&r.report);
  }
  std::vector<SparsityRow> rows;
  for (const std::string& g : order) {
    const auto& reports = groups[g];
    for (SpectrumPart part : {SpectrumPart::real, SpectrumPart::imag}) {
      SparsityRow row;
      row.group = g;
      row.part = part;
      row.runs = static_cast<Index>(reports.size());
      std::vector<Index> counts;
      for (const EvalReport* r : reports) {
        const bool nonnull = part == SpectrumPart::real ? r->has_nonnull_re : r->has_nonnull_im;
        if (nonnull) counts.push_back(part == SpectrumPart::real ? r->count_re : r->count_im);
      }
      row.percent_nonnull = 100.0 * static_cast<double>(counts.size()) / static_cast<double>(row.runs);
      if (!counts.empty()) {
        const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        row.count_range = std::make_pair(*lo, *hi);
        double sum = 0.0;
        for (Index c : counts) sum += static_cast<double>(c);
        row.mean_count = sum / static_cast<double>(counts.size());
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace sparsecps
