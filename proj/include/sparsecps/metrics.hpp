#pragma once

// Connectivity error metrics: supra-threshold connections, the pair
// Wasserstein-2 distance, the weighted localisation error, and sparsity
// statistics across repeated runs.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsecps/kron_ops.hpp"
#include "sparsecps/spectral.hpp"

namespace sparsecps {

using Position = Eigen::Vector3d;
using PositionPair = std::pair<Position, Position>;

struct Connection {
  Index i;  // i < j
  Index j;
  double weight;  // |entry|
};

struct ConnectionSet {
  std::vector<Connection> pairs;
  double threshold = 0.0;
  double max_weight = 0.0;  // max over i < j of |entry|
  bool has_nonnull = false;
};

// tau = fraction * max_{i<j} |part_ij|; keeps every i < j with |part_ij| >= tau.
ConnectionSet supra_threshold(const Eigen::MatrixXd& part, double fraction = 0.5);

// sqrt(min(|(w1,w2) - (v1,v2)|^2, |(w1,w2) - (v2,v1)|^2) / 2) over R^6.
double pair_distance(const PositionPair& w, const PositionPair& v);

// Sum over supra-threshold pairs of (|part_ij| / max |part|) times the
// distance to the nearest true pair. Zero for an empty reconstruction.
double err_metric(const Eigen::MatrixXd& part, const std::vector<Position>& positions,
                  const std::vector<PositionPair>& true_pairs, double fraction = 0.5);

struct EvalReport {
  double err_re = 0.0;
  double err_im = 0.0;
  Index count_re = 0;
  Index count_im = 0;
  bool has_nonnull_re = false;
  bool has_nonnull_im = false;
};

EvalReport evaluate(const CrossSpectrum& estimate,
                    const std::vector<std::pair<Index, Index>>& true_pairs_fine,
                    const std::vector<Position>& positions_fine,
                    const std::vector<Position>& positions_coarse, double fraction = 0.5);

enum class SpectrumPart { real, imag };
std::string to_string(SpectrumPart part);

// One sparsity-table cell: one (group, part) over all runs.
struct SparsityRow {
  std::string group;  // e.g. configuration and lambda label
  SpectrumPart part = SpectrumPart::real;
  Index runs = 0;
  double percent_nonnull = 0.0;
  std::optional<std::pair<Index, Index>> count_range;  // over non-null runs
  std::optional<double> mean_count;                    // over non-null runs
};

struct LabelledReport {
  std::string group;
  EvalReport report;
};

// Rows appear in first-seen group order, real part before imaginary.
std::vector<SparsityRow> sparsity_table(const std::vector<LabelledReport>& results);

}  // namespace sparsecps
