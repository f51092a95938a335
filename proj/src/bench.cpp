#include "sparsecps/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <span>
#include <string>

#include "sparsecps/errors.hpp"

namespace sparsecps::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::optional<std::int64_t> status_field(const std::string& key) {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ":", 0) == 0) {
      try {
        return std::stoll(line.substr(key.size() + 1)) * 1024;
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

double relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> view(Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

std::optional<std::int64_t> reset_peak_rss() {
  std::ofstream clear("/proc/self/clear_refs");
  if (!clear) return std::nullopt;
  clear << "5";
  clear.close();
  if (!clear) return std::nullopt;
  const auto hwm = status_field("VmHWM");
  const auto rss = status_field("VmRSS");
  // A successful reset drops the high-water mark to the current RSS.
  if (!hwm || !rss || *hwm > *rss + (1 << 20)) return std::nullopt;
  return hwm;
}

std::optional<std::int64_t> peak_rss() { return status_field("VmHWM"); }

Eigen::MatrixXd assemble_kron(const Eigen::MatrixXd& g) {
  const Index m = g.rows(), n = g.cols();
  Eigen::MatrixXd k(m * m, n * n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i)
      k.block(i * m, j * n, m, n) = g(i, j) * g;
  return k;
}

KronComparison compare_kron(Index m, Index n, std::uint64_t seed, int repeats) {
  if (m < 1 || n < 1) throw ConfigError("compare_kron: sizes must be positive");
  if (repeats < 1) throw ConfigError("compare_kron: repeats must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  LeadField lf;
  lf.entries = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return normal(rng); });
  const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(n * n, [&] { return normal(rng); });
  const Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(m * m, [&] { return normal(rng); });

  KronComparison out;
  out.m = m;
  out.n = n;
  out.dense_bytes = static_cast<std::int64_t>(m * m) * (n * n) * 8;

  const KronOperator op(lf);
  KronWorkspace ws;
  Eigen::VectorXd fwd(m * m), adj(n * n);
  const auto baseline = reset_peak_rss();
  std::vector<double> parallel_times, serial_times;
  for (int r = 0; r < repeats; ++r) {
    auto start = Clock::now();
    op.apply(view(x), view(fwd), ws, Execution::parallel);
    parallel_times.push_back(seconds_since(start));
    start = Clock::now();
    op.apply(view(x), view(fwd), ws, Execution::serial);
    serial_times.push_back(seconds_since(start));
  }
  op.apply_transpose(view(y), view(adj), ws);
  if (baseline) {
    if (const auto peak = peak_rss()) out.matrix_free_peak_growth = *peak - *baseline;
  }
  out.matrix_free_seconds = median(parallel_times);
  out.serial_seconds = median(serial_times);

  auto start = Clock::now();
  const Eigen::MatrixXd k = assemble_kron(lf.entries);
  const auto multiply_start = Clock::now();
  const Eigen::VectorXd dense_fwd = k * x;
  out.dense_multiply_seconds = seconds_since(multiply_start);
  out.dense_seconds = seconds_since(start);
  const Eigen::VectorXd dense_adj = k.transpose() * y;

  out.speedup = out.dense_seconds / std::max(out.matrix_free_seconds, 1e-12);
  out.max_relative_error = std::max(relative_error(fwd, dense_fwd), relative_error(adj, dense_adj));
  return out;
}

}  // namespace sparsecps::bench
