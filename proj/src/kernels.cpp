#include "sparsecps/kernels.hpp"

#include <algorithm>

namespace sparsecps::kernels {
namespace {

constexpr std::ptrdiff_t kTile = 4;
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::ptrdiff_t kParallelThreshold = 1 << 15;

// Four blocks at once so each column of A is loaded once per tile.
inline void tile4(MatrixView a, const double* x0, double* o0) {
  const std::ptrdiff_t rows = a.rows;
  const std::ptrdiff_t cols = a.cols;
  const double* x1 = x0 + cols;
  const double* x2 = x1 + cols;
  const double* x3 = x2 + cols;
  double* o1 = o0 + rows;
  double* o2 = o1 + rows;
  double* o3 = o2 + rows;
  std::fill(o0, o0 + kTile * rows, 0.0);
  for (std::ptrdiff_t k = 0; k < cols; ++k) {
    const double* col = a.data + k * rows;
    const double c0 = x0[k], c1 = x1[k], c2 = x2[k], c3 = x3[k];
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
      const double g = col[r];
      o0[r] += g * c0;
      o1[r] += g * c1;
      o2[r] += g * c2;
      o3[r] += g * c3;
    }
  }
}

inline void tile1(MatrixView a, const double* x, double* o) {
  std::fill(o, o + a.rows, 0.0);
  for (std::ptrdiff_t k = 0; k < a.cols; ++k) {
    const double* col = a.data + k * a.rows;
    const double c = x[k];
    for (std::ptrdiff_t r = 0; r < a.rows; ++r) o[r] += col[r] * c;
  }
}

inline void run_tile(MatrixView a, const double* in, double* out,
                     std::ptrdiff_t tile, std::ptrdiff_t blocks) {
  const std::ptrdiff_t first = tile * kTile;
  const double* x = in + first * a.cols;
  double* o = out + first * a.rows;
  if (first + kTile <= blocks) {
    tile4(a, x, o);
  } else {
    for (std::ptrdiff_t b = first; b < blocks; ++b) {
      tile1(a, x, o);
      x += a.cols;
      o += a.rows;
    }
  }
}

}  // namespace

void multiply_blocks_serial(MatrixView a, std::span<const double> in,
                            std::span<double> out, std::ptrdiff_t blocks) {
  const std::ptrdiff_t tiles = (blocks + kTile - 1) / kTile;
  for (std::ptrdiff_t t = 0; t < tiles; ++t)
    run_tile(a, in.data(), out.data(), t, blocks);
}

void multiply_blocks_parallel(MatrixView a, std::span<const double> in,
                              std::span<double> out, std::ptrdiff_t blocks) {
  const std::ptrdiff_t tiles = (blocks + kTile - 1) / kTile;
  const bool worth_it = a.rows * a.cols * blocks >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (worth_it)
  for (std::ptrdiff_t t = 0; t < tiles; ++t)
    run_tile(a, in.data(), out.data(), t, blocks);
}

void gather(std::span<const double> in, std::span<const std::ptrdiff_t> index,
            std::span<double> out) {
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(index.size());
  for (std::ptrdiff_t k = 0; k < count; ++k) out[k] = in[index[k]];
}

}  // namespace sparsecps::kernels
