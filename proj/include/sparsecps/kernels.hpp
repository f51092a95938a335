#pragma once

// Dense block kernels behind the matrix-free Kronecker product.
//
// Both variants compute, for every block b in [0, blocks),
//   out[b*rows .. (b+1)*rows) = A * in[b*cols .. (b+1)*cols)
// with A a rows x cols column-major matrix. Every output entry is the sum
//   ((0 + a(r,0) x0) + a(r,1) x1) + ...
// taken in increasing column order, so the OpenMP variant is bit-identical
// to the serial reference for any thread count and schedule.

#include <cstddef>
#include <span>

namespace sparsecps::kernels {

struct MatrixView {
  const double* data;
  std::ptrdiff_t rows;
  std::ptrdiff_t cols;
};

void multiply_blocks_serial(MatrixView a, std::span<const double> in,
                            std::span<double> out, std::ptrdiff_t blocks);

void multiply_blocks_parallel(MatrixView a, std::span<const double> in,
                              std::span<double> out, std::ptrdiff_t blocks);

// out[k] = in[index[k]]
void gather(std::span<const double> in, std::span<const std::ptrdiff_t> index,
            std::span<double> out);

}  // namespace sparsecps::kernels
