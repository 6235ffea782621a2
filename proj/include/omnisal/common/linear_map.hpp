#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "omnisal/common/error.hpp"

namespace omnisal {

// Sparse linear operator y = A x in CSR form. Used for the ERP <-> tangent
// resampling operators, which are fixed sparse matrices once a layout and a
// grid size are chosen. Applying the transpose gives the exact adjoint, which
// is what reverse-mode differentiation of a resampling step needs.
struct LinearMap {
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  std::vector<std::uint64_t> row_offsets;  // out_size + 1
  std::vector<std::uint32_t> col_index;
  std::vector<double> weight;

  void apply(const double* x, double* y) const {
    for (std::size_t r = 0; r < out_size; ++r) {
      double acc = 0.0;
      for (std::uint64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
        acc += weight[k] * x[col_index[k]];
      }
      y[r] = acc;
    }
  }

  // y += A^T x, accumulating into y of length in_size.
  void apply_transpose_add(const double* x, double* y) const {
    for (std::size_t r = 0; r < out_size; ++r) {
      const double v = x[r];
      if (v == 0.0) continue;
      for (std::uint64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
        y[col_index[k]] += weight[k] * v;
      }
    }
  }

  std::vector<double> apply(const std::vector<double>& x) const {
    if (x.size() != in_size) throw ShapeError("LinearMap: input length mismatch");
    std::vector<double> y(out_size, 0.0);
    apply(x.data(), y.data());
    return y;
  }
};

// Incremental CSR builder; rows must be finished in order.
class LinearMapBuilder {
 public:
  LinearMapBuilder(std::size_t in_size, std::size_t out_size) {
    map_.in_size = in_size;
    map_.out_size = out_size;
    map_.row_offsets.reserve(out_size + 1);
    map_.row_offsets.push_back(0);
  }

  void add(std::size_t col, double w) {
    map_.col_index.push_back(static_cast<std::uint32_t>(col));
    map_.weight.push_back(w);
  }

  void finish_row() { map_.row_offsets.push_back(map_.col_index.size()); }

  LinearMap build() {
    if (map_.row_offsets.size() != map_.out_size + 1) {
      throw DataError("LinearMapBuilder: row count mismatch");
    }
    return std::move(map_);
  }

 private:
  LinearMap map_;
};

}  // namespace omnisal
