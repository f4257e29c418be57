#pragma once

#include <algorithm>
#include <complex>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dshn/dense.hpp"
#include "dshn/hypergraph.hpp"

namespace dshn {

inline constexpr Index kDenseExportCap = 4096;

/// Sparse matrix of d x d complex blocks in coordinate form. Blocks are
/// accumulated with add_block, then finalize() sorts them row-major and sums
/// duplicate coordinates. Read accessors require a finalized matrix.
class BlockComplexMatrix {
 public:
  struct Entry {
    Index row = 0;
    Index col = 0;
    ComplexMatrix block;
  };

  BlockComplexMatrix() = default;
  BlockComplexMatrix(Index block_rows, Index block_cols, Index block_dim)
      : rows_(block_rows), cols_(block_cols), dim_(block_dim) {}

  Index block_rows() const { return rows_; }
  Index block_cols() const { return cols_; }
  Index block_dim() const { return dim_; }
  Index num_blocks() const { return entries_.size(); }
  bool finalized() const { return finalized_; }
  const std::vector<Entry>& entries() const { return entries_; }

  void add_block(Index row, Index col, ComplexMatrix block) {
    if (row >= rows_ || col >= cols_) throw std::out_of_range("block coordinate out of range");
    if (block.rows() != dim_ || block.cols() != dim_) throw std::invalid_argument("block has wrong shape");
    entries_.push_back({row, col, std::move(block)});
    finalized_ = false;
  }

  BlockComplexMatrix& finalize() {
    std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Entry> merged;
    merged.reserve(entries_.size());
    for (auto& e : entries_) {
      if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
        merged.back().block += e.block;
      } else {
        merged.push_back(std::move(e));
      }
    }
    entries_ = std::move(merged);
    row_start_.assign(rows_ + 1, 0);
    for (const auto& e : entries_) ++row_start_[e.row + 1];
    for (Index r = 0; r < rows_; ++r) row_start_[r + 1] += row_start_[r];
    finalized_ = true;
    return *this;
  }

  /// Stored block at (row, col), or nullptr if structurally zero.
  const ComplexMatrix* find(Index row, Index col) const {
    require_finalized();
    auto first = entries_.begin() + static_cast<std::ptrdiff_t>(row_start_[row]);
    auto last = entries_.begin() + static_cast<std::ptrdiff_t>(row_start_[row + 1]);
    auto it = std::lower_bound(first, last, col, [](const Entry& e, Index c) { return e.col < c; });
    return (it != last && it->col == col) ? &it->block : nullptr;
  }

  /// Block at (row, col), zero if absent.
  ComplexMatrix block(Index row, Index col) const {
    if (row >= rows_ || col >= cols_) throw std::out_of_range("block coordinate out of range");
    const auto* b = find(row, col);
    return b ? *b : ComplexMatrix(dim_, dim_);
  }

  /// Range of entries in one block row.
  std::pair<const Entry*, const Entry*> row_entries(Index row) const {
    require_finalized();
    return {entries_.data() + row_start_[row], entries_.data() + row_start_[row + 1]};
  }

  BlockComplexMatrix adjoint() const {
    BlockComplexMatrix out(cols_, rows_, dim_);
    for (const auto& e : entries_) out.add_block(e.col, e.row, dshn::adjoint(e.block));
    return out.finalize();
  }

  /// Dense export, refused above kDenseExportCap total rows or columns.
  ComplexMatrix to_dense() const {
    const Index r = rows_ * dim_;
    const Index c = cols_ * dim_;
    if (r > kDenseExportCap || c > kDenseExportCap) {
      throw std::length_error("dense export of " + std::to_string(r) + "x" + std::to_string(c) +
                              " exceeds cap " + std::to_string(kDenseExportCap) +
                              "; use the matrix-free operators instead");
    }
    ComplexMatrix out(r, c);
    for (const auto& e : entries_)
      for (Index i = 0; i < dim_; ++i)
        for (Index j = 0; j < dim_; ++j) out(e.row * dim_ + i, e.col * dim_ + j) += e.block(i, j);
    return out;
  }

  /// y = M x for x with block_cols * d rows and any number of columns.
  ComplexMatrix multiply(const ComplexMatrix& x) const {
    require_finalized();
    if (x.rows() != cols_ * dim_) throw std::invalid_argument("block multiply: dimension mismatch");
    const Index f = x.cols();
    ComplexMatrix y(rows_ * dim_, f);
    for (const auto& e : entries_) {
      for (Index i = 0; i < dim_; ++i) {
        Complex* yr = &y(e.row * dim_ + i, 0);
        for (Index k = 0; k < dim_; ++k) {
          const Complex a = e.block(i, k);
          if (a == Complex{}) continue;
          const Complex* xr = &x(e.col * dim_ + k, 0);
          for (Index j = 0; j < f; ++j) yr[j] += a * xr[j];
        }
      }
    }
    return y;
  }

 private:
  void require_finalized() const {
    if (!finalized_) throw std::logic_error("block matrix used before finalize()");
  }

  Index rows_ = 0;
  Index cols_ = 0;
  Index dim_ = 1;
  std::vector<Entry> entries_;
  std::vector<Index> row_start_;
  bool finalized_ = true;
};

/// Block product A * B.
inline BlockComplexMatrix block_product(const BlockComplexMatrix& a, const BlockComplexMatrix& b) {
  if (a.block_cols() != b.block_rows() || a.block_dim() != b.block_dim()) {
    throw std::invalid_argument("block_product: shape mismatch");
  }
  BlockComplexMatrix out(a.block_rows(), b.block_cols(), a.block_dim());
  for (Index r = 0; r < a.block_rows(); ++r) {
    std::map<Index, ComplexMatrix> acc;
    auto [afirst, alast] = a.row_entries(r);
    for (auto* ae = afirst; ae != alast; ++ae) {
      auto [bfirst, blast] = b.row_entries(ae->col);
      for (auto* be = bfirst; be != blast; ++be) {
        auto prod = matmul(ae->block, be->block);
        auto it = acc.find(be->col);
        if (it == acc.end()) {
          acc.emplace(be->col, std::move(prod));
        } else {
          it->second += prod;
        }
      }
    }
    for (auto& [c, blk] : acc) out.add_block(r, c, std::move(blk));
  }
  return out.finalize();
}

/// Writes one matrix row per line, entries as re+imj (or re-imj).
inline void write_dense(const ComplexMatrix& m, std::ostream& out) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const Complex z = m(i, j);
      if (j) out << ' ';
      out << detail::format_double(z.real());
      if (z.imag() >= 0.0 && !std::signbit(z.imag())) out << '+';
      out << detail::format_double(z.imag()) << 'j';
    }
    out << '\n';
  }
}

}  // namespace dshn
