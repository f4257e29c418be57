#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dshn {

using Index = std::size_t;
using Complex = std::complex<double>;

/// Row-major dense matrix. Small blocks (d x d restriction maps, 2 x 2
/// covariances) and dense exports of block matrices both live here.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(Index rows, Index cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(Index rows, Index cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: data size does not match shape");
    }
  }

  static Matrix identity(Index n) {
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(Index r, Index c) { return data_[r * cols_ + c]; }
  const T& operator()(Index r, Index c) const { return data_[r * cols_ + c]; }

  std::span<T> row(Index r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(Index r) const { return {data_.data() + r * cols_, cols_}; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Matrix& operator+=(const Matrix& o) {
    check_same_shape(o);
    for (Index i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    check_same_shape(o);
    for (Index i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  template <typename S>
  Matrix& operator*=(S s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

  bool operator==(const Matrix& o) const = default;

 private:
  void check_same_shape(const Matrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) {
      throw std::invalid_argument("Matrix: shape mismatch");
    }
  }

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

template <typename A, typename B>
auto matmul(const Matrix<A>& a, const Matrix<B>& b) {
  using R = decltype(A{} * B{});
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix<R> out(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index k = 0; k < a.cols(); ++k) {
      const auto aik = a(i, k);
      if (aik == A{}) continue;
      for (Index j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& m) {
  Matrix<T> out(m.cols(), m.rows());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

inline ComplexMatrix adjoint(const ComplexMatrix& m) {
  ComplexMatrix out(m.cols(), m.rows());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out(j, i) = std::conj(m(i, j));
  return out;
}

inline ComplexMatrix to_complex(const RealMatrix& m) {
  ComplexMatrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i];
  return out;
}

template <typename T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  }
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

template <typename T>
double max_abs(const Matrix<T>& a) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i]));
  return worst;
}

template <typename T>
double frobenius_norm(const Matrix<T>& a) {
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) s += std::norm(a.data()[i]);
  return std::sqrt(s);
}

/// max |M - M^dagger| over all entries.
inline double hermitian_defect(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("hermitian_defect: matrix is not square");
  double worst = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i; j < m.cols(); ++j) worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  RealMatrix vectors;          // column k pairs with values[k]; empty unless requested
  int sweeps = 0;
};

/// Cyclic Jacobi for a real symmetric matrix. Iterates until the off-diagonal
/// Frobenius norm drops to rel_tol * ||A||_F (or below an absolute floor).
inline SymmetricEigen jacobi_eigen(RealMatrix a, bool want_vectors, double rel_tol = 1e-12,
                                   int max_sweeps = 100) {
  const Index n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("jacobi_eigen: matrix is not square");
  SymmetricEigen out;
  if (want_vectors) out.vectors = RealMatrix::identity(n);
  const double norm = frobenius_norm(a);
  const double target = rel_tol * norm;

  auto off_norm = [&] {
    double s = 0.0;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    const double off = off_norm();
    if (off <= target || off == 0.0) break;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Skip rotations that cannot change the diagonal at working precision.
        if (sweep > 3 && std::abs(apq) < 1e-300) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        double* rp = &a(p, 0);
        double* rq = &a(q, 0);
        for (Index k = 0; k < n; ++k) {
          const double apk = rp[k];
          const double aqk = rq[k];
          rp[k] = c * apk - s * aqk;
          rq[k] = s * apk + c * aqk;
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;

        if (want_vectors) {
          auto& v = out.vectors;
          for (Index k = 0; k < n; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  out.sweeps = sweep;

  std::vector<Index> order(n);
  for (Index i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) < a(y, y); });
  out.values.resize(n);
  for (Index i = 0; i < n; ++i) out.values[i] = a(order[i], order[i]);
  if (want_vectors) {
    RealMatrix sorted(n, n);
    for (Index k = 0; k < n; ++k)
      for (Index r = 0; r < n; ++r) sorted(r, k) = out.vectors(r, order[k]);
    out.vectors = std::move(sorted);
  }
  return out;
}

/// Applies f to the spectrum of a symmetric matrix: V f(Lambda) V^T.
template <typename F>
RealMatrix symmetric_function(const SymmetricEigen& eig, F&& f) {
  const Index n = eig.values.size();
  RealMatrix out(n, n);
  for (Index k = 0; k < n; ++k) {
    const double fk = f(eig.values[k]);
    for (Index i = 0; i < n; ++i) {
      const double vik = eig.vectors(i, k) * fk;
      for (Index j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
    }
  }
  return out;
}

/// Divided differences of f(x) = x^{-1/2} at the eigenvalues, used to
/// backpropagate through a matrix inverse square root.
inline RealMatrix inverse_sqrt_divided_differences(const std::vector<double>& lambda) {
  const Index n = lambda.size();
  RealMatrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double li = lambda[i];
      const double lj = lambda[j];
      // (li^-1/2 - lj^-1/2)/(li - lj) = -1 / (sqrt(li) sqrt(lj) (sqrt(li) + sqrt(lj)))
      const double si = std::sqrt(li);
      const double sj = std::sqrt(lj);
      k(i, j) = -1.0 / (si * sj * (si + sj));
    }
  }
  return k;
}

/// Gradient of a scalar loss through Y = A^{-1/2} for symmetric positive
/// definite A, given the eigendecomposition of A and dL/dY. Returns dL/dA
/// (symmetric).
inline RealMatrix inverse_sqrt_backward(const SymmetricEigen& eig, const RealMatrix& grad_y) {
  const Index n = eig.values.size();
  const RealMatrix& v = eig.vectors;
  // G~ = V^T sym(gY) V, then V (K o G~) V^T.
  RealMatrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = 0.5 * (grad_y(i, j) + grad_y(j, i));
  const RealMatrix inner = matmul(transpose(v), matmul(g, v));
  const RealMatrix k = inverse_sqrt_divided_differences(eig.values);
  RealMatrix h(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) h(i, j) = k(i, j) * inner(i, j);
  return matmul(v, matmul(h, transpose(v)));
}

}  // namespace dshn
