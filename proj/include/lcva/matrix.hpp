#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lcva/errors.hpp"

namespace lcva {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit reals.
class Matrix {
  public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, Vec data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    Vec& data() { return data_; }
    const Vec& data() const { return data_; }

    // Pointer to the start of row i.
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

inline bool all_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline void check_finite(const std::string& what, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError(what + ": non-finite value at index " + std::to_string(i));
        }
    }
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// y = M x
inline Vec matvec(const Matrix& m, const Vec& x) {
    if (x.size() != m.cols()) {
        throw ShapeError("matvec: input length " + std::to_string(x.size()) +
                         " != cols " + std::to_string(m.cols()));
    }
    Vec y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

// y = M^T x
inline Vec matvec_transpose(const Matrix& m, const Vec& x) {
    if (x.size() != m.rows()) {
        throw ShapeError("matvec_transpose: input length " + std::to_string(x.size()) +
                         " != rows " + std::to_string(m.rows()));
    }
    Vec y(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* r = m.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += r[j] * xi;
    }
    return y;
}

// acc += scale * u v^T
inline void add_outer(Matrix& acc, const Vec& u, const Vec& v, double scale = 1.0) {
    if (u.size() != acc.rows() || v.size() != acc.cols()) {
        throw ShapeError("add_outer: shape mismatch");
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
        double* r = acc.row(i);
        const double ui = scale * u[i];
        for (std::size_t j = 0; j < v.size(); ++j) r[j] += ui * v[j];
    }
}

inline void axpy(Vec& y, double a, const Vec& x) {
    if (y.size() != x.size()) throw ShapeError("axpy: length mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

// Solves A x = b for symmetric positive definite A via Cholesky.
// Returns false when A is not numerically positive definite.
inline bool cholesky_solve(Matrix a, Vec b, Vec& out) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw ShapeError("cholesky_solve: shape mismatch");

    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    const double tol = 1e-13 * std::max(scale, 1.0);

    // In-place lower-triangular factorization.
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (!(d > tol)) return false;
        const double l = std::sqrt(d);
        a(j, j) = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / l;
        }
    }
    // Forward substitution L y = b.
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
        b[i] = s / a(i, i);
    }
    // Back substitution L^T x = y.
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= a(k, ii) * b[k];
        b[ii] = s / a(ii, ii);
    }
    out = std::move(b);
    return true;
}

}  // namespace lcva
