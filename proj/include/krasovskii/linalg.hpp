#pragma once

// Small dense linear algebra for desk-scale systems (n up to ~20):
// row-major matrices, LU solves with partial pivoting, and a cyclic
// Jacobi eigensolver for symmetric matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "krasovskii/errors.hpp"

namespace krasovskii {

using Vec = std::vector<double>;

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Mat(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_)
                throw DimensionError("matrix initializer rows have unequal lengths");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static Mat identity(std::size_t n) {
        Mat r(n, n);
        for (std::size_t i = 0; i < n; ++i) r(i, i) = 1.0;
        return r;
    }

    static Mat diag(const Vec& d) {
        Mat r(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) r(i, i) = d[i];
        return r;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Vec col(std::size_t j) const {
        Vec v(rows_);
        for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
        return v;
    }

    void set_col(std::size_t j, const Vec& v) {
        if (v.size() != rows_) throw DimensionError("set_col: length mismatch");
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
    }

    Mat transposed() const {
        Mat r(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

    Mat& operator+=(const Mat& o) {
        check_same_shape(o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
        return *this;
    }

    Mat& operator-=(const Mat& o) {
        check_same_shape(o, "-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
        return *this;
    }

    Mat& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

private:
    void check_same_shape(const Mat& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionError(std::string("matrix shape mismatch in ") + op);
    }

    std::size_t rows_ = 0, cols_ = 0;
    Vec data_;
};

inline Mat operator+(Mat a, const Mat& b) { return a += b; }
inline Mat operator-(Mat a, const Mat& b) { return a -= b; }
inline Mat operator*(double s, Mat a) { return a *= s; }
inline Mat operator*(Mat a, double s) { return a *= s; }

inline Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw DimensionError("matrix product shape mismatch");
    Mat r(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

inline Vec operator*(const Mat& a, const Vec& x) {
    if (a.cols() != x.size()) throw DimensionError("matrix-vector shape mismatch");
    Vec r(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        r[i] = s;
    }
    return r;
}

// Vector arithmetic. Defined here so formulas read like the mathematics.
inline Vec operator+(Vec a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("vector sum length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

inline Vec operator-(Vec a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("vector difference length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
    return a;
}

inline Vec operator*(double s, Vec a) {
    for (double& v : a) v *= s;
    return a;
}

inline Vec operator-(Vec a) {
    for (double& v : a) v = -v;
    return a;
}

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("dot product length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline double max_abs(const Vec& v) {
    double r = 0.0;
    for (double x : v) r = std::max(r, std::abs(x));
    return r;
}

inline double max_abs(const Mat& a) {
    double r = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r = std::max(r, std::abs(a(i, j)));
    return r;
}

inline Vec concat(const Vec& a, const Vec& b) {
    Vec r;
    r.reserve(a.size() + b.size());
    r.insert(r.end(), a.begin(), a.end());
    r.insert(r.end(), b.begin(), b.end());
    return r;
}

inline Vec slice(const Vec& v, std::size_t begin, std::size_t count) {
    if (begin + count > v.size()) throw DimensionError("slice out of range");
    return Vec(v.begin() + static_cast<std::ptrdiff_t>(begin),
               v.begin() + static_cast<std::ptrdiff_t>(begin + count));
}

inline bool is_symmetric(const Mat& a, double tol) {
    if (a.rows() != a.cols()) return false;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol) return false;
    return true;
}

inline bool all_finite(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Block-diagonal composition of two square matrices.
inline Mat block_diag(const Mat& a, const Mat& b) {
    Mat r(a.rows() + b.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) r(a.rows() + i, a.cols() + j) = b(i, j);
    return r;
}

// ---------------------------------------------------------------------------
// LU factorization with partial pivoting
// ---------------------------------------------------------------------------

struct LuDecomposition {
    Mat lu;
    std::vector<std::size_t> perm;
    bool singular = false;

    static LuDecomposition compute(Mat a) {
        if (a.rows() != a.cols()) throw DimensionError("LU requires a square matrix");
        const std::size_t n = a.rows();
        LuDecomposition d;
        d.perm.resize(n);
        std::iota(d.perm.begin(), d.perm.end(), std::size_t{0});
        const double scale = std::max(1.0, max_abs(a));
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t piv = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
            if (std::abs(a(piv, k)) <= 1e-14 * scale) {
                d.singular = true;
                d.lu = std::move(a);
                return d;
            }
            if (piv != k) {
                for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
                std::swap(d.perm[k], d.perm[piv]);
            }
            for (std::size_t i = k + 1; i < n; ++i) {
                a(i, k) /= a(k, k);
                const double lik = a(i, k);
                if (lik == 0.0) continue;
                for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= lik * a(k, j);
            }
        }
        d.lu = std::move(a);
        return d;
    }

    Vec solve(const Vec& b) const {
        if (singular) throw SolverError("LU solve on singular matrix");
        const std::size_t n = lu.rows();
        if (b.size() != n) throw DimensionError("LU solve: right-hand side length mismatch");
        Vec y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[perm[i]];
            for (std::size_t j = 0; j < i; ++j) s -= lu(i, j) * y[j];
            y[i] = s;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (std::size_t j = ii + 1; j < n; ++j) s -= lu(ii, j) * y[j];
            y[ii] = s / lu(ii, ii);
        }
        return y;
    }
};

inline Vec lu_solve(const Mat& a, const Vec& b) {
    auto d = LuDecomposition::compute(a);
    if (d.singular) throw SolverError("linear solve: matrix is singular to working precision");
    return d.solve(b);
}

inline Mat inverse(const Mat& a) {
    auto d = LuDecomposition::compute(a);
    if (d.singular) throw SolverError("inverse: matrix is singular to working precision");
    const std::size_t n = a.rows();
    Mat r(n, n);
    Vec e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        r.set_col(j, d.solve(e));
        e[j] = 0.0;
    }
    return r;
}

/// Numerical row rank via Gaussian elimination with partial pivoting.
inline std::size_t rank(Mat a, double rel_tol = 1e-10) {
    const std::size_t nr = a.rows(), nc = a.cols();
    const double scale = std::max(1.0, max_abs(a));
    std::size_t r = 0;
    for (std::size_t c = 0; c < nc && r < nr; ++c) {
        std::size_t piv = r;
        for (std::size_t i = r + 1; i < nr; ++i)
            if (std::abs(a(i, c)) > std::abs(a(piv, c))) piv = i;
        if (std::abs(a(piv, c)) <= rel_tol * scale) continue;
        if (piv != r)
            for (std::size_t j = 0; j < nc; ++j) std::swap(a(r, j), a(piv, j));
        for (std::size_t i = r + 1; i < nr; ++i) {
            const double f = a(i, c) / a(r, c);
            for (std::size_t j = c; j < nc; ++j) a(i, j) -= f * a(r, j);
        }
        ++r;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for symmetric matrices
// ---------------------------------------------------------------------------

struct SymmetricEigen {
    Vec values;   // ascending
    Mat vectors;  // column i pairs with values[i]
    int sweeps = 0;
    bool converged = false;
};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// The input is symmetrized first; convergence is reached when the
/// off-diagonal mass falls below `tol` relative to the Frobenius norm.
inline SymmetricEigen jacobi_eigen(const Mat& a_in, double tol = 1e-12, int max_sweeps = 60) {
    if (a_in.rows() != a_in.cols()) throw DimensionError("jacobi_eigen requires a square matrix");
    const std::size_t n = a_in.rows();
    Mat a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (a_in(i, j) + a_in(j, i));

    SymmetricEigen out;
    out.vectors = Mat::identity(n);
    out.values.resize(n);
    if (n == 0) {
        out.converged = true;
        return out;
    }

    double fro = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) fro += a(i, j) * a(i, j);
    fro = std::sqrt(fro);
    const double stop = tol * std::max(1.0, fro);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        if (off_norm() <= stop) {
            out.converged = true;
            break;
        }
        ++out.sweeps;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= stop / (n * n)) continue;
                const double theta = 0.5 * (a(q, q) - a(p, p)) / apq;
                double t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double h = t * apq;
                a(p, p) -= h;
                a(q, q) += h;
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j != p && j != q) {
                        const double ajp = a(j, p), ajq = a(j, q);
                        a(j, p) = a(p, j) = ajp - s * (ajq + tau * ajp);
                        a(j, q) = a(q, j) = ajq + s * (ajp - tau * ajq);
                    }
                    const double vjp = out.vectors(j, p), vjq = out.vectors(j, q);
                    out.vectors(j, p) = vjp - s * (vjq + tau * vjp);
                    out.vectors(j, q) = vjq + s * (vjp - tau * vjq);
                }
            }
        }
    }
    if (!out.converged && off_norm() <= stop) out.converged = true;

    for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);
    // sort ascending, carrying eigenvectors along
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return out.values[i] < out.values[j]; });
    Vec sorted_vals(n);
    Mat sorted_vecs(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        sorted_vals[k] = out.values[idx[k]];
        for (std::size_t i = 0; i < n; ++i) sorted_vecs(i, k) = out.vectors(i, idx[k]);
    }
    out.values = std::move(sorted_vals);
    out.vectors = std::move(sorted_vecs);
    return out;
}

inline double max_eigenvalue(const Mat& sym) {
    auto e = jacobi_eigen(sym);
    if (!e.converged) throw SolverError("jacobi_eigen did not converge");
    return e.values.back();
}

inline double min_eigenvalue(const Mat& sym) {
    auto e = jacobi_eigen(sym);
    if (!e.converged) throw SolverError("jacobi_eigen did not converge");
    return e.values.front();
}

}  // namespace krasovskii
