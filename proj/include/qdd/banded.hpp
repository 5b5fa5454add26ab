#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "qdd/error.hpp"
#include "qdd/grid.hpp"

namespace qdd {

/// Square matrix with `lower` sub- and `upper` super-diagonals, stored row-major by band.
/// Entries outside the band are zero by construction; writes there are rejected.
template <typename Scalar>
class BandedMatrix {
public:
    using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    BandedMatrix(Index n, Index lower, Index upper) : n_(n), lower_(lower), upper_(upper) {
        if (n <= 0 || lower < 0 || upper < 0)
            fail(ErrorKind::invalid_argument, "banded matrix needs n > 0 and nonnegative bandwidths");
        band_ = Storage::Zero(n, lower + upper + 1);
    }

    static BandedMatrix identity(Index n, Index lower = 0, Index upper = 0) {
        BandedMatrix m(n, lower, upper);
        for (Index i = 0; i < n; ++i) m.ref(i, i) = Scalar(1);
        return m;
    }

    Index size() const noexcept { return n_; }
    Index lower() const noexcept { return lower_; }
    Index upper() const noexcept { return upper_; }

    bool in_band(Index i, Index j) const noexcept {
        return i >= 0 && j >= 0 && i < n_ && j < n_ && j - i <= upper_ && i - j <= lower_;
    }

    Scalar operator()(Index i, Index j) const { return in_band(i, j) ? band_(i, j - i + lower_) : Scalar(0); }

    Scalar& ref(Index i, Index j) {
        if (!in_band(i, j)) fail(ErrorKind::invalid_argument, "write outside the band");
        return band_(i, j - i + lower_);
    }

    void add(Index i, Index j, Scalar v) { ref(i, j) += v; }

    void set_zero() { band_.setZero(); }

    VectorX<Scalar> operator*(const VectorX<Scalar>& x) const {
        VectorX<Scalar> y = VectorX<Scalar>::Zero(n_);
        for (Index i = 0; i < n_; ++i) {
            const Index j0 = std::max<Index>(0, i - lower_);
            const Index j1 = std::min<Index>(n_ - 1, i + upper_);
            Scalar s(0);
            for (Index j = j0; j <= j1; ++j) s += band_(i, j - i + lower_) * x[j];
            y[i] = s;
        }
        return y;
    }

    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> to_dense() const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d =
            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n_, n_);
        for (Index i = 0; i < n_; ++i)
            for (Index j = std::max<Index>(0, i - lower_); j <= std::min<Index>(n_ - 1, i + upper_); ++j)
                d(i, j) = (*this)(i, j);
        return d;
    }

    Scalar max_abs() const { return band_.cwiseAbs().maxCoeff(); }

    const Storage& band() const noexcept { return band_; }

private:
    Index n_;
    Index lower_;
    Index upper_;
    Storage band_;
};

/// LU factorization with partial pivoting restricted to the band (the dgbtrf scheme).
template <typename Scalar>
class BandedLU {
public:
    static constexpr double pivot_threshold = 1e-14;

    explicit BandedLU(const BandedMatrix<Scalar>& a)
        : n_(a.size()), kl_(a.lower()), ku_(a.upper()), work_(n_, 2 * kl_ + ku_ + 1), pivots_(n_) {
        work_.setZero();
        for (Index i = 0; i < n_; ++i)
            for (Index j = std::max<Index>(0, i - kl_); j <= std::min<Index>(n_ - 1, i + ku_); ++j) at(i, j) = a(i, j);

        using std::abs;
        const double scale = static_cast<double>(abs(a.max_abs()));
        const double tiny = pivot_threshold * scale;
        const Index width = kl_ + ku_;

        for (Index k = 0; k < n_; ++k) {
            const Index last_row = std::min<Index>(n_ - 1, k + kl_);
            const Index last_col = std::min<Index>(n_ - 1, k + width);

            Index p = k;
            double best = static_cast<double>(abs(at(k, k)));
            for (Index i = k + 1; i <= last_row; ++i) {
                const double v = static_cast<double>(abs(at(i, k)));
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (!(best > tiny) || scale == 0.0)
                fail(ErrorKind::singular_matrix, "pivot below threshold at row " + std::to_string(k));
            pivots_[k] = p;
            if (p != k)
                for (Index j = k; j <= last_col; ++j) std::swap(at(k, j), at(p, j));

            const Scalar inv = Scalar(1) / at(k, k);
            for (Index i = k + 1; i <= last_row; ++i) {
                const Scalar l = at(i, k) * inv;
                at(i, k) = l;
                if (l == Scalar(0)) continue;
                for (Index j = k + 1; j <= last_col; ++j) at(i, j) -= l * at(k, j);
            }
        }
    }

    VectorX<Scalar> solve(VectorX<Scalar> b) const {
        if (b.size() != n_) fail(ErrorKind::invalid_argument, "right-hand side length mismatch");
        for (Index k = 0; k < n_; ++k) {
            if (pivots_[k] != k) std::swap(b[k], b[pivots_[k]]);
            const Index last_row = std::min<Index>(n_ - 1, k + kl_);
            for (Index i = k + 1; i <= last_row; ++i) b[i] -= at(i, k) * b[k];
        }
        const Index width = kl_ + ku_;
        for (Index k = n_ - 1; k >= 0; --k) {
            Scalar s = b[k];
            const Index last_col = std::min<Index>(n_ - 1, k + width);
            for (Index j = k + 1; j <= last_col; ++j) s -= at(k, j) * b[j];
            b[k] = s / at(k, k);
        }
        return b;
    }

private:
    // Row i keeps columns i - kl .. i + kl + ku (room for pivoting fill-in).
    Scalar& at(Index i, Index j) { return work_(i, j - i + kl_); }
    const Scalar& at(Index i, Index j) const { return work_(i, j - i + kl_); }

    Index n_;
    Index kl_;
    Index ku_;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> work_;
    std::vector<Index> pivots_;
};

template <typename Scalar>
VectorX<Scalar> band_solve(const BandedMatrix<Scalar>& a, const VectorX<Scalar>& rhs) {
    return BandedLU<Scalar>(a).solve(rhs);
}

}  // namespace qdd
