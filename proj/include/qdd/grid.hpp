#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <utility>

#include "qdd/error.hpp"

namespace qdd {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Uniform mesh on the truncated line [-L, L].
class Grid1D {
public:
    /// Smallest admissible node count: the widest stencil has half-width 3.
    static constexpr Index min_nodes = 7;

    Grid1D(double half_width, Index node_count) : half_width_(half_width), size_(node_count) {
        if (!(half_width > 0.0) || !std::isfinite(half_width))
            fail(ErrorKind::invalid_argument, "grid half-width must be positive and finite");
        if (node_count < min_nodes)
            fail(ErrorKind::invalid_argument, "too few nodes: need at least 7, got " + std::to_string(node_count));
        spacing_ = 2.0 * half_width / static_cast<double>(node_count - 1);
    }

    double half_width() const noexcept { return half_width_; }
    Index size() const noexcept { return size_; }
    double spacing() const noexcept { return spacing_; }

    double x(Index j) const noexcept { return -half_width_ + static_cast<double>(j) * spacing_; }

    Eigen::VectorXd nodes() const {
        Eigen::VectorXd out(size_);
        for (Index j = 0; j < size_; ++j) out[j] = x(j);
        return out;
    }

    friend bool operator==(const Grid1D& a, const Grid1D& b) noexcept {
        return a.half_width_ == b.half_width_ && a.size_ == b.size_;
    }

private:
    double half_width_;
    Index size_;
    double spacing_ = 0.0;
};

inline Grid1D make_grid(double half_width, Index node_count) { return Grid1D(half_width, node_count); }

/// Constant values assumed beyond -L and +L.
template <typename Scalar>
struct FarField {
    Scalar left;
    Scalar right;
};

/// Nodal values on a grid plus the far-field pair used for ghost extension.
///
/// When no far-field pair is supplied, the end values double as the far field.
template <typename Scalar>
class Field {
public:
    using Vector = VectorX<Scalar>;

    explicit Field(const Grid1D& grid) : grid_(grid), values_(Vector::Zero(grid.size())) {}

    Field(const Grid1D& grid, Vector values, std::optional<FarField<Scalar>> far = std::nullopt)
        : grid_(grid), values_(std::move(values)), far_(far) {
        if (values_.size() != grid_.size())
            fail(ErrorKind::invalid_argument, "field length does not match grid node count");
    }

    template <typename Fn>
    static Field sample(const Grid1D& grid, Fn&& fn, std::optional<FarField<Scalar>> far = std::nullopt) {
        Vector v(grid.size());
        for (Index j = 0; j < grid.size(); ++j) v[j] = fn(grid.x(j));
        return Field(grid, std::move(v), far);
    }

    const Grid1D& grid() const noexcept { return grid_; }
    Index size() const noexcept { return values_.size(); }

    const Vector& values() const noexcept { return values_; }
    Vector& values() noexcept { return values_; }

    Scalar operator[](Index j) const { return values_[j]; }
    Scalar& operator[](Index j) { return values_[j]; }

    bool has_far_field() const noexcept { return far_.has_value(); }
    FarField<Scalar> far_field() const noexcept {
        return far_.value_or(FarField<Scalar>{values_[0], values_[values_.size() - 1]});
    }
    void set_far_field(FarField<Scalar> far) noexcept { far_ = far; }

    bool all_finite() const { return values_.allFinite(); }

    Field& operator+=(const Field& o) {
        values_ += o.values_;
        if (far_ || o.far_) far_ = FarField<Scalar>{far_field().left + o.far_field().left, far_field().right + o.far_field().right};
        return *this;
    }
    Field& operator-=(const Field& o) {
        const auto a = far_field();
        const auto b = o.far_field();
        const bool keep = far_ || o.far_;
        values_ -= o.values_;
        if (keep) far_ = FarField<Scalar>{a.left - b.left, a.right - b.right};
        return *this;
    }
    Field& operator*=(Scalar s) {
        values_ *= s;
        if (far_) far_ = FarField<Scalar>{far_->left * s, far_->right * s};
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(Scalar s, Field a) { return a *= s; }
    friend Field operator*(Field a, Scalar s) { return a *= s; }

private:
    Grid1D grid_;
    Vector values_;
    std::optional<FarField<Scalar>> far_;
};

using ScalarField = Field<double>;

namespace detail {

inline constexpr Index ghost_width = 3;

/// Copy of `f` padded with three constant ghost nodes on each side.
template <typename Scalar>
VectorX<Scalar> extend(const Field<Scalar>& f) {
    const Index n = f.size();
    const auto far = f.far_field();
    VectorX<Scalar> e(n + 2 * ghost_width);
    e.head(ghost_width).setConstant(far.left);
    e.segment(ghost_width, n) = f.values();
    e.tail(ghost_width).setConstant(far.right);
    return e;
}

}  // namespace detail

/// Second-order centered difference of order 1..4 with constant ghost extension.
/// The result's far field is zero.
template <typename Scalar>
Field<Scalar> diff(const Field<Scalar>& field, int order) {
    if (order < 1 || order > 4)
        fail(ErrorKind::invalid_argument, "derivative order must be in 1..4, got " + std::to_string(order));
    const Index n = field.size();
    const double h = field.grid().spacing();
    const auto e = detail::extend(field);
    constexpr Index g = detail::ghost_width;
    VectorX<Scalar> out(n);
    switch (order) {
        case 1: {
            const double c = 1.0 / (2.0 * h);
            for (Index j = 0; j < n; ++j) out[j] = (e[j + g + 1] - e[j + g - 1]) * c;
            break;
        }
        case 2: {
            const double c = 1.0 / (h * h);
            for (Index j = 0; j < n; ++j) out[j] = (e[j + g + 1] - 2.0 * e[j + g] + e[j + g - 1]) * c;
            break;
        }
        case 3: {
            const double c = 1.0 / (2.0 * h * h * h);
            for (Index j = 0; j < n; ++j)
                out[j] = (e[j + g + 2] - 2.0 * e[j + g + 1] + 2.0 * e[j + g - 1] - e[j + g - 2]) * c;
            break;
        }
        default: {
            const double c = 1.0 / (h * h * h * h);
            for (Index j = 0; j < n; ++j)
                out[j] = (e[j + g + 2] - 4.0 * e[j + g + 1] + 6.0 * e[j + g] - 4.0 * e[j + g - 1] + e[j + g - 2]) * c;
            break;
        }
    }
    return Field<Scalar>(field.grid(), std::move(out), FarField<Scalar>{Scalar(0), Scalar(0)});
}

/// Composite trapezoid rule over [-L, L].
template <typename Scalar>
Scalar integrate(const Field<Scalar>& field) {
    const auto& v = field.values();
    const Index n = v.size();
    Scalar interior = v.segment(1, n - 2).sum();
    return field.grid().spacing() * (interior + Scalar(0.5) * (v[0] + v[n - 1]));
}

/// Running trapezoid integral from -L; the first value is zero.
template <typename Scalar>
Field<Scalar> cumulative_integral(const Field<Scalar>& field) {
    const auto& v = field.values();
    const Index n = v.size();
    const double half_h = 0.5 * field.grid().spacing();
    VectorX<Scalar> out(n);
    out[0] = Scalar(0);
    for (Index j = 1; j < n; ++j) out[j] = out[j - 1] + half_h * (v[j] + v[j - 1]);
    const Scalar right = out[n - 1];
    return Field<Scalar>(field.grid(), std::move(out), FarField<Scalar>{Scalar(0), right});
}

}  // namespace qdd
