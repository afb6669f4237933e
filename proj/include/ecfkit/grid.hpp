#pragma once

// Grid and dataset model. Every integral in the library is a weighted sum
// over the grid points, so the weights attached here define the quadrature.

#include <ecfkit/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace ecfkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Design time points with positive quadrature weights.
class Grid {
public:
    Grid(Vector points, Vector weights) : points_(std::move(points)), weights_(std::move(weights)) {
        if (points_.size() < 2) throw InvalidArgument("grid needs at least 2 points");
        if (weights_.size() != points_.size())
            throw InvalidArgument("grid points and weights differ in length");
        for (Eigen::Index j = 0; j < points_.size(); ++j) {
            if (!std::isfinite(points_[j]) || !std::isfinite(weights_[j]))
                throw InvalidArgument("grid values must be finite");
            if (weights_[j] <= 0.0) throw InvalidArgument("grid weights must be positive");
            if (j > 0 && !(points_[j] > points_[j - 1]))
                throw InvalidArgument("grid points must be strictly increasing");
        }
    }

    /// Trapezoid weights for arbitrary strictly increasing points.
    static Grid trapezoid(Vector points) {
        const Eigen::Index J = points.size();
        if (J < 2) throw InvalidArgument("grid needs at least 2 points");
        Vector w = Vector::Zero(J);
        for (Eigen::Index j = 0; j + 1 < J; ++j) {
            const double h = points[j + 1] - points[j];
            w[j] += 0.5 * h;
            w[j + 1] += 0.5 * h;
        }
        return Grid(std::move(points), std::move(w));
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(points_.size()); }
    [[nodiscard]] const Vector& points() const noexcept { return points_; }
    [[nodiscard]] const Vector& weights() const noexcept { return weights_; }
    [[nodiscard]] double lower() const { return points_[0]; }
    [[nodiscard]] double upper() const { return points_[points_.size() - 1]; }

    /// Weighted sum of f over the grid.
    [[nodiscard]] double integrate(const Vector& f) const {
        if (f.size() != points_.size()) throw InvalidArgument("integrand length does not match grid");
        return weights_.dot(f);
    }

    /// Weighted double sum of a J x J surface.
    [[nodiscard]] double integrate2(const Matrix& f) const {
        if (f.rows() != points_.size() || f.cols() != points_.size())
            throw InvalidArgument("surface shape does not match grid");
        return weights_.dot(f * weights_);
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.points_ == b.points_ && a.weights_ == b.weights_;
    }

private:
    Vector points_;
    Vector weights_;
};

/// J equally spaced points on [a, b] with trapezoid weights.
inline Grid make_uniform_grid(int J, double a, double b) {
    if (J < 2) throw InvalidArgument("make_uniform_grid: J must be >= 2");
    if (!(a < b)) throw InvalidArgument("make_uniform_grid: need a < b");
    const double step = (b - a) / static_cast<double>(J - 1);
    Vector t(J);
    Vector w(J);
    for (int j = 0; j < J; ++j) {
        t[j] = a + step * static_cast<double>(j);
        w[j] = step;
    }
    t[J - 1] = b;
    w[0] = 0.5 * step;
    w[J - 1] = 0.5 * step;
    return Grid(std::move(t), std::move(w));
}

/// One group of curves sampled on a common grid; rows are subjects.
struct GroupData {
    std::string id;
    Matrix curves;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(curves.rows()); }
};

/// k groups sharing one grid.
class Dataset {
public:
    Dataset(Grid grid, std::vector<GroupData> groups) : grid_(std::move(grid)), groups_(std::move(groups)) {
        if (groups_.size() < 2) throw InvalidArgument("dataset needs at least 2 groups");
        const auto J = static_cast<Eigen::Index>(grid_.size());
        for (const auto& g : groups_) {
            if (g.curves.cols() != J)
                throw InvalidArgument("group '" + g.id + "' has " + std::to_string(g.curves.cols()) +
                                      " columns, grid has " + std::to_string(J));
            if (g.curves.rows() < 2)
                throw InsufficientSample("group '" + g.id + "' has fewer than 2 curves");
            if (!g.curves.allFinite()) throw InvalidArgument("group '" + g.id + "' has non-finite values");
        }
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] const std::vector<GroupData>& groups() const noexcept { return groups_; }
    [[nodiscard]] std::size_t k() const noexcept { return groups_.size(); }

    [[nodiscard]] std::size_t total_size() const noexcept {
        std::size_t n = 0;
        for (const auto& g : groups_) n += g.size();
        return n;
    }

    [[nodiscard]] std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> out;
        out.reserve(groups_.size());
        for (const auto& g : groups_) out.push_back(g.size());
        return out;
    }

private:
    Grid grid_;
    std::vector<GroupData> groups_;
};

/// Relative asymmetry tolerance used for covariance surfaces.
inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    const double scale = 1.0 + (m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// A symmetric J x J discretization of a covariance kernel.
class CovSurface {
public:
    CovSurface(Grid grid, Matrix values) : grid_(std::move(grid)), values_(std::move(values)) {
        const auto J = static_cast<Eigen::Index>(grid_.size());
        if (values_.rows() != J || values_.cols() != J)
            throw InvalidArgument("covariance surface must be J x J");
        if (!values_.allFinite()) throw InvalidArgument("covariance surface has non-finite values");
        if (!is_symmetric(values_)) throw InvalidArgument("covariance surface is not symmetric");
    }

    static CovSurface zero(const Grid& grid) {
        const auto J = static_cast<Eigen::Index>(grid.size());
        return CovSurface(grid, Matrix::Zero(J, J));
    }

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return grid_.size(); }

private:
    Grid grid_;
    Matrix values_;
};

}  // namespace ecfkit
