#pragma once

// Synthetic functional data: cubic group means plus a Fourier-basis random
// effect with geometric variance components. Two schemes control how group
// covariances differ: shifting the second basis function by (i-1)*omega, or
// perturbing the square root of the last variance component.

#include <ecfkit/errors.hpp>
#include <ecfkit/grid.hpp>
#include <ecfkit/random.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace ecfkit {

enum class Innovation { gaussian, t4 };
enum class Scheme { shift_basis, last_eigen };

inline std::string_view to_string(Innovation d) { return d == Innovation::gaussian ? "gaussian" : "t4"; }
inline std::string_view to_string(Scheme s) { return s == Scheme::shift_basis ? "shift_basis" : "last_eigen"; }

inline Innovation parse_innovation(std::string_view s) {
    if (s == "gaussian" || s == "normal") return Innovation::gaussian;
    if (s == "t4") return Innovation::t4;
    throw InvalidArgument("unknown innovation distribution '" + std::string(s) + "'");
}

inline Scheme parse_scheme(std::string_view s) {
    if (s == "shift" || s == "shift_basis") return Scheme::shift_basis;
    if (s == "last" || s == "last_eigen") return Scheme::last_eigen;
    throw InvalidArgument("unknown scheme '" + std::string(s) + "'");
}

struct SimConfig {
    std::size_t k = 5;
    std::vector<std::size_t> sizes{20, 25, 22, 18, 16};
    int J = 180;
    int q = 11;
    double a_var = 1.5;
    double rho = 0.1;
    double omega = 0.0;
    double delta_mean = 0.1;
    std::array<double, 4> u{1.0 / std::sqrt(30.0), 2.0 / std::sqrt(30.0), 3.0 / std::sqrt(30.0),
                            4.0 / std::sqrt(30.0)};
    std::array<double, 4> c1{1.0, 2.3, 3.4, 1.5};
    Innovation dist = Innovation::gaussian;
    Scheme scheme = Scheme::shift_basis;

    /// High-frequency scheme defaults: two groups, q = 25, zero means.
    static SimConfig last_eigen_defaults() {
        SimConfig c;
        c.k = 2;
        c.sizes = {75, 85};
        c.q = 25;
        c.scheme = Scheme::last_eigen;
        return c;
    }

    void validate() const {
        if (k < 2) throw InvalidArgument("SimConfig: k must be >= 2");
        if (sizes.size() != k) throw InvalidArgument("SimConfig: sizes must have k entries");
        for (auto n : sizes)
            if (n < 2) throw InvalidArgument("SimConfig: every group needs at least 2 curves");
        if (J < 2) throw InvalidArgument("SimConfig: J must be >= 2");
        if (q < 1 || q % 2 == 0) throw InvalidArgument("SimConfig: q must be a positive odd integer");
        if (scheme == Scheme::shift_basis && q < 3) throw InvalidArgument("SimConfig: shift_basis needs q >= 3");
        if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("SimConfig: rho must lie in (0, 1)");
        if (!(a_var > 0.0)) throw InvalidArgument("SimConfig: a must be positive");
        if (!std::isfinite(omega) || !std::isfinite(delta_mean)) throw InvalidArgument("SimConfig: non-finite value");
    }

    [[nodiscard]] Grid grid() const { return make_uniform_grid(J, 0.0, 1.0); }
};

/// Rows phi_1..phi_q: 1, sqrt2 sin(2 pi r t), sqrt2 cos(2 pi r t).
inline Matrix fourier_basis(int q, const Grid& grid) {
    if (q < 1 || q % 2 == 0) throw InvalidArgument("fourier_basis: q must be a positive odd integer");
    const auto J = static_cast<Eigen::Index>(grid.size());
    Matrix phi(q, J);
    const double root2 = std::numbers::sqrt2;
    for (Eigen::Index j = 0; j < J; ++j) {
        const double t = grid.points()[j];
        phi(0, j) = 1.0;
        for (int r = 1; 2 * r <= q - 1; ++r) {
            const double arg = 2.0 * std::numbers::pi * r * t;
            phi(2 * r - 1, j) = root2 * std::sin(arg);
            phi(2 * r, j) = root2 * std::cos(arg);
        }
    }
    return phi;
}

/// Basis of group i (1-based): the second function shifted by (i-1)*omega.
inline Matrix group_basis(const Matrix& phi, std::size_t i, double omega) {
    if (i < 1) throw InvalidArgument("group_basis: group index is 1-based");
    Matrix psi = phi;
    const double shift = static_cast<double>(i - 1) * omega;
    if (shift != 0.0) {
        if (psi.rows() < 2) throw InvalidArgument("group_basis: basis has no second function");
        psi.row(1).array() += shift;
    }
    return psi;
}

/// c0 + c1 t + c2 t^2 + c3 t^3 on the grid.
inline Vector mean_function(const std::array<double, 4>& c, const Grid& grid) {
    const Vector& t = grid.points();
    return (c[0] + (c[1] + (c[2] + c[3] * t.array()) * t.array()) * t.array()).matrix();
}

/// One unit-variance innovation; t4 is scaled by 1/sqrt(2).
inline double draw_innovation(Innovation dist, CounterRng& rng) {
    if (dist == Innovation::gaussian) return rng.normal();
    const double z = rng.normal();
    const double chi4 = rng.chi_square(4);
    return z / std::sqrt(chi4 / 4.0) / std::numbers::sqrt2;
}

inline std::vector<double> draw_innovations(Innovation dist, std::size_t count, CounterRng& rng) {
    std::vector<double> out(count);
    for (auto& x : out) x = draw_innovation(dist, rng);
    return out;
}

/// Standard deviations sqrt(lambda_r) of the random-effect coefficients for group i (1-based).
inline Vector coefficient_scales(const SimConfig& cfg, std::size_t i) {
    Vector sd(cfg.q);
    if (cfg.scheme == Scheme::shift_basis) {
        for (int r = 0; r < cfg.q; ++r) sd[r] = std::sqrt(cfg.a_var * std::pow(cfg.rho, r));
    } else {
        for (int r = 0; r < cfg.q; ++r) sd[r] = std::sqrt(std::pow(cfg.rho, r));
        sd[cfg.q - 1] += static_cast<double>(i - 1) * cfg.omega;
    }
    return sd;
}

/// Group basis for group i (1-based) under the configured scheme.
inline Matrix scheme_basis(const SimConfig& cfg, const Matrix& phi, std::size_t i) {
    return cfg.scheme == Scheme::shift_basis ? group_basis(phi, i, cfg.omega) : phi;
}

inline Vector scheme_mean(const SimConfig& cfg, const Grid& grid, std::size_t i) {
    if (cfg.scheme == Scheme::last_eigen) return Vector::Zero(static_cast<Eigen::Index>(grid.size()));
    std::array<double, 4> c = cfg.c1;
    for (std::size_t m = 0; m < 4; ++m) c[m] += static_cast<double>(i - 1) * cfg.delta_mean * cfg.u[m];
    return mean_function(c, grid);
}

/// Population covariance of group i (1-based): Psi_i^T diag(lambda) Psi_i.
inline CovSurface analytic_group_cov(const SimConfig& cfg, std::size_t i) {
    cfg.validate();
    if (i < 1 || i > cfg.k) throw InvalidArgument("analytic_group_cov: group index out of range");
    const Grid grid = cfg.grid();
    const Matrix psi = scheme_basis(cfg, fourier_basis(cfg.q, grid), i);
    const Vector var = coefficient_scales(cfg, i).cwiseAbs2();
    Matrix cov = psi.transpose() * var.asDiagonal() * psi;
    cov = 0.5 * (cov + cov.transpose()).eval();
    return CovSurface(grid, std::move(cov));
}

/// Draws a dataset. Subject j of group i uses the stream derive_seed(seed, i, j).
inline Dataset generate_dataset(const SimConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const Grid grid = cfg.grid();
    const Matrix phi = fourier_basis(cfg.q, grid);
    std::vector<GroupData> groups;
    groups.reserve(cfg.k);
    Vector z(cfg.q);
    for (std::size_t i = 1; i <= cfg.k; ++i) {
        const Matrix psi = scheme_basis(cfg, phi, i);
        const Vector sd = coefficient_scales(cfg, i);
        const Vector mean = scheme_mean(cfg, grid, i);
        const auto ni = static_cast<Eigen::Index>(cfg.sizes[i - 1]);
        Matrix coef(ni, cfg.q);
        for (Eigen::Index j = 0; j < ni; ++j) {
            CounterRng rng(derive_seed(seed, i, static_cast<std::uint64_t>(j)));
            for (int r = 0; r < cfg.q; ++r) coef(j, r) = sd[r] * draw_innovation(cfg.dist, rng);
        }
        Matrix curves = coef * psi;
        curves.rowwise() += mean.transpose();
        groups.push_back(GroupData{"g" + std::to_string(i), std::move(curves)});
    }
    return Dataset(grid, std::move(groups));
}

}  // namespace ecfkit
