#pragma once

// Mean and covariance estimators, residuals, and the trace functionals of a
// covariance kernel that feed the Welch-Satterthwaite moment matching.

#include <ecfkit/errors.hpp>
#include <ecfkit/grid.hpp>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ecfkit {

/// tr(g), tr(g^{(x)2}) and tr(g^{(x)4}) of a kernel g.
struct TraceSet {
    double tr_gamma = 0.0;
    double tr_gamma2 = 0.0;
    double tr_gamma4 = 0.0;
};

/// Unbiased (under Gaussianity) estimates of tr^2(g) and tr(g^{(x)2}).
struct BiasReducedTraces {
    double tr2_gamma_hat = 0.0;
    double tr_gamma2_hat = 0.0;
};

inline Vector group_mean(const GroupData& g) {
    if (g.curves.rows() == 0) throw InsufficientSample("group '" + g.id + "' is empty");
    return g.curves.colwise().mean().transpose();
}

/// Curves minus the group mean (the estimated subject-effect functions).
inline Matrix residuals(const GroupData& g) {
    const Vector mean = group_mean(g);
    return g.curves.rowwise() - mean.transpose();
}

namespace detail {

/// R^T R / divisor, exactly symmetric.
inline Matrix cross_product(const Matrix& r, double divisor) {
    const Eigen::Index J = r.cols();
    Matrix out = Matrix::Zero(J, J);
    out.selfadjointView<Eigen::Lower>().rankUpdate(r.transpose(), 1.0 / divisor);
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

}  // namespace detail

/// Sample covariance with divisor n_i - 1.
inline CovSurface group_cov(const GroupData& g, const Grid& grid) {
    if (g.curves.rows() < 2)
        throw InsufficientSample("group '" + g.id + "' needs at least 2 curves for a covariance");
    if (g.curves.cols() != static_cast<Eigen::Index>(grid.size()))
        throw InvalidArgument("group '" + g.id + "' does not match the grid");
    const Matrix r = residuals(g);
    return CovSurface(grid, detail::cross_product(r, static_cast<double>(r.rows() - 1)));
}

/// (n_i - 1)-weighted average of group covariances, divisor n - k.
inline CovSurface pooled_cov(std::span<const CovSurface> covs, std::span<const std::size_t> sizes) {
    if (covs.size() != sizes.size()) throw InvalidArgument("pooled_cov: covs and sizes differ in length");
    if (covs.size() < 2) throw InvalidArgument("pooled_cov: need at least 2 groups");
    std::size_t n = 0;
    for (std::size_t i = 0; i < covs.size(); ++i) {
        if (!(covs[i].grid() == covs[0].grid())) throw InvalidArgument("pooled_cov: grid mismatch");
        if (sizes[i] < 1) throw InvalidArgument("pooled_cov: group sizes must be positive");
        n += sizes[i];
    }
    const std::size_t k = covs.size();
    if (n <= k) throw InvalidArgument("pooled_cov: need n - k >= 1");
    const double denom = static_cast<double>(n - k);
    Matrix acc = Matrix::Zero(covs[0].values().rows(), covs[0].values().cols());
    for (std::size_t i = 0; i < k; ++i) acc += (static_cast<double>(sizes[i] - 1) / denom) * covs[i].values();
    return CovSurface(covs[0].grid(), std::move(acc));
}

inline CovSurface pooled_cov(const std::vector<CovSurface>& covs, const std::vector<std::size_t>& sizes) {
    return pooled_cov(std::span<const CovSurface>(covs), std::span<const std::size_t>(sizes));
}

/// Integral of the diagonal.
inline double trace_gamma(const CovSurface& s) {
    return s.grid().weights().dot(s.values().diagonal());
}

/// Double integral of the squared kernel.
inline double trace_gamma_sq(const CovSurface& s) {
    return s.grid().integrate2(s.values().cwiseAbs2());
}

/// Trace of the fourth operator power. With K = D^{1/2} S D^{1/2} (D = diag(w)),
/// tr((S D)^4) = tr(K^4) = ||K^2||_F^2.
inline double trace_gamma_quad(const CovSurface& s) {
    const Vector sw = s.grid().weights().cwiseSqrt();
    const Matrix k = sw.asDiagonal() * s.values() * sw.asDiagonal();
    const Matrix k2 = k * k;
    return k2.squaredNorm();
}

inline TraceSet traces(const CovSurface& s) {
    return TraceSet{trace_gamma(s), trace_gamma_sq(s), trace_gamma_quad(s)};
}

/// Finite-sample corrections of tr^2(g) and tr(g^{(x)2}) computed from the
/// plug-in traces of the pooled covariance; requires n - k >= 2.
inline BiasReducedTraces bias_reduced_traces(double tr_g, double tr_g2, std::size_t n, std::size_t k) {
    if (n <= k + 1)
        throw DegenerateDof("bias-reduced traces need n - k >= 2 (got n=" + std::to_string(n) +
                            ", k=" + std::to_string(k) + ")");
    const double m = static_cast<double>(n - k);
    const double denom = (m - 1.0) * (m + 2.0);
    BiasReducedTraces out;
    out.tr2_gamma_hat = m * (m + 1.0) / denom * (tr_g * tr_g - 2.0 * tr_g2 / (m + 1.0));
    out.tr_gamma2_hat = m * m / denom * (tr_g2 - tr_g * tr_g / m);
    return out;
}

}  // namespace ecfkit
