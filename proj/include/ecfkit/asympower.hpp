#pragma once

// Asymptotic power of the L2-norm test under local alternatives
// g_i = g + (n_i - 1)^{-1/2} d_i. The limit of T_n is a weighted sum of
// independent noncentral chi-square(k-1) variables plus a constant, with
// weights the eigenvalues of the Gaussian covariance kernel of the pooled
// estimator and noncentralities from projecting the contrasted directions
// d onto its eigenfunctions.

#include <ecfkit/chi2.hpp>
#include <ecfkit/ecftest.hpp>
#include <ecfkit/errors.hpp>
#include <ecfkit/grid.hpp>
#include <ecfkit/parallel.hpp>
#include <ecfkit/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

namespace ecfkit {

/// Eigenpairs of the integral operator with kernel S. Columns of `functions`
/// are orthonormal under the weighted inner product sum_j w_j e(t_j) e'(t_j).
struct GammaEigen {
    Vector values;
    Matrix functions;
};

inline GammaEigen gamma_eigen(const Grid& grid, const Matrix& s, double rel_tol = 1e-12) {
    if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw InvalidArgument("gamma_eigen: rel_tol must lie in (0, 1)");
    const auto J = static_cast<Eigen::Index>(grid.size());
    if (s.rows() != J || s.cols() != J) throw InvalidArgument("gamma_eigen: kernel must be J x J");
    if (!is_symmetric(s)) throw InvalidArgument("gamma_eigen: kernel is not symmetric");

    const Vector sw = grid.weights().cwiseSqrt();
    const Matrix k = sw.asDiagonal() * s * sw.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (k + k.transpose()));
    if (solver.info() != Eigen::Success) throw DegenerateData("gamma_eigen: eigendecomposition failed");

    // ascending order from Eigen; walk from the top
    const Vector& ev = solver.eigenvalues();
    const double top = ev[J - 1];
    GammaEigen out;
    if (!(top > 0.0)) {
        out.values.resize(0);
        out.functions.resize(J, 0);
        return out;
    }
    Eigen::Index m = 0;
    while (m < J && ev[J - 1 - m] > rel_tol * top) ++m;
    out.values.resize(m);
    out.functions.resize(J, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        out.values[r] = ev[J - 1 - r];
        out.functions.col(r) = solver.eigenvectors().col(J - 1 - r).cwiseQuotient(sw);
    }
    return out;
}

inline GammaEigen gamma_eigen(const CovSurface& s, double rel_tol = 1e-12) {
    return gamma_eigen(s.grid(), s.values(), rel_tol);
}

/// Eigenstructure of the Gaussian kernel
///   w[(s1,t1),(s2,t2)] = g(s1,s2) g(t1,t2) + g(s1,t2) g(s2,t1).
/// For g = sum_i l_i e_i e_i^T the positive eigenvalues are 2 l_i l_j (i <= j)
/// with eigenfunctions e_i(s)e_j(t) (i = j) and (e_i(s)e_j(t) + e_j(s)e_i(t))/sqrt2.
class OmegaEigen {
public:
    OmegaEigen(Vector values, std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs, Matrix gamma_functions)
        : values_(std::move(values)), pairs_(std::move(pairs)), gamma_functions_(std::move(gamma_functions)) {}

    [[nodiscard]] const Vector& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs() const noexcept { return pairs_; }
    [[nodiscard]] const Matrix& gamma_functions() const noexcept { return gamma_functions_; }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }

    /// Eigenfunction r as a J x J surface.
    [[nodiscard]] Matrix surface(std::size_t r) const {
        const auto [i, j] = pairs_.at(r);
        const Vector ei = gamma_functions_.col(i);
        const Vector ej = gamma_functions_.col(j);
        if (i == j) return ei * ei.transpose();
        return (ei * ej.transpose() + ej * ei.transpose()) / std::numbers::sqrt2;
    }

    [[nodiscard]] std::vector<Matrix> surfaces() const {
        std::vector<Matrix> out;
        out.reserve(size());
        for (std::size_t r = 0; r < size(); ++r) out.push_back(surface(r));
        return out;
    }

private:
    Vector values_;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs_;
    Matrix gamma_functions_;
};

inline OmegaEigen omega_eigen_gaussian(const GammaEigen& g) {
    const Eigen::Index m = g.values.size();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(m * (m + 1) / 2));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = i; j < m; ++j) pairs.emplace_back(i, j);
    auto value = [&](const std::pair<Eigen::Index, Eigen::Index>& p) {
        return 2.0 * g.values[p.first] * g.values[p.second];
    };
    std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) { return value(a) > value(b); });
    Vector values(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t r = 0; r < pairs.size(); ++r) values[static_cast<Eigen::Index>(r)] = value(pairs[r]);
    return OmegaEigen(std::move(values), std::move(pairs), g.functions);
}

/// W = I - b b^T with b = sqrt(tau), and an orthogonal U whose first k-1
/// columns span the complement of b and whose last column is b.
struct Contrast {
    Matrix W;
    Matrix U;
};

inline void check_tau(const std::vector<double>& tau) {
    if (tau.size() < 2) throw InvalidArgument("tau needs at least 2 entries");
    double sum = 0.0;
    for (double t : tau) {
        if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("tau entries must lie in (0, 1)");
        sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument("tau must sum to 1");
}

inline Contrast contrast_matrix(const std::vector<double>& tau) {
    check_tau(tau);
    const auto k = static_cast<Eigen::Index>(tau.size());
    Vector b(k);
    for (Eigen::Index i = 0; i < k; ++i) b[i] = std::sqrt(tau[static_cast<std::size_t>(i)]);
    b.normalize();

    Contrast c;
    c.W = Matrix::Identity(k, k) - b * b.transpose();

    // Householder reflection H with H e_k = b; its columns are orthonormal
    // and the first k-1 are orthogonal to b.
    Vector v = b;
    v[k - 1] -= 1.0;
    Matrix h = Matrix::Identity(k, k);
    const double vv = v.squaredNorm();
    if (vv > 0.0) h -= 2.0 * v * v.transpose() / vv;
    c.U = h;
    c.U.col(k - 1) = b;
    return c;
}

/// Problem description for the limit power calculation.
struct PowerSpec {
    CovSurface gamma;
    std::vector<CovSurface> d_surfaces;
    std::vector<double> tau;
    double alpha = 0.05;
    std::size_t mc_draws = 100000;
    double eigen_rel_tol = 1e-12;

    [[nodiscard]] std::size_t k() const noexcept { return tau.size(); }

    void validate() const {
        check_tau(tau);
        if (d_surfaces.size() != tau.size()) throw InvalidArgument("power spec: need one d surface per group");
        for (const auto& d : d_surfaces)
            if (!(d.grid() == gamma.grid())) throw InvalidArgument("power spec: d surface on a different grid");
        if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("power spec: alpha must lie in (0, 1)");
        if (mc_draws < 1000) throw InvalidArgument("power spec: need at least 1000 Monte Carlo draws");
        if (!(eigen_rel_tol > 0.0 && eigen_rel_tol < 1.0))
            throw InvalidArgument("power spec: eigen_rel_tol must lie in (0, 1)");
    }
};

/// delta^2_r for each retained eigenfunction plus the mass of d outside their span.
struct DeltaProjections {
    Vector delta_sq;
    double residual = 0.0;
};

inline DeltaProjections delta_projections(const PowerSpec& spec, const Matrix& U, const OmegaEigen& omega) {
    const auto k = static_cast<Eigen::Index>(spec.k());
    if (U.rows() != k || U.cols() != k) throw InvalidArgument("delta_projections: U must be k x k");
    const Grid& grid = spec.gamma.grid();
    const Vector& w = grid.weights();
    const Matrix we = w.asDiagonal() * omega.gamma_functions();
    const auto J = static_cast<Eigen::Index>(grid.size());

    DeltaProjections out;
    out.delta_sq = Vector::Zero(static_cast<Eigen::Index>(omega.size()));
    double total = 0.0;
    for (Eigen::Index c = 0; c + 1 < k; ++c) {
        Matrix dc = Matrix::Zero(J, J);
        for (Eigen::Index i = 0; i < k; ++i) dc += U(i, c) * spec.d_surfaces[static_cast<std::size_t>(i)].values();
        total += grid.integrate2(dc.cwiseAbs2());
        const Matrix m = we.transpose() * dc * we;
        for (std::size_t r = 0; r < omega.size(); ++r) {
            const auto [i, j] = omega.pairs()[r];
            const double proj = i == j ? m(i, i) : (m(i, j) + m(j, i)) / std::numbers::sqrt2;
            out.delta_sq[static_cast<Eigen::Index>(r)] += proj * proj;
        }
    }
    out.residual = std::max(0.0, total - out.delta_sq.sum());
    return out;
}

/// sum_r lambda_r A_r + residual with A_r ~ noncentral chi2_{k-1}(delta_r^2 / lambda_r).
class LimitDistribution {
public:
    LimitDistribution(Vector lambdas, Vector delta_sq, double residual, std::size_t k)
        : lambdas_(std::move(lambdas)), residual_(residual), k_(k) {
        if (k_ < 2) throw InvalidArgument("limit distribution needs k >= 2");
        if (lambdas_.size() != delta_sq.size()) throw InvalidArgument("limit distribution: size mismatch");
        shift_.resize(lambdas_.size());
        for (Eigen::Index r = 0; r < lambdas_.size(); ++r) {
            if (!(lambdas_[r] > 0.0)) throw InvalidArgument("limit distribution: eigenvalues must be positive");
            shift_[r] = std::sqrt(std::max(0.0, delta_sq[r]) / lambdas_[r]);
        }
    }

    /// (Z + sqrt(ncp))^2 + chi2_{k-2} per component.
    double sample(CounterRng& rng) const {
        double t = residual_;
        const auto central = static_cast<unsigned>(k_ - 2);
        for (Eigen::Index r = 0; r < lambdas_.size(); ++r) {
            const double z = rng.normal() + shift_[r];
            t += lambdas_[r] * (z * z + rng.chi_square(central));
        }
        return t;
    }

    /// draws[i] is fixed by (seed, i / kChunk), independent of threads.
    [[nodiscard]] std::vector<double> sample(std::size_t count, std::uint64_t seed, unsigned threads = 1) const {
        std::vector<double> out(count);
        const std::size_t chunks = (count + kChunk - 1) / kChunk;
        parallel_for(chunks, threads, [&](std::size_t c) {
            CounterRng rng(derive_seed(seed, c));
            const std::size_t end = std::min(count, (c + 1) * kChunk);
            for (std::size_t i = c * kChunk; i < end; ++i) out[i] = sample(rng);
        });
        return out;
    }

    [[nodiscard]] double mean() const {
        double m = residual_;
        for (Eigen::Index r = 0; r < lambdas_.size(); ++r)
            m += lambdas_[r] * (static_cast<double>(k_ - 1) + shift_[r] * shift_[r]);
        return m;
    }

private:
    static constexpr std::size_t kChunk = 4096;
    Vector lambdas_;
    Vector shift_;
    double residual_;
    std::size_t k_;
};

struct PowerReport {
    Vector omega_eigenvalues;
    Vector delta_sq;
    double residual_delta_sq = 0.0;
    double beta = 0.0;
    double kappa = 0.0;
    double d = 0.0;
    double critical_value = 0.0;
    double power = 0.0;
    double mc_se = 0.0;
    std::size_t mc_draws = 0;
};

inline PowerReport asymptotic_power(const PowerSpec& spec, std::uint64_t seed, unsigned threads = 1) {
    spec.validate();
    const GammaEigen ge = gamma_eigen(spec.gamma, spec.eigen_rel_tol);
    if (ge.values.size() == 0 || !(ge.values[0] > 0.0))
        throw DegenerateData("asymptotic_power: covariance has no positive eigenvalues");
    const OmegaEigen omega = omega_eigen_gaussian(ge);
    const Contrast contrast = contrast_matrix(spec.tau);
    const DeltaProjections delta = delta_projections(spec, contrast.U, omega);

    const double tr = omega.values().sum();
    const double tr2 = omega.values().squaredNorm();
    const WsParams ws = ws_params(tr, tr2, spec.k());

    PowerReport rep;
    rep.omega_eigenvalues = omega.values();
    rep.delta_sq = delta.delta_sq;
    rep.residual_delta_sq = delta.residual;
    rep.beta = ws.beta;
    rep.kappa = ws.kappa;
    rep.d = ws.d;
    rep.critical_value = ws.beta * chi2_quantile(1.0 - spec.alpha, ws.d);
    rep.mc_draws = spec.mc_draws;

    const LimitDistribution limit(omega.values(), delta.delta_sq, delta.residual, spec.k());
    const std::vector<double> draws = limit.sample(spec.mc_draws, seed, threads);
    const auto hits = std::count_if(draws.begin(), draws.end(), [&](double t) { return t > rep.critical_value; });
    rep.power = static_cast<double>(hits) / static_cast<double>(spec.mc_draws);
    rep.mc_se = std::sqrt(rep.power * (1.0 - rep.power) / static_cast<double>(spec.mc_draws));
    return rep;
}

}  // namespace ecfkit
