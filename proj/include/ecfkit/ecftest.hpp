#pragma once

// The L2-norm statistic for equality of k covariance functions, its
// Welch-Satterthwaite chi-square approximations and the random-permutation
// reference distribution.

#include <ecfkit/chi2.hpp>
#include <ecfkit/errors.hpp>
#include <ecfkit/estim.hpp>
#include <ecfkit/grid.hpp>
#include <ecfkit/parallel.hpp>
#include <ecfkit/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecfkit {

enum class Method { naive, bias_reduced, permutation };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::naive: return "naive";
        case Method::bias_reduced: return "bias_reduced";
        case Method::permutation: return "permutation";
    }
    return "unknown";
}

/// Accepts the short labels nv/br/rp as well as the long names.
inline Method parse_method(std::string_view s) {
    if (s == "nv" || s == "naive") return Method::naive;
    if (s == "br" || s == "bias_reduced") return Method::bias_reduced;
    if (s == "rp" || s == "permutation") return Method::permutation;
    throw InvalidArgument("unknown method '" + std::string(s) + "' (expected nv, br or rp)");
}

/// Scaled chi-square R ~ beta * chi2_d matched to the first two moments.
struct WsParams {
    double beta = 0.0;
    double kappa = 0.0;
    double d = 0.0;
    double tr_omega = 0.0;
    double tr_omega2 = 0.0;
    Method method = Method::naive;
};

struct TestReport {
    double statistic = 0.0;
    Method method = Method::naive;
    std::optional<WsParams> ws;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    /// beta * chi2_d upper quantile, or the permutation order statistic.
    std::optional<double> critical_value;
    std::optional<std::size_t> permutations;
    std::optional<std::uint64_t> seed;
};

struct OmegaTraces {
    double tr_omega = 0.0;
    double tr_omega2 = 0.0;
};

namespace detail {

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
}

}  // namespace detail

/// SSB(s,t) = sum_i (n_i - 1) [g_i(s,t) - g(s,t)]^2.
inline Matrix ssb_surface(std::span<const CovSurface> covs, const CovSurface& pooled,
                          std::span<const std::size_t> sizes) {
    if (covs.size() < 2) throw InvalidArgument("ssb_surface: need at least 2 groups");
    if (covs.size() != sizes.size()) throw InvalidArgument("ssb_surface: covs and sizes differ in length");
    const Eigen::Index J = pooled.values().rows();
    Matrix out = Matrix::Zero(J, J);
    for (std::size_t i = 0; i < covs.size(); ++i) {
        if (!(covs[i].grid() == pooled.grid())) throw InvalidArgument("ssb_surface: grid mismatch");
        if (sizes[i] < 1) throw InvalidArgument("ssb_surface: group sizes must be positive");
        out += static_cast<double>(sizes[i] - 1) * (covs[i].values() - pooled.values()).cwiseAbs2();
    }
    return out;
}

/// Group covariances, pooled covariance and T_n of one dataset.
struct CovarianceSummary {
    std::vector<CovSurface> group_covs;
    CovSurface pooled;
    std::vector<std::size_t> sizes;
    double statistic;

    [[nodiscard]] std::size_t n() const { return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}); }
    [[nodiscard]] std::size_t k() const { return sizes.size(); }
};

inline CovarianceSummary summarize(const Dataset& ds) {
    std::vector<CovSurface> covs;
    covs.reserve(ds.k());
    for (const auto& g : ds.groups()) covs.push_back(group_cov(g, ds.grid()));
    auto sizes = ds.sizes();
    CovSurface pooled = pooled_cov(covs, sizes);
    const double tn = ds.grid().integrate2(ssb_surface(covs, pooled, sizes));
    return CovarianceSummary{std::move(covs), std::move(pooled), std::move(sizes), tn};
}

/// T_n, the weighted double integral of the SSB surface.
inline double tn_statistic(const Dataset& ds) { return summarize(ds).statistic; }

/// Plug-in traces of the Gaussian covariance kernel of the pooled estimator.
inline OmegaTraces omega_traces_naive(const CovSurface& pooled) {
    const TraceSet t = traces(pooled);
    return OmegaTraces{t.tr_gamma * t.tr_gamma + t.tr_gamma2, 2.0 * t.tr_gamma2 * t.tr_gamma2 + 2.0 * t.tr_gamma4};
}

/// Bias-reduced traces; tr(g^{(x)4}) stays the plug-in value.
inline OmegaTraces omega_traces_bias_reduced(const CovSurface& pooled, std::size_t n, std::size_t k) {
    const TraceSet t = traces(pooled);
    const BiasReducedTraces br = bias_reduced_traces(t.tr_gamma, t.tr_gamma2, n, k);
    return OmegaTraces{br.tr2_gamma_hat + br.tr_gamma2_hat,
                       2.0 * br.tr_gamma2_hat * br.tr_gamma2_hat + 2.0 * t.tr_gamma4};
}

inline WsParams ws_params(double tr_omega, double tr_omega2, std::size_t k, Method method = Method::naive) {
    if (k < 2) throw InvalidArgument("ws_params: need k >= 2");
    if (!(tr_omega > 0.0) || !(tr_omega2 > 0.0) || !std::isfinite(tr_omega) || !std::isfinite(tr_omega2))
        throw DegenerateData("Welch-Satterthwaite traces must be positive (constant curves?)");
    WsParams p;
    p.tr_omega = tr_omega;
    p.tr_omega2 = tr_omega2;
    p.beta = tr_omega2 / tr_omega;
    p.kappa = tr_omega * tr_omega / tr_omega2;
    p.d = static_cast<double>(k - 1) * p.kappa;
    p.method = method;
    return p;
}

/// Welch-Satterthwaite test on precomputed covariances.
inline TestReport ws_test(const CovarianceSummary& summary, Method method, double alpha) {
    detail::check_alpha(alpha);
    OmegaTraces tr;
    switch (method) {
        case Method::naive: tr = omega_traces_naive(summary.pooled); break;
        case Method::bias_reduced: tr = omega_traces_bias_reduced(summary.pooled, summary.n(), summary.k()); break;
        case Method::permutation: throw InvalidArgument("ws_test: use permutation_test for the permutation method");
    }
    const WsParams ws = ws_params(tr.tr_omega, tr.tr_omega2, summary.k(), method);

    TestReport r;
    r.statistic = summary.statistic;
    r.method = method;
    r.ws = ws;
    r.alpha = alpha;
    r.p_value = std::clamp(chi2_sf(std::max(0.0, summary.statistic) / ws.beta, ws.d), 0.0, 1.0);
    r.reject = r.p_value <= alpha;
    r.critical_value = ws.beta * chi2_quantile(1.0 - alpha, ws.d);
    return r;
}

inline TestReport ws_test(const Dataset& ds, Method method, double alpha) {
    return ws_test(summarize(ds), method, alpha);
}

/// Pooled residuals in Gram form. With v_a the residual curves (groups
/// concatenated in order) and H_ab = (sum_j w_j v_a(t_j) v_b(t_j))^2, any
/// regrouping `order` (first n_1 entries form group 1, and so on) gives
///   T* = sum_i S_ii / (n_i - 1) - S / (n - k),
/// where S_ii sums H over pairs inside group i and S over all pairs.
/// Residuals are not re-centred after regrouping.
class PermutationEngine {
public:
    explicit PermutationEngine(const Dataset& ds) : sizes_(ds.sizes()) {
        n_ = std::accumulate(sizes_.begin(), sizes_.end(), std::size_t{0});
        const auto J = static_cast<Eigen::Index>(ds.grid().size());
        Matrix v(static_cast<Eigen::Index>(n_), J);
        Eigen::Index row = 0;
        for (const auto& g : ds.groups()) {
            v.middleRows(row, g.curves.rows()) = residuals(g);
            row += g.curves.rows();
        }
        const Vector sw = ds.grid().weights().cwiseSqrt();
        const Matrix vw = v * sw.asDiagonal();
        Matrix gram = Matrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        gram.selfadjointView<Eigen::Lower>().rankUpdate(vw);
        gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        h_ = gram.cwiseAbs2();
        total_ = h_.sum();
    }

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t k() const noexcept { return sizes_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

    /// T* for a regrouping of the pooled residuals.
    [[nodiscard]] double statistic(std::span<const std::size_t> order) const {
        if (order.size() != n_) throw InvalidArgument("permutation order has the wrong length");
        std::vector<std::size_t> idx;
        double within = 0.0;
        std::size_t start = 0;
        for (const std::size_t ni : sizes_) {
            idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(start + ni));
            std::sort(idx.begin(), idx.end());
            double diag = 0.0;
            double off = 0.0;
            for (std::size_t a = 0; a < ni; ++a) {
                const double* col = h_.data() + static_cast<std::ptrdiff_t>(idx[a]) * h_.rows();
                diag += col[idx[a]];
                for (std::size_t b = a + 1; b < ni; ++b) off += col[idx[b]];
            }
            within += (diag + 2.0 * off) / static_cast<double>(ni - 1);
            start += ni;
        }
        return within - total_ / static_cast<double>(n_ - sizes_.size());
    }

    [[nodiscard]] std::vector<std::size_t> identity_order() const {
        std::vector<std::size_t> order(n_);
        std::iota(order.begin(), order.end(), std::size_t{0});
        return order;
    }

    /// T* for permutation number b of a run keyed by `seed`.
    [[nodiscard]] double permuted_statistic(std::uint64_t seed, std::size_t b) const {
        std::vector<std::size_t> order = identity_order();
        CounterRng rng(derive_seed(seed, b));
        shuffle(order, rng);
        return statistic(order);
    }

private:
    std::vector<std::size_t> sizes_;
    std::size_t n_ = 0;
    Matrix h_;
    double total_ = 0.0;
};

struct PermutationOptions {
    unsigned threads = 1;
    /// Test hook: every "permutation" is the identity.
    bool force_identity = false;
    /// Reject on p <= alpha instead of the order-statistic rule.
    bool reject_by_p_value = false;
};

/// Position (1-based) of the order statistic used as the critical value.
inline std::size_t permutation_critical_rank(std::size_t B, double alpha) {
    const double r = std::ceil((1.0 - alpha) * static_cast<double>(B) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, B);
}

/// Permutation statistics T*_1..T*_B; entry b depends only on (seed, b).
inline std::vector<double> permutation_statistics(const PermutationEngine& engine, std::size_t B,
                                                  std::uint64_t seed, const PermutationOptions& opts = {}) {
    if (B < 1) throw InvalidArgument("permutation_test: B must be >= 1");
    std::vector<double> stats(B);
    if (opts.force_identity) {
        const double t = engine.statistic(engine.identity_order());
        std::fill(stats.begin(), stats.end(), t);
        return stats;
    }
    parallel_for(B, opts.threads, [&](std::size_t b) { stats[b] = engine.permuted_statistic(seed, b); });
    return stats;
}

inline TestReport permutation_test(const PermutationEngine& engine, std::size_t B, double alpha,
                                   std::uint64_t seed, const PermutationOptions& opts = {}) {
    detail::check_alpha(alpha);
    std::vector<double> stats = permutation_statistics(engine, B, seed, opts);
    const double tn = engine.statistic(engine.identity_order());

    const auto exceed = static_cast<std::size_t>(
        std::count_if(stats.begin(), stats.end(), [tn](double t) { return t >= tn; }));
    const std::size_t rank = permutation_critical_rank(B, alpha);
    std::nth_element(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(rank - 1), stats.end());
    const double critical = stats[rank - 1];

    TestReport r;
    r.statistic = tn;
    r.method = Method::permutation;
    r.alpha = alpha;
    r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(B + 1);
    r.reject = opts.reject_by_p_value ? r.p_value <= alpha : tn > critical;
    r.critical_value = critical;
    r.permutations = B;
    r.seed = seed;
    return r;
}

inline TestReport permutation_test(const Dataset& ds, std::size_t B, double alpha, std::uint64_t seed,
                                   const PermutationOptions& opts = {}) {
    if (B < 1) throw InvalidArgument("permutation_test: B must be >= 1");
    detail::check_alpha(alpha);
    return permutation_test(PermutationEngine(ds), B, alpha, seed, opts);
}

}  // namespace ecfkit
