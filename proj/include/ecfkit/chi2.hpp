#pragma once

// Chi-square tail probabilities and quantiles for real-valued degrees of
// freedom. Welch-Satterthwaite degrees of freedom are rarely integers.

#include <ecfkit/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace ecfkit {

namespace detail {

inline constexpr int kGammaMaxIter = 200000;
inline constexpr double kGammaEps = 1e-16;

/// log of x^a e^{-x} / Gamma(a), the common prefactor of P and Q.
inline double gamma_log_prefactor(double a, double x) {
    return a * std::log(x) - x - std::lgamma(a);
}

/// Lower regularized P(a, x) by its power series; converges fast for x < a + 1.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < kGammaMaxIter; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(gamma_log_prefactor(a, x));
}

/// Upper regularized Q(a, x) by its continued fraction (modified Lentz); x >= a + 1.
inline double gamma_q_continued_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kGammaMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kGammaEps) break;
    }
    return std::exp(gamma_log_prefactor(a, x)) * h;
}

/// (P, Q) pair, each computed on the side where it is accurate.
inline std::pair<double, double> regularized_gamma(double a, double x) {
    if (x <= 0.0) return {0.0, 1.0};
    if (x < a + 1.0) {
        const double p = gamma_p_series(a, x);
        return {p, 1.0 - p};
    }
    const double q = gamma_q_continued_fraction(a, x);
    return {1.0 - q, q};
}

inline void check_df(double df) {
    if (!(df > 0.0) || !std::isfinite(df)) throw InvalidArgument("chi-square df must be positive and finite");
}

}  // namespace detail

/// Upper regularized incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
    if (!(a > 0.0)) throw InvalidArgument("gamma_q: a must be positive");
    if (x < 0.0) throw InvalidArgument("gamma_q: x must be nonnegative");
    return detail::regularized_gamma(a, x).second;
}

/// Lower regularized incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    if (!(a > 0.0)) throw InvalidArgument("gamma_p: a must be positive");
    if (x < 0.0) throw InvalidArgument("gamma_p: x must be nonnegative");
    return detail::regularized_gamma(a, x).first;
}

/// P(chi2_df > x).
inline double chi2_sf(double x, double df) {
    detail::check_df(df);
    if (!(x >= 0.0)) throw InvalidArgument("chi2_sf: x must be nonnegative");
    if (std::isinf(x)) return 0.0;
    return detail::regularized_gamma(0.5 * df, 0.5 * x).second;
}

/// P(chi2_df <= x).
inline double chi2_cdf(double x, double df) {
    detail::check_df(df);
    if (!(x >= 0.0)) throw InvalidArgument("chi2_cdf: x must be nonnegative");
    if (std::isinf(x)) return 1.0;
    return detail::regularized_gamma(0.5 * df, 0.5 * x).first;
}

inline double chi2_pdf(double x, double df) {
    detail::check_df(df);
    if (x < 0.0) return 0.0;
    const double a = 0.5 * df;
    if (x == 0.0) {
        if (a < 1.0) return std::numeric_limits<double>::infinity();
        return a == 1.0 ? 0.5 : 0.0;
    }
    return std::exp((a - 1.0) * std::log(x) - 0.5 * x - std::lgamma(a) - a * std::log(2.0));
}

/// x with P(chi2_df <= x) = p. A doubling search brackets the root, then
/// Newton steps safeguarded by bisection refine it. The smaller tail is
/// matched so that extreme upper quantiles keep relative accuracy.
inline double chi2_quantile(double p, double df) {
    detail::check_df(df);
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("chi2_quantile: p must lie in (0, 1)");

    const bool upper = p > 0.5;
    const double target = upper ? 1.0 - p : p;
    // decreasing in x; positive while x is below the quantile
    auto residual = [&](double x) {
        const auto [lower_tail, upper_tail] = detail::regularized_gamma(0.5 * df, 0.5 * x);
        return upper ? upper_tail - target : target - lower_tail;
    };

    double lo = 0.0;
    double hi = std::max(df, 1.0);
    while (residual(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw InvalidArgument("chi2_quantile: failed to bracket");
    }

    double x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 2000; ++iter) {
        const double r = residual(x);
        if (r == 0.0) return x;
        if (r > 0.0) lo = x; else hi = x;

        const double pdf = chi2_pdf(x, df);
        double next = (pdf > 0.0 && std::isfinite(pdf)) ? x + r / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);

        if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x ||
            hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi)
            return next;
        x = next;
    }
    return x;
}

}  // namespace ecfkit
