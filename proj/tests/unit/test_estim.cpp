#include <catch_amalgamated.hpp>

#include <ecfkit/estim.hpp>
#include <ecfkit/random.hpp>

#include <oracles.hpp>

#include <Eigen/Eigenvalues>

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using ecfkit::CovSurface;
using ecfkit::GroupData;
using ecfkit::Matrix;
using ecfkit::Vector;

namespace {

const ecfkit::Grid kUnit2 = ecfkit::make_uniform_grid(2, 0.0, 1.0);

GroupData hand_group() {
    Matrix y(2, 2);
    y << 0, 0, 2, 2;
    return {"a", y};
}

}  // namespace

TEST_CASE("group mean and residuals on the hand fixture", "[estim]") {
    const GroupData g = hand_group();
    CHECK(ecfkit::group_mean(g) == Vector::Ones(2));
    Matrix expected(2, 2);
    expected << -1, -1, 1, 1;
    CHECK(ecfkit::residuals(g) == expected);

    const GroupData c{"c", Matrix::Constant(5, 3, 4.25)};
    CHECK(ecfkit::group_mean(c) == Vector::Constant(3, 4.25));
    CHECK(ecfkit::residuals(c).isZero());
}

TEST_CASE("group mean and covariance match brute-force loops", "[estim][property]") {
    ecfkit::CounterRng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index J = 3 + static_cast<Eigen::Index>(rng.below(12));
        const GroupData g{"g", 3.0 * oracle::random_matrix(50, J, rng).array() + 7.0};
        const ecfkit::Grid grid = ecfkit::make_uniform_grid(static_cast<int>(J), 0.0, 1.0);
        CHECK((ecfkit::group_mean(g) - oracle::brute_mean(g.curves)).cwiseAbs().maxCoeff() < 1e-12);

        const Matrix r = ecfkit::residuals(g);
        CHECK(r.colwise().sum().cwiseAbs().maxCoeff() < 1e-10 * (1.0 + g.curves.cwiseAbs().maxCoeff()));

        const Matrix c = ecfkit::group_cov(g, grid).values();
        const Matrix b = oracle::brute_cov(g.curves);
        CHECK((c - b).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + b.cwiseAbs().maxCoeff()));
        CHECK(c == c.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(c);
        CHECK(es.eigenvalues().minCoeff() >= -1e-9 * es.eigenvalues().maxCoeff());
    }
}

TEST_CASE("group covariance on the hand fixture", "[estim]") {
    CHECK(ecfkit::group_cov(hand_group(), kUnit2).values() == Matrix::Constant(2, 2, 2.0));
    CHECK(ecfkit::group_cov({"c", Matrix::Constant(3, 2, 1.5)}, kUnit2).values().isZero());
    CHECK_THROWS_AS(ecfkit::group_cov({"one", Matrix::Zero(1, 2)}, kUnit2), ecfkit::InsufficientSample);
}

TEST_CASE("group covariance is consistent for a known covariance", "[estim]") {
    const int J = 12;
    const ecfkit::Grid grid = ecfkit::make_uniform_grid(J, 0.0, 1.0);
    Matrix gamma(J, J);
    for (int s = 0; s < J; ++s)
        for (int t = 0; t < J; ++t) gamma(s, t) = std::exp(-std::abs(s - t) / 4.0);
    const Matrix root = gamma.llt().matrixL();
    ecfkit::CounterRng rng(2024);
    const Matrix z = oracle::random_matrix(2000, J, rng);
    const GroupData g{"g", z * root.transpose()};
    const Matrix c = ecfkit::group_cov(g, grid).values();
    CHECK((c - gamma).cwiseAbs().maxCoeff() <= 0.15 * gamma.cwiseAbs().maxCoeff());
}

TEST_CASE("pooled covariance", "[estim]") {
    const std::vector<CovSurface> covs{CovSurface(kUnit2, Matrix::Constant(2, 2, 2.0)), CovSurface::zero(kUnit2)};
    CHECK(ecfkit::pooled_cov(covs, {2, 2}).values() == Matrix::Ones(2, 2));

    const CovSurface s(kUnit2, (Matrix(2, 2) << 3, 1, 1, 2).finished());
    const std::vector<CovSurface> same{s, s, s};
    CHECK((ecfkit::pooled_cov(same, {4, 9, 2}).values() - s.values()).cwiseAbs().maxCoeff() < 1e-15);

    const std::vector<CovSurface> mix{CovSurface::zero(kUnit2), s};
    const Matrix p = ecfkit::pooled_cov(mix, {2, 1000}).values();
    CHECK_THAT(p(0, 0), WithinRel(3.0 * 999.0 / 1000.0, 1e-14));

    CHECK_THROWS_AS(ecfkit::pooled_cov(mix, {2}), ecfkit::InvalidArgument);
    const ecfkit::Grid other = ecfkit::make_uniform_grid(2, 0.0, 2.0);
    const std::vector<CovSurface> bad{s, CovSurface(other, s.values())};
    CHECK_THROWS_AS(ecfkit::pooled_cov(bad, {3, 3}), ecfkit::InvalidArgument);
}

TEST_CASE("pooled covariance is the exact weighted combination", "[estim][property]") {
    ecfkit::CounterRng rng(4);
    const ecfkit::Grid grid = ecfkit::make_uniform_grid(6, 0.0, 1.0);
    std::vector<CovSurface> covs;
    const std::vector<std::size_t> sizes{3, 8, 5, 12};
    for (std::size_t i = 0; i < sizes.size(); ++i) covs.emplace_back(grid, oracle::random_psd(6, 3, rng));
    Matrix expected = Matrix::Zero(6, 6);
    for (std::size_t i = 0; i < sizes.size(); ++i) expected += static_cast<double>(sizes[i] - 1) * covs[i].values();
    expected /= 24.0;
    CHECK((ecfkit::pooled_cov(covs, sizes).values() - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("trace functionals on small surfaces", "[estim]") {
    const CovSurface ones(kUnit2, Matrix::Ones(2, 2));
    CHECK_THAT(ecfkit::trace_gamma(ones), WithinAbs(1.0, 1e-15));
    CHECK_THAT(ecfkit::trace_gamma_sq(ones), WithinAbs(1.0, 1e-15));
    CHECK_THAT(ecfkit::trace_gamma_quad(ones), WithinAbs(1.0, 1e-15));

    const CovSurface zero = CovSurface::zero(kUnit2);
    CHECK(ecfkit::trace_gamma(zero) == 0.0);
    CHECK(ecfkit::trace_gamma_sq(zero) == 0.0);
    CHECK(ecfkit::trace_gamma_quad(zero) == 0.0);

    const ecfkit::Grid g101 = ecfkit::make_uniform_grid(101, 0.0, 1.0);
    CHECK_THAT(ecfkit::trace_gamma(CovSurface(g101, Matrix::Identity(101, 101))), WithinAbs(1.0, 1e-13));
}

TEST_CASE("rank-one kernel has a separable squared trace", "[estim]") {
    const ecfkit::Grid grid = ecfkit::make_uniform_grid(25, -1.0, 3.0);
    ecfkit::CounterRng rng(8);
    const Vector v = oracle::random_matrix(25, 1, rng).col(0);
    const CovSurface s(grid, v * v.transpose());
    const double norm2 = grid.weights().dot(v.cwiseAbs2());
    CHECK_THAT(ecfkit::trace_gamma_sq(s), WithinRel(norm2 * norm2, 1e-12));
    CHECK_THAT(ecfkit::trace_gamma_quad(s), WithinRel(std::pow(norm2, 4), 1e-12));
}

TEST_CASE("fourth-power trace matches the quadruple sum", "[estim][property]") {
    ecfkit::CounterRng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const ecfkit::Grid grid = ecfkit::make_uniform_grid(8, 0.0, 1.0 + trial);
        const CovSurface s(grid, oracle::random_psd(8, 1 + trial % 8, rng));
        CHECK(oracle::rel_err(ecfkit::trace_gamma_quad(s), oracle::brute_quad(s.values(), grid.weights())) < 1e-10);
    }
    // Also for indefinite kernels, where no shortcut through eigenvalue signs applies.
    const ecfkit::Grid grid = ecfkit::make_uniform_grid(7, 0.0, 1.0);
    const CovSurface s(grid, oracle::random_symmetric(7, rng));
    CHECK(oracle::rel_err(ecfkit::trace_gamma_quad(s), oracle::brute_quad(s.values(), grid.weights())) < 1e-10);
}

TEST_CASE("traces scale with the data", "[estim][property]") {
    ecfkit::CounterRng rng(17);
    const ecfkit::Grid grid = ecfkit::make_uniform_grid(9, 0.0, 1.0);
    const GroupData g{"g", oracle::random_matrix(15, 9, rng)};
    for (double c : {0.5, 3.0, -7.0}) {
        const GroupData gc{"g", c * g.curves};
        const CovSurface s = ecfkit::group_cov(g, grid);
        const CovSurface sc = ecfkit::group_cov(gc, grid);
        CHECK((sc.values() - c * c * s.values()).cwiseAbs().maxCoeff() < 1e-12 * c * c * s.values().cwiseAbs().maxCoeff());
        CHECK(oracle::rel_err(ecfkit::trace_gamma(sc), std::pow(c, 2) * ecfkit::trace_gamma(s)) < 1e-10);
        CHECK(oracle::rel_err(ecfkit::trace_gamma_sq(sc), std::pow(c, 4) * ecfkit::trace_gamma_sq(s)) < 1e-10);
        CHECK(oracle::rel_err(ecfkit::trace_gamma_quad(sc), std::pow(c, 8) * ecfkit::trace_gamma_quad(s)) < 1e-10);
    }
}

TEST_CASE("trace inequalities for PSD kernels", "[estim][property]") {
    ecfkit::CounterRng rng(5150);
    for (int trial = 0; trial < 40; ++trial) {
        const int J = 2 + static_cast<int>(rng.below(20));
        const ecfkit::Grid grid = ecfkit::make_uniform_grid(J, 0.0, 0.5 + 3.0 * rng.uniform());
        const CovSurface s(grid, oracle::random_psd(J, 1 + static_cast<Eigen::Index>(rng.below(J)), rng));
        const ecfkit::TraceSet t = ecfkit::traces(s);
        const double scale = t.tr_gamma * t.tr_gamma;
        CHECK(t.tr_gamma >= 0.0);
        CHECK(t.tr_gamma2 >= -1e-9 * scale);
        CHECK(t.tr_gamma4 >= -1e-9 * scale * scale);
        CHECK(t.tr_gamma2 <= t.tr_gamma * t.tr_gamma * (1 + 1e-12));
        CHECK(t.tr_gamma4 <= t.tr_gamma2 * t.tr_gamma2 * (1 + 1e-12));
    }
}

TEST_CASE("bias-reduced traces", "[estim]") {
    // n - k = 10.
    const auto br = ecfkit::bias_reduced_traces(2.0, 1.0, 12, 2);
    CHECK_THAT(br.tr2_gamma_hat, WithinRel(110.0 / 108.0 * (4.0 - 2.0 / 11.0), 1e-14));
    CHECK_THAT(br.tr2_gamma_hat, WithinAbs(3.8889, 5e-5));
    CHECK_THAT(br.tr_gamma2_hat, WithinRel(100.0 / 108.0 * 0.6, 1e-14));
    CHECK_THAT(br.tr_gamma2_hat, WithinAbs(0.5556, 5e-5));

    const auto big = ecfkit::bias_reduced_traces(2.0, 1.0, 1000002, 2);
    CHECK_THAT(big.tr2_gamma_hat, WithinAbs(4.0, 1e-5));
    CHECK_THAT(big.tr_gamma2_hat, WithinAbs(1.0, 1e-5));

    CHECK_THROWS_AS(ecfkit::bias_reduced_traces(2.0, 1.0, 3, 2), ecfkit::DegenerateDof);
    CHECK_THROWS_AS(ecfkit::bias_reduced_traces(2.0, 1.0, 2, 2), ecfkit::DegenerateDof);
    CHECK_NOTHROW(ecfkit::bias_reduced_traces(2.0, 1.0, 4, 2));
}

TEST_CASE("bias-reduced traces are unbiased for Wishart input", "[estim][property]") {
    // S = Z^T Z / m with Gaussian rows of covariance G, so m S ~ Wishart(m, G).
    const int J = 5;
    const std::size_t m = 6;
    const ecfkit::Grid grid = ecfkit::make_uniform_grid(J, 0.0, 1.0);
    ecfkit::CounterRng rng(31337);
    const Matrix g = oracle::random_psd(J, J, rng) / J;
    const Matrix root = (g + 1e-12 * Matrix::Identity(J, J)).llt().matrixL();
    const CovSurface truth(grid, g);
    const double tr2 = std::pow(ecfkit::trace_gamma(truth), 2);
    const double trsq = ecfkit::trace_gamma_sq(truth);

    const int reps = 200000;
    double acc_tr2 = 0.0, acc_trsq = 0.0, acc_plug2 = 0.0, acc_plugsq = 0.0;
    for (int r = 0; r < reps; ++r) {
        const Matrix z = oracle::random_matrix(static_cast<Eigen::Index>(m), J, rng) * root.transpose();
        Matrix s = z.transpose() * z / static_cast<double>(m);
        s = 0.5 * (s + s.transpose()).eval();
        const CovSurface cs(grid, s);
        const double tg = ecfkit::trace_gamma(cs);
        const double tg2 = ecfkit::trace_gamma_sq(cs);
        const auto br = ecfkit::bias_reduced_traces(tg, tg2, m + 2, 2);
        acc_tr2 += br.tr2_gamma_hat;
        acc_trsq += br.tr_gamma2_hat;
        acc_plug2 += tg * tg;
        acc_plugsq += tg2;
    }
    // The corrected estimates hit their targets; the plug-ins are visibly biased upward.
    CHECK(oracle::rel_err(acc_tr2 / reps, tr2) < 0.02);
    CHECK(oracle::rel_err(acc_trsq / reps, trsq) < 0.03);
    CHECK(acc_plug2 / reps > tr2 * 1.05);
    CHECK(acc_plugsq / reps > trsq * 1.05);
}
