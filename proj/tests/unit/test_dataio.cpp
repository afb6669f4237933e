#include <catch_amalgamated.hpp>

#include <ecfkit/dataio.hpp>

#include <oracles.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using ecfkit::Method;

namespace {

ecfkit::Dataset parse(const std::string& text, std::optional<std::pair<double, double>> domain = std::nullopt) {
    std::istringstream in(text);
    return ecfkit::read_dataset(in, domain);
}

/// Row and column of the ParseError raised for `text`.
std::pair<std::size_t, std::size_t> error_location(const std::string& text) {
    try {
        parse(text);
    } catch (const ecfkit::ParseError& e) {
        return {e.row(), e.column()};
    }
    FAIL("no ParseError for input:\n" << text);
    return {};
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("ecfkit_test_" + name);
}

}  // namespace

TEST_CASE("hand fixture parses to the expected dataset", "[dataio]") {
    const auto ds = parse("group,0,1\na,0,0\na,2,2\nb,0,0\nb,0,0\n");
    REQUIRE(ds.k() == 2);
    CHECK(ds.groups()[0].id == "a");
    CHECK(ds.sizes() == std::vector<std::size_t>{2, 2});
    CHECK(ds.grid().weights()[0] == 0.5);
    CHECK_THAT(ecfkit::tn_statistic(ds), WithinAbs(2.0, 1e-15));
}

TEST_CASE("header labels give trapezoid weights", "[dataio]") {
    const auto ds = parse("group,0,0.5,1\nx,1,2,3\nx,2,2,2\ny,0,1,0\ny,1,1,1\n");
    CHECK(ds.grid().points()[1] == 0.5);
    CHECK(ds.grid().weights()[0] == 0.25);
    CHECK(ds.grid().weights()[1] == 0.5);
    CHECK(ds.grid().weights()[2] == 0.25);
}

TEST_CASE("groups keep first-appearance order and may interleave", "[dataio]") {
    const auto ds = parse("group,1,2\nz,1,1\na,2,2\nz,3,4\r\n\na,5,6\n");
    CHECK(ds.groups()[0].id == "z");
    CHECK(ds.groups()[1].id == "a");
    CHECK(ds.groups()[0].curves(1, 1) == 4.0);
    CHECK(ds.groups()[1].curves(1, 0) == 5.0);
}

TEST_CASE("domain override replaces the header grid", "[dataio]") {
    const auto ds = parse("group,d1,d2,d3,d4,d5\na,1,2,3,4,5\na,0,0,0,0,1\nb,1,1,1,1,1\nb,2,2,2,2,3\n",
                          std::make_pair(1.0, 5.0));
    CHECK(ds.grid() == ecfkit::make_uniform_grid(5, 1.0, 5.0));
    CHECK_THROWS_AS(parse("group,1,2\na,1,1\na,2,2\nb,1,1\nb,3,3\n", std::make_pair(2.0, 1.0)), ecfkit::ParseError);
}

TEST_CASE("malformed files report row and column", "[dataio]") {
    CHECK(error_location("group,0,1\na,1,2\na,1\nb,1,1\n") == std::make_pair<std::size_t, std::size_t>(3, 0));
    CHECK(error_location("group,0,1\na,1,2\na,1,x\nb,1,1\n") == std::make_pair<std::size_t, std::size_t>(3, 3));
    CHECK(error_location("group,0,zero\na,1,2\n") == std::make_pair<std::size_t, std::size_t>(1, 3));
    CHECK(error_location("group,1,0\na,1,2\n") == std::make_pair<std::size_t, std::size_t>(1, 3));
    CHECK(error_location("id,0,1\na,1,2\n") == std::make_pair<std::size_t, std::size_t>(1, 1));
    CHECK(error_location("group,0,1\na,1,nan\na,1,2\nb,1,1\nb,1,1\n") == std::make_pair<std::size_t, std::size_t>(2, 3));
    CHECK_THROWS_AS(parse(""), ecfkit::ParseError);
    CHECK_THROWS_WITH(parse("group,0,1\na,1,2\na,2,2\n"), ContainsSubstring("at least 2 groups"));
    CHECK_THROWS_WITH(parse("group,0,1\na,1,2\na,2,2\nb,1,1\n"), ContainsSubstring("fewer than 2 rows"));
    CHECK_THROWS_AS(ecfkit::read_dataset("/nonexistent/file.csv"), ecfkit::ParseError);
}

TEST_CASE("datasets round-trip through CSV", "[dataio][property]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ds = oracle::random_dataset({3, 5, 4}, 13, seed);
        std::stringstream buf;
        ecfkit::write_dataset(ds, buf);
        const auto back = ecfkit::read_dataset(buf);
        REQUIRE(back.k() == ds.k());
        CHECK(back.grid().points() == ds.grid().points());
        CHECK((back.grid().weights() - ds.grid().weights()).cwiseAbs().maxCoeff() < 1e-15);
        for (std::size_t i = 0; i < ds.k(); ++i) {
            CHECK(back.groups()[i].id == ds.groups()[i].id);
            CHECK(back.groups()[i].curves == ds.groups()[i].curves);
        }
    }
    const auto path = temp_path("roundtrip.csv");
    const auto ds = oracle::random_dataset({2, 2}, 4, 1);
    ecfkit::write_dataset(ds, path.string());
    CHECK(ecfkit::read_dataset(path.string()).groups()[1].curves == ds.groups()[1].curves);
    std::filesystem::remove(path);
}

TEST_CASE("reports round-trip through JSON", "[dataio]") {
    const auto ds = oracle::random_dataset({6, 7}, 9, 3);
    const auto nv = ecfkit::ws_test(ds, Method::naive, 0.05);
    const auto rp = ecfkit::permutation_test(ds, 99, 0.1, 12345678901234ULL);

    const auto jn = ecfkit::report_to_json(nv);
    for (const char* key : {"statistic", "method", "beta", "kappa", "d", "p_value", "alpha", "reject"}) CHECK(jn.contains(key));
    CHECK_FALSE(jn.contains("permutations"));
    CHECK_FALSE(jn.contains("seed"));
    CHECK(jn.at("method") == "naive");

    const auto jp = ecfkit::report_to_json(rp);
    CHECK(jp.at("permutations") == 99);
    CHECK(jp.at("seed") == 12345678901234ULL);
    CHECK_FALSE(jp.contains("beta"));

    const auto path = temp_path("report.json");
    for (const auto& r : {nv, rp}) {
        ecfkit::write_report(r, path.string());
        const auto back = ecfkit::read_report(path.string());
        CHECK(back.statistic == r.statistic);
        CHECK(back.p_value == r.p_value);
        CHECK(back.alpha == r.alpha);
        CHECK(back.reject == r.reject);
        CHECK(back.method == r.method);
        CHECK(back.critical_value == r.critical_value);
        CHECK(back.permutations == r.permutations);
        CHECK(back.seed == r.seed);
        CHECK(back.ws.has_value() == r.ws.has_value());
        if (r.ws) {
            CHECK(back.ws->beta == r.ws->beta);
            CHECK(back.ws->kappa == r.ws->kappa);
            CHECK(back.ws->d == r.ws->d);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("experiment configs", "[dataio]") {
    const auto j = ecfkit::json::parse(R"({"sizes": [80, 75, 85, 82, 70], "rho": 0.7, "omega_values": [0, 0.5],
        "tests": ["nv", "rp"], "reps": 12, "permutations": 40, "seed": 9, "dist": "t4", "J": 50})");
    const auto spec = ecfkit::experiment_from_json(j);
    CHECK(spec.base.k == 5);
    CHECK(spec.base.sizes[2] == 85);
    CHECK(spec.base.rho == 0.7);
    CHECK(spec.base.J == 50);
    CHECK(spec.base.dist == ecfkit::Innovation::t4);
    CHECK(spec.omega_values == std::vector<double>{0.0, 0.5});
    CHECK(spec.tests == std::vector<Method>{Method::naive, Method::permutation});
    CHECK(spec.reps == 12);
    CHECK(spec.permutations == 40);
    CHECK(spec.master_seed == 9);

    const auto last = ecfkit::experiment_from_json(ecfkit::json::parse(R"({"scheme": "last"})"));
    CHECK(last.base.scheme == ecfkit::Scheme::last_eigen);
    CHECK(last.base.q == 25);
    CHECK(last.reps == 2000);

    CHECK_THROWS_AS(ecfkit::experiment_from_json(ecfkit::json::parse(R"({"q": 4})")), ecfkit::InvalidArgument);
    CHECK_THROWS_AS(ecfkit::experiment_from_json(ecfkit::json::parse(R"({"rho": "high"})")), ecfkit::ParseError);
    CHECK_THROWS_AS(ecfkit::experiment_from_json(ecfkit::json::parse(R"({"k": 3})")), ecfkit::InvalidArgument);
    CHECK_THROWS_AS(ecfkit::read_experiment("/nonexistent.json"), ecfkit::ParseError);
}

TEST_CASE("cell tables as CSV and JSON", "[dataio]") {
    std::vector<ecfkit::CellResult> cells(1);
    cells[0].omega = 0.5;
    cells[0].reps = 200;
    cells[0].rates = {{Method::naive, 5.5, 1.25}, {Method::permutation, 6.0, 1.5}};
    std::ostringstream out;
    ecfkit::write_cells_csv(cells, out);
    CHECK(out.str() == "omega,test,rate_pct,se_pct,reps\n0.5,nv,5.5,1.25,200\n0.5,rp,6,1.5,200\n");
    const auto j = ecfkit::cells_to_json(cells);
    CHECK(j[0]["rates"]["rp"]["rate_pct"] == 6.0);
    CHECK(j[0]["reps"] == 200);
}

TEST_CASE("power configs", "[dataio]") {
    const auto j = ecfkit::json::parse(R"({"grid": {"J": 21}, "gamma": {"fourier": [2, 1, 0.5]}, "tau": [0.5, 0.5],
        "d": [{"zero": true}, {"fourier": [[0, 0, 0], [0, 1, 0], [0, 0, 0]]}], "d_scale": 3, "draws": 5000})");
    const auto spec = ecfkit::power_spec_from_json(j);
    CHECK(spec.k() == 2);
    CHECK(spec.mc_draws == 5000);
    const auto ge = ecfkit::gamma_eigen(spec.gamma);
    REQUIRE(ge.values.size() == 3);
    CHECK_THAT(ge.values[0], WithinAbs(2.0, 1e-10));
    CHECK_THAT(ge.values[2], WithinAbs(0.5, 1e-10));
    CHECK(spec.d_surfaces[0].values().isZero());
    const ecfkit::Matrix phi = ecfkit::fourier_basis(3, spec.gamma.grid());
    CHECK((spec.d_surfaces[1].values() - 3.0 * phi.row(1).transpose() * phi.row(1)).cwiseAbs().maxCoeff() < 1e-12);

    const auto rep = ecfkit::asymptotic_power(spec, 1);
    const auto out = ecfkit::power_report_to_json(rep);
    for (const char* key : {"omega_eigenvalues", "delta_sq", "beta", "kappa", "critical_value", "power", "mc_draws"})
        CHECK(out.contains(key));

    CHECK_THROWS_AS(ecfkit::power_spec_from_json(ecfkit::json::parse(R"({"grid": {"J": 5}})")), ecfkit::ParseError);
    CHECK_THROWS_AS(ecfkit::power_spec_from_json(ecfkit::json::parse(
                        R"({"grid": {"J": 2}, "gamma": {"matrix": [[1, 0]]}, "tau": [0.5, 0.5], "d": []})")),
                    ecfkit::ParseError);
}
