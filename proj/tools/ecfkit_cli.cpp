// ecfkit command-line front end.
//
//   ecfkit gen      --out data.csv [--scheme shift|last --k 5 --sizes 20,25,22,18,16 ...]
//   ecfkit test     --input data.csv --method nv|br|rp [--alpha 0.05 --permutations 1000 --seed 0]
//   ecfkit simulate --config exp.json [--reps R --seed S --out table.csv --json table.json]
//   ecfkit power    --config power.json [--alpha A --draws M --seed S]
//
// Exit codes: 0 success (a rejection is not an error), 2 usage error,
// 3 data error, 4 numeric degeneracy. JSON and CSV go to stdout unless an
// output path is given; diagnostics go to stderr.

#include <ecfkit/ecfkit.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kDegenerate = 4 };

/// Thrown for flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
    if (path.empty() || path == "-") return std::cout;
    file.open(path);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    return file;
}

struct GenOptions {
    std::string scheme = "shift";
    std::optional<std::size_t> k;
    std::vector<std::size_t> sizes;
    std::optional<double> rho;
    double omega = 0.0;
    std::string dist = "gaussian";
    std::optional<int> q;
    std::optional<int> J;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_gen(const GenOptions& o) {
    ecfkit::SimConfig cfg;
    try {
        const auto scheme = ecfkit::parse_scheme(o.scheme);
        if (scheme == ecfkit::Scheme::last_eigen) cfg = ecfkit::SimConfig::last_eigen_defaults();
        if (!o.sizes.empty()) {
            cfg.sizes = o.sizes;
            cfg.k = o.sizes.size();
        }
        if (o.k && *o.k != cfg.k) throw UsageError("--k does not match the number of --sizes");
        if (o.rho) cfg.rho = *o.rho;
        cfg.omega = o.omega;
        cfg.dist = ecfkit::parse_innovation(o.dist);
        if (o.q) cfg.q = *o.q;
        if (o.J) cfg.J = *o.J;
        cfg.validate();
    } catch (const ecfkit::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const ecfkit::Dataset ds = ecfkit::generate_dataset(cfg, o.seed);
    std::ofstream file;
    ecfkit::write_dataset(ds, open_output(o.out, file));
    return kOk;
}

struct TestOptions {
    std::string input;
    std::string method = "nv";
    double alpha = 0.05;
    std::size_t permutations = 1000;
    std::uint64_t seed = 0;
    std::vector<double> domain;
    std::string out;
};

int cmd_test(const TestOptions& o) {
    ecfkit::Method method{};
    try {
        method = ecfkit::parse_method(o.method);
    } catch (const ecfkit::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
    if (o.permutations < 1) throw UsageError("--permutations must be >= 1");
    std::optional<std::pair<double, double>> domain;
    if (!o.domain.empty()) {
        if (o.domain.size() != 2 || !(o.domain[0] < o.domain[1])) throw UsageError("--domain expects a,b with a < b");
        domain = std::make_pair(o.domain[0], o.domain[1]);
    }

    ecfkit::Dataset ds = [&] {
        try {
            return ecfkit::read_dataset(o.input, domain);
        } catch (const ecfkit::InvalidArgument& e) {
            throw ecfkit::ParseError(e.what());
        }
    }();

    ecfkit::TestReport report;
    if (method == ecfkit::Method::permutation) {
        ecfkit::PermutationOptions opts;
        opts.threads = ecfkit::default_threads();
        report = ecfkit::permutation_test(ds, o.permutations, o.alpha, o.seed, opts);
    } else {
        report = ecfkit::ws_test(ds, method, o.alpha);
    }
    std::ofstream file;
    ecfkit::write_report(report, open_output(o.out, file));
    return kOk;
}

struct SimulateOptions {
    std::string config;
    std::optional<std::size_t> reps;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string json_out;
};

int cmd_simulate(const SimulateOptions& o) {
    ecfkit::ExperimentSpec spec = ecfkit::read_experiment(o.config);
    if (o.reps) {
        if (*o.reps < 1) throw UsageError("--reps must be >= 1");
        spec.reps = *o.reps;
    }
    if (o.seed) spec.master_seed = *o.seed;
    spec.threads = ecfkit::default_threads();

    std::cerr << "simulate: " << spec.omega_values.size() << " cell(s) x " << spec.reps << " reps on "
              << spec.threads << " thread(s)\n";
    const auto cells = ecfkit::run_table(spec);

    std::ofstream file;
    ecfkit::write_cells_csv(cells, open_output(o.out, file));
    if (!o.json_out.empty()) {
        std::ofstream js(o.json_out);
        if (!js) throw std::runtime_error("cannot open '" + o.json_out + "' for writing");
        js << ecfkit::cells_to_json(cells).dump(2) << '\n';
    }
    return kOk;
}

struct PowerOptions {
    std::string config;
    std::optional<double> alpha;
    std::optional<std::size_t> draws;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_power(const PowerOptions& o) {
    ecfkit::PowerSpec spec = ecfkit::power_spec_from_json(ecfkit::detail::parse_json_file(o.config));
    if (o.alpha) spec.alpha = *o.alpha;
    if (o.draws) spec.mc_draws = *o.draws;
    try {
        spec.validate();
    } catch (const ecfkit::InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const ecfkit::PowerReport report = ecfkit::asymptotic_power(spec, o.seed, ecfkit::default_threads());
    std::ofstream file;
    open_output(o.out, file) << ecfkit::power_report_to_json(report).dump(2) << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"k-sample equal-covariance-function tests for functional data"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset (CSV)");
    gen_cmd->add_option("--scheme", gen.scheme, "shift (basis shift) or last (last eigenvalue)")
        ->check(CLI::IsMember({"shift", "shift_basis", "last", "last_eigen"}));
    gen_cmd->add_option("--k", gen.k, "Number of groups");
    gen_cmd->add_option("--sizes", gen.sizes, "Group sizes")->delimiter(',');
    gen_cmd->add_option("--rho", gen.rho, "Variance decay rate in (0,1)");
    gen_cmd->add_option("--omega", gen.omega, "Covariance difference magnitude");
    gen_cmd->add_option("--dist", gen.dist, "gaussian or t4")->check(CLI::IsMember({"gaussian", "t4"}));
    gen_cmd->add_option("--q", gen.q, "Number of basis functions (odd)");
    gen_cmd->add_option("--J", gen.J, "Number of grid points");
    gen_cmd->add_option("--seed", gen.seed, "Random seed");
    gen_cmd->add_option("--out", gen.out, "Output CSV (default stdout)");

    TestOptions test;
    auto* test_cmd = app.add_subcommand("test", "Test equality of covariance functions");
    test_cmd->add_option("--input", test.input, "Dataset CSV")->required();
    test_cmd->add_option("--method", test.method, "nv, br or rp");
    test_cmd->add_option("--alpha", test.alpha, "Significance level");
    test_cmd->add_option("--permutations", test.permutations, "Permutations for rp");
    test_cmd->add_option("--seed", test.seed, "Seed for rp");
    test_cmd->add_option("--domain", test.domain, "Use a uniform grid on a,b instead of the header labels")
        ->delimiter(',');
    test_cmd->add_option("--out", test.out, "Output JSON (default stdout)");

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a size/power simulation table");
    sim_cmd->add_option("--config", sim.config, "Experiment JSON")->required();
    sim_cmd->add_option("--reps", sim.reps, "Replications per cell");
    sim_cmd->add_option("--seed", sim.seed, "Master seed");
    sim_cmd->add_option("--out", sim.out, "Output CSV (default stdout)");
    sim_cmd->add_option("--json", sim.json_out, "Also write results as JSON");

    PowerOptions pow;
    auto* pow_cmd = app.add_subcommand("power", "Asymptotic power under a local alternative");
    pow_cmd->add_option("--config", pow.config, "Power JSON")->required();
    pow_cmd->add_option("--alpha", pow.alpha, "Significance level");
    pow_cmd->add_option("--draws", pow.draws, "Monte Carlo draws");
    pow_cmd->add_option("--seed", pow.seed, "Random seed");
    pow_cmd->add_option("--out", pow.out, "Output JSON (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*gen_cmd) return cmd_gen(gen);
        if (*test_cmd) return cmd_test(test);
        if (*sim_cmd) return cmd_simulate(sim);
        if (*pow_cmd) return cmd_power(pow);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ecfkit::DegenerateData& e) {
        std::cerr << "degenerate data: " << e.what() << '\n';
        return kDegenerate;
    } catch (const ecfkit::DegenerateDof& e) {
        std::cerr << "degenerate degrees of freedom: " << e.what() << '\n';
        return kDegenerate;
    } catch (const ecfkit::ParseError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const ecfkit::InsufficientSample& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const ecfkit::InvalidArgument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
