#pragma once

// Monte Carlo size/power experiments over the simulation generator.
//
// Seeding: replication r of the cell at covariance shift omega draws its
// data from derive_seed(master_seed, bits(omega), r) and its permutations
// from derive_seed(that, 1). Results therefore do not depend on the worker
// count, on the order of omega values, or on which tests are selected.

#include <ecfkit/ecftest.hpp>
#include <ecfkit/parallel.hpp>
#include <ecfkit/random.hpp>
#include <ecfkit/simgen.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ecfkit {

struct ExperimentSpec {
    SimConfig base;
    std::vector<double> omega_values{0.0};
    std::vector<Method> tests{Method::naive, Method::bias_reduced, Method::permutation};
    double alpha = 0.05;
    std::size_t reps = 2000;
    std::size_t permutations = 500;
    std::uint64_t master_seed = 0;
    /// 0 = ECFKIT_THREADS or hardware concurrency.
    unsigned threads = 0;

    void validate() const {
        base.validate();
        if (reps < 1) throw InvalidArgument("experiment: reps must be >= 1");
        if (tests.empty()) throw InvalidArgument("experiment: no tests selected");
        if (std::find(tests.begin(), tests.end(), Method::permutation) != tests.end() && permutations < 1)
            throw InvalidArgument("experiment: permutations must be >= 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("experiment: alpha must lie in (0, 1)");
    }
};

struct TestRate {
    Method test = Method::naive;
    double rate_pct = 0.0;
    double se_pct = 0.0;
};

struct CellResult {
    double omega = 0.0;
    std::vector<TestRate> rates;
    std::size_t reps = 0;

    [[nodiscard]] const TestRate& rate(Method m) const {
        for (const auto& r : rates)
            if (r.test == m) return r;
        throw InvalidArgument("cell has no result for method " + std::string(to_string(m)));
    }
};

/// p-values and decisions of every selected test for one replication,
/// aligned with ExperimentSpec::tests.
struct Replication {
    std::vector<double> p_values;
    std::vector<bool> rejects;
};

inline std::uint64_t replication_seed(std::uint64_t master_seed, double omega, std::size_t rep) {
    return derive_seed(master_seed, std::bit_cast<std::uint64_t>(omega + 0.0), rep);
}

inline Replication run_replication(const ExperimentSpec& spec, double omega, std::size_t rep) {
    SimConfig cfg = spec.base;
    cfg.omega = omega;
    const std::uint64_t seed = replication_seed(spec.master_seed, omega, rep);
    const Dataset ds = generate_dataset(cfg, seed);

    Replication out;
    out.p_values.reserve(spec.tests.size());
    out.rejects.reserve(spec.tests.size());
    std::optional<CovarianceSummary> summary;
    for (const Method m : spec.tests) {
        TestReport report;
        if (m == Method::permutation) {
            report = permutation_test(PermutationEngine(ds), spec.permutations, spec.alpha, derive_seed(seed, 1));
        } else {
            if (!summary) summary = summarize(ds);
            report = ws_test(*summary, m, spec.alpha);
        }
        out.p_values.push_back(report.p_value);
        out.rejects.push_back(report.reject);
    }
    return out;
}

/// All replications of one cell, indexed by replication number.
inline std::vector<Replication> run_replications(const ExperimentSpec& spec, double omega) {
    spec.validate();
    std::vector<Replication> reps(spec.reps);
    parallel_for(spec.reps, spec.threads, [&](std::size_t r) { reps[r] = run_replication(spec, omega, r); });
    return reps;
}

inline CellResult summarize_cell(const ExperimentSpec& spec, double omega, const std::vector<Replication>& reps) {
    CellResult cell;
    cell.omega = omega;
    cell.reps = reps.size();
    for (std::size_t t = 0; t < spec.tests.size(); ++t) {
        std::size_t hits = 0;
        for (const auto& r : reps) hits += r.rejects[t] ? 1 : 0;
        const double p = static_cast<double>(hits) / static_cast<double>(reps.size());
        cell.rates.push_back(TestRate{spec.tests[t], 100.0 * p,
                                      100.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(reps.size()))});
    }
    return cell;
}

/// Rejection percentages of the selected tests at one value of omega.
inline CellResult run_cell(const ExperimentSpec& spec, double omega) {
    return summarize_cell(spec, omega, run_replications(spec, omega));
}

inline std::vector<CellResult> run_table(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<CellResult> out;
    out.reserve(spec.omega_values.size());
    for (const double omega : spec.omega_values) out.push_back(run_cell(spec, omega));
    return out;
}

}  // namespace ecfkit
