#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pricedyn/common.hpp"
#include "pricedyn/dynamics.hpp"
#include "pricedyn/market.hpp"

namespace pricedyn {

struct OptimumEstimate {
    Vector p_star;
    double f_star = 0.0;
    double clearing_residual = 0.0;
    std::string stop_criterion;
    std::string method;  // "gd" or "smoothed-lower-bound"
    std::int64_t iterations = 0;
    bool converged = false;
    double lipschitz = 0.0;  // step was 1 / lipschitz
};

// Projected gradient descent until |p_{t+1} - p_t| <= tol. The step is
// 1 / curvature_bound(instance), which is a valid gradient Lipschitz constant
// for the quadratic cost family and far tighter than the per-agent bound when
// gamma is small. Throws NonSmoothError when some supplier has gamma = 0.
OptimumEstimate estimate_optimum(const MarketInstance& instance, const Vector& p0, double tol = 1e-10,
                                 std::int64_t max_iter = 10'000'000);

// Works for every instance. Smooth instances go through estimate_optimum;
// otherwise gamma = 0 suppliers get the synthetic penalty with target
// smoothing_eps and the smoothed optimum is returned. Since the penalty only
// lowers revenue, that value is a lower bound on the true optimum.
OptimumEstimate reference_optimum(const MarketInstance& instance, const Vector& p0, double tol = 1e-10,
                                  std::int64_t max_iter = 10'000'000, double smoothing_eps = 1e-9);

nlohmann::json to_json(const OptimumEstimate& estimate);

struct ExperimentSpec {
    std::variant<GeneratorParams, std::filesystem::path> source = GeneratorParams{};
    // One entry per algorithm; N, seed, f_star and record checkpoints are set per run.
    std::vector<DynamicsConfig> algorithms;
    std::vector<std::uint64_t> seeds;
    std::int64_t budget = 0;  // total agent observations per run
    double fstar_tol = 1e-10;
    std::int64_t fstar_max_iter = 10'000'000;
    double smoothing_eps = 1e-9;
    std::filesystem::path out_dir;  // empty: nothing is written
    bool wall_time = false;
};

// Throws ParameterError on an unusable spec for this instance.
void validate_spec(const ExperimentSpec& spec, const MarketInstance& instance);

// Iterations that fit into the budget: B for stochastic methods,
// floor(B / (S + D)) for full-gradient methods.
std::int64_t budget_iterations(Algorithm algorithm, std::int64_t budget, int num_agents);

// {B / 100, B / 10, B}
std::vector<std::int64_t> checkpoints(std::int64_t budget);

// Subopt of the last record with oracle_calls <= calls.
double subopt_at(const RunTrace& trace, std::int64_t calls);

// Linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct RunOutcome {
    Algorithm algorithm = Algorithm::sgd;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::string file;
    RunTrace trace;
};

struct SummaryRow {
    std::string algo;
    std::int64_t checkpoint_calls = 0;
    double median_subopt = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

struct CompareResult {
    Problem problem;
    OptimumEstimate optimum;
    std::vector<RunOutcome> runs;
    std::vector<SummaryRow> summary;
    bool lower_bound_ok = true;
    bool ok = true;
    std::vector<std::string> files;
};

CompareResult compare(const ExperimentSpec& spec);
CompareResult compare(const Problem& problem, const ExperimentSpec& spec);

inline constexpr std::string_view kSummaryHeader = "algo,checkpoint_calls,median_subopt,q25,q75";

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os);
nlohmann::json manifest_json(const CompareResult& result, const ExperimentSpec& spec);

}  // namespace pricedyn
