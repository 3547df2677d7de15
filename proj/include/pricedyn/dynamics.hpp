#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pricedyn/common.hpp"
#include "pricedyn/market.hpp"
#include "pricedyn/oracles.hpp"

namespace pricedyn {

enum class Algorithm { sgd, adagrad, sgd_online, smd, gd, agd };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);  // throws ParameterError

// Stochastic methods consume one oracle call per iteration.
bool is_stochastic(Algorithm algorithm);

// Which iterations end up in the trace. Iterations 0..dense_until are all
// recorded, then every stride-th, plus the last one and any iteration whose
// oracle-call window contains one of checkpoint_calls.
struct RecordPolicy {
    std::int64_t dense_until = 1000;
    std::int64_t stride = 10;
    std::vector<std::int64_t> checkpoint_calls;
    bool wall_time = true;  // when false elapsed_s is written as 0 so traces are byte-stable
};

struct DynamicsConfig {
    Algorithm algorithm = Algorithm::sgd;
    std::int64_t N = 1000;
    double C = 1.0;             // sgd, sgd-online, smd
    double eta = 1.0;           // adagrad
    double epsilon_div = 1e-8;  // adagrad
    bool adagrad_diagonal = false;
    std::optional<double> R;     // smd
    std::optional<double> M;     // smd
    std::optional<double> beta;  // sgd-online; defaults to the population's own beta
    std::uint64_t seed = 0;
    OracleKind oracle_kind = OracleKind::sampled_sale;

    // gd / agd
    std::optional<double> lipschitz;  // overrides the per-agent bound for the step 1/L
    double stop_tol = 0.0;            // stop once |p_{t+1} - p_t| <= stop_tol; 0 disables

    std::optional<double> f_star;  // reference optimum for the subopt column
    RecordPolicy record;
    bool keep_iterates = false;
    int online_eval_samples = 2000;  // used when sgd-online has no evaluation instance

    void validate() const;
};

struct TraceRecord {
    std::int64_t iter = 0;
    std::int64_t oracle_calls = 0;
    double f = 0.0;
    double subopt = 0.0;
    double elapsed_s = 0.0;
};

// Running sum of iterates p_1..p_t.
class AveragingState {
public:
    AveragingState() = default;
    explicit AveragingState(Eigen::Index n) : sum_(Vector::Zero(n)) {}

    void add(const Vector& p) {
        sum_ += p;
        ++count_;
    }
    std::int64_t count() const { return count_; }
    const Vector& sum() const { return sum_; }
    Vector average() const { return sum_ / static_cast<double>(count_); }

private:
    Vector sum_;
    std::int64_t count_ = 0;
};

struct RunTrace {
    Algorithm algorithm = Algorithm::sgd;
    std::uint64_t seed = 0;
    std::vector<TraceRecord> records;
    Vector p_final;  // averaged output for stochastic methods, last iterate for gd / agd
    Vector p_last;
    AveragingState averaging;
    std::int64_t iterations = 0;
    std::int64_t oracle_calls = 0;
    bool stopped_early = false;

    // Observed oracle magnitudes: max |g| and mean |g|^2 over the run.
    double max_grad_norm = 0.0;
    double mean_sq_grad_norm = 0.0;

    // Filled only with keep_iterates: p_0..p_N and the step factor of each iteration.
    std::vector<Vector> iterates;
    std::vector<double> step_sizes;
};

// Componentwise max(0, p - step * g).
Vector step_project(const Vector& p, const Vector& g, double step);

RunTrace run_sgd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config);
RunTrace run_adagrad(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config);
RunTrace run_smd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config);
RunTrace run_gd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config);
RunTrace run_agd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config);

// evaluation may be null; the reported objective is then a fixed-sample
// estimate of the population objective.
RunTrace run_sgd_online(const PopulationModel& population, const Vector& p0,
                        const MarketInstance* evaluation, const DynamicsConfig& config);

// Dispatch on config.algorithm; sgd-online treats the instance as a finite population.
RunTrace run(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config);

inline constexpr std::string_view kTraceHeader = "iter,oracle_calls,f,subopt,elapsed_s";

void write_trace_csv(const RunTrace& trace, std::ostream& os);
void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path);

// "%.17g" formatting used by every CSV writer in the project.
std::string format_double(double x);

}  // namespace pricedyn
