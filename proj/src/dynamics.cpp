#include "pricedyn/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>

namespace pricedyn {

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::sgd: return "sgd";
        case Algorithm::adagrad: return "adagrad";
        case Algorithm::sgd_online: return "sgd-online";
        case Algorithm::smd: return "smd";
        case Algorithm::gd: return "gd";
        case Algorithm::agd: return "agd";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    for (auto a : {Algorithm::sgd, Algorithm::adagrad, Algorithm::sgd_online, Algorithm::smd, Algorithm::gd,
                   Algorithm::agd}) {
        if (to_string(a) == name) return a;
    }
    throw ParameterError("unknown algorithm '" + std::string(name) +
                         "' (expected sgd, adagrad, sgd-online, smd, gd or agd)");
}

bool is_stochastic(Algorithm algorithm) {
    return algorithm != Algorithm::gd && algorithm != Algorithm::agd;
}

void DynamicsConfig::validate() const {
    if (N < 1) throw ParameterError("N must be >= 1");
    if (record.stride < 1) throw ParameterError("record stride must be >= 1");
    switch (algorithm) {
        case Algorithm::sgd:
        case Algorithm::sgd_online:
            if (!(C > 0.0)) throw ParameterError("C must be positive");
            break;
        case Algorithm::adagrad:
            if (!(eta > 0.0)) throw ParameterError("eta must be positive");
            if (!(epsilon_div >= 0.0)) throw ParameterError("epsilon_div must be >= 0");
            break;
        case Algorithm::smd:
            if (!(C > 0.0)) throw ParameterError("C must be positive");
            if (!R || !M) throw ParameterError("smd needs both R and M");
            if (!(*R > 0.0) || !(*M > 0.0)) throw ParameterError("smd R and M must be positive");
            break;
        case Algorithm::gd:
        case Algorithm::agd:
            if (lipschitz && !(*lipschitz > 0.0)) throw ParameterError("lipschitz override must be positive");
            if (!(stop_tol >= 0.0)) throw ParameterError("stop_tol must be >= 0");
            break;
    }
    if (algorithm != Algorithm::gd && algorithm != Algorithm::agd &&
        oracle_kind == OracleKind::full)
        throw ParameterError("stochastic dynamics need a per-agent oracle kind");
    if (beta && !(*beta > 0.0 && *beta < 1.0)) throw ParameterError("beta must lie in (0, 1)");
}

Vector step_project(const Vector& p, const Vector& g, double step) {
    return (p - step * g).cwiseMax(0.0);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

using Clock = std::chrono::steady_clock;
using Objective = std::function<double(const Vector&)>;

class Recorder {
public:
    Recorder(const DynamicsConfig& config, Objective objective, std::int64_t calls_per_iter, RunTrace& trace)
        : config_(config), objective_(std::move(objective)), calls_per_iter_(calls_per_iter),
          trace_(trace), start_(Clock::now()) {}

    bool wanted(std::int64_t t, std::int64_t calls) const {
        const auto& pol = config_.record;
        if (t <= pol.dense_until || t % pol.stride == 0 || t == config_.N) return true;
        for (auto cp : pol.checkpoint_calls)
            if (calls <= cp && cp < calls + calls_per_iter_) return true;
        return false;
    }

    void record(std::int64_t t, std::int64_t calls, const Vector& p, bool force = false) {
        if (!force && !wanted(t, calls)) return;
        TraceRecord r;
        r.iter = t;
        r.oracle_calls = calls;
        r.f = objective_(p);
        r.subopt = config_.f_star ? r.f - *config_.f_star : std::numeric_limits<double>::quiet_NaN();
        if (config_.record.wall_time)
            r.elapsed_s = std::chrono::duration<double>(Clock::now() - start_).count();
        trace_.records.push_back(r);
    }

    void observe_gradient(const Vector& g) {
        const double sq = g.squaredNorm();
        trace_.max_grad_norm = std::max(trace_.max_grad_norm, std::sqrt(sq));
        sq_sum_ += sq;
        ++grads_;
        trace_.mean_sq_grad_norm = sq_sum_ / static_cast<double>(grads_);
    }

private:
    const DynamicsConfig& config_;
    Objective objective_;
    std::int64_t calls_per_iter_;
    RunTrace& trace_;
    Clock::time_point start_;
    double sq_sum_ = 0.0;
    std::int64_t grads_ = 0;
};

void check_start(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config) {
    require_valid(instance);
    require_prices(instance, p0);
    config.validate();
}

// One draw of the stochastic gradient at p.
using Sampler = std::function<Vector(const Vector& p, Rng& rng)>;

// Step factor for iteration t (0-based) given the freshly drawn gradient.
// Returns the new iterate.
using Stepper = std::function<Vector(std::int64_t t, const Vector& p, const Vector& g, RunTrace& trace)>;

RunTrace run_stochastic(const Vector& p0, const DynamicsConfig& config, const Objective& objective,
                        const Sampler& sampler, const Stepper& stepper) {
    RunTrace trace;
    trace.algorithm = config.algorithm;
    trace.seed = config.seed;
    trace.averaging = AveragingState(p0.size());
    Recorder rec(config, objective, 1, trace);
    Rng rng(config.seed);

    Vector p = p0;
    if (config.keep_iterates) trace.iterates.push_back(p);
    rec.record(0, 0, p0, true);
    for (std::int64_t t = 0; t < config.N; ++t) {
        const Vector g = sampler(p, rng);
        rec.observe_gradient(g);
        p = stepper(t, p, g, trace);
        trace.averaging.add(p);
        if (config.keep_iterates) trace.iterates.push_back(p);
        trace.iterations = t + 1;
        trace.oracle_calls = t + 1;
        if (rec.wanted(t + 1, t + 1)) rec.record(t + 1, t + 1, trace.averaging.average());
    }
    trace.p_last = p;
    trace.p_final = trace.averaging.average();
    return trace;
}

Sampler finite_sampler(const MarketInstance& instance, OracleKind kind) {
    const int S = instance.num_suppliers();
    const int D = instance.num_consumers();
    return [&instance, kind, S, D](const Vector& p, Rng& rng) {
        const int agent = uniform_agent(rng, S, D);
        return agent_oracle(instance, kind, agent, p, rng).g;
    };
}

Stepper root_schedule(double scale, bool keep) {
    return [scale, keep](std::int64_t t, const Vector& p, const Vector& g, RunTrace& trace) {
        const double step = scale / std::sqrt(static_cast<double>(t + 1));
        if (keep) trace.step_sizes.push_back(step);
        return step_project(p, g, step);
    };
}

Objective instance_objective(const MarketInstance& instance) {
    return [&instance](const Vector& p) { return potential(instance, p); };
}

double deterministic_lipschitz(const MarketInstance& instance, const DynamicsConfig& config) {
    const auto lc = lipschitz_constants(instance);
    if (!lc.smooth)
        throw NonSmoothError(std::string(to_string(config.algorithm)) +
                             " needs every supplier gamma > 0; use smd or smooth the instance first");
    return config.lipschitz ? *config.lipschitz : lc.total;
}

}  // namespace

RunTrace run_sgd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config) {
    check_start(instance, p0, config);
    return run_stochastic(p0, config, instance_objective(instance), finite_sampler(instance, config.oracle_kind),
                          root_schedule(config.C, config.keep_iterates));
}

RunTrace run_smd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config) {
    check_start(instance, p0, config);
    const double scale = config.C * *config.R / *config.M;
    return run_stochastic(p0, config, instance_objective(instance), finite_sampler(instance, config.oracle_kind),
                          root_schedule(scale, config.keep_iterates));
}

RunTrace run_adagrad(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config) {
    check_start(instance, p0, config);
    const double eta = config.eta;
    const double eps = config.epsilon_div;
    const bool keep = config.keep_iterates;
    Stepper stepper;
    if (config.adagrad_diagonal) {
        auto H = std::make_shared<Vector>(Vector::Zero(p0.size()));
        stepper = [H, eta, eps, keep](std::int64_t, const Vector& p, const Vector& g, RunTrace& trace) {
            *H += g.cwiseAbs2();
            Vector scaled(p.size());
            for (Eigen::Index i = 0; i < p.size(); ++i) {
                const double denom = std::sqrt((*H)[i] + eps);
                scaled[i] = denom > 0.0 ? g[i] / denom : 0.0;
            }
            if (keep) trace.step_sizes.push_back(eta / std::sqrt(H->maxCoeff() + eps));
            return step_project(p, scaled, eta);
        };
    } else {
        auto H = std::make_shared<double>(0.0);
        stepper = [H, eta, eps, keep](std::int64_t, const Vector& p, const Vector& g, RunTrace& trace) {
            *H += g.squaredNorm();
            const double denom = std::sqrt(*H + eps);
            const double step = denom > 0.0 ? eta / denom : 0.0;
            if (keep) trace.step_sizes.push_back(step);
            return step_project(p, g, step);
        };
    }
    return run_stochastic(p0, config, instance_objective(instance), finite_sampler(instance, config.oracle_kind),
                          stepper);
}

RunTrace run_sgd_online(const PopulationModel& population, const Vector& p0, const MarketInstance* evaluation,
                        const DynamicsConfig& config) {
    config.validate();
    PopulationModel model = population;
    if (config.beta) model.beta = *config.beta;
    model.validate();
    if (p0.size() != model.n || (p0.array() < 0.0).any() || !p0.allFinite())
        throw ParameterError("starting prices must be a nonnegative n-vector");

    Objective objective;
    if (evaluation != nullptr) {
        require_valid(*evaluation);
        if (evaluation->n != model.n) throw ParameterError("evaluation instance size differs from population");
        objective = instance_objective(*evaluation);
    } else {
        // Separate stream so the evaluation sample does not perturb the dynamics.
        Rng eval_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
        auto sample = std::make_shared<PopulationSample>(
            draw_population_sample(model, config.online_eval_samples, eval_rng));
        objective = [sample](const Vector& p) { return sample->objective(p); };
    }
    Sampler sampler = [&model](const Vector& p, Rng& rng) { return population_oracle(model, p, rng).g; };
    return run_stochastic(p0, config, objective, sampler, root_schedule(config.C, config.keep_iterates));
}

RunTrace run_gd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config) {
    check_start(instance, p0, config);
    const double L = deterministic_lipschitz(instance, config);
    const std::int64_t per_iter = instance.num_agents();

    RunTrace trace;
    trace.algorithm = config.algorithm;
    trace.seed = config.seed;
    Recorder rec(config, instance_objective(instance), per_iter, trace);
    Vector p = p0;
    if (config.keep_iterates) trace.iterates.push_back(p);
    rec.record(0, 0, p, true);
    for (std::int64_t t = 0; t < config.N; ++t) {
        const Vector g = full_gradient(instance, p).g;
        rec.observe_gradient(g);
        Vector next = step_project(p, g, 1.0 / L);
        const double moved = (next - p).norm();
        p = std::move(next);
        if (config.keep_iterates) {
            trace.iterates.push_back(p);
            trace.step_sizes.push_back(1.0 / L);
        }
        trace.iterations = t + 1;
        trace.oracle_calls = (t + 1) * per_iter;
        const bool done = config.stop_tol > 0.0 && moved <= config.stop_tol;
        rec.record(t + 1, trace.oracle_calls, p, done);
        if (done) {
            trace.stopped_early = true;
            break;
        }
    }
    trace.p_last = p;
    trace.p_final = p;
    return trace;
}

RunTrace run_agd(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config) {
    check_start(instance, p0, config);
    const double L = deterministic_lipschitz(instance, config);
    const std::int64_t per_iter = instance.num_agents();

    RunTrace trace;
    trace.algorithm = config.algorithm;
    trace.seed = config.seed;
    Recorder rec(config, instance_objective(instance), per_iter, trace);
    Vector x = p0;
    Vector y = p0;
    double momentum = 1.0;
    if (config.keep_iterates) trace.iterates.push_back(x);
    rec.record(0, 0, x, true);
    for (std::int64_t t = 0; t < config.N; ++t) {
        const Vector g = full_gradient(instance, y).g;
        rec.observe_gradient(g);
        Vector next = step_project(y, g, 1.0 / L);
        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        // The extrapolated point is kept in the orthant so every oracle query sees p >= 0.
        y = (next + ((momentum - 1.0) / next_momentum) * (next - x)).cwiseMax(0.0);
        const double moved = (next - x).norm();
        x = std::move(next);
        momentum = next_momentum;
        if (config.keep_iterates) {
            trace.iterates.push_back(x);
            trace.step_sizes.push_back(1.0 / L);
        }
        trace.iterations = t + 1;
        trace.oracle_calls = (t + 1) * per_iter;
        const bool done = config.stop_tol > 0.0 && moved <= config.stop_tol;
        rec.record(t + 1, trace.oracle_calls, x, done);
        if (done) {
            trace.stopped_early = true;
            break;
        }
    }
    trace.p_last = x;
    trace.p_final = x;
    return trace;
}

RunTrace run(const MarketInstance& instance, const Vector& p0, const DynamicsConfig& config) {
    switch (config.algorithm) {
        case Algorithm::sgd: return run_sgd(instance, p0, config);
        case Algorithm::adagrad: return run_adagrad(instance, p0, config);
        case Algorithm::smd: return run_smd(instance, p0, config);
        case Algorithm::gd: return run_gd(instance, p0, config);
        case Algorithm::agd: return run_agd(instance, p0, config);
        case Algorithm::sgd_online: {
            require_valid(instance);
            const PopulationModel model = finite_population(instance);
            return run_sgd_online(model, p0, &instance, config);
        }
    }
    throw ParameterError("unknown algorithm");
}

void write_trace_csv(const RunTrace& trace, std::ostream& os) {
    os << kTraceHeader << '\n';
    for (const auto& r : trace.records) {
        os << r.iter << ',' << r.oracle_calls << ',' << format_double(r.f) << ',' << format_double(r.subopt)
           << ',' << format_double(r.elapsed_s) << '\n';
    }
}

void write_trace_csv(const RunTrace& trace, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_trace_csv(trace, os);
}

}  // namespace pricedyn
