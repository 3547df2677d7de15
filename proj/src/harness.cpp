#include "pricedyn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "pricedyn/oracles.hpp"
#include "pricedyn/supplier.hpp"

namespace pricedyn {

namespace {

constexpr double kLowerBoundSlack = 1e-8;

nlohmann::json vec_json(const Vector& v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

nlohmann::json config_json(const DynamicsConfig& c) {
    nlohmann::json j;
    j["algorithm"] = std::string(to_string(c.algorithm));
    j["C"] = c.C;
    j["eta"] = c.eta;
    j["epsilon_div"] = c.epsilon_div;
    j["adagrad_diagonal"] = c.adagrad_diagonal;
    j["oracle"] = std::string(to_string(c.oracle_kind));
    if (c.R) j["R"] = *c.R;
    if (c.M) j["M"] = *c.M;
    if (c.beta) j["beta"] = *c.beta;
    if (c.lipschitz) j["lipschitz"] = *c.lipschitz;
    return j;
}

}  // namespace

OptimumEstimate estimate_optimum(const MarketInstance& instance, const Vector& p0, double tol,
                                 std::int64_t max_iter) {
    if (!(tol > 0.0)) throw ParameterError("optimum tolerance must be positive");
    if (max_iter < 1) throw ParameterError("iteration cap must be positive");
    require_valid(instance);
    require_prices(instance, p0);
    if (!lipschitz_constants(instance).smooth)
        throw NonSmoothError("optimum estimation needs every supplier gamma > 0 (smooth the instance first)");

    DynamicsConfig cfg;
    cfg.algorithm = Algorithm::gd;
    cfg.N = max_iter;
    cfg.lipschitz = curvature_bound(instance);
    cfg.stop_tol = tol;
    cfg.record.dense_until = -1;
    cfg.record.stride = std::numeric_limits<std::int64_t>::max();
    cfg.record.wall_time = false;
    const RunTrace trace = run_gd(instance, p0, cfg);

    OptimumEstimate out;
    out.p_star = trace.p_final;
    out.f_star = potential(instance, out.p_star);
    out.clearing_residual = clearing_residual(instance, out.p_star);
    out.iterations = trace.iterations;
    out.converged = trace.stopped_early;
    out.lipschitz = *cfg.lipschitz;
    out.method = "gd";
    out.stop_criterion = trace.stopped_early ? "step-norm <= " + format_double(tol)
                                             : "iteration cap " + std::to_string(max_iter) + " reached (partial)";
    return out;
}

OptimumEstimate reference_optimum(const MarketInstance& instance, const Vector& p0, double tol,
                                  std::int64_t max_iter, double smoothing_eps) {
    if (lipschitz_constants(instance).smooth) return estimate_optimum(instance, p0, tol, max_iter);

    double radius = 0.0;
    for (const auto& s : instance.suppliers) radius = std::max(radius, 2.0 * s.y_hat.norm());
    if (!(radius > 0.0)) radius = 1.0;
    const SmoothedInstance sm = smooth(instance, smoothing_eps, radius);
    OptimumEstimate out = estimate_optimum(sm.smoothed, p0, tol, max_iter);
    out.method = "smoothed-lower-bound";
    out.clearing_residual = clearing_residual(instance, out.p_star);
    return out;
}

nlohmann::json to_json(const OptimumEstimate& e) {
    return {{"p_star", vec_json(e.p_star)},
            {"f_star", e.f_star},
            {"clearing_residual", e.clearing_residual},
            {"stop_criterion", e.stop_criterion},
            {"method", e.method},
            {"iterations", e.iterations},
            {"converged", e.converged},
            {"lipschitz", e.lipschitz}};
}

void validate_spec(const ExperimentSpec& spec, const MarketInstance& instance) {
    if (spec.algorithms.empty()) throw ParameterError("experiment needs at least one algorithm");
    if (spec.seeds.empty()) throw ParameterError("experiment needs at least one seed");
    if (spec.budget < instance.num_agents())
        throw ParameterError("budget " + std::to_string(spec.budget) + " is below S + D = " +
                             std::to_string(instance.num_agents()));
    if (!(spec.fstar_tol > 0.0)) throw ParameterError("f* tolerance must be positive");
}

std::int64_t budget_iterations(Algorithm algorithm, std::int64_t budget, int num_agents) {
    return is_stochastic(algorithm) ? budget : budget / num_agents;
}

std::vector<std::int64_t> checkpoints(std::int64_t budget) {
    return {budget / 100, budget / 10, budget};
}

double subopt_at(const RunTrace& trace, std::int64_t calls) {
    double value = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : trace.records) {
        if (r.oracle_calls > calls) break;
        value = r.subopt;
    }
    return value;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CompareResult compare(const ExperimentSpec& spec) {
    Problem problem = std::holds_alternative<GeneratorParams>(spec.source)
                          ? generate_synthetic(std::get<GeneratorParams>(spec.source))
                          : load(std::get<std::filesystem::path>(spec.source));
    return compare(problem, spec);
}

CompareResult compare(const Problem& problem, const ExperimentSpec& spec) {
    const MarketInstance& inst = problem.instance;
    require_valid(inst);
    validate_spec(spec, inst);
    for (const auto& c : spec.algorithms) {
        if (c.algorithm == Algorithm::smd) continue;  // R, M may be filled in below
        DynamicsConfig probe = c;
        probe.N = 1;
        probe.validate();
    }

    CompareResult result;
    result.problem = problem;
    result.optimum = reference_optimum(inst, problem.p0, spec.fstar_tol, spec.fstar_max_iter, spec.smoothing_eps);
    const double f_star = result.optimum.f_star;
    const auto marks = checkpoints(spec.budget);

    // Defaults for the mirror-descent step: distance to the reference optimum
    // and the largest per-agent gradient at the start and at the optimum.
    const double R_est = std::max((problem.p0 - result.optimum.p_star).norm(), 1e-6);
    double M_est = inst.num_consumers() > 0 ? 1.0 : 0.0;
    for (int i = 0; i < inst.num_agents(); ++i) {
        M_est = std::max(M_est, exact_agent_oracle(inst, i, problem.p0).g.norm());
        M_est = std::max(M_est, exact_agent_oracle(inst, i, result.optimum.p_star).g.norm());
    }
    if (!(M_est > 0.0)) M_est = 1.0;

    const bool write = !spec.out_dir.empty();
    if (write) {
        std::filesystem::create_directories(spec.out_dir);
        save(problem, spec.out_dir / "instance.json");
        result.files.push_back("instance.json");
    }

    for (const auto& base : spec.algorithms) {
        for (auto seed : spec.seeds) {
            RunOutcome outcome;
            outcome.algorithm = base.algorithm;
            outcome.seed = seed;
            DynamicsConfig cfg = base;
            cfg.seed = seed;
            cfg.N = budget_iterations(base.algorithm, spec.budget, inst.num_agents());
            cfg.f_star = f_star;
            cfg.record.checkpoint_calls = marks;
            cfg.record.wall_time = spec.wall_time;
            if (cfg.algorithm == Algorithm::smd) {
                if (!cfg.R) cfg.R = R_est;
                if (!cfg.M) cfg.M = M_est;
            }
            try {
                if (cfg.N < 1) throw ParameterError("budget leaves no iteration for this algorithm");
                outcome.trace = run(inst, problem.p0, cfg);
                outcome.ok = true;
            } catch (const std::exception& e) {
                outcome.ok = false;
                outcome.error = e.what();
                result.ok = false;
            }
            if (outcome.ok) {
                for (const auto& r : outcome.trace.records) {
                    if (r.f < f_star - kLowerBoundSlack) {
                        result.lower_bound_ok = false;
                        result.ok = false;
                        break;
                    }
                }
                if (write) {
                    outcome.file = std::string(to_string(cfg.algorithm)) + "_" + std::to_string(seed) + ".csv";
                    write_trace_csv(outcome.trace, spec.out_dir / outcome.file);
                    result.files.push_back(outcome.file);
                }
            }
            result.runs.push_back(std::move(outcome));
        }
    }

    for (const auto& base : spec.algorithms) {
        for (auto cp : marks) {
            std::vector<double> values;
            for (const auto& run : result.runs)
                if (run.ok && run.algorithm == base.algorithm) values.push_back(subopt_at(run.trace, cp));
            SummaryRow row;
            row.algo = std::string(to_string(base.algorithm));
            row.checkpoint_calls = cp;
            row.median_subopt = quantile(values, 0.5);
            row.q25 = quantile(values, 0.25);
            row.q75 = quantile(values, 0.75);
            result.summary.push_back(row);
        }
    }

    if (write) {
        {
            std::ofstream os(spec.out_dir / "summary.csv");
            if (!os) throw Error("cannot write summary.csv");
            write_summary_csv(result.summary, os);
        }
        result.files.push_back("summary.csv");
        result.files.push_back("manifest.json");
        std::ofstream os(spec.out_dir / "manifest.json");
        if (!os) throw Error("cannot write manifest.json");
        os << manifest_json(result, spec).dump(2) << '\n';
    }
    return result;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
    os << kSummaryHeader << '\n';
    for (const auto& r : rows) {
        os << r.algo << ',' << r.checkpoint_calls << ',' << format_double(r.median_subopt) << ','
           << format_double(r.q25) << ',' << format_double(r.q75) << '\n';
    }
}

nlohmann::json manifest_json(const CompareResult& result, const ExperimentSpec& spec) {
    const MarketInstance& inst = result.problem.instance;
    nlohmann::json j;
    if (std::holds_alternative<GeneratorParams>(spec.source)) {
        const auto& g = std::get<GeneratorParams>(spec.source);
        j["instance_source"] = {{"generate", {{"seed", g.seed}, {"S", g.S}, {"D", g.D}, {"n", g.n}, {"m", g.m},
                                              {"gamma", g.gamma}, {"cost_coeff", g.cost_coeff}}}};
    } else {
        j["instance_source"] = {{"file", std::get<std::filesystem::path>(spec.source).string()}};
    }
    j["S"] = inst.num_suppliers();
    j["D"] = inst.num_consumers();
    j["n"] = inst.n;
    j["m"] = inst.m;
    j["budget"] = spec.budget;
    j["checkpoints"] = checkpoints(spec.budget);
    j["seeds"] = spec.seeds;
    auto algos = nlohmann::json::array();
    for (const auto& c : spec.algorithms) algos.push_back(config_json(c));
    j["algorithms"] = algos;
    nlohmann::json opt = to_json(result.optimum);
    opt.erase("p_star");
    j["optimum"] = opt;

    double observed_B = 0.0;
    double observed_M2 = 0.0;
    auto runs = nlohmann::json::array();
    for (const auto& r : result.runs) {
        nlohmann::json e;
        e["algo"] = std::string(to_string(r.algorithm));
        e["seed"] = r.seed;
        e["status"] = r.ok ? "ok" : "failed";
        if (!r.ok) e["error"] = r.error;
        if (r.ok) {
            e["file"] = r.file;
            e["iterations"] = r.trace.iterations;
            e["oracle_calls"] = r.trace.oracle_calls;
            if (!r.trace.records.empty()) e["final_subopt"] = r.trace.records.back().subopt;
            e["max_grad_norm"] = r.trace.max_grad_norm;
            e["mean_sq_grad_norm"] = r.trace.mean_sq_grad_norm;
            if (is_stochastic(r.algorithm)) {
                observed_B = std::max(observed_B, r.trace.max_grad_norm);
                observed_M2 = std::max(observed_M2, r.trace.mean_sq_grad_norm);
            }
        }
        runs.push_back(e);
    }
    j["runs"] = runs;
    j["observed_bounds"] = {{"B_max_grad_norm", observed_B}, {"M_rms_grad_norm", std::sqrt(observed_M2)}};
    j["lower_bound_ok"] = result.lower_bound_ok;
    j["ok"] = result.ok;
    j["files"] = result.files;
    return j;
}

}  // namespace pricedyn
