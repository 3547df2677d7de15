// pricedyn: generate instances, estimate the optimum, run and compare pricing dynamics.
//
// Exit codes: 0 ok, 2 usage, 3 validation, 4 runtime failure.
// Errors are also written to stderr as one JSON line.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pricedyn/consumer.hpp"
#include "pricedyn/dynamics.hpp"
#include "pricedyn/harness.hpp"
#include "pricedyn/market.hpp"
#include "pricedyn/oracles.hpp"

using namespace pricedyn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kValidation = 3, kRuntime = 4 };

int fail(int code, const std::string& kind, const std::string& message) {
    json j{{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << std::endl;
    return code;
}

struct SourceOptions {
    std::string instance;
    GeneratorParams gen;
};

void add_source(CLI::App* cmd, SourceOptions& src, const std::string& seed_flag = "--seed") {
    cmd->add_option("--instance,-i", src.instance, "Instance JSON file (otherwise one is generated)")
        ->check(CLI::ExistingFile);
    cmd->add_option(seed_flag, src.gen.seed, "Generator seed")->capture_default_str();
    cmd->add_option("--S", src.gen.S, "Number of suppliers")->capture_default_str();
    cmd->add_option("--D", src.gen.D, "Number of consumers")->capture_default_str();
    cmd->add_option("--n", src.gen.n, "Number of alternatives")->capture_default_str();
    cmd->add_option("--m", src.gen.m, "Number of groups")->capture_default_str();
    cmd->add_option("--gamma", src.gen.gamma, "Supplier adjustment cost")->capture_default_str();
    cmd->add_option("--cost", src.gen.cost_coeff, "Supplier quadratic cost coefficient")->capture_default_str();
}

Problem load_source(const SourceOptions& src) {
    return src.instance.empty() ? generate_synthetic(src.gen) : load(src.instance);
}

struct AlgoOptions {
    double C = 1.0;
    double eta = 1.0;
    double eps_div = 1e-8;
    std::optional<double> R, M, beta;
    std::string oracle = "sampled-sale";
    bool diagonal = false;
};

void add_algo_options(CLI::App* cmd, AlgoOptions& a) {
    cmd->add_option("--C", a.C, "Step-size constant for sgd, sgd-online and smd")->capture_default_str();
    cmd->add_option("--eta", a.eta, "AdaGrad step size")->capture_default_str();
    cmd->add_option("--eps-div", a.eps_div, "AdaGrad division guard")->capture_default_str();
    cmd->add_option("--R", a.R, "SMD distance bound (default: estimated)");
    cmd->add_option("--M", a.M, "SMD gradient bound (default: estimated)");
    cmd->add_option("--beta", a.beta, "Supplier fraction for sgd-online");
    cmd->add_option("--oracle", a.oracle, "Stochastic oracle")
        ->check(CLI::IsMember({"sampled-sale", "exact-agent"}))
        ->capture_default_str();
    cmd->add_flag("--diagonal", a.diagonal, "Per-coordinate AdaGrad accumulator");
}

DynamicsConfig make_config(const std::string& name, const AlgoOptions& a) {
    DynamicsConfig c;
    c.algorithm = parse_algorithm(name);
    c.C = a.C;
    c.eta = a.eta;
    c.epsilon_div = a.eps_div;
    c.R = a.R;
    c.M = a.M;
    c.beta = a.beta;
    c.adagrad_diagonal = a.diagonal;
    c.oracle_kind = a.oracle == "exact-agent" ? OracleKind::exact_agent : OracleKind::sampled_sale;
    return c;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path + " for writing");
    os << text;
}

void print_summary(const CompareResult& res) {
    std::printf("f* = %.12g (%s, clearing residual %.2e)\n", res.optimum.f_star, res.optimum.method.c_str(),
                res.optimum.clearing_residual);
    std::printf("%-10s %10s %14s %14s %14s\n", "algo", "calls", "median", "q25", "q75");
    for (const auto& r : res.summary)
        std::printf("%-10s %10lld %14.6e %14.6e %14.6e\n", r.algo.c_str(), static_cast<long long>(r.checkpoint_calls),
                    r.median_subopt, r.q25, r.q75);
    for (const auto& r : res.runs)
        if (!r.ok) std::printf("%s seed %llu failed: %s\n", std::string(to_string(r.algorithm)).c_str(),
                               static_cast<unsigned long long>(r.seed), r.error.c_str());
}

int finish_compare(const CompareResult& res) {
    print_summary(res);
    if (!res.lower_bound_ok) return fail(kRuntime, "runtime", "a run went below the reference optimum");
    if (!res.ok) {
        std::string msg = "some runs failed:";
        for (const auto& r : res.runs)
            if (!r.ok) msg += " " + std::string(to_string(r.algorithm)) + "_" + std::to_string(r.seed) + ": " + r.error + ";";
        return fail(kRuntime, "runtime", msg);
    }
    return kOk;
}

// validate: invariants plus oracle self-tests.
json self_tests(const Problem& pr, std::uint64_t seed, bool& ok) {
    const MarketInstance& inst = pr.instance;
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    std::vector<Vector> points{pr.p0};
    for (int k = 0; k < 5; ++k) {
        Vector p(inst.n);
        for (int i = 0; i < inst.n; ++i) p[i] = u(rng);
        points.push_back(p);
    }
    json checks = json::array();
    auto add = [&](const std::string& name, bool pass, const std::string& detail) {
        checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
        ok = ok && pass;
    };
    char buf[160];

    // central differences, h = 1e-5; |fd - g|_inf <= 1e-6 |g|_inf + 1e-8
    double worst = 0.0;
    bool fd_ok = true;
    for (const auto& p : points) {
        const Vector g = full_gradient(inst, p).g;
        Vector fd(inst.n);
        for (int i = 0; i < inst.n; ++i) {
            Vector hi = p, lo = p;
            hi[i] += 1e-5;
            lo[i] -= 1e-5;
            fd[i] = (potential(inst, hi) - potential(inst, lo)) / 2e-5;
        }
        const double err = (fd - g).lpNorm<Eigen::Infinity>();
        worst = std::max(worst, err);
        fd_ok = fd_ok && err <= 1e-6 * g.lpNorm<Eigen::Infinity>() + 1e-8;
    }
    std::snprintf(buf, sizeof buf, "max abs error %.2e over %zu points", worst, points.size());
    add("finite-difference", fd_ok, buf);

    double norm_err = 0.0;
    for (const auto& p : points)
        for (int d = 0; d < inst.num_consumers(); ++d)
            norm_err = std::max(norm_err, std::abs(choice_probabilities(inst, d, p).sum() - 1.0));
    std::snprintf(buf, sizeof buf, "max |sum x - 1| = %.2e", norm_err);
    add("normalization", norm_err <= 1e-12, buf);

    double sum_err = 0.0;
    for (const auto& p : points) {
        Vector s = Vector::Zero(inst.n);
        for (int i = 0; i < inst.num_agents(); ++i) s += exact_agent_oracle(inst, i, p).g;
        const Vector full = full_gradient(inst, p).g;
        sum_err = std::max(sum_err, (s - full).lpNorm<Eigen::Infinity>() / std::max(1.0, full.lpNorm<Eigen::Infinity>()));
    }
    std::snprintf(buf, sizeof buf, "finite-sum identity error %.2e", sum_err);
    add("finite-sum", sum_err <= 1e-12, buf);

    if (inst.num_consumers() > 0) {
        const int agent = inst.num_suppliers();
        const Vector x = -exact_agent_oracle(inst, agent, pr.p0).g;
        const int draws = 20000;
        Vector mean = Vector::Zero(inst.n);
        for (int k = 0; k < draws; ++k) mean += sampled_oracle(inst, agent, pr.p0, rng).g;
        mean /= draws;
        double worst_z = 0.0;
        for (int i = 0; i < inst.n; ++i) {
            const double se = std::sqrt(x[i] * (1.0 - x[i]) / draws);
            if (se > 0.0) worst_z = std::max(worst_z, std::abs(mean[i] + x[i]) / se);
        }
        // smoke test: loose 4.5 SE bar over all coordinates
        std::snprintf(buf, sizeof buf, "max |z| = %.2f over %d draws", worst_z, draws);
        add("unbiasedness", worst_z <= 4.5, buf);
    }
    return checks;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Market-clearing prices via stochastic pricing dynamics"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "pricedyn 0.1.0");

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic instance as JSON");
    SourceOptions gen_src;
    std::string gen_out;
    add_source(gen, gen_src);
    gen->add_option("--out,-o", gen_out, "Output file (default stdout)");

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate the optimum by projected gradient descent");
    SourceOptions est_src;
    std::string est_out;
    double est_tol = 1e-10;
    std::int64_t est_max_iter = 10'000'000;
    std::optional<double> est_smooth;
    add_source(est, est_src);
    est->add_option("--out,-o", est_out, "Output file (default stdout)");
    est->add_option("--tol", est_tol, "Step-norm stopping tolerance")->capture_default_str();
    est->add_option("--max-iter", est_max_iter, "Iteration cap")->capture_default_str();
    est->add_option("--smoothing-eps", est_smooth, "Allow gamma = 0 suppliers by smoothing with this target");

    // run / compare share most options
    auto* run_cmd = app.add_subcommand("run", "Run one algorithm over one or more seeds");
    auto* cmp = app.add_subcommand("compare", "Compare algorithms at a fixed oracle budget");
    SourceOptions run_src, cmp_src;
    AlgoOptions run_algo, cmp_algo;
    std::string run_name = "sgd";
    std::vector<std::string> cmp_names;
    std::vector<std::uint64_t> run_seeds, cmp_seeds;
    int run_nseeds = 0, cmp_nseeds = 0;
    std::int64_t run_budget = 0, cmp_budget = 0, run_N = 0;
    std::string run_out = "out", cmp_out = "out";
    double run_tol = 1e-10, cmp_tol = 1e-10;
    bool run_wall = false, cmp_wall = false;

    // here --seed is the dynamics seed; the generator seed is --instance-seed
    for (auto* cmd : {run_cmd, cmp}) {
        const bool is_run = cmd == run_cmd;
        add_source(cmd, is_run ? run_src : cmp_src, "--instance-seed");
        add_algo_options(cmd, is_run ? run_algo : cmp_algo);
        cmd->add_option("--seed", is_run ? run_seeds : cmp_seeds, "Dynamics seed (repeatable)");
        cmd->add_option("--seeds", is_run ? run_nseeds : cmp_nseeds, "Use dynamics seeds 0..K-1");
        cmd->add_option("--budget", is_run ? run_budget : cmp_budget,
                        "Oracle calls per run (default 100 (S + D))");
        cmd->add_option("--out,-o", is_run ? run_out : cmp_out, "Output directory")->capture_default_str();
        cmd->add_option("--tol", is_run ? run_tol : cmp_tol, "Tolerance of the reference optimum")
            ->capture_default_str();
        cmd->add_flag("--wall-time", is_run ? run_wall : cmp_wall, "Record elapsed seconds (traces stop being byte-stable)");
    }
    run_cmd->add_option("--algo,-a", run_name, "sgd, adagrad, sgd-online, smd, gd or agd")->capture_default_str();
    run_cmd->add_option("--N", run_N, "Iterations (alternative to --budget)");
    cmp->add_option("--algo,-a", cmp_names, "Algorithms (repeatable; default sgd adagrad gd agd)");

    // validate
    auto* val = app.add_subcommand("validate", "Check instance invariants and oracle self-tests");
    SourceOptions val_src;
    std::uint64_t val_seed = 0;
    add_source(val, val_src);
    val->add_option("--test-seed", val_seed, "Seed for the self-test points")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(kUsage, "usage", e.what());
    }

    try {
        if (*gen) {
            write_text(gen_out, to_json(load_source(gen_src)).dump(2) + "\n");
            return kOk;
        }
        if (*est) {
            const Problem pr = load_source(est_src);
            const OptimumEstimate opt =
                est_smooth ? reference_optimum(pr.instance, pr.p0, est_tol, est_max_iter, *est_smooth)
                           : estimate_optimum(pr.instance, pr.p0, est_tol, est_max_iter);
            write_text(est_out, to_json(opt).dump(2) + "\n");
            if (!opt.converged) return fail(kRuntime, "runtime", "iteration cap reached; estimate is partial");
            return kOk;
        }
        if (*run_cmd || *cmp) {
            const bool is_run = run_cmd->parsed();
            const SourceOptions& src = is_run ? run_src : cmp_src;
            const Problem pr = load_source(src);
            ExperimentSpec spec;
            if (src.instance.empty())
                spec.source = src.gen;
            else
                spec.source = fs::path(src.instance);

            std::vector<std::string> names = is_run ? std::vector<std::string>{run_name} : cmp_names;
            if (names.empty()) names = {"sgd", "adagrad", "gd", "agd"};
            for (const auto& nm : names) spec.algorithms.push_back(make_config(nm, is_run ? run_algo : cmp_algo));

            spec.seeds = is_run ? run_seeds : cmp_seeds;
            const int nseeds = is_run ? run_nseeds : cmp_nseeds;
            for (int k = 0; k < nseeds; ++k) spec.seeds.push_back(static_cast<std::uint64_t>(k));
            if (spec.seeds.empty()) spec.seeds = is_run ? std::vector<std::uint64_t>{0} : std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

            const std::int64_t agents = pr.instance.num_agents();
            spec.budget = is_run ? run_budget : cmp_budget;
            if (is_run && run_N > 0) {
                if (run_budget > 0) return fail(kUsage, "usage", "give either --N or --budget, not both");
                spec.budget = is_stochastic(spec.algorithms[0].algorithm) ? run_N : run_N * agents;
            }
            if (spec.budget == 0) spec.budget = 100 * agents;
            spec.fstar_tol = is_run ? run_tol : cmp_tol;
            spec.out_dir = is_run ? run_out : cmp_out;
            spec.wall_time = is_run ? run_wall : cmp_wall;
            return finish_compare(compare(pr, spec));
        }
        if (*val) {
            Problem pr;
            try {
                pr = load_source(val_src);
            } catch (const ValidationError& e) {
                std::cout << json{{"ok", false}, {"violations", e.what()}}.dump(2) << "\n";
                return fail(kValidation, "validation", e.what());
            }
            bool ok = true;
            json report{{"S", pr.instance.num_suppliers()},
                        {"D", pr.instance.num_consumers()},
                        {"n", pr.instance.n},
                        {"m", pr.instance.m},
                        {"violations", json::array()}};
            report["checks"] = self_tests(pr, val_seed, ok);
            report["ok"] = ok;
            std::cout << report.dump(2) << "\n";
            if (!ok) return fail(kValidation, "validation", "oracle self-tests failed");
            return kOk;
        }
    } catch (const ParameterError& e) {
        return fail(kUsage, "usage", e.what());
    } catch (const ValidationError& e) {
        return fail(kValidation, "validation", e.what());
    } catch (const ParseError& e) {
        return fail(kValidation, "parse", e.what());
    } catch (const NonSmoothError& e) {
        return fail(kRuntime, "nonsmooth", e.what());
    } catch (const std::exception& e) {
        return fail(kRuntime, "runtime", e.what());
    }
    return kUsage;
}
