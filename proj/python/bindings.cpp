#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "pricedyn/consumer.hpp"
#include "pricedyn/dynamics.hpp"
#include "pricedyn/harness.hpp"
#include "pricedyn/market.hpp"
#include "pricedyn/oracles.hpp"
#include "pricedyn/supplier.hpp"

namespace py = pybind11;
using namespace pricedyn;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

OracleKind parse_oracle(const std::string& name) {
    for (auto k : {OracleKind::exact_agent, OracleKind::sampled_sale, OracleKind::full})
        if (to_string(k) == name) return k;
    throw ParameterError("unknown oracle '" + name + "'");
}

py::dict trace_dict(const RunTrace& t) {
    const auto n = t.records.size();
    std::vector<std::int64_t> iter(n), calls(n);
    std::vector<double> f(n), subopt(n), elapsed(n);
    for (std::size_t k = 0; k < n; ++k) {
        iter[k] = t.records[k].iter;
        calls[k] = t.records[k].oracle_calls;
        f[k] = t.records[k].f;
        subopt[k] = t.records[k].subopt;
        elapsed[k] = t.records[k].elapsed_s;
    }
    py::dict d;
    d["algorithm"] = std::string(to_string(t.algorithm));
    d["seed"] = t.seed;
    d["iter"] = iter;
    d["oracle_calls"] = calls;
    d["f"] = f;
    d["subopt"] = subopt;
    d["elapsed_s"] = elapsed;
    d["p_final"] = t.p_final;
    d["p_last"] = t.p_last;
    d["iterations"] = t.iterations;
    d["total_oracle_calls"] = t.oracle_calls;
    d["stopped_early"] = t.stopped_early;
    d["max_grad_norm"] = t.max_grad_norm;
    return d;
}

}  // namespace

PYBIND11_MODULE(pricedyn, m) {
    m.doc() = "Market-clearing prices via stochastic pricing dynamics";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<IndexError>(m, "IndexError", PyExc_IndexError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<NonSmoothError>(m, "NonSmoothError", base.ptr());

    py::class_<Problem>(m, "Problem")
        .def_static(
            "generate",
            [](std::uint64_t seed, int S, int D, int n, int groups, double gamma, double cost_coeff) {
                GeneratorParams gp;
                gp.seed = seed;
                gp.S = S;
                gp.D = D;
                gp.n = n;
                gp.m = groups;
                gp.gamma = gamma;
                gp.cost_coeff = cost_coeff;
                return generate_synthetic(gp);
            },
            py::arg("seed") = 17, py::arg("S") = 5, py::arg("D") = 10, py::arg("n") = 20, py::arg("m") = 5,
            py::arg("gamma") = 1e-4, py::arg("cost_coeff") = 1.0)
        .def_static("from_json", &parse_problem, py::arg("text"))
        .def_static("load", &load, py::arg("path"))
        .def("save", [](const Problem& p, const std::filesystem::path& path) { save(p, path); }, py::arg("path"))
        .def("to_json", [](const Problem& p) { return to_json(p).dump(); })
        .def_property_readonly("n", [](const Problem& p) { return p.instance.n; })
        .def_property_readonly("m", [](const Problem& p) { return p.instance.m; })
        .def_property_readonly("S", [](const Problem& p) { return p.instance.num_suppliers(); })
        .def_property_readonly("D", [](const Problem& p) { return p.instance.num_consumers(); })
        .def_property_readonly("p0", [](const Problem& p) { return p.p0; })
        .def("violations", [](const Problem& p) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& v : validate(p.instance)) out.emplace_back(v.message, v.location);
            return out;
        })
        .def("__eq__", [](const Problem& a, const Problem& b) { return a == b; })
        .def("__repr__", [](const Problem& p) {
            return "<Problem S=" + std::to_string(p.instance.num_suppliers()) +
                   " D=" + std::to_string(p.instance.num_consumers()) + " n=" + std::to_string(p.instance.n) +
                   " m=" + std::to_string(p.instance.m) + ">";
        });

    m.def("potential", [](const Problem& pr, const Vector& p) { return potential(pr.instance, p); },
          py::arg("problem"), py::arg("p"));
    m.def("full_gradient", [](const Problem& pr, const Vector& p) { return full_gradient(pr.instance, p).g; },
          py::arg("problem"), py::arg("p"));
    m.def("expected_surplus", [](const Problem& pr, int d, const Vector& p) { return expected_surplus(pr.instance, d, p); },
          py::arg("problem"), py::arg("d"), py::arg("p"));
    m.def("choice_probabilities",
          [](const Problem& pr, int d, const Vector& p) { return choice_probabilities(pr.instance, d, p); },
          py::arg("problem"), py::arg("d"), py::arg("p"));
    m.def("best_response",
          [](const Problem& pr, int s, const Vector& p) {
              if (s < 0 || s >= pr.instance.num_suppliers()) throw IndexError("supplier index out of range");
              const auto r = best_response(pr.instance.suppliers[s], p);
              return py::make_tuple(r.y, r.revenue);
          },
          py::arg("problem"), py::arg("s"), py::arg("p"));
    m.def("agent_gradient",
          [](const Problem& pr, int agent, const Vector& p, const std::string& oracle, std::uint64_t seed) {
              Rng rng(seed);
              return agent_oracle(pr.instance, parse_oracle(oracle), agent, p, rng).g;
          },
          py::arg("problem"), py::arg("agent"), py::arg("p"), py::arg("oracle") = "exact-agent",
          py::arg("seed") = 0);
    m.def("lipschitz",
          [](const Problem& pr) {
              const auto lc = lipschitz_constants(pr.instance);
              py::dict d;
              d["smooth"] = lc.smooth;
              d["total"] = lc.total;
              d["per_agent"] = lc.per_agent;
              d["curvature"] = lc.smooth ? py::cast(curvature_bound(pr.instance)) : py::none();
              return d;
          },
          py::arg("problem"));
    m.def("clearing_residual", [](const Problem& pr, const Vector& p) { return clearing_residual(pr.instance, p); },
          py::arg("problem"), py::arg("p"));

    m.def("estimate_optimum",
          [](const Problem& pr, double tol, std::int64_t max_iter, std::optional<double> smoothing_eps) {
              const OptimumEstimate e = smoothing_eps
                                            ? reference_optimum(pr.instance, pr.p0, tol, max_iter, *smoothing_eps)
                                            : estimate_optimum(pr.instance, pr.p0, tol, max_iter);
              py::dict d = to_python(to_json(e));
              d["p_star"] = e.p_star;
              return d;
          },
          py::arg("problem"), py::arg("tol") = 1e-10, py::arg("max_iter") = 10'000'000,
          py::arg("smoothing_eps") = py::none());

    m.def("run",
          [](const Problem& pr, const std::string& algorithm, std::int64_t N, std::uint64_t seed, double C,
             double eta, double epsilon_div, std::optional<double> R, std::optional<double> M,
             std::optional<double> beta, const std::string& oracle, bool diagonal, std::optional<double> f_star) {
              DynamicsConfig c;
              c.algorithm = parse_algorithm(algorithm);
              c.N = N;
              c.seed = seed;
              c.C = C;
              c.eta = eta;
              c.epsilon_div = epsilon_div;
              c.R = R;
              c.M = M;
              c.beta = beta;
              c.oracle_kind = parse_oracle(oracle);
              c.adagrad_diagonal = diagonal;
              c.f_star = f_star;
              c.record.wall_time = false;
              RunTrace t;
              {
                  py::gil_scoped_release release;
                  t = run(pr.instance, pr.p0, c);
              }
              return trace_dict(t);
          },
          py::arg("problem"), py::arg("algorithm") = "sgd", py::arg("N") = 1000, py::arg("seed") = 0,
          py::arg("C") = 1.0, py::arg("eta") = 1.0, py::arg("epsilon_div") = 1e-8, py::arg("R") = py::none(),
          py::arg("M") = py::none(), py::arg("beta") = py::none(), py::arg("oracle") = "sampled-sale",
          py::arg("diagonal") = false, py::arg("f_star") = py::none());

    m.def("compare",
          [](const Problem& pr, const std::vector<std::string>& algorithms, const std::vector<std::uint64_t>& seeds,
             std::optional<std::int64_t> budget, std::optional<std::filesystem::path> out_dir, double C, double eta) {
              ExperimentSpec spec;
              for (const auto& a : algorithms) {
                  DynamicsConfig c;
                  c.algorithm = parse_algorithm(a);
                  c.C = C;
                  c.eta = eta;
                  spec.algorithms.push_back(c);
              }
              spec.seeds = seeds;
              spec.budget = budget ? *budget : 100 * pr.instance.num_agents();
              if (out_dir) spec.out_dir = *out_dir;
              CompareResult res;
              {
                  py::gil_scoped_release release;
                  res = compare(pr, spec);
              }
              py::list summary;
              for (const auto& r : res.summary) {
                  py::dict row;
                  row["algo"] = r.algo;
                  row["checkpoint_calls"] = r.checkpoint_calls;
                  row["median_subopt"] = r.median_subopt;
                  row["q25"] = r.q25;
                  row["q75"] = r.q75;
                  summary.append(row);
              }
              py::list runs;
              for (const auto& r : res.runs) {
                  py::dict d = r.ok ? trace_dict(r.trace) : py::dict();
                  d["algorithm"] = std::string(to_string(r.algorithm));
                  d["seed"] = r.seed;
                  d["ok"] = r.ok;
                  d["error"] = r.error;
                  runs.append(d);
              }
              py::dict d;
              d["f_star"] = res.optimum.f_star;
              d["optimum_method"] = res.optimum.method;
              d["summary"] = summary;
              d["runs"] = runs;
              d["ok"] = res.ok;
              d["lower_bound_ok"] = res.lower_bound_ok;
              d["files"] = res.files;
              return d;
          },
          py::arg("problem"), py::arg("algorithms") = std::vector<std::string>{"sgd", "adagrad", "gd", "agd"},
          py::arg("seeds") = std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
          py::arg("budget") = py::none(), py::arg("out_dir") = py::none(), py::arg("C") = 1.0, py::arg("eta") = 1.0);
}
