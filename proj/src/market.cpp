#include "pricedyn/market.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pricedyn {

namespace {

bool same(const Vector& a, const Vector& b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
}

bool same(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

std::string at(const std::string& field, std::size_t i) {
    return field + "[" + std::to_string(i + 1) + "]";
}

}  // namespace

bool operator==(const SupplierSpec& a, const SupplierSpec& b) {
    return a.gamma == b.gamma && a.cost_coeff == b.cost_coeff && same(a.y_hat, b.y_hat);
}

bool operator==(const MarketInstance& a, const MarketInstance& b) {
    return a.n == b.n && a.m == b.m && a.groups == b.groups && same(a.mu, b.mu) &&
           same(a.A, b.A) && a.suppliers == b.suppliers;
}

bool operator==(const Problem& a, const Problem& b) {
    return a.instance == b.instance && same(a.p0, b.p0);
}

std::vector<Violation> validate(const MarketInstance& inst) {
    std::vector<Violation> out;
    auto fail = [&](std::string msg, std::string where) {
        out.push_back({std::move(msg), std::move(where)});
    };

    if (inst.n < 1) fail("n must be positive", "n");
    if (inst.m < 1) fail("m must be positive", "m");
    if (static_cast<int>(inst.groups.size()) != inst.m)
        fail("group count differs from m", "groups");
    if (inst.mu.size() != inst.m) fail("mu length differs from m", "mu");

    std::vector<int> seen(std::max(inst.n, 0), 0);
    for (std::size_t j = 0; j < inst.groups.size(); ++j) {
        const auto& g = inst.groups[j];
        if (g.empty()) fail("group is empty", at("groups", j));
        for (int i : g) {
            if (i < 0 || i >= inst.n) {
                fail("group index out of range", at("groups", j));
                continue;
            }
            if (++seen[i] == 2) fail("groups not disjoint", at("groups", j));
        }
    }
    for (int i = 0; i < inst.n; ++i) {
        if (seen[i] == 0) fail("groups do not cover alternative " + std::to_string(i + 1), "groups");
    }

    for (Eigen::Index j = 0; j < inst.mu.size(); ++j) {
        const double mu = inst.mu[j];
        if (!(mu > 0.0 && mu <= 1.0)) fail("mu out of (0,1]", at("mu", j));
    }

    if (inst.A.rows() != inst.n && !(inst.A.cols() == 0))
        fail("utility matrix must have n rows", "A");
    for (Eigen::Index d = 0; d < inst.A.cols(); ++d) {
        for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
            const double a = inst.A(i, d);
            if (!(a > 0.0) || !std::isfinite(a)) {
                fail("utility must be positive and finite",
                     "A[" + std::to_string(i + 1) + "][" + std::to_string(d + 1) + "]");
            }
        }
    }

    if (inst.num_agents() < 1) fail("market needs at least one agent (S + D >= 1)", "suppliers");

    for (std::size_t s = 0; s < inst.suppliers.size(); ++s) {
        const auto& sp = inst.suppliers[s];
        const std::string where = at("suppliers", s);
        if (!(sp.gamma >= 0.0) || !std::isfinite(sp.gamma)) fail("gamma must be >= 0", where + ".gamma");
        if (!(sp.cost_coeff >= 0.0) || !std::isfinite(sp.cost_coeff))
            fail("cost_coeff must be >= 0", where + ".cost_coeff");
        if (sp.gamma == 0.0 && sp.cost_coeff == 0.0)
            fail("gamma = 0 with cost_coeff = 0 makes revenue unbounded", where);
        if (sp.y_hat.size() != inst.n) {
            fail("y_hat length differs from n", where + ".y_hat");
        } else if (!((sp.y_hat.array() >= 0.0).all() && sp.y_hat.allFinite())) {
            fail("y_hat must be >= 0", where + ".y_hat");
        }
    }
    return out;
}

void require_valid(const MarketInstance& instance) {
    const auto violations = validate(instance);
    if (violations.empty()) return;
    std::string msg = "invalid market instance:";
    for (const auto& v : violations) msg += " [" + v.location + "] " + v.message + ";";
    throw ValidationError(msg);
}

void require_prices(const MarketInstance& instance, const Vector& p) {
    if (p.size() != instance.n)
        throw ParameterError("price vector has length " + std::to_string(p.size()) + ", expected " +
                             std::to_string(instance.n));
    if (!p.allFinite() || (p.array() < 0.0).any())
        throw ParameterError("prices must be finite and nonnegative");
}

Groups contiguous_groups(int n, int m) {
    if (m < 1 || n < m) throw ParameterError("need n >= m >= 1");
    Groups groups(m);
    const int base = n / m;
    const int extra = n % m;
    int next = 0;
    for (int j = 0; j < m; ++j) {
        const int size = base + (j < extra ? 1 : 0);
        for (int k = 0; k < size; ++k) groups[j].push_back(next++);
    }
    return groups;
}

Problem generate_synthetic(const GeneratorParams& gp) {
    if (gp.m < 1 || gp.n < gp.m) throw ParameterError("generator needs n >= m >= 1");
    if (gp.S < 0 || gp.D < 0 || gp.S + gp.D < 1)
        throw ParameterError("generator needs S >= 0, D >= 0, S + D >= 1");
    if (!(gp.gamma >= 0.0)) throw ParameterError("generator gamma must be >= 0");
    if (!(gp.cost_coeff >= 0.0)) throw ParameterError("generator cost_coeff must be >= 0");
    if (!(gp.utility_lo > 0.0) || !(gp.price_lo >= 0.0) || !(gp.mu_lo > 0.0) || !(gp.mu_hi <= 1.0))
        throw ParameterError("generator ranges out of domain");

    Rng rng(gp.seed);
    auto uniform = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    Problem out;
    MarketInstance& inst = out.instance;
    inst.n = gp.n;
    inst.m = gp.m;
    inst.groups = contiguous_groups(gp.n, gp.m);

    inst.suppliers.resize(gp.S);
    for (auto& s : inst.suppliers) {
        s.gamma = gp.gamma;
        s.cost_coeff = gp.cost_coeff;
        s.y_hat.resize(gp.n);
        for (int i = 0; i < gp.n; ++i) s.y_hat[i] = uniform(gp.y_hat_lo, gp.y_hat_hi);
    }

    inst.mu.resize(gp.m);
    for (int j = 0; j < gp.m; ++j) inst.mu[j] = uniform(gp.mu_lo, gp.mu_hi);

    inst.A.resize(gp.n, gp.D);
    for (int d = 0; d < gp.D; ++d)
        for (int i = 0; i < gp.n; ++i) inst.A(i, d) = uniform(gp.utility_lo, gp.utility_hi);

    out.p0.resize(gp.n);
    for (int i = 0; i < gp.n; ++i) out.p0[i] = uniform(gp.price_lo, gp.price_hi);
    out.p0 /= out.p0.maxCoeff();
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json vec_json(const Vector& v) {
    auto arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw ParseError("field '" + where + "': expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError("field '" + where + key + "': missing");
    return *it;
}

double number(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number()) throw ParseError("field '" + where + "': expected a number");
    return j.get<double>();
}

int integer(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number_integer()) throw ParseError("field '" + where + "': expected an integer");
    return j.get<int>();
}

Vector vec(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError("field '" + where + "': expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = number(j[i], at(where, i));
    return v;
}

}  // namespace

nlohmann::json to_json(const Problem& problem) {
    const MarketInstance& inst = problem.instance;
    nlohmann::json j;
    j["n"] = inst.n;
    j["m"] = inst.m;
    auto groups = nlohmann::json::array();
    for (const auto& g : inst.groups) {
        auto arr = nlohmann::json::array();
        for (int i : g) arr.push_back(i + 1);
        groups.push_back(arr);
    }
    j["groups"] = groups;
    j["mu"] = vec_json(inst.mu);
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < inst.A.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index d = 0; d < inst.A.cols(); ++d) row.push_back(inst.A(i, d));
        rows.push_back(row);
    }
    j["A"] = rows;
    auto sups = nlohmann::json::array();
    for (const auto& s : inst.suppliers) {
        sups.push_back({{"gamma", s.gamma}, {"y_hat", vec_json(s.y_hat)}, {"cost_coeff", s.cost_coeff}});
    }
    j["suppliers"] = sups;
    j["p0"] = vec_json(problem.p0);
    return j;
}

Problem problem_from_json(const nlohmann::json& j) {
    Problem out;
    MarketInstance& inst = out.instance;
    inst.n = integer(field(j, "n", ""), "n");
    inst.m = integer(field(j, "m", ""), "m");
    if (inst.n < 1 || inst.m < 1) throw ParseError("field 'n'/'m': must be positive");

    const auto& groups = field(j, "groups", "");
    if (!groups.is_array()) throw ParseError("field 'groups': expected an array of arrays");
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!groups[g].is_array()) throw ParseError("field '" + at("groups", g) + "': expected an array");
        std::vector<int> members;
        for (std::size_t k = 0; k < groups[g].size(); ++k)
            members.push_back(integer(groups[g][k], at(at("groups", g), k)) - 1);
        inst.groups.push_back(std::move(members));
    }

    inst.mu = vec(field(j, "mu", ""), "mu");

    // A: nested rows (n x D), or a flat row-major array of length n * D.
    const auto& a = field(j, "A", "");
    if (!a.is_array()) throw ParseError("field 'A': expected an array");
    if (!a.empty() && a[0].is_array()) {
        if (static_cast<int>(a.size()) != inst.n) throw ParseError("field 'A': expected n rows");
        const auto cols = static_cast<Eigen::Index>(a[0].size());
        inst.A.resize(inst.n, cols);
        for (int i = 0; i < inst.n; ++i) {
            const Vector row = vec(a[i], at("A", i));
            if (row.size() != cols) throw ParseError("field '" + at("A", i) + "': ragged row");
            inst.A.row(i) = row.transpose();
        }
    } else {
        const Vector flat = vec(a, "A");
        if (flat.size() % inst.n != 0) throw ParseError("field 'A': length is not a multiple of n");
        const auto cols = flat.size() / inst.n;
        inst.A.resize(inst.n, cols);
        for (int i = 0; i < inst.n; ++i)
            for (Eigen::Index d = 0; d < cols; ++d) inst.A(i, d) = flat[i * cols + d];
    }

    const auto& sups = field(j, "suppliers", "");
    if (!sups.is_array()) throw ParseError("field 'suppliers': expected an array");
    for (std::size_t s = 0; s < sups.size(); ++s) {
        const std::string where = at("suppliers", s);
        SupplierSpec spec;
        spec.gamma = number(field(sups[s], "gamma", where + "."), where + ".gamma");
        spec.y_hat = vec(field(sups[s], "y_hat", where + "."), where + ".y_hat");
        if (sups[s].contains("cost_coeff"))
            spec.cost_coeff = number(sups[s]["cost_coeff"], where + ".cost_coeff");
        inst.suppliers.push_back(std::move(spec));
    }

    if (j.contains("p0")) {
        out.p0 = vec(j["p0"], "p0");
    } else {
        out.p0 = Vector::Ones(inst.n);
    }

    require_valid(inst);
    require_prices(inst, out.p0);
    return out;
}

void save(const Problem& problem, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << to_json(problem).dump(2) << '\n';
    if (!os) throw Error("failed writing " + path.string());
}

Problem parse_problem(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
        throw ParseError("line " + std::to_string(line) + ": " + e.what());
    }
    try {
        return problem_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }
}

Problem load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_problem(ss.str());
}

}  // namespace pricedyn
