#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pricedyn/common.hpp"

namespace pricedyn {

// Supplier with quadratic production cost cost_coeff * |y|^2 and quantity
// adjustment penalty gamma * |y - y_hat|^2. Capacity set is the nonnegative orthant.
struct SupplierSpec {
    double gamma = 0.0;
    Vector y_hat;
    double cost_coeff = 1.0;
};

struct MarketInstance {
    int n = 0;
    int m = 0;
    Groups groups;  // zero-based
    Vector mu;      // one correlation parameter per group, in (0, 1]
    Matrix A;       // n x D utilities, column d belongs to consumer d
    std::vector<SupplierSpec> suppliers;

    int num_suppliers() const { return static_cast<int>(suppliers.size()); }
    int num_consumers() const { return static_cast<int>(A.cols()); }
    int num_agents() const { return num_suppliers() + num_consumers(); }
};

// An instance together with the starting prices used by the dynamics.
struct Problem {
    MarketInstance instance;
    Vector p0;
};

bool operator==(const SupplierSpec& a, const SupplierSpec& b);
bool operator==(const MarketInstance& a, const MarketInstance& b);
bool operator==(const Problem& a, const Problem& b);

struct Violation {
    std::string message;
    std::string location;
};

// Empty result means the instance is valid.
std::vector<Violation> validate(const MarketInstance& instance);

// Throws ValidationError carrying every violation.
void require_valid(const MarketInstance& instance);

// Throws ParameterError unless p has size n and p >= 0.
void require_prices(const MarketInstance& instance, const Vector& p);

struct GeneratorParams {
    std::uint64_t seed = 17;
    int S = 5;
    int D = 10;
    int n = 20;
    int m = 5;
    double gamma = 1e-4;
    double cost_coeff = 1.0;
    double y_hat_lo = 0.01, y_hat_hi = 2.0;
    double mu_lo = 0.1, mu_hi = 1.0;
    // Utility bounds are not pinned down by the experiment description;
    // they default to the price range.
    double utility_lo = 0.01, utility_hi = 5.0;
    double price_lo = 0.01, price_hi = 5.0;
};

// Contiguous near-equal blocks: the first n % m groups get one extra alternative.
Groups contiguous_groups(int n, int m);

Problem generate_synthetic(const GeneratorParams& params);

// Instance file: {n, m, groups (1-based), mu, A (n rows of D), suppliers, p0}.
nlohmann::json to_json(const Problem& problem);
Problem problem_from_json(const nlohmann::json& j);

void save(const Problem& problem, const std::filesystem::path& path);
Problem load(const std::filesystem::path& path);
Problem parse_problem(const std::string& text);

}  // namespace pricedyn
