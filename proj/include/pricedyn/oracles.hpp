#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "pricedyn/common.hpp"
#include "pricedyn/market.hpp"

namespace pricedyn {

enum class OracleKind { exact_agent, sampled_sale, full };

std::string_view to_string(OracleKind kind);

struct Agent {
    enum class Role { supplier, consumer, population, all };
    Role role = Role::all;
    int index = -1;  // zero-based within its role; -1 for population draws and full gradients
};

struct GradientSample {
    Vector g;
    Agent agent;
    OracleKind kind = OracleKind::full;
    std::int64_t oracle_calls = 0;
};

// Total expected revenue: sum of supplier revenues plus consumer surpluses.
double potential(const MarketInstance& instance, const Vector& p);

// sum_s y_s(p) - sum_d x_d(p); counts S + D oracle calls.
GradientSample full_gradient(const MarketInstance& instance, const Vector& p);

// Agents are numbered 0..S+D-1: suppliers first, then consumers.
GradientSample exact_agent_oracle(const MarketInstance& instance, int agent, const Vector& p);

// Like exact_agent_oracle but a consumer reports a single sale (-one_hot).
GradientSample sampled_oracle(const MarketInstance& instance, int agent, const Vector& p, Rng& rng);

// Dispatches on kind (exact_agent or sampled_sale).
GradientSample agent_oracle(const MarketInstance& instance, OracleKind kind, int agent, const Vector& p,
                            Rng& rng);

int uniform_agent(Rng& rng, int S, int D);

// Infinite-population market: with probability beta the observed participant
// is a supplier drawn from supplier_sampler, otherwise a consumer whose
// utility vector comes from consumer_sampler. The nesting is shared.
struct PopulationModel {
    double beta = 0.5;
    int n = 0;
    Groups groups;
    Vector mu;
    std::function<SupplierSpec(Rng&)> supplier_sampler;
    std::function<Vector(Rng&)> consumer_sampler;

    void validate() const;
};

// Both samplers return fixed agents.
PopulationModel point_mass_population(const MarketInstance& nesting, const SupplierSpec& supplier,
                                      const Vector& utilities, double beta);

// Uniform draws over the agents of a finite instance, beta = S / (S + D).
// Reproduces the finite-sum sampled oracle in distribution.
PopulationModel finite_population(const MarketInstance& instance);

struct BoxPopulationParams {
    double beta = 1.0 / 3.0;
    double gamma = 1e-4;
    double cost_coeff = 1.0;
    double y_hat_lo = 0.01, y_hat_hi = 2.0;
    double utility_lo = 0.01, utility_hi = 5.0;
};

// Fresh agents drawn from the same boxes as the synthetic generator.
PopulationModel box_population(const MarketInstance& nesting, const BoxPopulationParams& params);

GradientSample population_oracle(const PopulationModel& model, const Vector& p, Rng& rng);

// Fixed Monte Carlo sample of the population for evaluating the expected
// objective beta E[pi_s] + (1 - beta) E[E_d] with common random numbers.
struct PopulationSample {
    double beta = 0.5;
    MarketInstance agents;  // suppliers and consumers drawn from the model

    double objective(const Vector& p) const;
};

PopulationSample draw_population_sample(const PopulationModel& model, int size, Rng& rng);

struct LipschitzConstants {
    bool smooth = false;     // false when some supplier has gamma = 0
    double total = 0.0;      // sum_s 1/gamma_s + D / min_j mu_j
    std::vector<double> per_agent;
};

LipschitzConstants lipschitz_constants(const MarketInstance& instance);

// Lipschitz constant of the gradient that uses the exact supplier curvature of
// the quadratic cost family: sum_s 1 / (2 (c_s + gamma_s)) + D / min_j mu_j.
// Never larger than the per-agent bound above; finite whenever c_s + gamma_s > 0.
double curvature_bound(const MarketInstance& instance);

// Largest |grad_i| over coordinates with p_i > active_threshold, i.e. the
// excess supply on priced alternatives.
double clearing_residual(const MarketInstance& instance, const Vector& p, double active_threshold = 1e-8);

}  // namespace pricedyn
