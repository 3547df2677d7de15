#include "pricedyn/oracles.hpp"

#include <cmath>
#include <string>

#include "pricedyn/consumer.hpp"
#include "pricedyn/supplier.hpp"

namespace pricedyn {

std::string_view to_string(OracleKind kind) {
    switch (kind) {
        case OracleKind::exact_agent: return "exact-agent";
        case OracleKind::sampled_sale: return "sampled-sale";
        case OracleKind::full: return "full";
    }
    return "unknown";
}

namespace {

void check_agent(const MarketInstance& instance, int agent) {
    if (agent < 0 || agent >= instance.num_agents())
        throw IndexError("agent index " + std::to_string(agent) + " out of range [0, " +
                         std::to_string(instance.num_agents()) + ")");
}

}  // namespace

double potential(const MarketInstance& instance, const Vector& p) {
    double f = 0.0;
    for (const auto& s : instance.suppliers) f += revenue(s, p);
    for (int d = 0; d < instance.num_consumers(); ++d) f += expected_surplus(instance, d, p);
    return f;
}

GradientSample full_gradient(const MarketInstance& instance, const Vector& p) {
    GradientSample out;
    out.g = Vector::Zero(instance.n);
    for (const auto& s : instance.suppliers) out.g += best_response(s, p).y;
    for (int d = 0; d < instance.num_consumers(); ++d) out.g -= choice_probabilities(instance, d, p);
    out.kind = OracleKind::full;
    out.agent = {Agent::Role::all, -1};
    out.oracle_calls = instance.num_agents();
    return out;
}

GradientSample exact_agent_oracle(const MarketInstance& instance, int agent, const Vector& p) {
    check_agent(instance, agent);
    const int S = instance.num_suppliers();
    GradientSample out;
    out.kind = OracleKind::exact_agent;
    out.oracle_calls = 1;
    if (agent < S) {
        out.g = best_response(instance.suppliers[agent], p).y;
        out.agent = {Agent::Role::supplier, agent};
    } else {
        out.g = -choice_probabilities(instance, agent - S, p);
        out.agent = {Agent::Role::consumer, agent - S};
    }
    return out;
}

GradientSample sampled_oracle(const MarketInstance& instance, int agent, const Vector& p, Rng& rng) {
    check_agent(instance, agent);
    const int S = instance.num_suppliers();
    if (agent < S) {
        GradientSample out = exact_agent_oracle(instance, agent, p);
        out.kind = OracleKind::sampled_sale;
        return out;
    }
    GradientSample out;
    out.g = -sample_choice(instance, agent - S, p, rng).one_hot();
    out.agent = {Agent::Role::consumer, agent - S};
    out.kind = OracleKind::sampled_sale;
    out.oracle_calls = 1;
    return out;
}

GradientSample agent_oracle(const MarketInstance& instance, OracleKind kind, int agent, const Vector& p,
                            Rng& rng) {
    switch (kind) {
        case OracleKind::exact_agent: return exact_agent_oracle(instance, agent, p);
        case OracleKind::sampled_sale: return sampled_oracle(instance, agent, p, rng);
        case OracleKind::full: break;
    }
    throw ParameterError("agent_oracle needs a per-agent oracle kind");
}

int uniform_agent(Rng& rng, int S, int D) {
    if (S < 0 || D < 0 || S + D < 1) throw ParameterError("uniform_agent needs S + D >= 1");
    return std::uniform_int_distribution<int>(0, S + D - 1)(rng);
}

// ---------------------------------------------------------------------------
// Population oracle

void PopulationModel::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("population beta must lie in (0, 1)");
    if (!supplier_sampler || !consumer_sampler) throw ParameterError("population samplers not set");
    if (n < 1 || static_cast<Eigen::Index>(groups.size()) != mu.size())
        throw ParameterError("population nesting is inconsistent");
}

PopulationModel point_mass_population(const MarketInstance& nesting, const SupplierSpec& supplier,
                                      const Vector& utilities, double beta) {
    PopulationModel model;
    model.beta = beta;
    model.n = nesting.n;
    model.groups = nesting.groups;
    model.mu = nesting.mu;
    model.supplier_sampler = [supplier](Rng&) { return supplier; };
    model.consumer_sampler = [utilities](Rng&) { return utilities; };
    return model;
}

PopulationModel finite_population(const MarketInstance& instance) {
    const int S = instance.num_suppliers();
    const int D = instance.num_consumers();
    if (S < 1 || D < 1) throw ParameterError("finite population needs S >= 1 and D >= 1");
    PopulationModel model;
    model.beta = static_cast<double>(S) / (S + D);
    model.n = instance.n;
    model.groups = instance.groups;
    model.mu = instance.mu;
    model.supplier_sampler = [suppliers = instance.suppliers](Rng& rng) {
        const auto k = std::uniform_int_distribution<std::size_t>(0, suppliers.size() - 1)(rng);
        return suppliers[k];
    };
    model.consumer_sampler = [A = instance.A](Rng& rng) -> Vector {
        const auto d = std::uniform_int_distribution<Eigen::Index>(0, A.cols() - 1)(rng);
        return A.col(d);
    };
    return model;
}

PopulationModel box_population(const MarketInstance& nesting, const BoxPopulationParams& bp) {
    PopulationModel model;
    model.beta = bp.beta;
    model.n = nesting.n;
    model.groups = nesting.groups;
    model.mu = nesting.mu;
    const int n = nesting.n;
    model.supplier_sampler = [n, bp](Rng& rng) {
        std::uniform_real_distribution<double> u(bp.y_hat_lo, bp.y_hat_hi);
        SupplierSpec s;
        s.gamma = bp.gamma;
        s.cost_coeff = bp.cost_coeff;
        s.y_hat.resize(n);
        for (int i = 0; i < n; ++i) s.y_hat[i] = u(rng);
        return s;
    };
    model.consumer_sampler = [n, bp](Rng& rng) {
        std::uniform_real_distribution<double> u(bp.utility_lo, bp.utility_hi);
        Vector a(n);
        for (int i = 0; i < n; ++i) a[i] = u(rng);
        return a;
    };
    return model;
}

GradientSample population_oracle(const PopulationModel& model, const Vector& p, Rng& rng) {
    model.validate();
    GradientSample out;
    out.kind = OracleKind::sampled_sale;
    out.oracle_calls = 1;
    out.agent = {Agent::Role::population, -1};
    if (std::bernoulli_distribution(model.beta)(rng)) {
        out.g = best_response(model.supplier_sampler(rng), p).y;
    } else {
        const Vector a = model.consumer_sampler(rng);
        const NestedLogit logit(model.groups, model.mu, a, p);
        out.g = Vector::Zero(model.n);
        out.g[logit.sample(rng)] = -1.0;
    }
    return out;
}

double PopulationSample::objective(const Vector& p) const {
    double supply = 0.0;
    for (const auto& s : agents.suppliers) supply += revenue(s, p);
    double demand = 0.0;
    for (int d = 0; d < agents.num_consumers(); ++d) demand += expected_surplus(agents, d, p);
    const double S = std::max(agents.num_suppliers(), 1);
    const double D = std::max(agents.num_consumers(), 1);
    return beta * supply / S + (1.0 - beta) * demand / D;
}

PopulationSample draw_population_sample(const PopulationModel& model, int size, Rng& rng) {
    model.validate();
    if (size < 1) throw ParameterError("population sample size must be positive");
    PopulationSample out;
    out.beta = model.beta;
    out.agents.n = model.n;
    out.agents.m = static_cast<int>(model.groups.size());
    out.agents.groups = model.groups;
    out.agents.mu = model.mu;
    out.agents.A.resize(model.n, size);
    for (int k = 0; k < size; ++k) out.agents.suppliers.push_back(model.supplier_sampler(rng));
    for (int k = 0; k < size; ++k) out.agents.A.col(k) = model.consumer_sampler(rng);
    return out;
}

// ---------------------------------------------------------------------------

LipschitzConstants lipschitz_constants(const MarketInstance& instance) {
    LipschitzConstants out;
    out.smooth = true;
    for (const auto& s : instance.suppliers) {
        if (!(s.gamma > 0.0)) {
            out.smooth = false;
            out.per_agent.clear();
            out.total = 0.0;
            return out;
        }
        out.per_agent.push_back(1.0 / s.gamma);
        out.total += 1.0 / s.gamma;
    }
    if (instance.num_consumers() > 0) {
        const double consumer = 1.0 / instance.mu.minCoeff();
        for (int d = 0; d < instance.num_consumers(); ++d) {
            out.per_agent.push_back(consumer);
            out.total += consumer;
        }
    }
    return out;
}

double curvature_bound(const MarketInstance& instance) {
    double total = 0.0;
    for (const auto& s : instance.suppliers) total += 1.0 / (2.0 * (s.cost_coeff + s.gamma));
    if (instance.num_consumers() > 0) total += instance.num_consumers() / instance.mu.minCoeff();
    return total;
}

double clearing_residual(const MarketInstance& instance, const Vector& p, double active_threshold) {
    const Vector g = full_gradient(instance, p).g;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        if (p[i] > active_threshold) worst = std::max(worst, std::abs(g[i]));
    return worst;
}

}  // namespace pricedyn
