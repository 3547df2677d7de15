#pragma once

#include <vector>

#include "pricedyn/common.hpp"
#include "pricedyn/market.hpp"

namespace pricedyn {

/// Stabilized intermediate quantities of the nested-logit surplus for one
/// consumer at one price vector.
///
/// For group j with net utilities z_i = a_i - p_i:
///   peak_j  = max_{i in G_j} z_i
///   inner_j = peak_j + mu_j * log sum_{i in G_j} exp((z_i - peak_j) / mu_j)
/// and the expected surplus is log sum_j exp(inner_j). Choice probabilities
/// factor as P(group j) * P(i | group j), both computed as softmaxes.
class NestedLogit {
public:
    NestedLogit(const Groups& groups, const Vector& mu, const Eigen::Ref<const Vector>& utilities,
                const Vector& prices);

    double expected_surplus() const { return surplus_; }

    // P(group j) for every group.
    const Vector& group_probabilities() const { return group_prob_; }

    // P(i | group of i), indexed by alternative.
    const Vector& conditional_probabilities() const { return cond_prob_; }

    Vector choice_probabilities() const;

    // Two-stage draw: group first, then alternative within the group.
    int sample(Rng& rng) const;

private:
    const Groups* groups_;
    Vector group_prob_;
    Vector cond_prob_;
    double surplus_ = 0.0;
};

// One observed sale: exactly one alternative bought.
struct SaleSample {
    int chosen = 0;  // zero-based
    int n = 0;

    Vector one_hot() const;
};

double expected_surplus(const MarketInstance& instance, int d, const Vector& p);

// Equals minus the gradient of expected_surplus in p.
Vector choice_probabilities(const MarketInstance& instance, int d, const Vector& p);

SaleSample sample_choice(const MarketInstance& instance, int d, const Vector& p, Rng& rng);

// log sum exp with max subtraction; -inf for an empty input.
double log_sum_exp(const Eigen::Ref<const Vector>& x);

}  // namespace pricedyn
