#include "pricedyn/consumer.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace pricedyn {

namespace {

void check_consumer(const MarketInstance& instance, int d) {
    if (d < 0 || d >= instance.num_consumers())
        throw IndexError("consumer index " + std::to_string(d) + " out of range [0, " +
                         std::to_string(instance.num_consumers()) + ")");
}

// Index of the first bucket whose cumulative weight exceeds u * total.
int pick(const Vector& weights, double u) {
    const double target = u * weights.sum();
    double acc = 0.0;
    int last_positive = 0;
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0.0) continue;
        last_positive = static_cast<int>(k);
        acc += weights[k];
        if (target < acc) return static_cast<int>(k);
    }
    return last_positive;  // rounding left target at the very top
}

}  // namespace

double log_sum_exp(const Eigen::Ref<const Vector>& x) {
    if (x.size() == 0) return -std::numeric_limits<double>::infinity();
    const double peak = x.maxCoeff();
    return peak + std::log((x.array() - peak).exp().sum());
}

NestedLogit::NestedLogit(const Groups& groups, const Vector& mu,
                         const Eigen::Ref<const Vector>& utilities, const Vector& prices)
    : groups_(&groups), group_prob_(static_cast<Eigen::Index>(groups.size())),
      cond_prob_(prices.size()) {
    const Eigen::Index m = group_prob_.size();
    Vector inner(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const auto& g = groups[j];
        const double mj = mu[j];
        double peak = -std::numeric_limits<double>::infinity();
        for (int i : g) peak = std::max(peak, utilities[i] - prices[i]);
        double total = 0.0;
        for (int i : g) {
            const double w = std::exp((utilities[i] - prices[i] - peak) / mj);
            cond_prob_[i] = w;
            total += w;
        }
        // total >= 1 because the peak alternative contributes exp(0).
        for (int i : g) cond_prob_[i] /= total;
        inner[j] = peak + mj * std::log(total);
    }
    surplus_ = log_sum_exp(inner);
    group_prob_ = (inner.array() - surplus_).exp();
}

Vector NestedLogit::choice_probabilities() const {
    Vector x(cond_prob_.size());
    for (std::size_t j = 0; j < groups_->size(); ++j)
        for (int i : (*groups_)[j]) x[i] = group_prob_[static_cast<Eigen::Index>(j)] * cond_prob_[i];
    return x;
}

int NestedLogit::sample(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int j = pick(group_prob_, unit(rng));
    const auto& g = (*groups_)[j];
    Vector within(static_cast<Eigen::Index>(g.size()));
    for (std::size_t k = 0; k < g.size(); ++k) within[static_cast<Eigen::Index>(k)] = cond_prob_[g[k]];
    return g[pick(within, unit(rng))];
}

Vector SaleSample::one_hot() const {
    Vector v = Vector::Zero(n);
    v[chosen] = 1.0;
    return v;
}

double expected_surplus(const MarketInstance& instance, int d, const Vector& p) {
    check_consumer(instance, d);
    return NestedLogit(instance.groups, instance.mu, instance.A.col(d), p).expected_surplus();
}

Vector choice_probabilities(const MarketInstance& instance, int d, const Vector& p) {
    check_consumer(instance, d);
    return NestedLogit(instance.groups, instance.mu, instance.A.col(d), p).choice_probabilities();
}

SaleSample sample_choice(const MarketInstance& instance, int d, const Vector& p, Rng& rng) {
    check_consumer(instance, d);
    const NestedLogit model(instance.groups, instance.mu, instance.A.col(d), p);
    return {model.sample(rng), instance.n};
}

}  // namespace pricedyn
