#pragma once

#include <vector>

#include "pricedyn/common.hpp"
#include "pricedyn/market.hpp"

namespace pricedyn {

struct SupplierResponse {
    Vector y;
    double revenue = 0.0;
};

// Maximizer of <y, p> - c |y|^2 - gamma |y - y_hat|^2 over y >= 0, which is
// y = (p + 2 gamma y_hat) / (2 (c + gamma)) since p, y_hat >= 0.
SupplierResponse best_response(const SupplierSpec& spec, const Vector& p);

double revenue(const SupplierSpec& spec, const Vector& p);

// Objective being maximized, evaluated at an arbitrary plan y.
double supplier_objective(const SupplierSpec& spec, const Vector& p, const Vector& y);

// Instance where every gamma = 0 supplier carries the synthetic penalty
// eta * |y - anchor|^2 with eta = eps / (2 R^2).
struct SmoothedInstance {
    MarketInstance base;
    MarketInstance smoothed;
    double eta = 0.0;
    double target_eps = 0.0;
    double radius = 0.0;
    std::vector<Vector> anchors;   // one per supplier; only used where rewritten
    std::vector<bool> rewritten;   // true where gamma was 0 in base
    bool nothing_to_smooth = false;

    int num_rewritten() const;
};

// anchor defaults to zero when empty.
SmoothedInstance smooth(const MarketInstance& instance, double eps, double radius,
                        const Vector& anchor = Vector());

SmoothedInstance smooth(const MarketInstance& instance, double eps, double radius,
                        const std::vector<Vector>& anchors);

// 1/gamma for untouched suppliers, 2 R^2 / eps per rewritten supplier, and
// 1 / min_j mu_j per consumer.
double smoothed_lipschitz(const SmoothedInstance& smoothed);

}  // namespace pricedyn
