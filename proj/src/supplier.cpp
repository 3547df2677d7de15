#include "pricedyn/supplier.hpp"

#include <string>

namespace pricedyn {

SupplierResponse best_response(const SupplierSpec& spec, const Vector& p) {
    const double curvature = spec.cost_coeff + spec.gamma;
    if (!(curvature > 0.0))
        throw ParameterError("supplier with gamma = 0 and cost_coeff = 0 has unbounded revenue");
    if (spec.y_hat.size() != p.size()) throw ParameterError("y_hat and p differ in length");

    SupplierResponse out;
    out.y = (p + 2.0 * spec.gamma * spec.y_hat) / (2.0 * curvature);
    out.revenue = supplier_objective(spec, p, out.y);
    return out;
}

double revenue(const SupplierSpec& spec, const Vector& p) {
    return best_response(spec, p).revenue;
}

double supplier_objective(const SupplierSpec& spec, const Vector& p, const Vector& y) {
    return y.dot(p) - spec.cost_coeff * y.squaredNorm() - spec.gamma * (y - spec.y_hat).squaredNorm();
}

int SmoothedInstance::num_rewritten() const {
    int k = 0;
    for (bool r : rewritten) k += r ? 1 : 0;
    return k;
}

SmoothedInstance smooth(const MarketInstance& instance, double eps, double radius,
                        const Vector& anchor) {
    const Vector a = anchor.size() == 0 ? Vector::Zero(instance.n) : anchor;
    return smooth(instance, eps, radius,
                  std::vector<Vector>(static_cast<std::size_t>(instance.num_suppliers()), a));
}

SmoothedInstance smooth(const MarketInstance& instance, double eps, double radius,
                        const std::vector<Vector>& anchors) {
    if (!(eps > 0.0)) throw ParameterError("smoothing target eps must be positive");
    if (!(radius > 0.0)) throw ParameterError("smoothing radius must be positive");
    if (static_cast<int>(anchors.size()) != instance.num_suppliers())
        throw ParameterError("need one anchor per supplier");
    for (const auto& a : anchors) {
        if (a.size() != instance.n || (a.array() < 0.0).any())
            throw ParameterError("anchors must be nonnegative n-vectors");
    }

    SmoothedInstance out;
    out.base = instance;
    out.smoothed = instance;
    out.target_eps = eps;
    out.radius = radius;
    out.eta = eps / (2.0 * radius * radius);
    out.anchors = anchors;
    out.rewritten.assign(anchors.size(), false);
    for (std::size_t s = 0; s < instance.suppliers.size(); ++s) {
        if (instance.suppliers[s].gamma != 0.0) continue;
        out.rewritten[s] = true;
        out.smoothed.suppliers[s].gamma = out.eta;
        out.smoothed.suppliers[s].y_hat = anchors[s];
    }
    out.nothing_to_smooth = out.num_rewritten() == 0;
    return out;
}

double smoothed_lipschitz(const SmoothedInstance& sm) {
    double total = 0.0;
    for (std::size_t s = 0; s < sm.base.suppliers.size(); ++s) {
        total += sm.rewritten[s] ? 2.0 * sm.radius * sm.radius / sm.target_eps
                                 : 1.0 / sm.base.suppliers[s].gamma;
    }
    if (sm.base.num_consumers() > 0) total += sm.base.num_consumers() / sm.base.mu.minCoeff();
    return total;
}

}  // namespace pricedyn
