#include <doctest.h>

#include "pricedyn/consumer.hpp"
#include "pricedyn/harness.hpp"
#include "pricedyn/oracles.hpp"
#include "pricedyn/supplier.hpp"
#include "support.hpp"

using namespace pricedyn;

namespace {

MarketInstance one_consumer_one_alternative(double a) {
    MarketInstance inst;
    inst.n = 1;
    inst.m = 1;
    inst.groups = {{0}};
    inst.mu = Vector::Ones(1);
    inst.A = Matrix::Constant(1, 1, a);
    return inst;
}

MarketInstance suppliers_only(int n, std::vector<SupplierSpec> sups) {
    MarketInstance inst;
    inst.n = n;
    inst.m = 1;
    inst.groups = {{}};
    for (int i = 0; i < n; ++i) inst.groups[0].push_back(i);
    inst.mu = Vector::Ones(1);
    inst.A.resize(n, 0);
    inst.suppliers = std::move(sups);
    return inst;
}

}  // namespace

TEST_CASE("potential reduces to its parts") {
    CHECK(potential(one_consumer_one_alternative(2.0), Vector::Constant(1, 0.5)) ==
          doctest::Approx(1.5).epsilon(1e-15));
    const auto inst = suppliers_only(1, {{.gamma = 0.3, .y_hat = Vector::Zero(1), .cost_coeff = 1.0}});
    CHECK(potential(inst, Vector::Zero(1)) == 0.0);
}

TEST_CASE("potential is midpoint convex") {
    Rng rng(51);
    for (int k = 0; k < 1000; ++k) {
        const MarketInstance inst = testing::random_instance(rng, {.n_max = 8});
        const Vector p = testing::random_prices(rng, inst.n);
        const Vector q = testing::random_prices(rng, inst.n);
        CHECK(potential(inst, 0.5 * (p + q)) <= 0.5 * (potential(inst, p) + potential(inst, q)) + 1e-12);
    }
}

TEST_CASE("full gradient closed cases") {
    SUBCASE("consumers only") {
        Rng rng(52);
        const MarketInstance inst = testing::random_instance(rng, {.S_max = 0, .D_max = 10});
        const Vector p = testing::random_prices(rng, inst.n);
        const auto g = full_gradient(inst, p);
        CHECK(g.oracle_calls == inst.num_consumers());
        CHECK(g.kind == OracleKind::full);
        CHECK(std::abs(g.g.sum() + inst.num_consumers()) <= 1e-12);
        Vector want = Vector::Zero(inst.n);
        for (int d = 0; d < inst.num_consumers(); ++d) want -= choice_probabilities(inst, d, p);
        CHECK(g.g.isApprox(want, 1e-15));
    }
    SUBCASE("suppliers only, unit cost closed form") {
        Rng rng(53);
        std::vector<SupplierSpec> sups;
        for (int s = 0; s < 3; ++s)
            sups.push_back({.gamma = 0.1 * (s + 1), .y_hat = testing::random_prices(rng, 4, 0.0, 2.0), .cost_coeff = 1.0});
        const auto inst = suppliers_only(4, sups);
        const Vector p = testing::random_prices(rng, 4);
        Vector want = Vector::Zero(4);
        for (const auto& s : sups) want += (p + 2.0 * s.gamma * s.y_hat) / (2.0 * (1.0 + s.gamma));
        CHECK(full_gradient(inst, p).g.isApprox(want, 1e-14));
    }
}

TEST_CASE("full gradient matches central differences of the potential") {
    Rng rng(54);
    for (int k = 0; k < 100; ++k) {
        const MarketInstance inst = testing::random_instance(rng);
        const Vector p = testing::random_prices(rng, inst.n, 0.05, 3.0);
        const Vector fd = testing::central_difference([&](const Vector& q) { return potential(inst, q); }, p);
        CHECK(testing::close_normwise(fd, full_gradient(inst, p).g));
    }
}

TEST_CASE("exact agent oracle") {
    const Problem pr = generate_synthetic({});
    const auto& inst = pr.instance;
    const Vector& p = pr.p0;
    const int S = inst.num_suppliers();

    const auto first = exact_agent_oracle(inst, 0, p);
    const auto& s0 = inst.suppliers[0];
    CHECK(first.g.isApprox((p + 2.0 * s0.gamma * s0.y_hat) / (2.0 * (1.0 + s0.gamma)), 1e-15));
    CHECK(first.agent.role == Agent::Role::supplier);
    CHECK(first.oracle_calls == 1);

    const auto consumer = exact_agent_oracle(inst, S, p);
    CHECK(consumer.agent.role == Agent::Role::consumer);
    CHECK(consumer.agent.index == 0);
    CHECK((consumer.g.array() < 0.0).all());
    CHECK((consumer.g.array() > -1.0).all());
    CHECK(std::abs(consumer.g.sum() + 1.0) <= 1e-12);

    Vector sum = Vector::Zero(inst.n);
    for (int i = 0; i < inst.num_agents(); ++i) sum += exact_agent_oracle(inst, i, p).g;
    const Vector full = full_gradient(inst, p).g;
    CHECK((sum / inst.num_agents() - full / inst.num_agents()).lpNorm<Eigen::Infinity>() <= 1e-12);

    CHECK_THROWS_AS(exact_agent_oracle(inst, inst.num_agents(), p), IndexError);
    CHECK_THROWS_AS(exact_agent_oracle(inst, -1, p), IndexError);
}

TEST_CASE("sampled oracle") {
    const Problem pr = generate_synthetic({});
    const auto& inst = pr.instance;
    Rng rng(61);

    SUBCASE("supplier branch is deterministic") {
        for (int s = 0; s < inst.num_suppliers(); ++s) {
            const auto g = sampled_oracle(inst, s, pr.p0, rng);
            CHECK(g.g == exact_agent_oracle(inst, s, pr.p0).g);
            CHECK(g.kind == OracleKind::sampled_sale);
        }
    }
    SUBCASE("single alternative consumer always buys it") {
        const auto one = one_consumer_one_alternative(3.0);
        for (int k = 0; k < 20; ++k) CHECK(sampled_oracle(one, 0, Vector::Ones(1), rng).g[0] == -1.0);
    }
    SUBCASE("consumer branch is a negated one-hot with the right mean") {
        const int agent = inst.num_suppliers() + 3;
        const Vector x = -exact_agent_oracle(inst, agent, pr.p0).g;
        const int draws = 100000;
        Vector mean = Vector::Zero(inst.n);
        for (int k = 0; k < draws; ++k) {
            const Vector g = sampled_oracle(inst, agent, pr.p0, rng).g;
            CHECK(g.sum() == -1.0);
            CHECK(g.norm() == 1.0);
            mean += g;
        }
        mean /= draws;
        for (int i = 0; i < inst.n; ++i) {
            const double se = std::sqrt(x[i] * (1.0 - x[i]) / draws);
            CHECK(std::abs(mean[i] + x[i]) <= 3.0 * se);
        }
    }
}

TEST_CASE("uniform agent draws") {
    Rng rng(71);
    for (int k = 0; k < 100; ++k) CHECK(uniform_agent(rng, 0, 1) == 0);
    CHECK_THROWS_AS(uniform_agent(rng, 0, 0), ParameterError);

    const int draws = 150000;
    std::vector<int> count(15, 0);
    for (int k = 0; k < draws; ++k) ++count[uniform_agent(rng, 5, 10)];
    const double p = 1.0 / 15.0;
    const double se = std::sqrt(p * (1.0 - p) / draws);
    int suppliers = 0;
    for (int i = 0; i < 15; ++i) {
        CHECK(std::abs(static_cast<double>(count[i]) / draws - p) <= 3.0 * se);
        if (i < 5) suppliers += count[i];
    }
    const double se_s = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / draws);
    CHECK(std::abs(static_cast<double>(suppliers) / draws - 1.0 / 3.0) <= 3.0 * se_s);
}

TEST_CASE("population oracle") {
    const Problem pr = generate_synthetic({.S = 1, .D = 1, .n = 4, .m = 2});
    const auto& inst = pr.instance;
    const Vector& p = pr.p0;
    const SupplierSpec& sup = inst.suppliers[0];
    const Vector a = inst.A.col(0);
    Rng rng(81);
    const int draws = 100000;

    SUBCASE("branch frequency follows beta") {
        const double beta = 0.999;
        const auto model = point_mass_population(inst, sup, a, beta);
        int supplier_draws = 0;
        for (int k = 0; k < draws; ++k) supplier_draws += population_oracle(model, p, rng).g.minCoeff() >= 0.0;
        CHECK(std::abs(static_cast<double>(supplier_draws) / draws - beta) <=
              3.0 * std::sqrt(beta * (1.0 - beta) / draws));
    }
    SUBCASE("point masses average to beta y - (1 - beta) x") {
        const double beta = 0.3;
        const auto model = point_mass_population(inst, sup, a, beta);
        const Vector y = best_response(sup, p).y;
        const Vector x = choice_probabilities(inst, 0, p);
        const Vector want = beta * y - (1.0 - beta) * x;
        Vector mean = Vector::Zero(inst.n), sq = Vector::Zero(inst.n);
        for (int k = 0; k < draws; ++k) {
            const Vector g = population_oracle(model, p, rng).g;
            mean += g;
            sq += g.cwiseAbs2();
        }
        mean /= draws;
        sq /= draws;
        for (int i = 0; i < inst.n; ++i) {
            const double se = std::sqrt((sq[i] - mean[i] * mean[i]) / draws);
            CHECK(std::abs(mean[i] - want[i]) <= 3.0 * se);
        }
    }
    SUBCASE("beta = S/(S+D) reproduces the normalized finite-sum gradient") {
        const auto model = point_mass_population(inst, sup, a, 0.5);
        const Vector want = full_gradient(inst, p).g / inst.num_agents();
        Vector mean = Vector::Zero(inst.n), sq = Vector::Zero(inst.n);
        for (int k = 0; k < draws; ++k) {
            const Vector g = population_oracle(model, p, rng).g;
            mean += g;
            sq += g.cwiseAbs2();
        }
        mean /= draws;
        sq /= draws;
        for (int i = 0; i < inst.n; ++i) {
            const double se = std::sqrt((sq[i] - mean[i] * mean[i]) / draws);
            CHECK(std::abs(mean[i] - want[i]) <= 3.0 * se);
        }
    }
    SUBCASE("invalid beta") {
        CHECK_THROWS_AS(population_oracle(point_mass_population(inst, sup, a, 1.0), p, rng), ParameterError);
        CHECK_THROWS_AS(population_oracle(point_mass_population(inst, sup, a, 0.0), p, rng), ParameterError);
    }
}

TEST_CASE("box population samples valid agents") {
    const Problem pr = generate_synthetic({});
    const auto model = box_population(pr.instance, {});
    Rng rng(82);
    const PopulationSample sample = draw_population_sample(model, 50, rng);
    CHECK(validate(sample.agents).empty());
    CHECK(sample.agents.num_suppliers() == 50);
    CHECK(std::isfinite(sample.objective(pr.p0)));
}

TEST_CASE("Lipschitz constants") {
    SUBCASE("hand evaluated") {
        MarketInstance inst;
        inst.n = 2;
        inst.m = 2;
        inst.groups = {{0}, {1}};
        inst.mu = Vector(2);
        inst.mu << 0.5, 1.0;
        inst.A = Matrix::Ones(2, 3);
        inst.suppliers.push_back({.gamma = 2.0, .y_hat = Vector::Zero(2), .cost_coeff = 1.0});
        const auto lc = lipschitz_constants(inst);
        CHECK(lc.smooth);
        CHECK(lc.total == doctest::Approx(6.5));
        REQUIRE(lc.per_agent.size() == 4);
        CHECK(lc.per_agent[0] == doctest::Approx(0.5));
        CHECK(lc.per_agent[3] == doctest::Approx(2.0));
    }
    SUBCASE("default instance is dominated by the supplier term") {
        const Problem pr = generate_synthetic({});
        const auto lc = lipschitz_constants(pr.instance);
        double supplier_term = 0.0;
        for (int s = 0; s < 5; ++s) supplier_term += lc.per_agent[s];
        CHECK(supplier_term == doctest::Approx(5e4));
        CHECK(curvature_bound(pr.instance) < lc.total);
    }
    SUBCASE("gamma = 0 flags non-smoothness") {
        Problem pr = generate_synthetic({.gamma = 0.0});
        const auto lc = lipschitz_constants(pr.instance);
        CHECK_FALSE(lc.smooth);
        CHECK(lc.per_agent.empty());
    }
}

TEST_CASE("gradient Lipschitz inequality holds empirically for f and every f_i") {
    Rng rng(91);
    for (int k = 0; k < 20; ++k) {
        const MarketInstance inst = testing::random_instance(rng, {.gamma_lo = 0.01, .gamma_hi = 1.0});
        const auto lc = lipschitz_constants(inst);
        const double tight = curvature_bound(inst);
        for (int pair = 0; pair < 100; ++pair) {
            const Vector p = testing::random_prices(rng, inst.n);
            const Vector q = testing::random_prices(rng, inst.n);
            const double dist = (p - q).norm();
            const double dg = (full_gradient(inst, p).g - full_gradient(inst, q).g).norm();
            CHECK(dg <= lc.total * dist * (1.0 + 1e-12));
            CHECK(dg <= tight * dist * (1.0 + 1e-12));
            for (int i = 0; i < inst.num_agents(); ++i) {
                const double di = (exact_agent_oracle(inst, i, p).g - exact_agent_oracle(inst, i, q).g).norm();
                CHECK(di <= lc.per_agent[i] * dist * (1.0 + 1e-12));
            }
        }
    }
}

TEST_CASE("stochastic gradients are bounded per sample") {
    const Problem pr = generate_synthetic({});
    const auto& inst = pr.instance;
    Rng rng(95);
    for (int k = 0; k < 2000; ++k) {
        const Vector p = testing::random_prices(rng, inst.n, 0.0, 4.0);
        const int agent = uniform_agent(rng, inst.num_suppliers(), inst.num_consumers());
        const Vector g = sampled_oracle(inst, agent, p, rng).g;
        if (agent < inst.num_suppliers()) {
            const auto& s = inst.suppliers[agent];
            CHECK(g.norm() <= (p.norm() + 2.0 * s.gamma * s.y_hat.norm()) / (2.0 * (1.0 + s.gamma)) + 1e-12);
        } else {
            CHECK(g.norm() == 1.0);
        }
    }
}

TEST_CASE("market clears at the estimated optimum") {
    const Problem pr = generate_synthetic({});
    const auto opt = estimate_optimum(pr.instance, pr.p0, 1e-10);
    CHECK(opt.converged);
    const Vector g = full_gradient(pr.instance, opt.p_star).g;
    for (int i = 0; i < pr.instance.n; ++i) {
        if (opt.p_star[i] > 1e-8) {
            CHECK(std::abs(g[i]) <= 1e-6);
        } else {
            CHECK(g[i] >= -1e-6);  // zero price only where supply exceeds demand
        }
    }
    CHECK(opt.clearing_residual <= 1e-6);
}
