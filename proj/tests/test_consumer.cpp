#include <doctest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>
#include <numbers>

#include "pricedyn/consumer.hpp"
#include "support.hpp"

using namespace pricedyn;
using HighPrecision = boost::multiprecision::cpp_dec_float_50;

namespace {

MarketInstance single_consumer(const Groups& groups, const Vector& mu, const Vector& a) {
    MarketInstance inst;
    inst.n = static_cast<int>(a.size());
    inst.m = static_cast<int>(groups.size());
    inst.groups = groups;
    inst.mu = mu;
    inst.A = a;
    return inst;
}

// The nested surplus evaluated literally, without any max subtraction, in 50 digits.
double direct_surplus(const MarketInstance& inst, int d, const Vector& p) {
    HighPrecision outer = 0;
    for (int j = 0; j < inst.m; ++j) {
        HighPrecision inner = 0;
        const HighPrecision mu = inst.mu[j];
        for (int i : inst.groups[j]) inner += exp((HighPrecision(inst.A(i, d)) - HighPrecision(p[i])) / mu);
        outer += pow(inner, mu);
    }
    return static_cast<double>(log(outer));
}

}  // namespace

TEST_CASE("expected surplus closed cases") {
    SUBCASE("single alternative") {
        const auto inst = single_consumer({{0}}, Vector::Ones(1), Vector::Constant(1, 2.0));
        CHECK(expected_surplus(inst, 0, Vector::Constant(1, 0.5)) == doctest::Approx(1.5).epsilon(1e-15));
    }
    SUBCASE("two equal alternatives") {
        const auto inst = single_consumer({{0, 1}}, Vector::Ones(1), Vector::Ones(2));
        CHECK(expected_surplus(inst, 0, Vector::Zero(2)) ==
              doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-15));
    }
}

TEST_CASE("expected surplus matches a 50-digit direct evaluation") {
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Vector a(5), mu(2);
        for (int i = 0; i < 5; ++i) a[i] = 0.01 + 4.99 * u(rng);
        mu << 0.1 + 0.9 * u(rng), 0.1 + 0.9 * u(rng);
        const auto inst = single_consumer({{0, 3}, {1, 2, 4}}, mu, a);
        const Vector p = testing::random_prices(rng, 5, 0.0, 5.0);
        const double want = direct_surplus(inst, 0, p);
        CHECK(std::abs(expected_surplus(inst, 0, p) - want) <= 1e-10 * std::abs(want));
    }
}

TEST_CASE("choice probabilities closed cases") {
    const auto one = single_consumer({{0}}, Vector::Constant(1, 0.3), Vector::Constant(1, 2.0));
    CHECK(choice_probabilities(one, 0, Vector::Constant(1, 1.0))[0] == 1.0);

    for (double mu : {0.1, 0.5, 1.0}) {
        const auto twin = single_consumer({{0, 1}}, Vector::Constant(1, mu), Vector::Constant(2, 3.0));
        const Vector x = choice_probabilities(twin, 0, Vector::Constant(2, 1.0));
        CHECK(x[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(x[1] == doctest::Approx(0.5).epsilon(1e-15));
    }
}

TEST_CASE("choice probabilities are minus the surplus gradient") {
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        const MarketInstance inst = testing::random_instance(rng, {.S_max = 0});
        const Vector p = testing::random_prices(rng, inst.n);
        const int d = std::uniform_int_distribution<int>(0, inst.num_consumers() - 1)(rng);
        const Vector fd = testing::central_difference([&](const Vector& q) { return expected_surplus(inst, d, q); }, p);
        const Vector x = choice_probabilities(inst, d, p);
        CHECK(testing::close_normwise(-fd, x));
    }
}

TEST_CASE("normalization over 1000 random evaluations") {
    Rng rng(17);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const MarketInstance inst = testing::random_instance(rng, {.S_max = 0});
        const Vector p = testing::random_prices(rng, inst.n, 0.0, 8.0);
        const int d = std::uniform_int_distribution<int>(0, inst.num_consumers() - 1)(rng);
        const Vector x = choice_probabilities(inst, d, p);
        worst = std::max(worst, std::abs(x.sum() - 1.0));
        CHECK((x.array() > 0.0).all());
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("uniform price shift lowers surplus by the shift") {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        Vector a(6);
        for (int i = 0; i < 6; ++i) a[i] = 0.01 + 4.99 * u(rng);
        const auto inst = single_consumer({{0, 1, 2, 3, 4, 5}}, Vector::Ones(1), a);
        const Vector p = testing::random_prices(rng, 6);
        const double c = 2.0 * u(rng);
        const Vector shifted = (p.array() + c).matrix();
        CHECK(std::abs(expected_surplus(inst, 0, shifted) - (expected_surplus(inst, 0, p) - c)) <= 1e-12);
    }
}

TEST_CASE("raising a price lowers its own choice probability") {
    Rng rng(21);
    for (int k = 0; k < 200; ++k) {
        const MarketInstance inst = testing::random_instance(rng, {.n_max = 10, .S_max = 0});
        const Vector p = testing::random_prices(rng, inst.n);
        const int i = std::uniform_int_distribution<int>(0, inst.n - 1)(rng);
        Vector q = p;
        q[i] += 0.05;
        const double before = choice_probabilities(inst, 0, p)[i];
        const double after = choice_probabilities(inst, 0, q)[i];
        if (inst.n > 1) CHECK(after < before);
    }
}

TEST_CASE("no overflow for small mu and large utility gaps") {
    Vector a(4);
    a << 1000.0, 1.0, 500.0, 0.02;
    const auto inst = single_consumer({{0, 1}, {2, 3}}, Vector::Constant(2, 0.1), a);
    for (double shift : {0.0, 999.0}) {
        const Vector p = Vector::Constant(4, shift);
        const double e = expected_surplus(inst, 0, p);
        const Vector x = choice_probabilities(inst, 0, p);
        CHECK(std::isfinite(e));
        CHECK(x.allFinite());
        CHECK(std::abs(x.sum() - 1.0) <= 1e-12);
        CHECK(e == doctest::Approx(1000.0 - shift).epsilon(1e-9));
    }
}

TEST_CASE("sampling a single alternative") {
    const auto inst = single_consumer({{0}}, Vector::Ones(1), Vector::Constant(1, 2.0));
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        const auto s = sample_choice(inst, 0, Vector::Zero(1), rng);
        CHECK(s.chosen == 0);
        CHECK(s.one_hot()[0] == 1.0);
    }
}

TEST_CASE("sampling two identical alternatives is fair") {
    const auto inst = single_consumer({{0, 1}}, Vector::Constant(1, 0.4), Vector::Constant(2, 1.0));
    Rng rng(12345);
    const int draws = 100000;
    int first = 0;
    for (int k = 0; k < draws; ++k) first += sample_choice(inst, 0, Vector::Zero(2), rng).chosen == 0;
    const double freq = static_cast<double>(first) / draws;
    CHECK(std::abs(freq - 0.5) <= 3.0 * std::sqrt(0.25 / draws));
}

TEST_CASE("sampled sales average to the choice probabilities") {
    Vector a(5), mu(2);
    a << 1.2, 3.4, 0.5, 2.2, 4.0;
    mu << 0.3, 0.8;
    const auto inst = single_consumer({{0, 3}, {1, 2, 4}}, mu, a);
    Vector p(5);
    p << 0.4, 2.0, 0.1, 0.9, 2.5;
    const Vector x = choice_probabilities(inst, 0, p);
    Rng rng(777);
    const int draws = 100000;
    Vector mean = Vector::Zero(5);
    for (int k = 0; k < draws; ++k) {
        const auto s = sample_choice(inst, 0, p, rng);
        CHECK_FALSE(s.chosen < 0);
        mean[s.chosen] += 1.0;
    }
    mean /= draws;
    for (int i = 0; i < 5; ++i) {
        const double se = std::sqrt(x[i] * (1.0 - x[i]) / draws);
        CHECK(std::abs(mean[i] - x[i]) <= 3.0 * se);
    }
}

TEST_CASE("surplus equals the expected best noisy utility (mu = 1)") {
    // Zero-mean Gumbel noise: location -euler_gamma, scale 1.
    Vector a(4);
    a << 1.0, 2.5, 0.3, 1.7;
    const auto inst = single_consumer({{0, 1}, {2, 3}}, Vector::Ones(2), a);
    Vector p(4);
    p << 0.2, 1.0, 0.0, 0.5;
    const double want = expected_surplus(inst, 0, p);

    Rng rng(4242);
    std::extreme_value_distribution<double> gumbel(-std::numbers::egamma, 1.0);
    const int draws = 200000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < draws; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 4; ++i) best = std::max(best, a[i] - p[i] + gumbel(rng));
        sum += best;
        sq += best * best;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sq / draws - mean * mean) / draws);
    CHECK(std::abs(mean - want) <= 3.0 * se);
}

TEST_CASE("consumer index checks") {
    const auto inst = single_consumer({{0}}, Vector::Ones(1), Vector::Constant(1, 2.0));
    CHECK_THROWS_AS(expected_surplus(inst, 1, Vector::Zero(1)), IndexError);
    CHECK_THROWS_AS(choice_probabilities(inst, -1, Vector::Zero(1)), IndexError);
    Rng rng(0);
    CHECK_THROWS_AS(sample_choice(inst, 3, Vector::Zero(1), rng), IndexError);
}
