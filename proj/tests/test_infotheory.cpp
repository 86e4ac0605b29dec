#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "ocrent/infotheory.hpp"
#include "support/oracles.hpp"

using namespace ocrent::infotheory;
using Catch::Matchers::WithinAbs;

namespace {

JointDistribution bsc_joint(double crossover) {
    // Uniform input through a binary symmetric channel.
    const double good = 0.5 * (1.0 - crossover);
    const double bad = 0.5 * crossover;
    return JointDistribution({{good, bad}, {bad, good}});
}

}  // namespace

TEST_CASE("entropy of worked examples") {
    CHECK(entropy(DiscreteDistribution::from_probabilities({1.0}), LogBase::bits) == 0.0);
    CHECK_THAT(entropy(DiscreteDistribution::uniform(4), LogBase::bits),
               WithinAbs(2.0, 1e-12));

    const DiscreteDistribution skewed =
        DiscreteDistribution::from_probabilities({0.6, 0.2, 0.1, 0.1});
    const double h = entropy(skewed, LogBase::bits);
    CHECK_THAT(h, WithinAbs(1.5710, 1e-3));
    CHECK_THAT(h, WithinAbs(oracles::entropy_bits({0.6, 0.2, 0.1, 0.1}), 1e-12));
}

TEST_CASE("entropy respects the base and its exact ln2 conversion") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const auto d =
            DiscreteDistribution::from_probabilities(oracles::random_distribution(rng, 6));
        CHECK_THAT(entropy(d, LogBase::bits),
                   WithinAbs(entropy(d, LogBase::nats) / std::numbers::ln2, 1e-12));
    }
}

TEST_CASE("distribution validation names the violated invariant") {
    CHECK_THROWS_MATCHES(DiscreteDistribution::from_probabilities({0.5, -0.1, 0.6}),
                         ocrent::ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("nonnegative")));
    CHECK_THROWS_MATCHES(
        DiscreteDistribution::from_probabilities({0.5, 0.4}), ocrent::ValidationError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("sum to 1")));
    CHECK_THROWS_MATCHES(
        DiscreteDistribution({{3, 0.5}, {3, 0.5}}), ocrent::ValidationError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("unique")));
    CHECK_THROWS_AS(DiscreteDistribution(std::vector<DiscreteDistribution::Mass>{}),
                    ocrent::ValidationError);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(DiscreteDistribution::from_probabilities({nan, 1.0}),
                    ocrent::ValidationError);
}

TEST_CASE("normalized builds a distribution only on explicit request") {
    const auto d = DiscreteDistribution::normalized({2.0, 2.0, 4.0});
    CHECK_THAT(d.masses()[2].probability, WithinAbs(0.5, 1e-15));
    CHECK_THROWS_AS(DiscreteDistribution::normalized({0.0, 0.0}), ocrent::ValidationError);
}

TEST_CASE("joint entropy of worked examples") {
    // Independent uniform(2) x uniform(2).
    const JointDistribution independent({{0.25, 0.25}, {0.25, 0.25}});
    CHECK_THAT(joint_entropy(independent, LogBase::bits), WithinAbs(2.0, 1e-12));

    // Perfectly correlated uniform(4) diagonal.
    std::vector<std::vector<double>> diag(4, std::vector<double>(4, 0.0));
    for (int i = 0; i < 4; ++i) diag[i][i] = 0.25;
    CHECK_THAT(joint_entropy(JointDistribution(diag), LogBase::bits), WithinAbs(2.0, 1e-12));

    // BSC(0.1) with uniform input: H(X,Y) = 1 + H_b(0.1).
    const double expected = 1.0 + oracles::entropy_bits({0.1, 0.9});
    CHECK_THAT(joint_entropy(bsc_joint(0.1), LogBase::bits), WithinAbs(1.4690, 1e-3));
    CHECK_THAT(joint_entropy(bsc_joint(0.1), LogBase::bits), WithinAbs(expected, 1e-12));
}

TEST_CASE("joint validation") {
    CHECK_THROWS_AS(JointDistribution({{0.5, 0.5}, {0.5}}), ocrent::ValidationError);
    CHECK_THROWS_AS(JointDistribution({{0.7, 0.7}}), ocrent::ValidationError);
    CHECK_THROWS_AS(JointDistribution({{-0.1, 1.1}}), ocrent::ValidationError);
}

TEST_CASE("conditional entropy of worked examples") {
    std::vector<std::vector<double>> diag(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) diag[i][i] = 1.0 / 3;
    CHECK_THAT(conditional_entropy(JointDistribution(diag), LogBase::bits),
               WithinAbs(0.0, 1e-12));

    const JointDistribution independent({{0.2 * 0.3, 0.2 * 0.7}, {0.8 * 0.3, 0.8 * 0.7}});
    CHECK_THAT(conditional_entropy(independent, LogBase::bits),
               WithinAbs(oracles::entropy_bits({0.3, 0.7}), 1e-12));

    CHECK_THAT(conditional_entropy(bsc_joint(0.1), LogBase::bits), WithinAbs(0.4690, 1e-3));
}

TEST_CASE("mutual information of worked examples") {
    const JointDistribution independent({{0.2 * 0.3, 0.2 * 0.7}, {0.8 * 0.3, 0.8 * 0.7}});
    CHECK_THAT(mutual_information(independent, LogBase::bits), WithinAbs(0.0, 1e-12));

    std::vector<std::vector<double>> diag(4, std::vector<double>(4, 0.0));
    for (int i = 0; i < 4; ++i) diag[i][i] = 0.25;
    CHECK_THAT(mutual_information(JointDistribution(diag), LogBase::bits),
               WithinAbs(2.0, 1e-12));

    CHECK_THAT(mutual_information(bsc_joint(0.1), LogBase::bits), WithinAbs(0.5310, 1e-3));
}

TEST_CASE("chain identity and bounds over randomized joints") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    for (int i = 0; i < 300; ++i) {
        const auto cells = oracles::random_joint(rng, dim(rng), dim(rng));
        const JointDistribution joint(cells);
        const double hy = entropy(joint.marginal_y(), LogBase::bits);
        const double hx = entropy(joint.marginal_x(), LogBase::bits);
        const double hxy = joint_entropy(joint, LogBase::bits);
        const double mi = mutual_information(joint, LogBase::bits);
        const double hyx = conditional_entropy(joint, LogBase::bits);

        CHECK_THAT(hy, WithinAbs(mi + hyx, 1e-9));
        CHECK_THAT(hxy, WithinAbs(hx + hyx, 1e-9));
        CHECK(mi >= 0.0);
        CHECK(mi <= std::min(hx, hy) + 1e-9);
        CHECK(hyx >= 0.0);
        CHECK(hyx <= hy + 1e-9);
        CHECK(hxy >= std::max(hx, hy) - 1e-9);
        CHECK(hxy <= hx + hy + 1e-9);

        // Cross-check against the long-double oracle.
        const auto facts = oracles::joint_facts(cells);
        CHECK_THAT(mi, WithinAbs(facts.mutual_information, 1e-9));
        CHECK_THAT(hyx, WithinAbs(facts.conditional_entropy_yx, 1e-9));
    }
}

TEST_CASE("binary entropy") {
    CHECK_THAT(binary_entropy(0.5, LogBase::bits), WithinAbs(1.0, 1e-12));
    CHECK(binary_entropy(0.0, LogBase::bits) == 0.0);
    CHECK(binary_entropy(1.0, LogBase::bits) == 0.0);
    CHECK_THAT(binary_entropy(0.1, LogBase::bits),
               WithinAbs(oracles::entropy_bits({0.1, 0.9}), 1e-12));
    CHECK_THAT(binary_entropy(0.1, LogBase::bits), WithinAbs(0.4690, 1e-4));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double p = unit(rng);
        CHECK_THAT(binary_entropy(p, LogBase::bits),
                   WithinAbs(binary_entropy(1.0 - p, LogBase::bits), 1e-12));
        CHECK(binary_entropy(p, LogBase::bits) <= 1.0 + 1e-12);
    }
    CHECK_THROWS_AS(binary_entropy(-0.01, LogBase::bits), ocrent::ValidationError);
    CHECK_THROWS_AS(binary_entropy(1.01, LogBase::bits), ocrent::ValidationError);
}

TEST_CASE("fano_min_error worked examples") {
    CHECK(fano_min_error(0.0, 26, LogBase::bits) == 0.0);
    CHECK_THAT(fano_min_error(1.0, 2, LogBase::bits), WithinAbs(0.5, 1e-9));
    CHECK_THAT(fano_min_error(0.4690, 2, LogBase::bits), WithinAbs(0.1, 1e-4));
}

TEST_CASE("fano_min_error domain errors") {
    CHECK_THROWS_AS(fano_min_error(0.5, 1, LogBase::bits), ocrent::ValidationError);
    CHECK_THROWS_AS(fano_min_error(-0.5, 4, LogBase::bits), ocrent::ValidationError);
    // Infeasible: h above log2(4) = 2 bits.
    CHECK_THROWS_MATCHES(fano_min_error(2.5, 4, LogBase::bits), ocrent::ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("infeasible")));
    // Right at the boundary is fine and saturates at 1 - 1/k.
    CHECK_THAT(fano_min_error(2.0, 4, LogBase::bits), WithinAbs(0.75, 1e-9));
}

TEST_CASE("fano_min_error round trip and monotonicity") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> alphabet(2, 40);
    std::uniform_real_distribution<double> unit(1e-4, 1.0);
    for (int i = 0; i < 200; ++i) {
        const std::size_t k = alphabet(rng);
        const double p_max = 1.0 - 1.0 / static_cast<double>(k);
        const double p = unit(rng) * p_max;
        const double h = binary_entropy(p, LogBase::bits) +
                         p * std::log2(static_cast<double>(k - 1));
        const double solved = fano_min_error(h, k, LogBase::bits);
        const double forward = binary_entropy(solved, LogBase::bits) +
                               solved * std::log2(static_cast<double>(k - 1));
        CHECK_THAT(forward, WithinAbs(h, 1e-6));
        CHECK_THAT(solved, WithinAbs(p, 1e-6));
    }

    // Nondecreasing in h_cond on a grid.
    double previous = 0.0;
    for (int step = 0; step <= 20; ++step) {
        const double h = std::log2(26.0) * step / 20.0;
        const double p = fano_min_error(h, 26, LogBase::bits);
        CHECK(p + 1e-9 >= previous);
        previous = p;
    }

    // Works in nats as well.
    const double h_nats = binary_entropy(0.2, LogBase::nats) + 0.2 * std::log(25.0);
    CHECK_THAT(fano_min_error(h_nats, 26, LogBase::nats), WithinAbs(0.2, 1e-6));
}

TEST_CASE("log base helpers") {
    CHECK(log_base_from_string("bits") == LogBase::bits);
    CHECK(log_base_from_string("nats") == LogBase::nats);
    CHECK_THROWS_AS(log_base_from_string("trits"), ocrent::ValidationError);
    CHECK(std::string(to_string(LogBase::nats)) == "nats");
}
