#include <catch2/catch_amalgamated.hpp>

#include "offnac/chain.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

using namespace offnac;
using Catch::Approx;

TEST_CASE("total variation distance") {
    SECTION("identical distributions") {
        const Vector p = (Vector(3) << 0.2, 0.3, 0.5).finished();
        REQUIRE(tv_distance(p, p) == 0.0);
    }
    SECTION("disjoint point masses") {
        const Vector p = (Vector(2) << 1.0, 0.0).finished();
        const Vector q = (Vector(2) << 0.0, 1.0).finished();
        REQUIRE(tv_distance(p, q) == Approx(1.0));
    }
    SECTION("hand value") {
        const Vector p = (Vector(2) << 0.7, 0.3).finished();
        const Vector q = (Vector(2) << 0.5, 0.5).finished();
        REQUIRE(tv_distance(p, q) == Approx(0.2));
    }
    SECTION("length mismatch") {
        REQUIRE_THROWS_AS(tv_distance(Vector::Ones(2), Vector::Ones(3)), std::invalid_argument);
    }
    SECTION("metric properties on random triples") {
        SplitRng rng(17);
        for (int trial = 0; trial < 50; ++trial) {
            auto draw = [&] {
                Vector v(4);
                for (int i = 0; i < 4; ++i) v(i) = 0.01 + rng.uniform01();
                v /= v.sum();
                return v;
            };
            const Vector p = draw(), q = draw(), r = draw();
            REQUIRE(tv_distance(p, q) == Approx(tv_distance(q, p)).margin(1e-12));
            REQUIRE(tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12);
            REQUIRE(tv_distance(p, q) >= 0.0);
            REQUIRE(tv_distance(p, q) <= 1.0);
        }
    }
}

TEST_CASE("stationary distribution") {
    SECTION("doubly stochastic ring chain is uniform") {
        const auto mu = stationary_distribution(test_support::ring(), Policy::uniform(5, 3));
        for (int s = 0; s < 5; ++s) REQUIRE(mu(s) == Approx(0.2).margin(1e-12));
        // direct verification mu^T P = mu^T
        const Matrix p = state_transition_matrix(test_support::ring(), Policy::uniform(5, 3));
        REQUIRE((p.transpose() * mu.probs() - mu.probs()).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SECTION("single state") {
        const TabularMdp mdp({Matrix::Ones(1, 1)}, Matrix::Constant(1, 1, 0.3), 0.9);
        const auto mu = stationary_distribution(mdp, Policy::uniform(1, 1));
        REQUIRE(mu(0) == Approx(1.0));
    }
    SECTION("two-state chain closed form") {
        Matrix p(2, 2);
        p << 0.9, 0.1, 0.2, 0.8;
        const TabularMdp mdp({p}, Matrix::Constant(2, 1, 0.5), 0.9);
        const auto mu = stationary_distribution(mdp, Policy::uniform(2, 1));
        REQUIRE(mu(0) == Approx(2.0 / 3.0).margin(1e-12));
        REQUIRE(mu(1) == Approx(1.0 / 3.0).margin(1e-12));
    }
    SECTION("fixed point under reapplication, random chains") {
        SplitRng rng(31);
        for (int trial = 0; trial < 10; ++trial) {
            const auto mdp = test_support::random_mdp(rng, 5, 2, 0.9);
            const auto pi_b = test_support::random_policy(rng, 5, 2);
            const auto mu = stationary_distribution(mdp, pi_b);
            const Matrix p = state_transition_matrix(mdp, pi_b);
            REQUIRE((p.transpose() * mu.probs() - mu.probs()).cwiseAbs().maxCoeff() <= 1e-10);
            // agrees with the powering oracle
            const Vector powered = oracles::stationary_by_powering(p);
            REQUIRE((powered - mu.probs()).cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
    SECTION("reducible chain is rejected") {
        const TabularMdp mdp({Matrix::Identity(2, 2)}, Matrix::Constant(2, 1, 0.5), 0.9);
        REQUIRE_THROWS_AS(stationary_distribution(mdp, Policy::uniform(2, 1)), AssumptionViolation);
    }
    SECTION("periodic chain is rejected") {
        Matrix swap(2, 2);
        swap << 0.0, 1.0, 1.0, 0.0;
        const TabularMdp mdp({swap}, Matrix::Constant(2, 1, 0.5), 0.9);
        REQUIRE_THROWS_AS(stationary_distribution(mdp, Policy::uniform(2, 1)), AssumptionViolation);
    }
}

TEST_CASE("mixing time") {
    SECTION("one-step chain mixes at tau = 1") {
        // every row equals the stationary distribution
        Matrix p(3, 3);
        p << 0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2;
        const TabularMdp mdp({p}, Matrix::Constant(3, 1, 0.5), 0.9);
        const auto report = mixing_time(mdp, Policy::uniform(3, 1), 0.05);
        REQUIRE(report.tau == 1);
        REQUIRE(report.max_tv_by_step.back() <= 0.05);
    }
    SECTION("single-state chain mixes at tau = 0") {
        const TabularMdp mdp({Matrix::Ones(1, 1)}, Matrix::Constant(1, 1, 0.3), 0.9);
        REQUIRE(mixing_time(mdp, Policy::uniform(1, 1), 0.05).tau == 0);
    }
    SECTION("ring chain: tau is minimal") {
        const auto mdp = test_support::ring();
        const Policy pi_b = Policy::uniform(5, 3);
        const auto report = mixing_time(mdp, pi_b, 0.05);
        REQUIRE(report.max_tv_by_step[static_cast<std::size_t>(report.tau)] <= 0.05);
        REQUIRE(report.tau >= 1);
        // cross-check against the direct powering oracle at tau-1 and tau
        const Matrix p = state_transition_matrix(mdp, pi_b);
        const Vector mu = oracles::stationary_by_powering(p);
        Matrix pk = Matrix::Identity(5, 5);
        for (int k = 0; k < report.tau - 1; ++k) pk = pk * p;
        auto worst_tv = [&](const Matrix& m) {
            double worst = 0.0;
            for (int s = 0; s < 5; ++s)
                worst = std::max(worst, tv_distance(Vector(m.row(s).transpose()), mu));
            return worst;
        };
        REQUIRE(worst_tv(pk) > 0.05);  // one step before tau it has not mixed
        pk = pk * p;
        REQUIRE(worst_tv(pk) <= 0.05 + 1e-12);
    }
    SECTION("tau is monotone nonincreasing in alpha") {
        const auto mdp = test_support::ring();
        const Policy pi_b = Policy::uniform(5, 3);
        int prev = mixing_time(mdp, pi_b, 0.01).tau;
        for (const double alpha : {0.05, 0.1, 0.2, 0.4}) {
            const int tau = mixing_time(mdp, pi_b, alpha).tau;
            REQUIRE(tau <= prev);
            prev = tau;
        }
    }
    SECTION("non-mixing chain fails with the cap") {
        Matrix swap(2, 2);
        swap << 0.0, 1.0, 1.0, 0.0;
        const TabularMdp mdp({swap}, Matrix::Constant(2, 1, 0.5), 0.9);
        REQUIRE_THROWS_AS(mixing_time(mdp, Policy::uniform(2, 1), 0.05), AssumptionViolation);
    }
}

TEST_CASE("visitation minima") {
    SECTION("uniform chain hand values") {
        const auto r = minima_report(test_support::ring(), Policy::uniform(5, 3), 1.0);
        REQUIRE(r.m_min == Approx(1.0 / 15.0).margin(1e-12));
        REQUIRE(r.c_min == Approx(1.0 / 3.0).margin(1e-12));
        REQUIRE(r.pi_b_min == Approx(1.0 / 3.0).margin(1e-12));
    }
    SECTION("c_bar scales c_min") {
        const auto r = minima_report(test_support::ring(), Policy::uniform(5, 3), 2.0);
        REQUIRE(r.c_min == Approx(2.0 / 3.0).margin(1e-12));
    }
    SECTION("m_min matches the brute-force scan") {
        SplitRng rng(37);
        const auto mdp = test_support::random_mdp(rng, 4, 3, 0.9);
        const auto pi_b = test_support::random_policy(rng, 4, 3);
        const auto r = minima_report(mdp, pi_b, 1.5);
        const auto mu = stationary_distribution(mdp, pi_b);
        double brute = 1.0;
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) brute = std::min(brute, mu(s) * pi_b.prob(s, a));
        REQUIRE(r.m_min == Approx(brute).margin(1e-15));
        REQUIRE(r.m_min > 0.0);
        REQUIRE(r.m_min < 1.0);
    }
}
