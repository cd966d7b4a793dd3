#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "offnac/bounds.hpp"
#include "offnac/chain.hpp"
#include "offnac/harness.hpp"

#include "test_support.hpp"

using namespace offnac;
using Catch::Approx;

namespace {

/// Bound inputs of the ring benchmark at the given critic stepsize, with
/// the mixing time recomputed at that stepsize.
BoundInputs ring_inputs(double alpha, double rho_bar = 3.0, double c_bar = 1.0, int n = 6) {
    const auto mdp = test_support::ring();
    const auto pi_b = test_support::ring_behavior();
    const auto minima = minima_report(mdp, pi_b, c_bar);
    BoundInputs in;
    in.gamma = mdp.gamma();
    in.gamma_c = 1.0 - minima.m_min * (1.0 - in.gamma) * geometric_sum(in.gamma * minima.c_min, n);
    in.alpha = alpha;
    in.tau_alpha = mixing_time(mdp, pi_b, alpha).tau;
    in.n = n;
    in.critic_iterations = 1000;
    in.actor_iterations = 100;
    in.beta = 0.1;
    in.rho_bar = rho_bar;
    in.c_bar = c_bar;
    in.num_states = 5;
    in.num_actions = 3;
    in.pi_b_min = minima.pi_b_min;
    in.m_min = minima.m_min;
    return in;
}

} // namespace

TEST_CASE("variance factor f") {
    SECTION("limit branch at gamma * c_bar = 1") {
        REQUIRE(f_factor(1.0 / 0.9, 0.9, 6) == Approx(6.0));
    }
    SECTION("geometric branch") {
        REQUIRE(f_factor(1.0, 0.9, 6) == Approx((1.0 - std::pow(0.9, 6)) / 0.1).margin(1e-12));
        REQUIRE(f_factor(1.0, 0.9, 6) == Approx(4.68559).margin(1e-5));
    }
    SECTION("single step is always 1") {
        for (const double c : {1.0, 2.0, 5.0})
            for (const double g : {0.5, 0.9, 0.99}) REQUIRE(f_factor(c, g, 1) == Approx(1.0));
    }
    SECTION("continuous across the singular point") {
        const int n = 6;
        const double at = f_factor(1.0 / 0.9, 0.9, n);
        const double below = f_factor((1.0 - 1e-9) / 0.9, 0.9, n);
        const double above = f_factor((1.0 + 1e-9) / 0.9, 0.9, n);
        REQUIRE(below == Approx(at).margin(1e-7));
        REQUIRE(above == Approx(at).margin(1e-7));
    }
}

TEST_CASE("stepsize condition") {
    SECTION("vanishing stepsizes pass") {
        const auto in = ring_inputs(1e-12, 1.0, 1.0, 1);
        REQUIRE(validate_stepsize(in).ok);
    }
    SECTION("the condition is eventually satisfied as alpha shrinks") {
        // alpha (tau_alpha + n + 1) = O(alpha log(1/alpha)) -> 0, so halving
        // alpha from any start must reach the threshold in finitely many steps.
        double alpha = 0.05;
        bool ok = false;
        for (int i = 0; i < 60 && !ok; ++i) {
            ok = validate_stepsize(ring_inputs(alpha)).ok;
            alpha /= 2.0;
        }
        REQUIRE(ok);
    }
    SECTION("doubling rho_bar strictly shrinks the threshold") {
        const auto in = ring_inputs(0.01);
        auto doubled = in;
        doubled.rho_bar *= 2.0;
        REQUIRE(validate_stepsize(doubled).threshold < validate_stepsize(in).threshold);
    }
    SECTION("the benchmark configuration violates the condition at alpha = 0.05") {
        // The reference experiments run far above the theoretical stepsize
        // ceiling and still converge; the validator reports, not enforces.
        const auto in = ring_inputs(0.05);
        const auto check = validate_stepsize(in);
        REQUIRE_FALSE(check.ok);
        REQUIRE(check.lhs > check.threshold);
    }
}

TEST_CASE("critic error bound terms") {
    const auto in = ring_inputs(0.001);
    const long burn_in = in.tau_alpha + in.n + 1;
    SECTION("bias at the mixing horizon is exactly c1/(1-gamma)^2") {
        const auto terms = critic_error_terms(in, burn_in);
        REQUIRE(terms.convergence_bias == Approx(27.0 / 0.01).margin(1e-9));
    }
    SECTION("bias decays monotonically to zero, variance is constant") {
        double prev = critic_error_terms(in, burn_in).convergence_bias;
        const double variance = critic_error_terms(in, burn_in).variance;
        for (long k = burn_in + 500; k <= burn_in + 5000; k += 500) {
            const auto terms = critic_error_terms(in, k);
            REQUIRE(terms.convergence_bias < prev);
            REQUIRE(terms.variance == Approx(variance));
            prev = terms.convergence_bias;
        }
        REQUIRE(critic_error_terms(in, burn_in + 8'000'000).convergence_bias < 1e-6);
    }
    SECTION("k below the mixing horizon is rejected") {
        REQUIRE_THROWS_AS(critic_error_terms(in, burn_in - 1), std::invalid_argument);
    }
    SECTION("halving alpha nearly halves the variance term") {
        // tau_alpha grows only logarithmically as alpha shrinks, so
        // alpha (tau_alpha + n + 1) shrinks by a factor in (0.5, ~0.65].
        const auto full = ring_inputs(0.02);
        const auto half = ring_inputs(0.01);
        const double t2_full = critic_error_terms(full, 10'000).variance;
        const double t2_half = critic_error_terms(half, 10'000).variance;
        REQUIRE(t2_half < t2_full);
        REQUIRE(t2_half >= 0.5 * t2_full - 1e-12);
        REQUIRE(t2_half <= 0.65 * t2_full);
    }
}

TEST_CASE("optimality gap bound terms") {
    SECTION("rho_bar = 1/pi_b_min eliminates the truncation bias") {
        auto in = ring_inputs(0.001);
        in.rho_bar = 1.0 / in.pi_b_min;
        REQUIRE(optimality_gap_terms(in).truncation_bias == 0.0);
    }
    SECTION("truncation bias matches its closed form exactly") {
        auto in = ring_inputs(0.001);
        in.rho_bar = 1.5;
        const double expected =
            4.0 * std::max(0.0, 1.0 - in.rho_bar * in.pi_b_min) / std::pow(1.0 - in.gamma, 4);
        REQUIRE(optimality_gap_terms(in).truncation_bias == expected);
    }
    SECTION("doubling T halves the actor term exactly") {
        auto in = ring_inputs(0.001);
        const double e4 = optimality_gap_terms(in).actor_error;
        in.actor_iterations *= 2;
        REQUIRE(optimality_gap_terms(in).actor_error == Approx(e4 / 2.0).margin(1e-15));
    }
    SECTION("K below the mixing horizon is rejected") {
        auto in = ring_inputs(0.001);
        in.critic_iterations = in.tau_alpha + in.n;
        REQUIRE_THROWS_AS(optimality_gap_terms(in), std::invalid_argument);
    }
    SECTION("all four terms are nonnegative") {
        const auto terms = optimality_gap_terms(ring_inputs(0.001));
        REQUIRE(terms.critic_bias >= 0.0);
        REQUIRE(terms.critic_variance >= 0.0);
        REQUIRE(terms.truncation_bias >= 0.0);
        REQUIRE(terms.actor_error >= 0.0);
    }
    SECTION("observed best-iterate gap stays below the full bound") {
        // loose by orders of magnitude on the benchmark, but the
        // inequality itself must hold
        const auto mdp = test_support::ring();
        const auto pi_b = test_support::ring_behavior();
        NacParams params = builtin_nac_params();
        params.seed = SplitRng::stream_seed(7008, 0);
        const auto result = nac_run(mdp, pi_b, params);
        const BoundInputs in = gather_bound_inputs(mdp, pi_b, params.critic,
                                                   params.outer_iterations, params.beta);
        REQUIRE(result.record.best_gap() <= optimality_gap_terms(in).total());
    }
}

TEST_CASE("sample complexity estimate") {
    const auto in = ring_inputs(0.001);
    SECTION("halving epsilon costs roughly 8x more samples") {
        const double full = sample_complexity_estimate(0.1, in).total_samples;
        const double half = sample_complexity_estimate(0.05, in).total_samples;
        REQUIRE(half / full >= 7.0);
        REQUIRE(half / full <= 12.0);
    }
    SECTION("discount factors closer to one are more expensive") {
        auto closer = in;
        closer.gamma = 0.99;
        const auto minima = minima_report(test_support::ring(), test_support::ring_behavior(), 1.0);
        closer.gamma_c =
            1.0 - minima.m_min * (1.0 - closer.gamma) * geometric_sum(closer.gamma * minima.c_min, 6);
        REQUIRE(sample_complexity_estimate(0.1, closer).total_samples >
                sample_complexity_estimate(0.1, in).total_samples);
    }
    SECTION("deterministic") {
        const auto a = sample_complexity_estimate(0.1, in);
        const auto b = sample_complexity_estimate(0.1, in);
        REQUIRE(a.total_samples == b.total_samples);
        REQUIRE(a.actor_iterations == b.actor_iterations);
        REQUIRE(a.critic_iterations == b.critic_iterations);
    }
    SECTION("rejects nonpositive accuracy") {
        REQUIRE_THROWS_AS(sample_complexity_estimate(0.0, in), std::invalid_argument);
    }
}
