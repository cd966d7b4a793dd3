#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace offnac {

/// sum_{i=0}^{n-1} x^i, with the removable singularity at x = 1 handled
/// explicitly (|x - 1| < 1e-12 takes the limit value n).
inline double geometric_sum(double x, int n) {
    if (n < 0) throw std::invalid_argument("geometric_sum: negative length");
    if (std::abs(x - 1.0) < 1e-12) return static_cast<double>(n);
    return (1.0 - std::pow(x, n)) / (1.0 - x);
}

/// Variance amplification factor of the n-step truncated-IS return:
/// f = (1 - (gamma c_bar)^n) / (1 - gamma c_bar), = n at gamma c_bar = 1.
inline double f_factor(double c_bar, double gamma, int n) {
    if (c_bar < 1.0) throw std::invalid_argument("f_factor: c_bar must be >= 1");
    if (n < 1) throw std::invalid_argument("f_factor: n must be >= 1");
    return geometric_sum(gamma * c_bar, n);
}

/// Everything the closed-form finite-sample bounds consume. Assemble by
/// hand or via gather_bound_inputs() in harness.hpp.
struct BoundInputs {
    double gamma = 0.0;
    double gamma_c = 0.0;  // contraction factor of the expected critic operator
    double alpha = 0.0;    // critic stepsize
    int tau_alpha = 0;     // mixing time at accuracy alpha
    int n = 1;             // multi-step horizon
    long critic_iterations = 0;  // K
    long actor_iterations = 0;   // T
    double beta = 0.0;           // actor stepsize
    double rho_bar = 1.0;
    double c_bar = 1.0;
    int num_states = 1;
    int num_actions = 1;
    double pi_b_min = 0.0;
    double m_min = 0.0;
};

struct StepsizeCheck {
    bool ok = false;
    double threshold = 0.0;  // the binding bound on alpha * (tau_alpha + n + 1)
    double lhs = 0.0;        // alpha * (tau_alpha + n + 1)
};

/// Critic stepsize condition:
/// alpha (tau_alpha + n + 1) <= min( 1 / (12 (rho+1) f),
///   (1-gamma_c)^2 / (8208 (rho+1)^2 f^2 log(|S||A|)) ).
inline StepsizeCheck validate_stepsize(const BoundInputs& in) {
    const double f = f_factor(in.c_bar, in.gamma, in.n);
    const double horizon = static_cast<double>(in.tau_alpha + in.n + 1);
    const double first = 1.0 / (12.0 * (in.rho_bar + 1.0) * f);
    const double log_sa = std::log(static_cast<double>(in.num_states) * in.num_actions);
    const double second =
        log_sa > 0.0
            ? (1.0 - in.gamma_c) * (1.0 - in.gamma_c) /
                  (8208.0 * (in.rho_bar + 1.0) * (in.rho_bar + 1.0) * f * f * log_sa)
            : std::numeric_limits<double>::infinity();
    StepsizeCheck out;
    out.threshold = std::min(first, second);
    out.lhs = in.alpha * horizon;
    out.ok = out.lhs <= out.threshold;
    return out;
}

struct CriticErrorTerms {
    double convergence_bias = 0.0;  // T1, decays geometrically in k
    double variance = 0.0;          // T2, constant in k
    double total() const { return convergence_bias + variance; }
};

/// Mean-square critic error bound at step k >= tau_alpha + n + 1:
///   T1 = c1/(1-gamma)^2 (1 - (1-gamma_c)/2 alpha)^(k - (tau+n+1)),
///   T2 = c2 log(|S||A|)/((1-gamma_c)^2 (1-gamma)^2) (rho+1)^2 f^2 alpha (tau+n+1),
/// with c1 = 27, c2 = 32832 e.
inline CriticErrorTerms critic_error_terms(const BoundInputs& in, long k) {
    const long burn_in = in.tau_alpha + in.n + 1;
    if (k < burn_in)
        throw std::invalid_argument("critic_error_terms: k below mixing horizon tau_alpha + n + 1");
    constexpr double c1 = 27.0;
    const double c2 = 32832.0 * std::exp(1.0);
    const double f = f_factor(in.c_bar, in.gamma, in.n);
    const double one_minus_gamma = 1.0 - in.gamma;
    const double log_sa = std::log(static_cast<double>(in.num_states) * in.num_actions);
    const double decay = 1.0 - 0.5 * (1.0 - in.gamma_c) * in.alpha;
    CriticErrorTerms out;
    out.convergence_bias = c1 / (one_minus_gamma * one_minus_gamma) *
                           std::pow(decay, static_cast<double>(k - burn_in));
    out.variance = c2 * log_sa / ((1.0 - in.gamma_c) * (1.0 - in.gamma_c)) /
                   (one_minus_gamma * one_minus_gamma) * (in.rho_bar + 1.0) * (in.rho_bar + 1.0) * f *
                   f * in.alpha * static_cast<double>(burn_in);
    return out;
}

struct OptimalityGapTerms {
    double critic_bias = 0.0;      // E1
    double critic_variance = 0.0;  // E2
    double truncation_bias = 0.0;  // E3, zero iff rho_bar * pi_b_min >= 1
    double actor_error = 0.0;      // E4, proportional to 1/T
    double total() const { return critic_bias + critic_variance + truncation_bias + actor_error; }
};

/// Optimality-gap bound for the actor-critic loop (best iterate over T):
///   E1 = 24/(1-gamma)^3 (1 - (1-gamma_c)/2 alpha)^((K - (tau+n+1))/2)
///   E2 = 1200 log^(1/2)(|S||A|)/((1-gamma)^3 (1-gamma_c)) (rho+1) f sqrt(alpha (tau+n+1))
///   E3 = 4 max(0, 1 - rho_bar pi_b_min)/(1-gamma)^4
///   E4 = log(e|A|)/((1-gamma)^2 beta T)
inline OptimalityGapTerms optimality_gap_terms(const BoundInputs& in) {
    const long burn_in = in.tau_alpha + in.n + 1;
    if (in.critic_iterations < burn_in)
        throw std::invalid_argument("optimality_gap_terms: K below mixing horizon tau_alpha + n + 1");
    if (in.actor_iterations < 1)
        throw std::invalid_argument("optimality_gap_terms: T must be >= 1");
    const double f = f_factor(in.c_bar, in.gamma, in.n);
    const double omg = 1.0 - in.gamma;
    const double log_sa = std::log(static_cast<double>(in.num_states) * in.num_actions);
    const double decay = 1.0 - 0.5 * (1.0 - in.gamma_c) * in.alpha;
    OptimalityGapTerms out;
    out.critic_bias = 24.0 / (omg * omg * omg) *
                      std::pow(decay, 0.5 * static_cast<double>(in.critic_iterations - burn_in));
    out.critic_variance = 1200.0 * std::sqrt(log_sa) / (omg * omg * omg * (1.0 - in.gamma_c)) *
                          (in.rho_bar + 1.0) * f *
                          std::sqrt(in.alpha * static_cast<double>(burn_in));
    out.truncation_bias = 4.0 * std::max(0.0, 1.0 - in.rho_bar * in.pi_b_min) / (omg * omg * omg * omg);
    out.actor_error = std::log(std::exp(1.0) * in.num_actions) /
                      (omg * omg * in.beta * static_cast<double>(in.actor_iterations));
    return out;
}

struct SampleComplexityEstimate {
    double actor_iterations = 0.0;   // T required for the actor term
    double critic_iterations = 0.0;  // K required per actor step
    double alpha = 0.0;              // stepsize implied by the variance term
    double total_samples = 0.0;      // T * K
};

/// Order-of-magnitude sample count for an epsilon-optimal policy in the
/// untruncated regime (rho_bar >= 1/pi_b_min): T from E4 <= eps, alpha
/// from E2 <= eps, K from E1 <= eps via -log(1-x) >= x. tau_alpha is held
/// at the supplied value rather than re-solved for the implied alpha, so
/// treat the output as an estimate up to logarithmic factors.
inline SampleComplexityEstimate sample_complexity_estimate(double epsilon, const BoundInputs& in) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("sample_complexity_estimate: epsilon must be > 0");
    const double f = f_factor(in.c_bar, in.gamma, in.n);
    const double omg = 1.0 - in.gamma;
    const double log_sa = std::log(static_cast<double>(in.num_states) * in.num_actions);
    const double horizon = static_cast<double>(in.tau_alpha + in.n + 1);
    SampleComplexityEstimate out;
    out.actor_iterations = std::ceil(std::log(std::exp(1.0) * in.num_actions) / (omg * omg * in.beta * epsilon));
    const double variance_budget =
        epsilon * omg * omg * omg * (1.0 - in.gamma_c) / (1200.0 * std::sqrt(std::max(log_sa, 1e-12)) * (in.rho_bar + 1.0) * f);
    out.alpha = variance_budget * variance_budget / horizon;
    out.critic_iterations =
        std::ceil(horizon + 4.0 * std::log(24.0 / (epsilon * omg * omg * omg)) /
                                ((1.0 - in.gamma_c) * out.alpha));
    out.total_samples = out.actor_iterations * out.critic_iterations;
    return out;
}

} // namespace offnac
