#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "offnac/mdp.hpp"
#include "offnac/qtrace.hpp"
#include "offnac/rng.hpp"

namespace offnac {

/// Softmax natural-policy-gradient step:
/// pi'(a|s) proportional to pi(a|s) exp(beta q(s,a)).
/// The per-state max of beta*q is subtracted before exponentiation, which
/// leaves the result unchanged (shift invariance) and prevents overflow.
/// Zero-probability actions stay at zero, so the support never grows.
/// When the critic table is extreme enough that every direct weight
/// underflows to zero (possible when q spans ~700/beta, e.g. in the
/// repeated-samples divergence demo), the row is recomputed in log space,
/// which keeps the best supported action at weight one.
inline Policy actor_update(const Policy& pi, const QTable& q, double beta) {
    if (q.rows() != pi.num_states() || q.cols() != pi.num_actions())
        throw std::invalid_argument("actor_update: table shape mismatch");
    if (!q.allFinite()) throw std::invalid_argument("actor_update: non-finite critic table");
    const int S = pi.num_states(), A = pi.num_actions();
    Matrix next(S, A);
    for (int s = 0; s < S; ++s) {
        double shift = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) shift = std::max(shift, beta * q(s, a));
        double total = 0.0;
        for (int a = 0; a < A; ++a) {
            next(s, a) = pi.prob(s, a) * std::exp(beta * q(s, a) - shift);
            total += next(s, a);
        }
        if (total == 0.0) {
            double log_shift = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a)
                if (pi.prob(s, a) > 0.0)
                    log_shift = std::max(log_shift, std::log(pi.prob(s, a)) + beta * q(s, a));
            total = 0.0;
            for (int a = 0; a < A; ++a) {
                next(s, a) = pi.prob(s, a) > 0.0
                                 ? std::exp(std::log(pi.prob(s, a)) + beta * q(s, a) - log_shift)
                                 : 0.0;
                total += next(s, a);
            }
        }
        next.row(s) /= total;
    }
    return Policy(std::move(next));
}

/// Outer-loop hyperparameters. The critic consumes consecutive
/// (iterations + n)-pair segments of one behavior trajectory; warm_start
/// feeds each critic call the previous Q table instead of zeros.
struct NacParams {
    long outer_iterations;  // T
    QTraceParams critic;
    double beta;
    std::uint64_t seed = 0;
    bool warm_start = true;
    int start_state = 0;
    std::optional<Distribution> eval_mu;  // evaluation start distribution; uniform if unset
    bool reuse_first_segment = false;     // divergence demo: feed segment 0 to every critic call

    NacParams(long outer, QTraceParams critic_, double beta_)
        : outer_iterations(outer), critic(std::move(critic_)), beta(beta_) {
        if (outer_iterations < 1) throw std::invalid_argument("NacParams: T must be >= 1");
        if (!(beta > 0.0)) throw std::invalid_argument("NacParams: beta must be positive");
    }
};

/// Per-iteration diagnostics, all computed against exact linear-algebra
/// oracles: optimality gap V*(mu) - V^{pi_t}(mu), sup-norm critic errors
/// against Q^{pi_t} and against the truncated limit point, and the mean
/// policy entropy as a bulk summary of how deterministic pi_t has become.
struct IterationStats {
    long t = 0;
    double gap = 0.0;
    double critic_err = 0.0;
    double fixed_point_err = 0.0;
    double policy_entropy = 0.0;
};

struct RunRecord {
    std::vector<IterationStats> rows;
    /// Environment transitions consumed by the run.
    long samples_consumed = 0;

    double final_gap() const { return rows.empty() ? 0.0 : rows.back().gap; }
    double best_gap() const {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& r : rows) best = std::min(best, r.gap);
        return best;
    }
};

struct NacResult {
    std::vector<Policy> policies;  // pi_0 ... pi_{T-1}
    RunRecord record;
};

namespace detail {

inline double mean_policy_entropy(const Policy& pi) {
    double total = 0.0;
    for (int s = 0; s < pi.num_states(); ++s)
        for (int a = 0; a < pi.num_actions(); ++a) {
            const double p = pi.prob(s, a);
            if (p > 0.0) total -= p * std::log(p);
        }
    return total / pi.num_states();
}

} // namespace detail

/// Off-policy natural actor-critic on a single behavior trajectory.
/// Generates T(K+n) transitions up front, evaluates each pi_t with the
/// critic on its own segment, and improves by the softmax NPG step.
/// Returns the visited policies and exact-oracle diagnostics per
/// iteration. Deterministic per seed.
inline NacResult nac_run(const TabularMdp& mdp, const Policy& pi_b, const NacParams& params,
                         const Policy& pi0) {
    detail::require_shapes(mdp, pi_b);
    const Distribution mu =
        params.eval_mu ? *params.eval_mu : Distribution::uniform(mdp.num_states());
    const long T = params.outer_iterations;
    const long segment = params.critic.iterations + params.critic.n;
    const long total_pairs = params.reuse_first_segment ? segment : T * segment;

    SplitRng rng(params.seed);
    const Trajectory trajectory =
        sample_trajectory(mdp, pi_b, static_cast<std::size_t>(total_pairs), rng, params.start_state);

    const OptimalSolution optimal = optimal_value(mdp);
    const double v_star = mu.probs().dot(optimal.values);

    NacResult result;
    result.policies.reserve(static_cast<std::size_t>(T));
    result.record.rows.reserve(static_cast<std::size_t>(T));
    result.record.samples_consumed = total_pairs;

    QTable q_prev = QTable::Zero(mdp.num_states(), mdp.num_actions());
    Policy pi_t = pi0;
    for (long t = 0; t < T; ++t) {
        const long offset = params.reuse_first_segment ? 0 : t * segment;
        const Trajectory data(trajectory.begin() + offset, trajectory.begin() + offset + segment);
        const QTable q0 =
            params.warm_start ? q_prev : QTable::Zero(mdp.num_states(), mdp.num_actions());
        const QTable q_est = qtrace_run(mdp, data, pi_t, pi_b, params.critic, q0);
        if (!q_est.allFinite())
            throw std::runtime_error("nac_run: critic diverged to a non-finite table at iteration " +
                                     std::to_string(t));

        const QTable q_exact = q_function_exact(mdp, pi_t);
        const QTable q_limit = fixed_point(mdp, pi_t, pi_b, params.critic.truncation.rho_bar);
        IterationStats stats;
        stats.t = t;
        stats.gap = v_star - v_function(mdp, pi_t, mu, q_exact);
        stats.critic_err = (q_est - q_exact).cwiseAbs().maxCoeff();
        stats.fixed_point_err = (q_est - q_limit).cwiseAbs().maxCoeff();
        stats.policy_entropy = detail::mean_policy_entropy(pi_t);
        result.record.rows.push_back(stats);
        result.policies.push_back(pi_t);

        pi_t = actor_update(pi_t, q_est, params.beta);
        q_prev = q_est;
    }
    return result;
}

inline NacResult nac_run(const TabularMdp& mdp, const Policy& pi_b, const NacParams& params) {
    return nac_run(mdp, pi_b, params, Policy::uniform(mdp.num_states(), mdp.num_actions()));
}

/// Natural policy gradient with the exact Q-function in place of the
/// critic estimate: isolates the actor's own convergence error. The best
/// iterate satisfies min_{t<T} gap_t <= log(e|A|) / ((1-gamma)^2 beta T)
/// for every prefix T.
inline NacResult exact_npg_run(const TabularMdp& mdp, const Distribution& mu, double beta, long T,
                               const Policy& pi0) {
    if (T < 1) throw std::invalid_argument("exact_npg_run: T must be >= 1");
    const OptimalSolution optimal = optimal_value(mdp);
    const double v_star = mu.probs().dot(optimal.values);
    NacResult result;
    result.policies.reserve(static_cast<std::size_t>(T));
    result.record.rows.reserve(static_cast<std::size_t>(T));
    Policy pi_t = pi0;
    for (long t = 0; t < T; ++t) {
        const QTable q_exact = q_function_exact(mdp, pi_t);
        IterationStats stats;
        stats.t = t;
        stats.gap = v_star - v_function(mdp, pi_t, mu, q_exact);
        stats.policy_entropy = detail::mean_policy_entropy(pi_t);
        result.record.rows.push_back(stats);
        result.policies.push_back(pi_t);
        pi_t = actor_update(pi_t, q_exact, beta);
    }
    return result;
}

/// Index of a uniformly random iterate in {0,...,T-1}; the policy drawn
/// this way inherits the averaged optimality-gap guarantee.
inline long uniform_iterate_select(const RunRecord& record, SplitRng& rng) {
    if (record.rows.empty()) throw std::invalid_argument("uniform_iterate_select: empty record");
    return static_cast<long>(rng.bounded(record.rows.size()));
}

} // namespace offnac
