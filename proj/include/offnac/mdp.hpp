#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "offnac/rng.hpp"

namespace offnac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense action-value table, indexed [state][action]. Stored as an S x A matrix.
using QTable = Matrix;
/// Dense state-value table.
using VTable = Vector;

constexpr double kStochasticityTol = 1e-12;

/// One observed (state, action) pair of a sampled trajectory.
struct Step {
    int state;
    int action;
};

using Trajectory = std::vector<Step>;

/// Finite discounted MDP: per-action transition matrices P_a (rows are
/// source states), reward table R[s][a] with values in [0,1], and a
/// discount factor in (0,1). Validated on construction, immutable after.
class TabularMdp {
public:
    TabularMdp(std::vector<Matrix> transitions, Matrix rewards, double gamma)
        : transitions_(std::move(transitions)), rewards_(std::move(rewards)), gamma_(gamma) {
        if (transitions_.empty())
            throw std::invalid_argument("TabularMdp: at least one action required");
        const auto states = rewards_.rows();
        const auto actions = rewards_.cols();
        if (states < 1 || actions < 1)
            throw std::invalid_argument("TabularMdp: empty state or action set");
        if (static_cast<Eigen::Index>(transitions_.size()) != actions)
            throw std::invalid_argument("TabularMdp: one transition matrix per action required");
        for (const Matrix& p : transitions_) {
            if (p.rows() != states || p.cols() != states)
                throw std::invalid_argument("TabularMdp: transition matrix shape mismatch");
            if (!(p.array() >= 0.0).all())
                throw std::invalid_argument("TabularMdp: negative transition probability");
            for (Eigen::Index s = 0; s < states; ++s) {
                if (!(std::abs(p.row(s).sum() - 1.0) <= kStochasticityTol))
                    throw std::invalid_argument("TabularMdp: transition row " + std::to_string(s) +
                                                " does not sum to 1");
            }
        }
        if (!(rewards_.array() >= 0.0).all() || !(rewards_.array() <= 1.0).all())
            throw std::invalid_argument("TabularMdp: rewards must lie in [0,1]");
        if (!(gamma_ > 0.0 && gamma_ < 1.0))
            throw std::invalid_argument("TabularMdp: gamma must lie in (0,1)");
    }

    int num_states() const { return static_cast<int>(rewards_.rows()); }
    int num_actions() const { return static_cast<int>(rewards_.cols()); }
    double gamma() const { return gamma_; }
    const Matrix& transition(int action) const { return transitions_[static_cast<std::size_t>(action)]; }
    double reward(int s, int a) const { return rewards_(s, a); }
    const Matrix& rewards() const { return rewards_; }

    /// Number of (state, action) pairs; the dimension of flattened tables.
    int pair_count() const { return num_states() * num_actions(); }
    /// Flat index of (s, a); row-major over states.
    int pair_index(int s, int a) const { return s * num_actions() + a; }

private:
    std::vector<Matrix> transitions_;
    Matrix rewards_;
    double gamma_;
};

/// Stochastic policy pi[s][a]; rows sum to one. Behavior and target
/// policies share this type.
class Policy {
public:
    explicit Policy(Matrix probs) : probs_(std::move(probs)) {
        if (probs_.rows() < 1 || probs_.cols() < 1)
            throw std::invalid_argument("Policy: empty table");
        if (!(probs_.array() >= 0.0).all())
            throw std::invalid_argument("Policy: negative or non-finite probability");
        for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
            if (!(std::abs(probs_.row(s).sum() - 1.0) <= kStochasticityTol))
                throw std::invalid_argument("Policy: row " + std::to_string(s) + " does not sum to 1");
        }
    }

    static Policy uniform(int num_states, int num_actions) {
        return Policy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
    }

    /// Deterministic policy putting all mass on action[s].
    static Policy deterministic(const std::vector<int>& action, int num_actions) {
        Matrix p = Matrix::Zero(static_cast<Eigen::Index>(action.size()), num_actions);
        for (std::size_t s = 0; s < action.size(); ++s) p(static_cast<Eigen::Index>(s), action[s]) = 1.0;
        return Policy(p);
    }

    int num_states() const { return static_cast<int>(probs_.rows()); }
    int num_actions() const { return static_cast<int>(probs_.cols()); }
    double prob(int s, int a) const { return probs_(s, a); }
    const Matrix& probs() const { return probs_; }

    bool strictly_positive() const { return (probs_.array() > 0.0).all(); }

private:
    Matrix probs_;
};

/// Probability distribution over states.
class Distribution {
public:
    explicit Distribution(Vector probs) : probs_(std::move(probs)) {
        if (probs_.size() < 1) throw std::invalid_argument("Distribution: empty support");
        if (!(probs_.array() >= 0.0).all())
            throw std::invalid_argument("Distribution: negative or non-finite entry");
        if (!(std::abs(probs_.sum() - 1.0) <= kStochasticityTol))
            throw std::invalid_argument("Distribution: entries do not sum to 1");
    }

    static Distribution uniform(int n) { return Distribution(Vector::Constant(n, 1.0 / n)); }

    static Distribution point(int n, int state) {
        Vector v = Vector::Zero(n);
        v(state) = 1.0;
        return Distribution(v);
    }

    int size() const { return static_cast<int>(probs_.size()); }
    double operator()(int s) const { return probs_(s); }
    const Vector& probs() const { return probs_; }

private:
    Vector probs_;
};

namespace detail {

inline void require_shapes(const TabularMdp& mdp, const Policy& pi) {
    if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions())
        throw std::invalid_argument("policy shape does not match MDP");
}

} // namespace detail

/// Transition matrix of the (s,a) pair chain under policy `pi`:
/// entry ((s,a),(s',a')) = P_a(s,s') * pi(a'|s'). Row-stochastic of
/// dimension pair_count x pair_count.
inline Matrix policy_transition_matrix(const TabularMdp& mdp, const Policy& pi) {
    detail::require_shapes(mdp, pi);
    const int S = mdp.num_states(), A = mdp.num_actions(), N = mdp.pair_count();
    Matrix out = Matrix::Zero(N, N);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int row = mdp.pair_index(s, a);
            for (int s2 = 0; s2 < S; ++s2) {
                const double p = mdp.transition(a)(s, s2);
                if (p == 0.0) continue;
                for (int a2 = 0; a2 < A; ++a2) out(row, mdp.pair_index(s2, a2)) = p * pi.prob(s2, a2);
            }
        }
    return out;
}

/// State-chain transition matrix under `pi`: P(s,s') = sum_a pi(a|s) P_a(s,s').
inline Matrix state_transition_matrix(const TabularMdp& mdp, const Policy& pi) {
    detail::require_shapes(mdp, pi);
    const int S = mdp.num_states(), A = mdp.num_actions();
    Matrix out = Matrix::Zero(S, S);
    for (int a = 0; a < A; ++a)
        for (int s = 0; s < S; ++s) out.row(s) += pi.prob(s, a) * mdp.transition(a).row(s);
    return out;
}

inline Vector flatten(const TabularMdp& mdp, const QTable& q) {
    Vector v(mdp.pair_count());
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a) v(mdp.pair_index(s, a)) = q(s, a);
    return v;
}

inline QTable unflatten(const TabularMdp& mdp, const Vector& v) {
    QTable q(mdp.num_states(), mdp.num_actions());
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a) q(s, a) = v(mdp.pair_index(s, a));
    return q;
}

/// Exact Q-function of `pi`: the unique solution of Q = R + gamma P_pi Q,
/// by dense LU. The residual is re-checked after the solve.
inline QTable q_function_exact(const TabularMdp& mdp, const Policy& pi) {
    const int N = mdp.pair_count();
    const Matrix p = policy_transition_matrix(mdp, pi);
    const Vector r = flatten(mdp, mdp.rewards());
    const Matrix system = Matrix::Identity(N, N) - mdp.gamma() * p;
    const Vector q = system.partialPivLu().solve(r);
    const double residual = (q - r - mdp.gamma() * p * q).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
        throw std::runtime_error("q_function_exact: Bellman residual " + std::to_string(residual));
    return unflatten(mdp, q);
}

/// V^pi(mu) = sum_s mu(s) sum_a pi(a|s) Q^pi(s,a), given a precomputed Q.
inline double v_function(const TabularMdp& mdp, const Policy& pi, const Distribution& mu,
                         const QTable& q_exact) {
    detail::require_shapes(mdp, pi);
    if (mu.size() != mdp.num_states())
        throw std::invalid_argument("v_function: distribution size mismatch");
    double v = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a) v += mu(s) * pi.prob(s, a) * q_exact(s, a);
    return v;
}

inline double v_function(const TabularMdp& mdp, const Policy& pi, const Distribution& mu) {
    return v_function(mdp, pi, mu, q_function_exact(mdp, pi));
}

struct OptimalSolution {
    VTable values;
    Policy greedy; // deterministic, ties broken toward the lowest action index
};

/// Optimal state values and a greedy optimal policy, by value iteration.
/// Stops once successive sup-norm differences guarantee 1e-12 accuracy
/// (with a rounding floor so the loop terminates at gamma near 1); the
/// Bellman-optimality residual is verified afterwards.
inline OptimalSolution optimal_value(const TabularMdp& mdp) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    const double gamma = mdp.gamma();
    Vector v = Vector::Zero(S);
    std::vector<int> best(static_cast<std::size_t>(S), 0);
    const double eps = std::numeric_limits<double>::epsilon();
    constexpr long max_sweeps = 100'000'000L;
    for (long sweep = 0;; ++sweep) {
        Vector next(S);
        for (int s = 0; s < S; ++s) {
            double best_q = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < A; ++a) {
                const double q = mdp.reward(s, a) + gamma * mdp.transition(a).row(s).dot(v);
                if (q > best_q) {
                    best_q = q;
                    best_a = a;
                }
            }
            next(s) = best_q;
            best[static_cast<std::size_t>(s)] = best_a;
        }
        const double diff = (next - v).cwiseAbs().maxCoeff();
        v = next;
        const double stop = std::max(1e-12 * (1.0 - gamma) / gamma, 16.0 * eps * (1.0 + v.cwiseAbs().maxCoeff()));
        if (diff <= stop) break;
        if (sweep >= max_sweeps) throw std::runtime_error("optimal_value: value iteration did not converge");
    }
    double residual = 0.0;
    for (int s = 0; s < S; ++s) {
        double best_q = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a)
            best_q = std::max(best_q, mdp.reward(s, a) + gamma * mdp.transition(a).row(s).dot(v));
        residual = std::max(residual, std::abs(best_q - v(s)));
    }
    if (residual > 1e-10)
        throw std::runtime_error("optimal_value: optimality residual " + std::to_string(residual));
    return OptimalSolution{std::move(v), Policy::deterministic(best, A)};
}

/// Discounted state visitation distribution
/// d(s) = (1-gamma) sum_j gamma^j P(S_j = s | S_0 ~ mu) under `pi`,
/// via the linear system (I - gamma P_pi^T) d = (1-gamma) mu.
inline Distribution discounted_visitation(const TabularMdp& mdp, const Policy& pi,
                                          const Distribution& mu) {
    const int S = mdp.num_states();
    if (mu.size() != S) throw std::invalid_argument("discounted_visitation: distribution size mismatch");
    const Matrix p = state_transition_matrix(mdp, pi);
    const Matrix system = Matrix::Identity(S, S) - mdp.gamma() * p.transpose();
    Vector d = system.partialPivLu().solve((1.0 - mdp.gamma()) * mu.probs());
    if (std::abs(d.sum() - 1.0) > 1e-10)
        throw std::runtime_error("discounted_visitation: mass not preserved");
    d /= d.sum();
    return Distribution(std::move(d));
}

/// Simulate `length` (state, action) pairs under the behavior policy,
/// starting from `start_state`. The behavior policy must be strictly
/// positive everywhere. Bitwise reproducible for a fixed RNG state.
inline Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& pi_b, std::size_t length,
                                    SplitRng& rng, int start_state = 0) {
    detail::require_shapes(mdp, pi_b);
    if (!pi_b.strictly_positive())
        throw std::invalid_argument("sample_trajectory: behavior policy must be strictly positive");
    if (start_state < 0 || start_state >= mdp.num_states())
        throw std::invalid_argument("sample_trajectory: start state out of range");
    Trajectory traj;
    traj.reserve(length);
    const int A = mdp.num_actions(), S = mdp.num_states();
    // Eigen stores column-major; materialize each row before the CDF walk.
    std::vector<double> row_probs(static_cast<std::size_t>(A));
    std::vector<double> next_probs(static_cast<std::size_t>(S));
    int s = start_state;
    for (std::size_t k = 0; k < length; ++k) {
        for (int a = 0; a < A; ++a) row_probs[static_cast<std::size_t>(a)] = pi_b.prob(s, a);
        const int a = rng.categorical(row_probs);
        traj.push_back(Step{s, a});
        for (int s2 = 0; s2 < S; ++s2) next_probs[static_cast<std::size_t>(s2)] = mdp.transition(a)(s, s2);
        s = rng.categorical(next_probs);
    }
    return traj;
}

} // namespace offnac
