#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>

#include "offnac/bounds.hpp"
#include "offnac/chain.hpp"
#include "offnac/mdp.hpp"

namespace offnac {

/// Caps on the importance-sampling ratio pi/pi_b. rho_bar bounds the
/// ratio applied to the bootstrap term and determines the limit point;
/// c_bar bounds the ratios in the n-step product and only affects
/// variance. Must satisfy rho_bar >= c_bar >= 1.
struct TruncationLevels {
    double rho_bar;
    double c_bar;

    TruncationLevels(double rho, double c) : rho_bar(rho), c_bar(c) {
        if (!(rho_bar >= c_bar && c_bar >= 1.0))
            throw std::invalid_argument("TruncationLevels: require rho_bar >= c_bar >= 1");
    }
};

/// Truncated IS ratio tables rho(s,a) = min(rho_bar, pi/pi_b) and
/// c(s,a) = min(c_bar, pi/pi_b).
struct RatioTables {
    Matrix rho;
    Matrix c;
};

inline RatioTables truncated_ratios(const Policy& pi, const Policy& pi_b,
                                    const TruncationLevels& levels) {
    if (pi.num_states() != pi_b.num_states() || pi.num_actions() != pi_b.num_actions())
        throw std::invalid_argument("truncated_ratios: policy shape mismatch");
    if (!pi_b.strictly_positive())
        throw std::invalid_argument("truncated_ratios: behavior policy must be strictly positive");
    const int S = pi.num_states(), A = pi.num_actions();
    RatioTables out{Matrix(S, A), Matrix(S, A)};
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double ratio = pi.prob(s, a) / pi_b.prob(s, a);
            out.rho(s, a) = std::min(levels.rho_bar, ratio);
            out.c(s, a) = std::min(levels.c_bar, ratio);
        }
    return out;
}

/// Critic hyperparameters: multi-step horizon n, iteration count, and the
/// constant stepsize applied asynchronously to the visited pair only.
/// The finite-sample stepsize condition is available through validate_stepsize
/// but deliberately not enforced here.
struct QTraceParams {
    int n;
    long iterations;  // K
    double alpha;
    TruncationLevels truncation;

    QTraceParams(int n_, long iterations_, double alpha_, TruncationLevels truncation_)
        : n(n_), iterations(iterations_), alpha(alpha_), truncation(truncation_) {
        if (n < 1) throw std::invalid_argument("QTraceParams: n must be >= 1");
        if (iterations < 0) throw std::invalid_argument("QTraceParams: negative iteration count");
        if (!(alpha > 0.0)) throw std::invalid_argument("QTraceParams: alpha must be positive");
    }
};

/// Multi-step off-policy TD with dual ratio truncation. Performs exactly
/// `params.iterations` updates; update k adjusts only the entry at the
/// visited pair (S_k, A_k) by the discounted sum of truncated TD errors
/// over the window [k, k+n], with the c-ratio product starting at j = k+1.
/// Requires iterations + n trajectory pairs. Deterministic given inputs.
inline QTable qtrace_run(const TabularMdp& mdp, const Trajectory& trajectory, const Policy& pi,
                         const Policy& pi_b, const QTraceParams& params, const QTable& q0) {
    const long K = params.iterations;
    if (K == 0) return q0;
    if (static_cast<long>(trajectory.size()) < K + params.n)
        throw std::invalid_argument("qtrace_run: trajectory shorter than iterations + n");
    if (q0.rows() != mdp.num_states() || q0.cols() != mdp.num_actions())
        throw std::invalid_argument("qtrace_run: q0 shape mismatch");
    const RatioTables ratios = truncated_ratios(pi, pi_b, params.truncation);
    const double gamma = mdp.gamma();
    QTable q = q0;
    for (long k = 0; k < K; ++k) {
        double acc = 0.0;
        double discount = 1.0;
        double c_product = 1.0;
        for (int i = 0; i < params.n; ++i) {
            const Step cur = trajectory[static_cast<std::size_t>(k + i)];
            const Step next = trajectory[static_cast<std::size_t>(k + i + 1)];
            if (i >= 1) c_product *= ratios.c(cur.state, cur.action);
            const double td_error = mdp.reward(cur.state, cur.action) +
                                    gamma * (ratios.rho(next.state, next.action) *
                                             q(next.state, next.action)) -
                                    q(cur.state, cur.action);
            acc += (discount * c_product) * td_error;
            discount *= gamma;
        }
        const Step anchor = trajectory[static_cast<std::size_t>(k)];
        q(anchor.state, anchor.action) += params.alpha * acc;
    }
    return q;
}

/// Per-sample operator on one sliding window x = ((s_0,a_0),...,(s_n,a_n)):
/// identical to q away from (s_0, a_0), and at (s_0, a_0) adds the n-step
/// truncated TD-error sum evaluated on the window. One qtrace_run update
/// equals q + alpha (noisy_operator(q, x) - q).
inline QTable noisy_operator(const TabularMdp& mdp, const QTable& q, const Policy& pi,
                             const Policy& pi_b, const TruncationLevels& levels, int n,
                             std::span<const Step> window) {
    if (static_cast<int>(window.size()) != n + 1)
        throw std::invalid_argument("noisy_operator: window must hold n + 1 pairs");
    const RatioTables ratios = truncated_ratios(pi, pi_b, levels);
    const double gamma = mdp.gamma();
    QTable out = q;
    double acc = 0.0;
    double discount = 1.0;
    double c_product = 1.0;
    for (int i = 0; i < n; ++i) {
        const Step cur = window[static_cast<std::size_t>(i)];
        const Step next = window[static_cast<std::size_t>(i + 1)];
        if (i >= 1) c_product *= ratios.c(cur.state, cur.action);
        const double td_error =
            mdp.reward(cur.state, cur.action) +
            gamma * (ratios.rho(next.state, next.action) * q(next.state, next.action)) -
            q(cur.state, cur.action);
        acc += (discount * c_product) * td_error;
        discount *= gamma;
    }
    out(window[0].state, window[0].action) += acc;
    return out;
}

namespace detail {

/// The policy proportional to min(level * pi_b, pi) together with its
/// per-state normalizing mass (the diagonal of the C/D matrices).
struct TruncatedPolicy {
    Policy policy;
    Vector mass;  // mass(s) = sum_a min(level * pi_b(a|s), pi(a|s))
};

inline TruncatedPolicy truncated_policy(const Policy& pi, const Policy& pi_b, double level) {
    const int S = pi.num_states(), A = pi.num_actions();
    Matrix clipped(S, A);
    Vector mass(S);
    for (int s = 0; s < S; ++s) {
        double total = 0.0;
        for (int a = 0; a < A; ++a) {
            clipped(s, a) = std::min(level * pi_b.prob(s, a), pi.prob(s, a));
            total += clipped(s, a);
        }
        mass(s) = total;
        clipped.row(s) /= total;
    }
    return TruncatedPolicy{Policy(std::move(clipped)), std::move(mass)};
}

/// Diagonal of a per-state mass vector lifted to the pair space.
inline Matrix pair_diagonal_from_state_mass(const TabularMdp& mdp, const Vector& mass) {
    Vector d(mdp.pair_count());
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a) d(mdp.pair_index(s, a)) = mass(s);
    return d.asDiagonal();
}

} // namespace detail

/// Expected critic operator in closed form: T_e(Q) = A Q + b on the
/// flattened pair space, together with the policy-independent contraction
/// factor gamma_c = 1 - m_min (1-gamma) sum_{i<n} (gamma c_min)^i and the
/// realized infinity norm of A (always <= gamma_c).
struct ExpectedOperator {
    Matrix a;
    Vector b;
    double gamma_c_formula = 0.0;
    double a_inf_norm = 0.0;
};

inline ExpectedOperator expected_operator(const TabularMdp& mdp, const Policy& pi,
                                          const Policy& pi_b, const TruncationLevels& levels, int n) {
    if (n < 1) throw std::invalid_argument("expected_operator: n must be >= 1");
    detail::require_shapes(mdp, pi);
    detail::require_shapes(mdp, pi_b);
    if (!pi_b.strictly_positive())
        throw std::invalid_argument("expected_operator: behavior policy must be strictly positive");
    const Distribution mu_b = stationary_distribution(mdp, pi_b);
    const int N = mdp.pair_count();
    const double gamma = mdp.gamma();

    const auto c_part = detail::truncated_policy(pi, pi_b, levels.c_bar);
    const auto rho_part = detail::truncated_policy(pi, pi_b, levels.rho_bar);
    const Matrix p_c = policy_transition_matrix(mdp, c_part.policy);
    const Matrix p_rho = policy_transition_matrix(mdp, rho_part.policy);
    const Matrix c_diag = detail::pair_diagonal_from_state_mass(mdp, c_part.mass);
    const Matrix rho_diag = detail::pair_diagonal_from_state_mass(mdp, rho_part.mass);

    Vector visitation(N);
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a)
            visitation(mdp.pair_index(s, a)) = mu_b(s) * pi_b.prob(s, a);

    const Matrix bellman_residual_map = Matrix::Identity(N, N) - gamma * p_rho * rho_diag;
    const Vector r = flatten(mdp, mdp.rewards());

    // A = I - sum_{i=0}^{n-1} M (gamma P_c C)^i (I - gamma P_rho D),
    // b = sum_{i=0}^{n-1} M (gamma P_c C)^i R.
    Matrix weight = Matrix(visitation.asDiagonal());
    Matrix a_sum = Matrix::Zero(N, N);
    Vector b = Vector::Zero(N);
    const Matrix step = gamma * p_c * c_diag;
    for (int i = 0; i < n; ++i) {
        a_sum += weight * bellman_residual_map;
        b += weight * r;
        if (i + 1 < n) weight = weight * step;
    }

    ExpectedOperator out;
    out.a = Matrix::Identity(N, N) - a_sum;
    out.b = std::move(b);
    const MinimaReport minima = minima_report(mdp, pi_b, levels.c_bar);
    out.gamma_c_formula =
        1.0 - minima.m_min * (1.0 - gamma) * geometric_sum(gamma * minima.c_min, n);
    out.a_inf_norm = out.a.cwiseAbs().rowwise().sum().maxCoeff();
    if ((out.a.array() < -1e-12).any())
        throw std::runtime_error("expected_operator: A acquired a negative entry");
    if (out.a_inf_norm > out.gamma_c_formula + 1e-10)
        throw std::runtime_error("expected_operator: ||A||_inf exceeds the contraction factor");
    return out;
}

/// Limit point of the critic: the unique solution of the modified Bellman
/// equation Q = R + gamma P_rho D Q. Depends on rho_bar but not c_bar.
inline QTable fixed_point(const TabularMdp& mdp, const Policy& pi, const Policy& pi_b,
                          double rho_bar) {
    detail::require_shapes(mdp, pi);
    detail::require_shapes(mdp, pi_b);
    if (!pi_b.strictly_positive())
        throw std::invalid_argument("fixed_point: behavior policy must be strictly positive");
    if (rho_bar < 1.0) throw std::invalid_argument("fixed_point: rho_bar must be >= 1");
    const int N = mdp.pair_count();
    const double gamma = mdp.gamma();
    const auto rho_part = detail::truncated_policy(pi, pi_b, rho_bar);
    const Matrix p_rho = policy_transition_matrix(mdp, rho_part.policy);
    const Matrix rho_diag = detail::pair_diagonal_from_state_mass(mdp, rho_part.mass);
    const Matrix map = gamma * p_rho * rho_diag;
    const Vector r = flatten(mdp, mdp.rewards());
    const Vector q = (Matrix::Identity(N, N) - map).partialPivLu().solve(r);
    const double residual = (q - r - map * q).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
        throw std::runtime_error("fixed_point: modified Bellman residual " + std::to_string(residual));
    const double bound = 1.0 / (1.0 - gamma) + 1e-9;
    if (q.cwiseAbs().maxCoeff() > bound)
        throw std::runtime_error("fixed_point: limit point exceeds 1/(1-gamma)");
    return unflatten(mdp, q);
}

/// Truncation-bias bound on ||Q^{rho,pi} - Q^pi||_inf:
/// max_{s,a} max(pi(a|s) - rho_bar pi_b(a|s), 0) / (1-gamma)^2.
inline double bias_bound(const Policy& pi, const Policy& pi_b, double rho_bar, double gamma) {
    if (pi.num_states() != pi_b.num_states() || pi.num_actions() != pi_b.num_actions())
        throw std::invalid_argument("bias_bound: policy shape mismatch");
    double worst = 0.0;
    for (int s = 0; s < pi.num_states(); ++s)
        for (int a = 0; a < pi.num_actions(); ++a)
            worst = std::max(worst, std::max(pi.prob(s, a) - rho_bar * pi_b.prob(s, a), 0.0));
    return worst / ((1.0 - gamma) * (1.0 - gamma));
}

} // namespace offnac
