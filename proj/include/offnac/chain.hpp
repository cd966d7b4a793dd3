#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "offnac/mdp.hpp"

namespace offnac {

/// Raised when the behavior-policy state chain is reducible or periodic,
/// i.e. when the ergodicity assumption every bound relies on fails.
class AssumptionViolation : public std::runtime_error {
public:
    explicit AssumptionViolation(const std::string& what) : std::runtime_error(what) {}
};

/// Total variation distance (1/2) sum |p - q| between two distributions.
inline double tv_distance(const Vector& p, const Vector& q) {
    if (p.size() != q.size()) throw std::invalid_argument("tv_distance: length mismatch");
    return 0.5 * (p - q).cwiseAbs().sum();
}

inline double tv_distance(const Distribution& p, const Distribution& q) {
    return tv_distance(p.probs(), q.probs());
}

namespace detail {

inline std::vector<std::vector<int>> support_graph(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s)
        for (int s2 = 0; s2 < n; ++s2)
            if (p(s, s2) > 0.0) adj[static_cast<std::size_t>(s)].push_back(s2);
    return adj;
}

inline std::vector<bool> reachable_from(const std::vector<std::vector<int>>& adj, int start) {
    std::vector<bool> seen(adj.size(), false);
    std::queue<int> frontier;
    seen[static_cast<std::size_t>(start)] = true;
    frontier.push(start);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v : adj[static_cast<std::size_t>(u)])
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = true;
                frontier.push(v);
            }
    }
    return seen;
}

/// Period of an irreducible chain: gcd of (depth(u) + 1 - depth(v)) over
/// all support edges u -> v, depths from a BFS tree.
inline int chain_period(const std::vector<std::vector<int>>& adj) {
    std::vector<int> depth(adj.size(), -1);
    std::queue<int> frontier;
    depth[0] = 0;
    frontier.push(0);
    int g = 0;
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (depth[static_cast<std::size_t>(v)] < 0) {
                depth[static_cast<std::size_t>(v)] = depth[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
            g = std::gcd(g, std::abs(depth[static_cast<std::size_t>(u)] + 1 -
                                     depth[static_cast<std::size_t>(v)]));
        }
    }
    return g == 0 ? 1 : g;
}

} // namespace detail

/// Check irreducibility and aperiodicity of the state chain induced by
/// `pi_b`; throws AssumptionViolation naming the failing property.
inline void check_ergodicity(const TabularMdp& mdp, const Policy& pi_b) {
    const Matrix p = state_transition_matrix(mdp, pi_b);
    const auto adj = detail::support_graph(p);
    const auto fwd = detail::reachable_from(adj, 0);
    if (std::find(fwd.begin(), fwd.end(), false) != fwd.end())
        throw AssumptionViolation("behavior chain is reducible: not all states reachable from state 0");
    std::vector<std::vector<int>> radj(adj.size());
    for (std::size_t u = 0; u < adj.size(); ++u)
        for (int v : adj[u]) radj[static_cast<std::size_t>(v)].push_back(static_cast<int>(u));
    const auto bwd = detail::reachable_from(radj, 0);
    if (std::find(bwd.begin(), bwd.end(), false) != bwd.end())
        throw AssumptionViolation("behavior chain is reducible: state 0 not reachable from all states");
    const int period = detail::chain_period(adj);
    if (period != 1)
        throw AssumptionViolation("behavior chain is periodic with period " + std::to_string(period));
}

/// Unique stationary distribution of the behavior-policy state chain.
/// Solves mu^T P = mu^T with the normalization sum mu = 1 by dense LU;
/// validates ergodicity first and the fixed-point residual after.
inline Distribution stationary_distribution(const TabularMdp& mdp, const Policy& pi_b) {
    check_ergodicity(mdp, pi_b);
    const Matrix p = state_transition_matrix(mdp, pi_b);
    const int n = static_cast<int>(p.rows());
    Matrix system = p.transpose() - Matrix::Identity(n, n);
    system.row(n - 1).setOnes();
    Vector rhs = Vector::Zero(n);
    rhs(n - 1) = 1.0;
    Vector mu = system.partialPivLu().solve(rhs);
    const double residual = (p.transpose() * mu - mu).cwiseAbs().sum();
    if (residual > 1e-10)
        throw std::runtime_error("stationary_distribution: residual " + std::to_string(residual));
    if ((mu.array() <= 0.0).any())
        throw std::runtime_error("stationary_distribution: nonpositive entry (chain not ergodic?)");
    return Distribution(std::move(mu));
}

/// Mixing-time report: tau is the first step k at which every row of P^k
/// is within `alpha` total variation of the stationary distribution;
/// max_tv_by_step[k] records the worst-row TV at each step 0..tau.
struct MixingReport {
    int tau = 0;
    double alpha = 0.0;
    std::vector<double> max_tv_by_step;
};

inline MixingReport mixing_time(const TabularMdp& mdp, const Policy& pi_b, double alpha,
                                long max_steps = 1'000'000L) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("mixing_time: alpha must be in (0,1)");
    const Distribution mu = stationary_distribution(mdp, pi_b);
    const Matrix p = state_transition_matrix(mdp, pi_b);
    const int n = static_cast<int>(p.rows());
    MixingReport report;
    report.alpha = alpha;
    Matrix pk = Matrix::Identity(n, n);
    for (long k = 0; k <= max_steps; ++k) {
        double worst = 0.0;
        for (int s = 0; s < n; ++s)
            worst = std::max(worst, tv_distance(Vector(pk.row(s).transpose()), mu.probs()));
        report.max_tv_by_step.push_back(worst);
        if (worst <= alpha) {
            report.tau = static_cast<int>(k);
            return report;
        }
        pk = pk * p;
    }
    throw AssumptionViolation("mixing_time: chain did not reach TV " + std::to_string(alpha) +
                              " within " + std::to_string(max_steps) +
                              " steps; the behavior chain does not look ergodic");
}

/// Smallest steady-state visitation masses of the behavior pair chain:
/// m_min = min_{s,a} mu_b(s) pi_b(a|s), c_min = c_bar * min pi_b,
/// pi_b_min = min_{s,a} pi_b(a|s).
struct MinimaReport {
    double m_min = 0.0;
    double c_min = 0.0;
    double pi_b_min = 0.0;
};

inline MinimaReport minima_report(const TabularMdp& mdp, const Policy& pi_b, double c_bar) {
    detail::require_shapes(mdp, pi_b);
    if (!pi_b.strictly_positive())
        throw std::invalid_argument("minima_report: behavior policy must be strictly positive");
    const Distribution mu = stationary_distribution(mdp, pi_b);
    MinimaReport r;
    r.pi_b_min = pi_b.probs().minCoeff();
    r.m_min = 1.0;
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a) r.m_min = std::min(r.m_min, mu(s) * pi_b.prob(s, a));
    r.c_min = c_bar * r.pi_b_min;
    return r;
}

} // namespace offnac
