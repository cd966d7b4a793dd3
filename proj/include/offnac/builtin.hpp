#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "offnac/mdp.hpp"
#include "offnac/nac.hpp"

namespace offnac {

/// The builtin `appendix-d` benchmark: a 5-state ring with three actions
/// (cyclic shift forward, stay put, cyclic shift backward), rewards 1 /
/// 0.5 / 0 per action uniformly over states, gamma = 0.9. The optimal
/// policy takes the shift-forward action everywhere. Under a uniform
/// behavior policy the state chain is doubly stochastic, so its
/// stationary distribution is uniform.
inline TabularMdp five_state_ring_mdp() {
    const int S = 5;
    Matrix forward = Matrix::Zero(S, S);
    Matrix stay = Matrix::Identity(S, S);
    Matrix backward = Matrix::Zero(S, S);
    for (int s = 0; s < S; ++s) {
        forward(s, (s + 1) % S) = 1.0;
        backward(s, (s + S - 1) % S) = 1.0;
    }
    Matrix rewards(S, 3);
    for (int s = 0; s < S; ++s) {
        rewards(s, 0) = 1.0;
        rewards(s, 1) = 0.5;
        rewards(s, 2) = 0.0;
    }
    return TabularMdp({forward, stay, backward}, rewards, 0.9);
}

inline TabularMdp builtin_mdp(const std::string& name) {
    if (name == "appendix-d") return five_state_ring_mdp();
    throw std::invalid_argument("unknown builtin MDP '" + name + "' (available: appendix-d)");
}

/// Default actor-critic configuration of the builtin benchmark:
/// n=6, T=100, K=1000, alpha=0.05, beta=0.1, rho_bar=3, c_bar=1,
/// uniform behavior and initial policies, warm-started critic.
inline NacParams builtin_nac_params() {
    QTraceParams critic(6, 1000, 0.05, TruncationLevels(3.0, 1.0));
    NacParams params(100, critic, 0.1);
    params.warm_start = true;
    return params;
}

} // namespace offnac
