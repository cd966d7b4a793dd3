#pragma once

// Shared generators for randomized tests. Instances are small (desk
// scale) and always generated from an explicit SplitRng so failures
// reproduce.

#include <vector>

#include "offnac/builtin.hpp"
#include "offnac/mdp.hpp"
#include "offnac/rng.hpp"

namespace test_support {

using offnac::Matrix;
using offnac::Policy;
using offnac::SplitRng;
using offnac::TabularMdp;
using offnac::Vector;

/// Random dense row-stochastic matrix with entries bounded away from zero.
inline Matrix random_stochastic(SplitRng& rng, int rows, int cols, double floor = 0.01) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        double total = 0.0;
        for (int c = 0; c < cols; ++c) {
            m(r, c) = floor + rng.uniform01();
            total += m(r, c);
        }
        m.row(r) /= total;
    }
    return m;
}

inline TabularMdp random_mdp(SplitRng& rng, int states, int actions, double gamma) {
    std::vector<Matrix> transitions;
    transitions.reserve(static_cast<std::size_t>(actions));
    for (int a = 0; a < actions; ++a) transitions.push_back(random_stochastic(rng, states, states));
    Matrix rewards(states, actions);
    for (int s = 0; s < states; ++s)
        for (int a = 0; a < actions; ++a) rewards(s, a) = rng.uniform01();
    return TabularMdp(std::move(transitions), std::move(rewards), gamma);
}

inline Policy random_policy(SplitRng& rng, int states, int actions) {
    return Policy(random_stochastic(rng, states, actions));
}

/// The 5-state ring benchmark with its uniform behavior policy.
inline TabularMdp ring() { return offnac::five_state_ring_mdp(); }
inline Policy ring_behavior() { return Policy::uniform(5, 3); }

} // namespace test_support
