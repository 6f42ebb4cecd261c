#pragma once

#include "nbwpg/types.hpp"

namespace nbwpg {

// Two-parameter stochastic policy over two actions per state.
// The probability of action 0 in state s is sigmoid(f(s) * theta[0] + theta[1])
// with the scalar state feature f(s) = s (the state index).
struct PolicyParams {
  Vec2 theta{0.0, 0.0};
};

// Per-state action probabilities, probs(s, a) = pi(a | s).
struct TabularPolicy {
  Mat probs;
};

inline double state_feature(int s) { return static_cast<double>(s); }

double sigmoid(double x);

double action_probability(const PolicyParams& params, int s, int a);

TabularPolicy action_probabilities(const PolicyParams& params, int n_states);

// Gradient of log pi(a | s) with respect to theta.
Vec2 score(const PolicyParams& params, int s, int a);

// log pi(a | s); the probability is clamped to [1e-12, 1 - 1e-12] before
// the log so boundary policies stay finite.
double log_prob(const PolicyParams& params, int s, int a);

}  // namespace nbwpg
