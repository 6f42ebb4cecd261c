#pragma once

#include <array>
#include <string>

#include "nbwpg/policy.hpp"
#include "nbwpg/types.hpp"

namespace nbwpg {

// Finite MDP with exactly two actions per state, expected immediate rewards
// r(s, a), and a single deterministic start state.
struct MdpModel {
  int n_states = 0;
  static constexpr int n_actions = 2;
  // transition[a](s, s') = p(s' | s, a); each matrix is row stochastic.
  std::array<Mat, 2> transition;
  // reward(s, a), already marginalized over successor states.
  Mat reward;
  int initial_state = 0;
};

// Throws std::invalid_argument naming the offending (s, a) if a transition
// row has negative entries or does not sum to 1 within tolerance.
void validate_model(const MdpModel& mdp, double tol = 1e-9);

// Entrywise closeness test used for mixing detection:
// |p_star - row| <= atol + rtol * row.
inline constexpr double kMixAtol = 1e-6;
inline constexpr double kMixRtol = 1e-5;
inline constexpr int kMixCap = 10000;

struct MixingOptions {
  // When true, t_mix is the maximum over all start states instead of the
  // model's designated start state.
  bool worst_case_over_starts = false;
};

// Markov chain induced on the state space by a fixed policy.
struct ChainAnalysis {
  Mat P;       // P(s, s') = sum_a pi(a|s) p(s'|s,a)
  Mat P_star;  // limiting matrix; every row equals p_star for unichain P
  Vec p_star;  // stationary distribution
  Mat D;       // deviation matrix (I - P + P_star)^{-1} (I - P_star)
  int t_mix;   // smallest t with P^t(s0, .) entrywise close to p_star
  Vec r_pi;    // r_pi(s) = sum_a pi(a|s) r(s, a)
};

ChainAnalysis induced_chain(const MdpModel& mdp, const TabularPolicy& policy,
                            const MixingOptions& opts = {});

// Row vector of P^t taken from start state s0, as a distribution over states.
Vec t_step_distribution(const ChainAnalysis& chain, int s0, int t);

inline TabularPolicy action_probabilities(const PolicyParams& params,
                                          const MdpModel& mdp) {
  return action_probabilities(params, mdp.n_states);
}

}  // namespace nbwpg
