#include "nbwpg/policy.hpp"

#include <algorithm>
#include <cmath>

namespace nbwpg {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double action_probability(const PolicyParams& params, int s, int a) {
  const double p0 = sigmoid(state_feature(s) * params.theta[0] + params.theta[1]);
  return a == 0 ? p0 : 1.0 - p0;
}

TabularPolicy action_probabilities(const PolicyParams& params, int n_states) {
  TabularPolicy policy;
  policy.probs.resize(n_states, 2);
  for (int s = 0; s < n_states; ++s) {
    const double p0 = action_probability(params, s, 0);
    policy.probs(s, 0) = p0;
    policy.probs(s, 1) = 1.0 - p0;
  }
  return policy;
}

Vec2 score(const PolicyParams& params, int s, int a) {
  const double p0 = action_probability(params, s, 0);
  const Vec2 x{state_feature(s), 1.0};
  return a == 0 ? Vec2((1.0 - p0) * x) : Vec2(-p0 * x);
}

double log_prob(const PolicyParams& params, int s, int a) {
  const double p = std::clamp(action_probability(params, s, a), 1e-12,
                              1.0 - 1e-12);
  return std::log(p);
}

}  // namespace nbwpg
