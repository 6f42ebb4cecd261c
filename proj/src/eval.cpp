#include "nbwpg/eval.hpp"

namespace nbwpg {

EvalBundle evaluate(const MdpModel& mdp, const TabularPolicy& policy) {
  return evaluate(mdp, policy, induced_chain(mdp, policy));
}

EvalBundle evaluate(const MdpModel& mdp, const TabularPolicy& policy,
                    const ChainAnalysis& chain) {
  const int n = mdp.n_states;
  EvalBundle out;
  out.gain = chain.p_star.dot(chain.r_pi);
  out.bias = chain.D * chain.r_pi;
  out.v1 = -chain.D * out.bias;  // -D^2 r_pi

  out.q_b.resize(n, 2);
  out.q1.resize(n, 2);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < MdpModel::n_actions; ++a) {
      const double next_bias = mdp.transition[a].row(s).dot(out.bias);
      const double next_v1 = mdp.transition[a].row(s).dot(out.v1);
      out.q_b(s, a) = mdp.reward(s, a) - out.gain + next_bias;
      out.q1(s, a) = -out.bias[s] + next_v1;
    }
  }
  return out;
}

DiscountedBundle discounted_value(const MdpModel& mdp,
                                  const TabularPolicy& policy, double gamma) {
  return discounted_value(mdp, policy, gamma, induced_chain(mdp, policy));
}

DiscountedBundle discounted_value(const MdpModel& mdp,
                                  const TabularPolicy& policy, double gamma,
                                  const ChainAnalysis& chain) {
  const int n = mdp.n_states;
  DiscountedBundle out;
  out.v = (Mat::Identity(n, n) - gamma * chain.P).partialPivLu().solve(
      chain.r_pi);
  out.q.resize(n, 2);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < MdpModel::n_actions; ++a) {
      out.q(s, a) =
          mdp.reward(s, a) + gamma * mdp.transition[a].row(s).dot(out.v);
    }
  }
  out.scaled_v = (1.0 - gamma) * out.v;
  return out;
}

}  // namespace nbwpg
