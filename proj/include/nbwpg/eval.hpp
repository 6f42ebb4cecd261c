#pragma once

#include "nbwpg/mdp.hpp"

namespace nbwpg {

// Exact average-reward evaluation of one policy.
//   gain  scalar long-run average reward (unichain, so state independent)
//   bias  v_b = D r_pi
//   q_b   q_b(s, a) = r(s, a) - gain + sum_s' p(s'|s,a) v_b(s')
//   v1    first-order sensitivity term, v1 = -D^2 r_pi
//   q1    q1(s, a) = -v_b(s) + sum_s' p(s'|s,a) v1(s')
struct EvalBundle {
  double gain = 0.0;
  Vec bias;
  Mat q_b;
  Vec v1;
  Mat q1;
};

EvalBundle evaluate(const MdpModel& mdp, const TabularPolicy& policy);
EvalBundle evaluate(const MdpModel& mdp, const TabularPolicy& policy,
                    const ChainAnalysis& chain);

// Discounted evaluation at discount factor gamma in (0, 1).
//   v        (I - gamma P)^{-1} r_pi
//   q        q(s, a) = r(s, a) + gamma sum_s' p(s'|s,a) v(s')
//   scaled_v (1 - gamma) v, which approaches the gain as gamma -> 1
struct DiscountedBundle {
  Vec v;
  Mat q;
  Vec scaled_v;
};

DiscountedBundle discounted_value(const MdpModel& mdp,
                                  const TabularPolicy& policy, double gamma);
DiscountedBundle discounted_value(const MdpModel& mdp,
                                  const TabularPolicy& policy, double gamma,
                                  const ChainAnalysis& chain);

}  // namespace nbwpg
