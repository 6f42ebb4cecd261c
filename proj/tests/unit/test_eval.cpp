#include <doctest.h>

#include <cmath>

#include "nbwpg/envs.hpp"
#include "nbwpg/eval.hpp"
#include "nbwpg/rng.hpp"

using namespace nbwpg;

namespace {

TabularPolicy mixed(const MdpModel& m, double t0, double t1) {
  PolicyParams p;
  p.theta = Vec2(t0, t1);
  return action_probabilities(p, m);
}

}  // namespace

TEST_CASE("two-state chain at theta zero, hand values") {
  // Start state: action 0 pays 5 and stays with probability 1/2; action 1
  // pays 10 and leaves. The absorbing state pays -1. With a 50/50 policy:
  //   gain = -1, v_b = (34/3, 0)
  //   q_b(s0, .) = (35/3, 11), q_b(s1, .) = (0, 0)
  //   v1 = (-136/9, 0), q1(s0, .) = (-170/9, -34/3)
  const MdpModel m = builtin("A1").model;
  const EvalBundle ev = evaluate(m, mixed(m, 0.0, 0.0));

  CHECK(ev.gain == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ev.bias[0] == doctest::Approx(34.0 / 3.0).epsilon(1e-12));
  CHECK(ev.bias[1] == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(ev.q_b(0, 0) == doctest::Approx(35.0 / 3.0).epsilon(1e-12));
  CHECK(ev.q_b(0, 1) == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(std::abs(ev.q_b(1, 0)) < 1e-12);
  CHECK(std::abs(ev.q_b(1, 1)) < 1e-12);

  CHECK(ev.v1[0] == doctest::Approx(-136.0 / 9.0).epsilon(1e-12));
  CHECK(std::abs(ev.v1[1]) < 1e-12);
  CHECK(ev.q1(0, 0) == doctest::Approx(-170.0 / 9.0).epsilon(1e-12));
  CHECK(ev.q1(0, 1) == doctest::Approx(-34.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(ev.q1(1, 0)) < 1e-12);
}

TEST_CASE("feedforward chain at theta zero accumulates the path rewards") {
  // Every policy walks s0 -> {s1,s2} -> s3 -> s4 and parks at the zero
  // reward state, so the gain is 0 and the start bias is the expected
  // total reward: 0.5*(1+1) + 0.5*(0+3) + 0.5*(3+0) = 4.
  const MdpModel m = builtin("A2").model;
  const EvalBundle ev = evaluate(m, mixed(m, 0.0, 0.0));
  CHECK(ev.gain == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ev.bias[0] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(std::abs(ev.bias[4]) < 1e-12);
}

TEST_CASE("average-reward Bellman identities on random policies") {
  Xoshiro256pp rng(11);
  for (const std::string& name : builtin_names()) {
    const MdpModel m = builtin(name).model;
    for (int rep = 0; rep < 4; ++rep) {
      const TabularPolicy policy =
          mixed(m, 8.0 * rng.next_double() - 4.0, 8.0 * rng.next_double() - 4.0);
      const ChainAnalysis chain = induced_chain(m, policy);
      const EvalBundle ev = evaluate(m, policy, chain);

      for (int s = 0; s < m.n_states; ++s) {
        // The policy-averaged action values recover the state values.
        const double qb_mean = policy.probs(s, 0) * ev.q_b(s, 0) +
                               policy.probs(s, 1) * ev.q_b(s, 1);
        CHECK(qb_mean == doctest::Approx(ev.bias[s]).epsilon(1e-10));
        const double q1_mean = policy.probs(s, 0) * ev.q1(s, 0) +
                               policy.probs(s, 1) * ev.q1(s, 1);
        CHECK(q1_mean == doctest::Approx(ev.v1[s]).epsilon(1e-10));
      }
      // The stationary average of the bias vanishes.
      CHECK(std::abs(chain.p_star.dot(ev.bias)) < 1e-9);
      // gain equals the stationary average reward.
      CHECK(ev.gain == doctest::Approx(chain.p_star.dot(chain.r_pi))
                           .epsilon(1e-12));
    }
  }
}

TEST_CASE("discounted evaluation, closed forms") {
  const MdpModel m = builtin("A1").model;
  const TabularPolicy policy = mixed(m, 0.0, 0.0);

  SUBCASE("gamma zero returns the immediate rewards") {
    const DiscountedBundle d = discounted_value(m, policy, 0.0);
    CHECK(d.v[0] == doctest::Approx(7.5).epsilon(1e-12));
    CHECK(d.v[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(d.q(0, 0) == doctest::Approx(5.0));
    CHECK(d.q(0, 1) == doctest::Approx(10.0));
    CHECK(d.scaled_v[0] == doctest::Approx(7.5));
  }

  SUBCASE("gamma one half solves the fixed point by hand") {
    // v(s1) = -1 + 0.5 v(s1) => -2; v(s0) = 7.5 + 0.5(0.25 v0 + 0.75 v1).
    const DiscountedBundle d = discounted_value(m, policy, 0.5);
    CHECK(d.v[1] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(d.v[0] == doctest::Approx(54.0 / 7.0).epsilon(1e-12));
  }
}

TEST_CASE("scaled discounted value approaches the gain") {
  Xoshiro256pp rng(12);
  for (const char* name : {"A1", "B1", "A2"}) {
    const MdpModel m = builtin(name).model;
    const TabularPolicy policy =
        mixed(m, 4.0 * rng.next_double() - 2.0, 4.0 * rng.next_double() - 2.0);
    const EvalBundle ev = evaluate(m, policy);
    const DiscountedBundle d = discounted_value(m, policy, 0.99999);
    CHECK(d.scaled_v[m.initial_state] ==
          doctest::Approx(ev.gain).epsilon(1e-3));
  }
}

TEST_CASE("discounted value splits into gain over 1-gamma plus bias") {
  // First terms of the Laurent expansion around gamma = 1: the residual
  // after removing g/(1-gamma) converges to the bias.
  for (const char* name : {"A1", "B1"}) {
    const MdpModel m = builtin(name).model;
    const TabularPolicy policy = mixed(m, 0.0, 0.0);
    const EvalBundle ev = evaluate(m, policy);
    const double gamma = 0.9999;
    const DiscountedBundle d = discounted_value(m, policy, gamma);
    const double residual =
        d.v[m.initial_state] - ev.gain / (1.0 - gamma);
    CHECK(std::abs(residual - ev.bias[m.initial_state]) < 1e-2);
  }
}
