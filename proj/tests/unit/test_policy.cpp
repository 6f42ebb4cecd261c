#include <doctest.h>

#include <cmath>

#include "nbwpg/policy.hpp"
#include "nbwpg/rng.hpp"

using namespace nbwpg;

TEST_CASE("sigmoid basics") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  for (double x : {-3.0, -0.7, 0.2, 5.0}) {
    CHECK(sigmoid(-x) == doctest::Approx(1.0 - sigmoid(x)).epsilon(1e-14));
  }
  // Saturates without overflowing.
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
}

TEST_CASE("action probabilities follow the state feature") {
  PolicyParams p;
  p.theta = Vec2(0.3, -0.4);
  for (int s = 0; s < 5; ++s) {
    const double expected = sigmoid(state_feature(s) * 0.3 - 0.4);
    CHECK(action_probability(p, s, 0) == doctest::Approx(expected));
    CHECK(action_probability(p, s, 1) == doctest::Approx(1.0 - expected));
  }

  const TabularPolicy tab = action_probabilities(p, 5);
  REQUIRE(tab.probs.rows() == 5);
  REQUIRE(tab.probs.cols() == 2);
  for (int s = 0; s < 5; ++s) {
    CHECK(tab.probs(s, 0) == action_probability(p, s, 0));
    CHECK(tab.probs.row(s).sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("score closed form") {
  PolicyParams p;
  p.theta = Vec2(-0.8, 1.1);
  for (int s = 0; s < 4; ++s) {
    const double pi0 = action_probability(p, s, 0);
    const double f = state_feature(s);
    const Vec2 s0 = score(p, s, 0);
    const Vec2 s1 = score(p, s, 1);
    CHECK(s0[0] == doctest::Approx((1.0 - pi0) * f).epsilon(1e-15));
    CHECK(s0[1] == doctest::Approx(1.0 - pi0).epsilon(1e-15));
    CHECK(s1[0] == doctest::Approx(-pi0 * f).epsilon(1e-15));
    CHECK(s1[1] == doctest::Approx(-pi0).epsilon(1e-15));
  }
}

TEST_CASE("score is the gradient of log prob") {
  Xoshiro256pp rng(5);
  const double h = 1e-6;
  for (int rep = 0; rep < 20; ++rep) {
    PolicyParams p;
    p.theta[0] = 8.0 * rng.next_double() - 4.0;
    p.theta[1] = 8.0 * rng.next_double() - 4.0;
    const int s = static_cast<int>(rng.next() % 4);
    const int a = static_cast<int>(rng.next() % 2);

    for (int i = 0; i < 2; ++i) {
      PolicyParams up = p;
      PolicyParams dn = p;
      up.theta[i] += h;
      dn.theta[i] -= h;
      const double fd = (log_prob(up, s, a) - log_prob(dn, s, a)) / (2.0 * h);
      CHECK(score(p, s, a)[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("score is zero mean under the action distribution") {
  Xoshiro256pp rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    PolicyParams p;
    p.theta[0] = 20.0 * rng.next_double() - 10.0;
    p.theta[1] = 20.0 * rng.next_double() - 10.0;
    const int s = static_cast<int>(rng.next() % 5);
    const Vec2 mean = action_probability(p, s, 0) * score(p, s, 0) +
                      action_probability(p, s, 1) * score(p, s, 1);
    CHECK(std::abs(mean[0]) < 1e-14);
    CHECK(std::abs(mean[1]) < 1e-14);
  }
}

TEST_CASE("log prob clamps at the numeric floor") {
  PolicyParams p;
  p.theta = Vec2(0.0, -1000.0);  // action 0 probability underflows to 0
  const double lp = log_prob(p, 0, 0);
  CHECK(lp == doctest::Approx(std::log(1e-12)));
  CHECK(std::isfinite(lp));
  // The complementary action is clamped to 1 - 1e-12, so its log is ~0.
  CHECK(log_prob(p, 0, 1) == doctest::Approx(std::log(1.0 - 1e-12)));
}
