#pragma once

#include <cstdint>
#include <vector>

#include "nbwpg/eval.hpp"
#include "nbwpg/rng.hpp"

namespace nbwpg {

struct StepRecord {
  int s;
  int a;
  double r;
  int s_next;
};

// Rolls out t_max + 1 steps (time indices 0 .. t_max) from the model's
// start state under the given policy.
std::vector<StepRecord> simulate_episode(const MdpModel& mdp,
                                         const TabularPolicy& policy,
                                         int t_max, Xoshiro256pp& rng);

// How the terminal correction term of the bias-gradient estimator is built.
//   q1_substitution: q1(s, a) score(s, a) minus the exact gain gradient
//   fd_qb:           finite-difference derivative of q_b(s, a) in theta
enum class GradQbBackend { q1_substitution, fd_qb };

struct SamplingConfig {
  int n_xep = 16;       // episodes per estimate
  int t_xepmax = -1;    // final time index; -1 derives mixing time + 5
  int t_abs_hat = 2;    // truncation of the bias-Fisher stand-in
  double fd_step = 1e-5;
  std::uint64_t seed = 0;
};

struct EpisodeSample {
  Vec2 grad_g;
  Vec2 grad_b;
  Mat2 fisher_g;
  Mat2 fisher_b;
};

// Sample means across episodes plus the per-episode values they average.
struct GradFisherEstimate {
  Vec2 grad_g;
  Vec2 grad_b;
  Mat2 fisher_g;
  Mat2 fisher_b;
  std::vector<EpisodeSample> per_episode;
  int t_xepmax = 0;
};

// Single-trajectory estimator of the gain and bias gradients and of the
// gain and bias Fishers. q_b is the exact table for the current policy;
// episode e uses the substream keyed by (cfg.seed, e), so results do not
// depend on evaluation order.
GradFisherEstimate run_alg2(const MdpModel& mdp, const PolicyParams& params,
                            const Mat& q_b, GradQbBackend backend,
                            const SamplingConfig& cfg);

}  // namespace nbwpg
