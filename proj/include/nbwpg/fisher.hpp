#pragma once

#include "nbwpg/mdp.hpp"

namespace nbwpg {

// Per-state Fisher information of the action distribution:
//   F_a(s) = sum_a pi(a|s) score(s, a) score(s, a)^T
Mat2 action_fisher(const PolicyParams& params, int s);

// Stationary-weighted Fisher, sum_s p_star(s) F_a(s).
Mat2 gain_fisher(const MdpModel& mdp, const PolicyParams& params);

// Transient-weighted Fisher for the bias,
//   sum_{t=0}^{t_mix} sum_s |p_t(s|s0) - p_star(s)| F_a(s)
Mat2 bias_fisher_analytic(const MdpModel& mdp, const PolicyParams& params);

// Sampling-friendly stand-in for the bias Fisher:
//   sum_{t=0}^{t_hat - 1} sum_s p_t(s|s0) F_a(s) + t_hat * gain_fisher
Mat2 bias_fisher_sampling_enabler(const MdpModel& mdp,
                                  const PolicyParams& params,
                                  int t_abs_hat = 2);

// Deviation-weighted Fisher, sum_s |D(s0, s)| F_a(s).
Mat2 devmat_fisher(const MdpModel& mdp, const PolicyParams& params);

// Truncated trajectory Fisher, sum_{t=0}^{len - 1} sum_s p_t(s|s0) F_a(s).
// Divided by len it converges to the gain Fisher as len grows.
Mat2 trajectory_fisher(const MdpModel& mdp, const PolicyParams& params,
                       long len);

// Discounted-visitation Fisher, sum_s (1 - gamma) p_gamma(s|s0) F_a(s).
Mat2 discounted_fisher(const MdpModel& mdp, const PolicyParams& params,
                       double gamma);

// Result of the jitter repair: m + added * I passes a Cholesky test.
struct PdRepair {
  Mat2 m;
  double added = 0.0;
};

// Adds the smallest jitter from the ladder {0, jitter0, 10 jitter0, ...}
// that makes the matrix pass an LLT factorization. Throws std::runtime_error
// once the jitter would exceed 1e6.
PdRepair ensure_positive_definite(const Mat2& m, double jitter0 = 1e-3);

}  // namespace nbwpg
