#pragma once

#include <functional>
#include <vector>

#include "nbwpg/eval.hpp"

namespace nbwpg {

// Exact gradient of the gain with respect to the policy parameters:
//   sum_s p_star(s) sum_a pi(a|s) q_b(s, a) score(s, a)
Vec2 gain_gradient_exact(const MdpModel& mdp, const PolicyParams& params);

// Which form the post-mixing part of the bias gradient takes. Both are
// exact and agree to finite-difference accuracy; q1 needs no step size.
enum class PostmixBackend { q1, fd_qb };

// Post-mixing part computed from the first-order values:
//   sum_s p_star(s) sum_a pi(a|s) q1(s, a) score(s, a)
Vec2 postmix_q1(const MdpModel& mdp, const PolicyParams& params);

// Post-mixing part computed from a finite-difference derivative of q_b:
//   sum_s p_star(s) sum_a pi(a|s) grad q_b(s, a) + grad gain
Vec2 postmix_qb(const MdpModel& mdp, const PolicyParams& params,
                double fd_step = 1e-5);

// Pre-mixing term at lag t (already includes the -grad gain correction):
//   sum_s p_t(s|s0) sum_a pi(a|s) q_b(s, a) score(s, a) - grad gain
// The terms vanish for t at or past the mixing time.
Vec2 premix_term(const MdpModel& mdp, const PolicyParams& params, int t);

// Exact bias gradient split into its transient and stationary parts.
// total = sum(premix_terms) + postmix_term.
struct BiasGradientBreakdown {
  std::vector<Vec2> premix_terms;  // t = 0 .. t_mix - 1
  Vec2 postmix_term;
  Vec2 total;
  Vec2 gain_grad;
  int t_mix = 0;
};

BiasGradientBreakdown bias_gradient_thm1(const MdpModel& mdp,
                                         const PolicyParams& params,
                                         PostmixBackend backend =
                                             PostmixBackend::q1,
                                         double fd_step = 1e-5);

// Gradient of the scaled discounted value (1 - gamma) v_gamma(s0):
//   sum_s (1 - gamma) p_gamma(s|s0) sum_a q_gamma(s, a) grad pi(a|s)
// where p_gamma(.|s0) is the normalized discounted visitation row.
Vec2 discounted_gradient_exact(const MdpModel& mdp, const PolicyParams& params,
                               double gamma);

// Angle between two parameter-space vectors in radians; NaN when either is
// zero, exactly 0 when they are bitwise equal.
double angle_between(const Vec2& u, const Vec2& v);

// How far the partial sums of the bias gradient are from the full gradient.
// Row t in [0, t_mix) holds the errors of premix_0 + .. + premix_t; the
// final row at t = t_mix adds the postmix term and is exactly (0, 0), so a
// policy with t_mix = 1 yields exactly two entries. Angular errors are NaN
// when either vector being compared is zero.
struct DecompositionEntry {
  int t;
  double angular_error_rad;
  double norm_error;
};

std::vector<DecompositionEntry> decomposition_diagnostic(
    const MdpModel& mdp, const PolicyParams& params);

enum class FdObjective { gain, bias, bias_barrier };

struct BarrierContext {
  double g_star_eps = 0.0;
  double beta = 0.0;
  double zeta = 1.0;
};

// Central-difference Hessian of an arbitrary scalar function, symmetrized:
// diagonal from the three-point stencil, off-diagonal from the four-point
// cross stencil, then (H + H^T) / 2.
Mat2 hessian_fd_fn(const std::function<double(const Vec2&)>& f,
                   const Vec2& theta, double h = 1e-4);

// Central-difference Hessian of the chosen objective, symmetrized.
// The barrier objective needs ctx; the others ignore it.
Mat2 hessian_fd(FdObjective objective, const MdpModel& mdp,
                const PolicyParams& params, double h = 1e-4,
                const BarrierContext* ctx = nullptr);

}  // namespace nbwpg
