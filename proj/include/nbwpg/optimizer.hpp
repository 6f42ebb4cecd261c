#pragma once

#include <functional>
#include <vector>

#include "nbwpg/fisher.hpp"
#include "nbwpg/gradients.hpp"
#include "nbwpg/sampling.hpp"

namespace nbwpg {

enum class OptimMode { exact, sampling };

struct LineSearchOptions {
  double c1 = 1e-4;
  double shrink_factor = 0.5;
  double alpha0 = 1.0;
  int max_iters = 100;
};

// alpha = 0 with non_ascent set means the directional slope was not
// positive and no step was taken.
struct LineSearchResult {
  double alpha = 0.0;
  bool non_ascent = false;
  int probes = 0;
};

// Backtracking search for an ascent step: accepts the first alpha with
// f(theta + alpha d) >= f(theta) + c1 alpha grad.d. Non-finite probe values
// just shrink further; if every probe fails the last alpha is returned.
LineSearchResult backtracking_line_search(
    const std::function<double(const Vec2&)>& objective_fn, const Vec2& theta,
    const Vec2& direction, const Vec2& grad,
    const LineSearchOptions& opts = {});

// Log-barrier objective around the gain level g_star_eps:
//   value   = bias(s0) + beta log(gain - g_star_eps + zeta)
//   gradient= grad bias + beta_tilde grad gain
//   precond = F_bias + beta_tilde F_gain
//           + beta / (gain - g_star_eps + zeta)^2 grad g grad g^T
// with beta_tilde = beta / (gain - g_star_eps + zeta). The rank-one term
// enters with a plus sign so the preconditioner stays positive
// semidefinite. A non-positive log argument throws std::domain_error; the
// optimizer never lands there because infeasible line-search probes are
// scored -inf through the value-only path and rejected.
struct BarrierEval {
  double value = 0.0;
  Vec2 gradient;
  Mat2 precond;
  double beta_tilde = 0.0;
  double log_arg = 0.0;
};

BarrierEval bias_barrier(const MdpModel& mdp, const PolicyParams& params,
                         double g_star_eps, double beta, double zeta);

enum class OptimPhase { gain, barrier };

struct TraceRow {
  int iteration = 0;
  OptimPhase phase = OptimPhase::gain;
  Vec2 theta;
  double gain = 0.0;
  double bias_s0 = 0.0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct OptimTrace {
  std::vector<TraceRow> rows;
  Vec2 final_theta;
  double final_gain = 0.0;
  double final_bias_s0 = 0.0;
  double g_star_eps = 0.0;
  bool switched = false;
  int switch_iteration = -1;
};

struct OptimConfig {
  OptimMode mode = OptimMode::exact;
  double beta0 = 0.1;
  double epsilon = 1e-4;  // gain-phase gradient threshold
  double zeta = 1.0;
  int n_j = 100;          // inner iterations per beta value
  int n_k = 1;            // outer beta reductions
  double shrink = 10.0;   // beta divisor between outer rounds
  SamplingConfig sampling;
  LineSearchOptions line_search;
};

// Two-phase natural ascent toward a nearly Blackwell optimal policy:
// natural gain steps until the gain gradient is small, then barrier steps
// that push the bias up while the log term holds the gain near its
// attained level. The switch happens at most once and consumes the
// iteration it happens on.
OptimTrace optimize_nbw(const MdpModel& mdp, const PolicyParams& params0,
                        const OptimConfig& cfg);

// Preconditioner choices for plain bias ascent.
enum class BiasScheme { identity, hessian, fisher_analytic, fisher_sampling,
                        devmat };

struct BiasOnlyConfig {
  OptimMode mode = OptimMode::exact;
  double tol = 1e-8;
  int max_iters = 100;
  int t_abs_hat = 2;  // fisher_sampling truncation
  SamplingConfig sampling;
  LineSearchOptions line_search;
};

OptimTrace optimize_bias_only(const MdpModel& mdp, const PolicyParams& params0,
                              BiasScheme scheme, const BiasOnlyConfig& cfg);

// Ascends bias(s0) - phi/2 ||grad gain||^2 with an identity preconditioner;
// the gain Hessian in the penalty gradient comes from finite differences.
OptimTrace optimize_penalty(const MdpModel& mdp, const PolicyParams& params0,
                            double phi, double tol = 1e-8, int max_iters = 100);

// Natural ascent of the scaled discounted value (1 - gamma) v_gamma(s0)
// preconditioned by the discounted Fisher.
OptimTrace optimize_discounted(const MdpModel& mdp,
                               const PolicyParams& params0, double gamma,
                               double tol = 1e-8, int max_iters = 100);

}  // namespace nbwpg
