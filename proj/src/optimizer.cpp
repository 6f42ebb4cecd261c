#include "nbwpg/optimizer.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace nbwpg {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct PointEval {
  TabularPolicy policy;
  ChainAnalysis chain;
  EvalBundle eval;
};

PointEval eval_point(const MdpModel& mdp, const PolicyParams& params) {
  PointEval pe;
  pe.policy = action_probabilities(params, mdp);
  pe.chain = induced_chain(mdp, pe.policy);
  pe.eval = evaluate(mdp, pe.policy, pe.chain);
  return pe;
}

double gain_at(const MdpModel& mdp, const Vec2& theta) {
  PolicyParams p;
  p.theta = theta;
  const TabularPolicy policy = action_probabilities(p, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  return chain.p_star.dot(chain.r_pi);
}

double bias_at(const MdpModel& mdp, const Vec2& theta) {
  PolicyParams p;
  p.theta = theta;
  const TabularPolicy policy = action_probabilities(p, mdp);
  const EvalBundle eval = evaluate(mdp, policy);
  return eval.bias[mdp.initial_state];
}

double barrier_value_at(const MdpModel& mdp, const Vec2& theta,
                        double g_star_eps, double beta, double zeta) {
  PolicyParams p;
  p.theta = theta;
  const TabularPolicy policy = action_probabilities(p, mdp);
  const EvalBundle eval = evaluate(mdp, policy);
  const double arg = eval.gain - g_star_eps + zeta;
  if (arg <= 0.0) return -std::numeric_limits<double>::infinity();
  return eval.bias[mdp.initial_state] + beta * std::log(arg);
}

void finish_trace(const MdpModel& mdp, const PolicyParams& params,
                  OptimTrace& trace) {
  trace.final_theta = params.theta;
  const EvalBundle eval = evaluate(mdp, action_probabilities(params, mdp));
  trace.final_gain = eval.gain;
  trace.final_bias_s0 = eval.bias[mdp.initial_state];
}

}  // namespace

LineSearchResult backtracking_line_search(
    const std::function<double(const Vec2&)>& objective_fn, const Vec2& theta,
    const Vec2& direction, const Vec2& grad, const LineSearchOptions& opts) {
  LineSearchResult res;
  const double slope = grad.dot(direction);
  if (!(slope > 0.0)) {
    res.non_ascent = true;
    return res;
  }
  const double f0 = objective_fn(theta);
  double alpha = opts.alpha0;
  for (int i = 0; i < opts.max_iters; ++i) {
    ++res.probes;
    const double fa = objective_fn(Vec2(theta + alpha * direction));
    if (std::isfinite(fa) && fa >= f0 + opts.c1 * alpha * slope) {
      res.alpha = alpha;
      return res;
    }
    alpha *= opts.shrink_factor;
  }
  res.alpha = alpha;
  return res;
}

BarrierEval bias_barrier(const MdpModel& mdp, const PolicyParams& params,
                         double g_star_eps, double beta, double zeta) {
  const PointEval pe = eval_point(mdp, params);
  BarrierEval out;
  out.log_arg = pe.eval.gain - g_star_eps + zeta;
  if (out.log_arg <= 0.0) {
    throw std::domain_error(
        "barrier evaluated outside its interior: gain - g_star_eps + zeta = " +
        std::to_string(out.log_arg));
  }
  const BiasGradientBreakdown bd = bias_gradient_thm1(mdp, params);
  out.beta_tilde = beta / out.log_arg;
  out.value =
      pe.eval.bias[mdp.initial_state] + beta * std::log(out.log_arg);
  out.gradient = bd.total + out.beta_tilde * bd.gain_grad;
  out.precond = bias_fisher_analytic(mdp, params) +
                out.beta_tilde * gain_fisher(mdp, params) +
                beta / (out.log_arg * out.log_arg) * bd.gain_grad *
                    bd.gain_grad.transpose();
  return out;
}

OptimTrace optimize_nbw(const MdpModel& mdp, const PolicyParams& params0,
                        const OptimConfig& cfg) {
  PolicyParams params = params0;
  OptimTrace trace;
  OptimPhase phase = OptimPhase::gain;
  double g_star_eps = kNan;
  double beta = cfg.beta0;

  for (int k = 0; k < cfg.n_k; ++k) {
    for (int j = 0; j < cfg.n_j; ++j) {
      const int iter = k * cfg.n_j + j;
      const PointEval pe = eval_point(mdp, params);

      GradFisherEstimate est;
      if (cfg.mode == OptimMode::sampling) {
        SamplingConfig scfg = cfg.sampling;
        scfg.seed = fork_seed(cfg.sampling.seed, iter);
        est = run_alg2(mdp, params, pe.eval.q_b,
                       GradQbBackend::q1_substitution, scfg);
      }

      TraceRow row;
      row.iteration = iter;
      row.phase = phase;
      row.theta = params.theta;
      row.gain = pe.eval.gain;
      row.bias_s0 = pe.eval.bias[mdp.initial_state];
      row.beta = beta;

      if (phase == OptimPhase::gain) {
        Vec2 grad;
        Mat2 fisher;
        if (cfg.mode == OptimMode::sampling) {
          grad = est.grad_g;
          fisher = est.fisher_g;
        } else {
          const BiasGradientBreakdown bd = bias_gradient_thm1(mdp, params);
          grad = bd.gain_grad;
          fisher = gain_fisher(mdp, params);
        }
        row.objective = pe.eval.gain;
        row.grad_norm = grad.norm();

        if (row.grad_norm < cfg.epsilon) {
          g_star_eps = pe.eval.gain;
          phase = OptimPhase::barrier;
          trace.switched = true;
          trace.switch_iteration = iter;
          trace.rows.push_back(row);
          continue;  // the switch uses up this iteration
        }

        const Mat2 C = ensure_positive_definite(fisher).m;
        const Vec2 direction = C.llt().solve(grad);
        const auto objective = [&](const Vec2& th) {
          return gain_at(mdp, th);
        };
        const LineSearchResult ls =
            backtracking_line_search(objective, params.theta, direction, grad,
                                     cfg.line_search);
        row.alpha = ls.alpha;
        params.theta += ls.alpha * direction;
      } else {
        Vec2 grad;
        Mat2 precond;
        double value;
        const double log_arg = pe.eval.gain - g_star_eps + cfg.zeta;
        if (log_arg <= 0.0) {
          // The accepted iterates stay feasible, so treat this as a failed
          // step and stop moving.
          trace.rows.push_back(row);
          break;
        }
        const double beta_tilde = beta / log_arg;
        if (cfg.mode == OptimMode::sampling) {
          grad = est.grad_b + beta_tilde * est.grad_g;
          precond = est.fisher_b + beta_tilde * est.fisher_g +
                    beta / (log_arg * log_arg) * est.grad_g *
                        est.grad_g.transpose();
          value = pe.eval.bias[mdp.initial_state] + beta * std::log(log_arg);
        } else {
          const BarrierEval be =
              bias_barrier(mdp, params, g_star_eps, beta, cfg.zeta);
          grad = be.gradient;
          precond = be.precond;
          value = be.value;
        }
        row.objective = value;
        row.grad_norm = grad.norm();

        const Mat2 C = ensure_positive_definite(precond).m;
        const Vec2 direction = C.llt().solve(grad);
        const auto objective = [&](const Vec2& th) {
          return barrier_value_at(mdp, th, g_star_eps, beta, cfg.zeta);
        };
        const LineSearchResult ls =
            backtracking_line_search(objective, params.theta, direction, grad,
                                     cfg.line_search);
        row.alpha = ls.alpha;
        params.theta += ls.alpha * direction;
      }
      trace.rows.push_back(row);
    }
    beta /= cfg.shrink;
  }

  trace.g_star_eps = g_star_eps;
  finish_trace(mdp, params, trace);
  return trace;
}

namespace {

// Shared single-objective ascent loop. grad_fn must return the ascent
// gradient, precond_fn a positive definite preconditioner candidate, and
// objective_fn the exact objective used by the line search.
OptimTrace ascend(const MdpModel& mdp, const PolicyParams& params0,
                  double tol, int max_iters,
                  const std::function<Vec2(const PolicyParams&, int)>& grad_fn,
                  const std::function<Mat2(const PolicyParams&, int)>&
                      precond_fn,
                  const std::function<double(const Vec2&)>& objective_fn,
                  const LineSearchOptions& ls_opts) {
  PolicyParams params = params0;
  OptimTrace trace;
  for (int iter = 0; iter < max_iters; ++iter) {
    const PointEval pe = eval_point(mdp, params);
    const Vec2 grad = grad_fn(params, iter);

    TraceRow row;
    row.iteration = iter;
    row.phase = OptimPhase::gain;
    row.theta = params.theta;
    row.gain = pe.eval.gain;
    row.bias_s0 = pe.eval.bias[mdp.initial_state];
    row.objective = objective_fn(params.theta);
    row.grad_norm = grad.norm();
    row.beta = kNan;

    if (row.grad_norm < tol) {
      trace.rows.push_back(row);
      break;
    }
    const Mat2 C = ensure_positive_definite(precond_fn(params, iter)).m;
    const Vec2 direction = C.llt().solve(grad);
    const LineSearchResult ls = backtracking_line_search(
        objective_fn, params.theta, direction, grad, ls_opts);
    row.alpha = ls.alpha;
    params.theta += ls.alpha * direction;
    trace.rows.push_back(row);
  }
  trace.g_star_eps = kNan;
  finish_trace(mdp, params, trace);
  return trace;
}

}  // namespace

OptimTrace optimize_bias_only(const MdpModel& mdp, const PolicyParams& params0,
                              BiasScheme scheme, const BiasOnlyConfig& cfg) {
  // One sampled estimate per iteration feeds both the gradient and, for the
  // fisher_sampling scheme, the preconditioner.
  struct IterCache {
    int iter = -1;
    GradFisherEstimate est;
  };
  auto cache = std::make_shared<IterCache>();
  const auto sampled = [&, cache](const PolicyParams& p,
                                  int iter) -> const GradFisherEstimate& {
    if (cache->iter != iter) {
      SamplingConfig scfg = cfg.sampling;
      scfg.seed = fork_seed(cfg.sampling.seed, iter);
      const EvalBundle eval = evaluate(mdp, action_probabilities(p, mdp));
      cache->est = run_alg2(mdp, p, eval.q_b, GradQbBackend::q1_substitution,
                            scfg);
      cache->iter = iter;
    }
    return cache->est;
  };

  const auto grad_fn = [&, sampled](const PolicyParams& p, int iter) -> Vec2 {
    if (cfg.mode == OptimMode::sampling) return sampled(p, iter).grad_b;
    return bias_gradient_thm1(mdp, p).total;
  };

  const auto precond_fn = [&, sampled](const PolicyParams& p,
                                       int iter) -> Mat2 {
    switch (scheme) {
      case BiasScheme::identity:
        return Mat2::Identity();
      case BiasScheme::hessian:
        return Mat2(-hessian_fd(FdObjective::bias, mdp, p));
      case BiasScheme::fisher_analytic:
        return bias_fisher_analytic(mdp, p);
      case BiasScheme::fisher_sampling:
        if (cfg.mode == OptimMode::sampling) return sampled(p, iter).fisher_b;
        return bias_fisher_sampling_enabler(mdp, p, cfg.t_abs_hat);
      case BiasScheme::devmat:
        return devmat_fisher(mdp, p);
    }
    return Mat2::Identity();
  };

  const auto objective_fn = [&](const Vec2& th) { return bias_at(mdp, th); };
  return ascend(mdp, params0, cfg.tol, cfg.max_iters, grad_fn, precond_fn,
                objective_fn, cfg.line_search);
}

OptimTrace optimize_penalty(const MdpModel& mdp, const PolicyParams& params0,
                            double phi, double tol, int max_iters) {
  const auto grad_fn = [&](const PolicyParams& p, int) -> Vec2 {
    const Vec2 grad_b = bias_gradient_thm1(mdp, p).total;
    const Vec2 grad_g = gain_gradient_exact(mdp, p);
    const Mat2 H = hessian_fd(FdObjective::gain, mdp, p);
    return grad_b - phi * H * grad_g;
  };
  const auto precond_fn = [](const PolicyParams&, int) -> Mat2 {
    return Mat2::Identity();
  };
  const auto objective_fn = [&](const Vec2& th) -> double {
    PolicyParams p;
    p.theta = th;
    const double b = bias_at(mdp, th);
    const Vec2 grad_g = gain_gradient_exact(mdp, p);
    return b - 0.5 * phi * grad_g.squaredNorm();
  };
  return ascend(mdp, params0, tol, max_iters, grad_fn, precond_fn,
                objective_fn, {});
}

OptimTrace optimize_discounted(const MdpModel& mdp,
                               const PolicyParams& params0, double gamma,
                               double tol, int max_iters) {
  const auto grad_fn = [&](const PolicyParams& p, int) -> Vec2 {
    return discounted_gradient_exact(mdp, p, gamma);
  };
  const auto precond_fn = [&](const PolicyParams& p, int) -> Mat2 {
    return discounted_fisher(mdp, p, gamma);
  };
  const auto objective_fn = [&](const Vec2& th) -> double {
    PolicyParams p;
    p.theta = th;
    const TabularPolicy policy = action_probabilities(p, mdp);
    const DiscountedBundle disc = discounted_value(mdp, policy, gamma);
    return disc.scaled_v[mdp.initial_state];
  };
  return ascend(mdp, params0, tol, max_iters, grad_fn, precond_fn,
                objective_fn, {});
}

}  // namespace nbwpg
