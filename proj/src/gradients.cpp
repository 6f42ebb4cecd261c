#include "nbwpg/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nbwpg {

namespace {

// sum_s w(s) sum_a pi(a|s) value(s, a) score(s, a)
Vec2 weighted_score_sum(const MdpModel& mdp, const PolicyParams& params,
                        const TabularPolicy& policy, const Vec& w,
                        const Mat& value) {
  Vec2 acc = Vec2::Zero();
  for (int s = 0; s < mdp.n_states; ++s) {
    if (w[s] == 0.0) continue;
    for (int a = 0; a < MdpModel::n_actions; ++a) {
      acc += w[s] * policy.probs(s, a) * value(s, a) * score(params, s, a);
    }
  }
  return acc;
}

Vec2 gain_gradient_from(const MdpModel& mdp, const PolicyParams& params,
                        const TabularPolicy& policy, const ChainAnalysis& chain,
                        const EvalBundle& eval) {
  return weighted_score_sum(mdp, params, policy, chain.p_star, eval.q_b);
}

}  // namespace

double angle_between(const Vec2& u, const Vec2& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  // Bitwise-equal vectors must report a zero angle; the normalized dot
  // product can otherwise land at 1 - O(eps) and acos turn that into 1e-8.
  if (u[0] == v[0] && u[1] == v[1]) return 0.0;
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return std::acos(c);
}

Vec2 gain_gradient_exact(const MdpModel& mdp, const PolicyParams& params) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const EvalBundle eval = evaluate(mdp, policy, chain);
  return gain_gradient_from(mdp, params, policy, chain, eval);
}

Vec2 postmix_q1(const MdpModel& mdp, const PolicyParams& params) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const EvalBundle eval = evaluate(mdp, policy, chain);
  return weighted_score_sum(mdp, params, policy, chain.p_star, eval.q1);
}

Vec2 postmix_qb(const MdpModel& mdp, const PolicyParams& params,
                double fd_step) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const EvalBundle eval = evaluate(mdp, policy, chain);

  // Central difference of the whole q_b table in each parameter.
  std::array<Mat, 2> dq;
  for (int i = 0; i < 2; ++i) {
    PolicyParams up = params;
    PolicyParams dn = params;
    up.theta[i] += fd_step;
    dn.theta[i] -= fd_step;
    const Mat q_up = evaluate(mdp, action_probabilities(up, mdp)).q_b;
    const Mat q_dn = evaluate(mdp, action_probabilities(dn, mdp)).q_b;
    dq[i] = (q_up - q_dn) / (2.0 * fd_step);
  }

  Vec2 acc = gain_gradient_from(mdp, params, policy, chain, eval);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < MdpModel::n_actions; ++a) {
      const double w = chain.p_star[s] * policy.probs(s, a);
      acc[0] += w * dq[0](s, a);
      acc[1] += w * dq[1](s, a);
    }
  }
  return acc;
}

Vec2 premix_term(const MdpModel& mdp, const PolicyParams& params, int t) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const EvalBundle eval = evaluate(mdp, policy, chain);
  const Vec p_t = t_step_distribution(chain, mdp.initial_state, t);
  return weighted_score_sum(mdp, params, policy, p_t, eval.q_b) -
         gain_gradient_from(mdp, params, policy, chain, eval);
}

BiasGradientBreakdown bias_gradient_thm1(const MdpModel& mdp,
                                         const PolicyParams& params,
                                         PostmixBackend backend,
                                         double fd_step) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const EvalBundle eval = evaluate(mdp, policy, chain);

  BiasGradientBreakdown out;
  out.t_mix = chain.t_mix;
  out.gain_grad = gain_gradient_from(mdp, params, policy, chain, eval);

  const int n = mdp.n_states;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
  row[mdp.initial_state] = 1.0;
  out.premix_terms.reserve(chain.t_mix);
  for (int t = 0; t < chain.t_mix; ++t) {
    const Vec p_t = row.transpose();
    out.premix_terms.push_back(
        weighted_score_sum(mdp, params, policy, p_t, eval.q_b) -
        out.gain_grad);
    row *= chain.P;
  }

  out.postmix_term =
      backend == PostmixBackend::q1
          ? weighted_score_sum(mdp, params, policy, chain.p_star, eval.q1)
          : postmix_qb(mdp, params, fd_step);

  Vec2 acc = Vec2::Zero();
  for (const Vec2& term : out.premix_terms) acc += term;
  out.total = acc + out.postmix_term;
  return out;
}

Vec2 discounted_gradient_exact(const MdpModel& mdp, const PolicyParams& params,
                               double gamma) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const DiscountedBundle disc = discounted_value(mdp, policy, gamma, chain);

  // Discounted visitation row of (I - gamma P)^{-1} from the start state,
  // normalized by (1 - gamma) into a distribution.
  const int n = mdp.n_states;
  Vec e0 = Vec::Zero(n);
  e0[mdp.initial_state] = 1.0;
  const Vec visitation =
      (Mat::Identity(n, n) - gamma * chain.P).transpose().partialPivLu().solve(
          e0);
  const Vec p_gamma = (1.0 - gamma) * visitation;
  return weighted_score_sum(mdp, params, policy, p_gamma, disc.q);
}

std::vector<DecompositionEntry> decomposition_diagnostic(
    const MdpModel& mdp, const PolicyParams& params) {
  const BiasGradientBreakdown bd = bias_gradient_thm1(mdp, params);
  std::vector<DecompositionEntry> out;
  out.reserve(bd.t_mix + 2);

  const auto push = [&](int t, const Vec2& partial) {
    out.push_back({t, angle_between(partial, bd.total),
                   std::abs(partial.norm() - bd.total.norm())});
  };

  Vec2 acc = Vec2::Zero();
  for (int t = 0; t < bd.t_mix; ++t) {
    acc += bd.premix_terms[t];
    push(t, acc);
  }
  // Same accumulation order as the breakdown total, so this entry is exact.
  push(bd.t_mix, Vec2(acc + bd.postmix_term));
  return out;
}

Mat2 hessian_fd_fn(const std::function<double(const Vec2&)>& f,
                   const Vec2& theta, double h) {
  const Vec2 t0 = theta;
  const double f0 = f(t0);
  Mat2 H;
  for (int i = 0; i < 2; ++i) {
    Vec2 up = t0, dn = t0;
    up[i] += h;
    dn[i] -= h;
    H(i, i) = (f(up) - 2.0 * f0 + f(dn)) / (h * h);
  }
  const auto shifted = [&](double di, double dj) {
    return f(Vec2(t0[0] + di, t0[1] + dj));
  };
  const double cross = (shifted(h, h) - shifted(h, -h) - shifted(-h, h) +
                        shifted(-h, -h)) /
                       (4.0 * h * h);
  H(0, 1) = cross;
  H(1, 0) = cross;
  return 0.5 * (H + H.transpose());
}

Mat2 hessian_fd(FdObjective objective, const MdpModel& mdp,
                const PolicyParams& params, double h,
                const BarrierContext* ctx) {
  if (objective == FdObjective::bias_barrier && ctx == nullptr) {
    throw std::invalid_argument("barrier objective needs a BarrierContext");
  }

  const auto f = [&](const Vec2& theta) -> double {
    PolicyParams p;
    p.theta = theta;
    const TabularPolicy policy = action_probabilities(p, mdp);
    const ChainAnalysis chain = induced_chain(mdp, policy);
    const EvalBundle eval = evaluate(mdp, policy, chain);
    switch (objective) {
      case FdObjective::gain:
        return eval.gain;
      case FdObjective::bias:
        return eval.bias[mdp.initial_state];
      case FdObjective::bias_barrier: {
        const double arg = eval.gain - ctx->g_star_eps + ctx->zeta;
        if (arg <= 0.0) return -std::numeric_limits<double>::infinity();
        return eval.bias[mdp.initial_state] + ctx->beta * std::log(arg);
      }
    }
    return 0.0;
  };

  return hessian_fd_fn(f, params.theta, h);
}

}  // namespace nbwpg
