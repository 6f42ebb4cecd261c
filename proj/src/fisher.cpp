#include "nbwpg/fisher.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

namespace nbwpg {

Mat2 action_fisher(const PolicyParams& params, int s) {
  Mat2 acc = Mat2::Zero();
  for (int a = 0; a < 2; ++a) {
    const double p = action_probability(params, s, a);
    const Vec2 sc = score(params, s, a);
    acc += p * sc * sc.transpose();
  }
  return acc;
}

namespace {

// sum_s w(s) F_a(s) for a generic nonnegative weighting of states.
Mat2 weighted_action_fisher(const MdpModel& mdp, const PolicyParams& params,
                            const Vec& w) {
  Mat2 acc = Mat2::Zero();
  for (int s = 0; s < mdp.n_states; ++s) {
    if (w[s] == 0.0) continue;
    acc += w[s] * action_fisher(params, s);
  }
  return acc;
}

}  // namespace

Mat2 gain_fisher(const MdpModel& mdp, const PolicyParams& params) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  return weighted_action_fisher(mdp, params, chain.p_star);
}

Mat2 bias_fisher_analytic(const MdpModel& mdp, const PolicyParams& params) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const int n = mdp.n_states;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
  row[mdp.initial_state] = 1.0;
  Mat2 acc = Mat2::Zero();
  for (int t = 0; t <= chain.t_mix; ++t) {
    Vec w(n);
    for (int s = 0; s < n; ++s) w[s] = std::abs(row[s] - chain.p_star[s]);
    acc += weighted_action_fisher(mdp, params, w);
    row *= chain.P;
  }
  return acc;
}

Mat2 bias_fisher_sampling_enabler(const MdpModel& mdp,
                                  const PolicyParams& params, int t_abs_hat) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const int n = mdp.n_states;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
  row[mdp.initial_state] = 1.0;
  Mat2 acc = Mat2::Zero();
  for (int t = 0; t < t_abs_hat; ++t) {
    acc += weighted_action_fisher(mdp, params, row.transpose());
    row *= chain.P;
  }
  acc += static_cast<double>(t_abs_hat) *
         weighted_action_fisher(mdp, params, chain.p_star);
  return acc;
}

Mat2 devmat_fisher(const MdpModel& mdp, const PolicyParams& params) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  Vec w = chain.D.row(mdp.initial_state).transpose().cwiseAbs();
  return weighted_action_fisher(mdp, params, w);
}

Mat2 trajectory_fisher(const MdpModel& mdp, const PolicyParams& params,
                       long len) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const int n = mdp.n_states;

  // Precompute the per-state matrices once; the time loop then only mixes
  // them with the evolving state distribution.
  std::vector<Mat2> per_state(n);
  for (int s = 0; s < n; ++s) per_state[s] = action_fisher(params, s);

  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
  row[mdp.initial_state] = 1.0;
  Mat2 acc = Mat2::Zero();
  for (long t = 0; t < len; ++t) {
    for (int s = 0; s < n; ++s) {
      if (row[s] != 0.0) acc += row[s] * per_state[s];
    }
    row *= chain.P;
  }
  return acc;
}

Mat2 discounted_fisher(const MdpModel& mdp, const PolicyParams& params,
                       double gamma) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const int n = mdp.n_states;
  Vec e0 = Vec::Zero(n);
  e0[mdp.initial_state] = 1.0;
  const Vec visitation =
      (Mat::Identity(n, n) - gamma * chain.P).transpose().partialPivLu().solve(
          e0);
  return weighted_action_fisher(mdp, params, Vec((1.0 - gamma) * visitation));
}

PdRepair ensure_positive_definite(const Mat2& m, double jitter0) {
  double jitter = 0.0;
  while (true) {
    const Mat2 candidate = m + jitter * Mat2::Identity();
    Eigen::LLT<Mat2> llt(candidate);
    if (llt.info() == Eigen::Success) {
      return {candidate, jitter};
    }
    jitter = jitter == 0.0 ? jitter0 : jitter * 10.0;
    if (jitter > 1e6) {
      throw std::runtime_error(
          "could not repair matrix to positive definite within jitter 1e6");
    }
  }
}

}  // namespace nbwpg
