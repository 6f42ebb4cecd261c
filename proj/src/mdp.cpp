#include "nbwpg/mdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nbwpg {

void validate_model(const MdpModel& mdp, double tol) {
  if (mdp.n_states <= 0) {
    throw std::invalid_argument("model has no states");
  }
  for (int a = 0; a < MdpModel::n_actions; ++a) {
    if (mdp.transition[a].rows() != mdp.n_states ||
        mdp.transition[a].cols() != mdp.n_states) {
      throw std::invalid_argument("transition matrix for action " +
                                  std::to_string(a) + " is not " +
                                  std::to_string(mdp.n_states) + " square");
    }
  }
  if (mdp.reward.rows() != mdp.n_states || mdp.reward.cols() != 2) {
    throw std::invalid_argument("reward table is not n_states x 2");
  }
  if (mdp.initial_state < 0 || mdp.initial_state >= mdp.n_states) {
    throw std::invalid_argument("initial state out of range");
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < MdpModel::n_actions; ++a) {
      double sum = 0.0;
      for (int t = 0; t < mdp.n_states; ++t) {
        const double p = mdp.transition[a](s, t);
        if (p < -tol || !std::isfinite(p)) {
          throw std::invalid_argument(
              "negative or non-finite transition probability at state " +
              std::to_string(s) + ", action " + std::to_string(a));
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > tol) {
        throw std::invalid_argument(
            "transition row does not sum to 1 at state " + std::to_string(s) +
            ", action " + std::to_string(a) + " (sum = " +
            std::to_string(sum) + ")");
      }
    }
  }
}

namespace {

// Unique stationary distribution of a unichain transition matrix, found by
// replacing one balance equation with the normalization constraint.
Vec stationary_distribution(const Mat& P) {
  const int n = static_cast<int>(P.rows());
  Mat A = P.transpose() - Mat::Identity(n, n);
  A.row(n - 1).setOnes();
  Vec b = Vec::Zero(n);
  b[n - 1] = 1.0;
  Vec p = A.colPivHouseholderQr().solve(b);
  // Round off tiny negatives from the solve and renormalize.
  for (int i = 0; i < n; ++i) p[i] = std::max(p[i], 0.0);
  const double total = p.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::runtime_error("stationary distribution solve failed");
  }
  return p / total;
}

int mixing_time_from(const Mat& P, const Vec& p_star, int s0) {
  const int n = static_cast<int>(P.rows());
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
  row[s0] = 1.0;
  for (int t = 0; t <= kMixCap; ++t) {
    bool close = true;
    for (int i = 0; i < n; ++i) {
      if (std::abs(p_star[i] - row[i]) > kMixAtol + kMixRtol * row[i]) {
        close = false;
        break;
      }
    }
    if (close) return t;
    if (t < kMixCap) row *= P;
  }
  return kMixCap;
}

}  // namespace

ChainAnalysis induced_chain(const MdpModel& mdp, const TabularPolicy& policy,
                            const MixingOptions& opts) {
  const int n = mdp.n_states;
  ChainAnalysis chain;
  chain.P = Mat::Zero(n, n);
  chain.r_pi = Vec::Zero(n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < MdpModel::n_actions; ++a) {
      const double w = policy.probs(s, a);
      chain.P.row(s) += w * mdp.transition[a].row(s);
      chain.r_pi[s] += w * mdp.reward(s, a);
    }
  }

  chain.p_star = stationary_distribution(chain.P);
  chain.P_star = Vec::Ones(n) * chain.p_star.transpose();

  // Deviation matrix via the fundamental matrix Z = (I - P + P*)^{-1}:
  // D = Z (I - P*).
  const Mat Z =
      (Mat::Identity(n, n) - chain.P + chain.P_star).partialPivLu().solve(
          Mat::Identity(n, n));
  chain.D = Z * (Mat::Identity(n, n) - chain.P_star);

  if (opts.worst_case_over_starts) {
    int worst = 0;
    for (int s0 = 0; s0 < n; ++s0) {
      worst = std::max(worst, mixing_time_from(chain.P, chain.p_star, s0));
    }
    chain.t_mix = worst;
  } else {
    chain.t_mix = mixing_time_from(chain.P, chain.p_star, mdp.initial_state);
  }
  return chain;
}

Vec t_step_distribution(const ChainAnalysis& chain, int s0, int t) {
  const int n = static_cast<int>(chain.P.rows());
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
  row[s0] = 1.0;
  for (int k = 0; k < t; ++k) row *= chain.P;
  return row.transpose();
}

}  // namespace nbwpg
