#include "nbwpg/sampling.hpp"

#include <stdexcept>

namespace nbwpg {

namespace {

int sample_from_row(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                    Xoshiro256pp& rng) {
  const double u = rng.next_double();
  double cum = 0.0;
  const int n = static_cast<int>(row.size());
  for (int i = 0; i < n; ++i) {
    cum += row[i];
    if (u < cum) return i;
  }
  return n - 1;
}

}  // namespace

std::vector<StepRecord> simulate_episode(const MdpModel& mdp,
                                         const TabularPolicy& policy,
                                         int t_max, Xoshiro256pp& rng) {
  std::vector<StepRecord> steps;
  steps.reserve(t_max + 1);
  int s = mdp.initial_state;
  for (int t = 0; t <= t_max; ++t) {
    const int a = rng.next_double() < policy.probs(s, 0) ? 0 : 1;
    const int s_next = sample_from_row(mdp.transition[a].row(s), rng);
    steps.push_back({s, a, mdp.reward(s, a), s_next});
    s = s_next;
  }
  return steps;
}

GradFisherEstimate run_alg2(const MdpModel& mdp, const PolicyParams& params,
                            const Mat& q_b, GradQbBackend backend,
                            const SamplingConfig& cfg) {
  const TabularPolicy policy = action_probabilities(params, mdp);
  const ChainAnalysis chain = induced_chain(mdp, policy);
  const int t_xepmax = cfg.t_xepmax >= 0 ? cfg.t_xepmax : chain.t_mix + 5;
  if (t_xepmax < 1 || cfg.n_xep < 1) {
    throw std::invalid_argument("need t_xepmax >= 1 and at least one episode");
  }

  // Exact ingredients of the terminal correction, shared by all episodes.
  Mat q1_table;
  Vec2 grad_g_exact = Vec2::Zero();
  std::array<Mat, 2> dq;
  if (backend == GradQbBackend::q1_substitution) {
    const EvalBundle eval = evaluate(mdp, policy, chain);
    q1_table = eval.q1;
    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < MdpModel::n_actions; ++a) {
        grad_g_exact += chain.p_star[s] * policy.probs(s, a) * eval.q_b(s, a) *
                        score(params, s, a);
      }
    }
  } else {
    for (int i = 0; i < 2; ++i) {
      PolicyParams up = params;
      PolicyParams dn = params;
      up.theta[i] += cfg.fd_step;
      dn.theta[i] -= cfg.fd_step;
      const Mat q_up = evaluate(mdp, action_probabilities(up, mdp)).q_b;
      const Mat q_dn = evaluate(mdp, action_probabilities(dn, mdp)).q_b;
      dq[i] = (q_up - q_dn) / (2.0 * cfg.fd_step);
    }
  }

  GradFisherEstimate out;
  out.t_xepmax = t_xepmax;
  out.per_episode.reserve(cfg.n_xep);

  for (int e = 0; e < cfg.n_xep; ++e) {
    Xoshiro256pp rng = substream(cfg.seed, static_cast<std::uint64_t>(e));
    const std::vector<StepRecord> steps =
        simulate_episode(mdp, policy, t_xepmax, rng);

    EpisodeSample smp;
    smp.grad_g = Vec2::Zero();
    smp.grad_b = Vec2::Zero();
    smp.fisher_g = Mat2::Zero();
    smp.fisher_b = Mat2::Zero();

    for (int t = 0; t <= t_xepmax; ++t) {
      const StepRecord& rec = steps[t];
      const Vec2 sc = score(params, rec.s, rec.a);
      const Vec2 z = q_b(rec.s, rec.a) * sc;
      const Mat2 X = sc * sc.transpose();
      if (t < t_xepmax) smp.grad_b += z;
      if (t < cfg.t_abs_hat) smp.fisher_b += X;
      if (t == t_xepmax) {
        smp.grad_g = z;
        smp.fisher_g = X;
        const Vec2 w = backend == GradQbBackend::q1_substitution
                           ? Vec2(q1_table(rec.s, rec.a) * sc - grad_g_exact)
                           : Vec2(dq[0](rec.s, rec.a), dq[1](rec.s, rec.a));
        smp.grad_b += w - static_cast<double>(t_xepmax - 1) * z;
        smp.fisher_b += static_cast<double>(cfg.t_abs_hat) * X;
      }
    }
    out.per_episode.push_back(smp);
  }

  out.grad_g = Vec2::Zero();
  out.grad_b = Vec2::Zero();
  out.fisher_g = Mat2::Zero();
  out.fisher_b = Mat2::Zero();
  for (const EpisodeSample& smp : out.per_episode) {
    out.grad_g += smp.grad_g;
    out.grad_b += smp.grad_b;
    out.fisher_g += smp.fisher_g;
    out.fisher_b += smp.fisher_b;
  }
  const double inv = 1.0 / static_cast<double>(cfg.n_xep);
  out.grad_g *= inv;
  out.grad_b *= inv;
  out.fisher_g *= inv;
  out.fisher_b *= inv;
  return out;
}

}  // namespace nbwpg
