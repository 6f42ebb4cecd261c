// Python surface over the core library: environments, exact evaluation,
// gradients, Fishers, the sampling estimator, and the optimizers.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nbwpg/commands.hpp"

namespace py = pybind11;
using namespace nbwpg;

namespace {

PolicyParams params_from(const Vec2& theta) {
  PolicyParams p;
  p.theta = theta;
  return p;
}

py::dict trace_to_dict(const OptimTrace& trace) {
  py::dict d;
  d["final_theta"] = trace.final_theta;
  d["final_gain"] = trace.final_gain;
  d["final_bias"] = trace.final_bias_s0;
  d["g_star_eps"] = trace.g_star_eps;
  d["switched"] = trace.switched;
  d["switch_iteration"] = trace.switch_iteration;
  d["iterations"] = trace.rows.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Exact and sampling-based policy gradients toward nearly Blackwell "
      "optimal policies in finite average-reward MDPs";

  py::class_<MdpModel>(m, "MdpModel")
      .def(py::init<>())
      .def_readwrite("n_states", &MdpModel::n_states)
      .def_readwrite("reward", &MdpModel::reward)
      .def_readwrite("initial_state", &MdpModel::initial_state)
      .def_property(
          "transition",
          [](const MdpModel& mdp) {
            return py::make_tuple(mdp.transition[0], mdp.transition[1]);
          },
          [](MdpModel& mdp, const std::pair<Mat, Mat>& t) {
            mdp.transition[0] = t.first;
            mdp.transition[1] = t.second;
          },
          "pair of per-action transition matrices (P_a0, P_a1)");

  m.def("validate_model", &validate_model, py::arg("mdp"),
        py::arg("tol") = 1e-9);

  py::class_<EnvCatalogEntry>(m, "Env")
      .def_readonly("name", &EnvCatalogEntry::name)
      .def_readonly("model", &EnvCatalogEntry::model)
      .def_readonly("default_beta0", &EnvCatalogEntry::default_beta0)
      .def_property_readonly("reconstructed", [](const EnvCatalogEntry& e) {
        return e.provenance == Provenance::reconstructed;
      });

  m.def("builtin", &builtin, py::arg("name"),
        "look up a built-in environment (A1..B3)");
  m.def("builtin_names", &builtin_names);
  m.def("load_env", &load_env, py::arg("path"));
  m.def("save_env", &save_env, py::arg("env"), py::arg("path"));

  m.def(
      "enumerate_deterministic",
      [](const MdpModel& mdp) {
        const EnumerationTable t = enumerate_deterministic(mdp);
        py::dict d;
        py::list rows;
        for (const DetPolicyRow& r : t.rows) {
          py::dict row;
          row["actions"] = r.actions;
          row["gain"] = r.gain;
          row["bias_s0"] = r.bias_s0;
          rows.append(row);
        }
        d["rows"] = rows;
        d["distinct_gains"] = t.distinct_gains;
        d["distinct_biases"] = t.distinct_biases;
        d["gain_optimal_indices"] = t.gain_optimal_indices;
        d["nbw_indices"] = t.nbw_indices;
        d["nbw_bias"] = t.nbw_bias;
        return d;
      },
      py::arg("mdp"), "exact table over all 2^n deterministic policies");

  m.def(
      "action_probabilities",
      [](const Vec2& theta, const MdpModel& mdp) {
        return action_probabilities(params_from(theta), mdp).probs;
      },
      py::arg("theta"), py::arg("mdp"));

  m.def(
      "induced_chain",
      [](const MdpModel& mdp, const Vec2& theta) {
        const ChainAnalysis c =
            induced_chain(mdp, action_probabilities(params_from(theta), mdp));
        py::dict d;
        d["P"] = c.P;
        d["P_star"] = c.P_star;
        d["p_star"] = c.p_star;
        d["D"] = c.D;
        d["t_mix"] = c.t_mix;
        d["r_pi"] = c.r_pi;
        return d;
      },
      py::arg("mdp"), py::arg("theta"));

  m.def(
      "evaluate",
      [](const MdpModel& mdp, const Vec2& theta) {
        const EvalBundle e =
            evaluate(mdp, action_probabilities(params_from(theta), mdp));
        py::dict d;
        d["gain"] = e.gain;
        d["bias"] = e.bias;
        d["q_b"] = e.q_b;
        d["v1"] = e.v1;
        d["q1"] = e.q1;
        return d;
      },
      py::arg("mdp"), py::arg("theta"));

  m.def(
      "discounted_value",
      [](const MdpModel& mdp, const Vec2& theta, double gamma) {
        const DiscountedBundle e = discounted_value(
            mdp, action_probabilities(params_from(theta), mdp), gamma);
        py::dict d;
        d["v"] = e.v;
        d["q"] = e.q;
        d["scaled_v"] = e.scaled_v;
        return d;
      },
      py::arg("mdp"), py::arg("theta"), py::arg("gamma"));

  m.def(
      "gain_gradient",
      [](const MdpModel& mdp, const Vec2& theta) {
        return gain_gradient_exact(mdp, params_from(theta));
      },
      py::arg("mdp"), py::arg("theta"));

  m.def(
      "bias_gradient",
      [](const MdpModel& mdp, const Vec2& theta) {
        const BiasGradientBreakdown b =
            bias_gradient_thm1(mdp, params_from(theta));
        py::dict d;
        d["total"] = b.total;
        d["premix_terms"] = b.premix_terms;
        d["postmix_term"] = b.postmix_term;
        d["gain_grad"] = b.gain_grad;
        d["t_mix"] = b.t_mix;
        return d;
      },
      py::arg("mdp"), py::arg("theta"));

  m.def(
      "discounted_gradient",
      [](const MdpModel& mdp, const Vec2& theta, double gamma) {
        return discounted_gradient_exact(mdp, params_from(theta), gamma);
      },
      py::arg("mdp"), py::arg("theta"), py::arg("gamma"));

  m.def(
      "gain_fisher",
      [](const MdpModel& mdp, const Vec2& theta) {
        return gain_fisher(mdp, params_from(theta));
      },
      py::arg("mdp"), py::arg("theta"));
  m.def(
      "bias_fisher_analytic",
      [](const MdpModel& mdp, const Vec2& theta) {
        return bias_fisher_analytic(mdp, params_from(theta));
      },
      py::arg("mdp"), py::arg("theta"));
  m.def(
      "bias_fisher_sampling_enabler",
      [](const MdpModel& mdp, const Vec2& theta, int t_abs_hat) {
        return bias_fisher_sampling_enabler(mdp, params_from(theta),
                                            t_abs_hat);
      },
      py::arg("mdp"), py::arg("theta"), py::arg("t_abs_hat") = 2);
  m.def(
      "devmat_fisher",
      [](const MdpModel& mdp, const Vec2& theta) {
        return devmat_fisher(mdp, params_from(theta));
      },
      py::arg("mdp"), py::arg("theta"));
  m.def(
      "discounted_fisher",
      [](const MdpModel& mdp, const Vec2& theta, double gamma) {
        return discounted_fisher(mdp, params_from(theta), gamma);
      },
      py::arg("mdp"), py::arg("theta"), py::arg("gamma"));

  m.def(
      "run_alg2",
      [](const MdpModel& mdp, const Vec2& theta, int n_xep, int t_xepmax,
         std::uint64_t seed) {
        const PolicyParams p = params_from(theta);
        const EvalBundle eval =
            evaluate(mdp, action_probabilities(p, mdp));
        SamplingConfig cfg;
        cfg.n_xep = n_xep;
        cfg.t_xepmax = t_xepmax;
        cfg.seed = seed;
        const GradFisherEstimate e =
            run_alg2(mdp, p, eval.q_b, GradQbBackend::q1_substitution, cfg);
        py::dict d;
        d["grad_g"] = e.grad_g;
        d["grad_b"] = e.grad_b;
        d["fisher_g"] = e.fisher_g;
        d["fisher_b"] = e.fisher_b;
        d["t_xepmax"] = e.t_xepmax;
        d["n_xep"] = e.per_episode.size();
        return d;
      },
      py::arg("mdp"), py::arg("theta"), py::arg("n_xep") = 16,
      py::arg("t_xepmax") = -1, py::arg("seed") = 0,
      "single-trajectory estimates of the gradients and Fishers");

  m.def(
      "optimize_nbw",
      [](const MdpModel& mdp, const Vec2& theta, double beta0,
         const std::string& mode, std::uint64_t seed) {
        OptimConfig cfg;
        cfg.beta0 = beta0;
        cfg.mode = parse_mode(mode);
        cfg.sampling.seed = seed;
        return trace_to_dict(optimize_nbw(mdp, params_from(theta), cfg));
      },
      py::arg("mdp"), py::arg("theta"), py::arg("beta0") = 0.1,
      py::arg("mode") = "exact", py::arg("seed") = 0);

  m.def(
      "optimize_bias_only",
      [](const MdpModel& mdp, const Vec2& theta, const std::string& scheme,
         const std::string& mode, std::uint64_t seed) {
        BiasOnlyConfig cfg;
        cfg.mode = parse_mode(mode);
        cfg.sampling.seed = seed;
        return trace_to_dict(optimize_bias_only(mdp, params_from(theta),
                                                parse_scheme(scheme), cfg));
      },
      py::arg("mdp"), py::arg("theta"), py::arg("scheme") = "identity",
      py::arg("mode") = "exact", py::arg("seed") = 0);

  m.def(
      "optimize_penalty",
      [](const MdpModel& mdp, const Vec2& theta, double phi) {
        return trace_to_dict(optimize_penalty(mdp, params_from(theta), phi));
      },
      py::arg("mdp"), py::arg("theta"), py::arg("phi") = 1.0);

  m.def(
      "optimize_discounted",
      [](const MdpModel& mdp, const Vec2& theta, double gamma) {
        return trace_to_dict(
            optimize_discounted(mdp, params_from(theta), gamma));
      },
      py::arg("mdp"), py::arg("theta"), py::arg("gamma") = 0.99999);

  m.def(
      "sweep",
      [](const std::string& env_name, const std::string& method, double min,
         double max, double step, const std::string& mode, std::uint64_t seed,
         std::optional<double> beta0, double gamma, double phi, int threads) {
        SweepOptions opts;
        opts.env = env_name;
        opts.method = parse_method(method);
        opts.mode = parse_mode(mode);
        opts.seed = seed;
        opts.beta0 = beta0;
        opts.gamma = gamma;
        opts.phi = phi;
        opts.grid = GridSpec{min, max, step};
        opts.threads = threads;
        const EnvCatalogEntry env = resolve_env(env_name);
        const SweepResult r = run_sweep(opts, env);
        py::dict d;
        d["n_cells"] = r.cells.size();
        d["nbw_bias_target"] = r.nbw_bias_target;
        d["mean_abs_bias_diff"] = r.mean_abs_bias_diff;
        d["std_abs_bias_diff"] = r.std_abs_bias_diff;
        return d;
      },
      py::arg("env"), py::arg("method") = "nbw", py::arg("grid_min") = -10.0,
      py::arg("grid_max") = 10.0, py::arg("grid_step") = 0.5,
      py::arg("mode") = "exact", py::arg("seed") = 0,
      py::arg("beta0") = std::nullopt, py::arg("gamma") = 0.99999,
      py::arg("phi") = 1.0, py::arg("threads") = 0,
      "in-memory parameter sweep; returns the summary statistics");
}
