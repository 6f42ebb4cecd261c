#include "nbwpg/envs.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "nbwpg/eval.hpp"

namespace nbwpg {

namespace {

using nlohmann::json;

MdpModel blank_model(int n, int initial_state) {
  MdpModel m;
  m.n_states = n;
  m.transition[0] = Mat::Zero(n, n);
  m.transition[1] = Mat::Zero(n, n);
  m.reward = Mat::Zero(n, 2);
  m.initial_state = initial_state;
  return m;
}

EnvCatalogEntry make_a1() {
  EnvCatalogEntry env;
  env.name = "A1";
  env.provenance = Provenance::full;
  env.default_beta0 = 0.1;
  MdpModel m = blank_model(2, 0);
  m.transition[0](0, 0) = 0.5;
  m.transition[0](0, 1) = 0.5;
  m.reward(0, 0) = 5.0;
  m.transition[1](0, 1) = 1.0;
  m.reward(0, 1) = 10.0;
  for (int a = 0; a < 2; ++a) {
    m.transition[a](1, 1) = 1.0;
    m.reward(1, a) = -1.0;
  }
  env.model = m;
  env.expected.gains = {-1.0};
  env.expected.biases = {11.0, 12.0};
  env.expected.n_distinct_gains = 1;
  env.expected.n_distinct_biases = 2;
  env.expected.gain_min = -1.0;
  env.expected.gain_max = -1.0;
  env.expected.bias_min = 11.0;
  env.expected.bias_max = 12.0;
  env.expected.nbw_bias = 12.0;
  env.expected.n_nbw = 2;
  env.expected.tol = 1e-9;
  return env;
}

EnvCatalogEntry make_a2() {
  EnvCatalogEntry env;
  env.name = "A2";
  env.provenance = Provenance::full;
  env.default_beta0 = 0.1;
  MdpModel m = blank_model(5, 0);
  m.transition[0](0, 1) = 1.0;
  m.reward(0, 0) = 1.0;
  m.transition[1](0, 2) = 1.0;
  m.reward(0, 1) = 0.0;
  for (int a = 0; a < 2; ++a) {
    m.transition[a](1, 3) = 1.0;
    m.reward(1, a) = 1.0;
    m.transition[a](2, 3) = 1.0;
    m.reward(2, a) = 3.0;
    m.transition[a](4, 4) = 1.0;
    m.reward(4, a) = 0.0;
  }
  m.transition[0](3, 4) = 1.0;
  m.reward(3, 0) = 3.0;
  m.transition[1](3, 4) = 1.0;
  m.reward(3, 1) = 0.0;
  env.model = m;
  env.expected.gains = {0.0};
  env.expected.biases = {2.0, 3.0, 5.0, 6.0};
  env.expected.n_distinct_gains = 1;
  env.expected.n_distinct_biases = 4;
  env.expected.gain_min = 0.0;
  env.expected.gain_max = 0.0;
  env.expected.bias_min = 2.0;
  env.expected.bias_max = 6.0;
  env.expected.nbw_bias = 6.0;
  env.expected.n_nbw = 8;
  env.expected.tol = 1e-9;
  return env;
}

// Four-room corridor on a 2x2 grid with 0.9/0.1 action slip. Action 0 moves
// toward one neighbor, action 1 toward the other; the slip lands on the
// destination the other action targets. Each step costs 1 and arriving at
// the terminal corner pays 3, so rewards marginalize to -1, -0.7, or 1.7.
EnvCatalogEntry make_a3() {
  EnvCatalogEntry env;
  env.name = "A3";
  env.provenance = Provenance::reconstructed;
  env.default_beta0 = 0.1;
  MdpModel m = blank_model(4, 0);
  const auto slip_pair = [&](int s, int dest0, int dest1) {
    m.transition[0](s, dest0) = 0.9;
    m.transition[0](s, dest1) = 0.1;
    m.transition[1](s, dest1) = 0.9;
    m.transition[1](s, dest0) = 0.1;
    for (int a = 0; a < 2; ++a) {
      double r = -1.0;
      if (dest0 == 3) r += 3.0 * m.transition[a](s, 3);
      if (dest1 == 3) r += 3.0 * m.transition[a](s, 3);
      m.reward(s, a) = r;
    }
  };
  slip_pair(0, 1, 2);  // east to s1 or north to s2
  slip_pair(1, 0, 3);  // west back or north to the goal
  slip_pair(2, 3, 0);  // east to the goal or south back
  for (int a = 0; a < 2; ++a) {
    m.transition[a](3, 3) = 1.0;
    m.reward(3, a) = 0.0;
  }
  env.model = m;
  env.expected.gains = {0.0};
  env.expected.n_distinct_gains = 1;
  // Published claim; the symmetric slip model admits only 4 distinct values,
  // so the table check reports the measured count against this one.
  env.expected.n_distinct_biases = 6;
  env.expected.gain_min = 0.0;
  env.expected.gain_max = 0.0;
  env.expected.bias_min = -17.0;
  env.expected.bias_max = 0.778;
  env.expected.nbw_bias = 0.778;
  env.expected.n_nbw = 4;
  env.expected.tol = 1e-3;
  return env;
}

EnvCatalogEntry make_b1() {
  EnvCatalogEntry env;
  env.name = "B1";
  env.provenance = Provenance::full;
  env.default_beta0 = 100.0;
  MdpModel m = blank_model(2, 0);
  m.transition[0](0, 1) = 1.0;
  m.reward(0, 0) = 1.0;
  m.transition[1](0, 1) = 1.0;
  m.reward(0, 1) = 3.0;
  m.transition[0](1, 0) = 0.5;
  m.transition[0](1, 1) = 0.5;
  m.reward(1, 0) = 0.5;
  m.transition[1](1, 1) = 1.0;
  m.reward(1, 1) = 4.0;
  env.model = m;
  env.expected.gains = {0.67, 1.33, 4.0};
  env.expected.biases = {-3.0, -1.0, 0.22, 1.11};
  env.expected.n_distinct_gains = 3;
  env.expected.n_distinct_biases = 4;
  env.expected.gain_min = 0.67;
  env.expected.gain_max = 4.0;
  env.expected.bias_min = -3.0;
  env.expected.bias_max = 1.11;
  env.expected.nbw_bias = -1.0;
  env.expected.n_nbw = 1;
  env.expected.tol = 5e-3;
  return env;
}

// Two transient routing states feeding the three-town taxi loop, keeping
// the first two alternatives of each town.
EnvCatalogEntry make_b2() {
  EnvCatalogEntry env;
  env.name = "B2";
  env.provenance = Provenance::reconstructed;
  env.default_beta0 = 100.0;
  MdpModel m = blank_model(5, 0);
  // 0 start, 1 pickup, 2..4 towns.
  m.transition[0](0, 1) = 1.0;
  m.reward(0, 0) = 5.0;
  m.transition[1](0, 2) = 1.0;
  m.reward(0, 1) = 25.0;
  for (int a = 0; a < 2; ++a) {
    m.transition[a](1, 2) = 1.0;
    m.reward(1, a) = 50.0;
  }
  const auto town = [&](int s, int a, double p1, double p2, double p3,
                        double r) {
    m.transition[a](s, 2) = p1;
    m.transition[a](s, 3) = p2;
    m.transition[a](s, 4) = p3;
    m.reward(s, a) = r;
  };
  town(2, 0, 0.5, 0.25, 0.25, 8.0);
  town(2, 1, 1.0 / 16.0, 0.75, 3.0 / 16.0, 2.75);
  town(3, 0, 0.5, 0.0, 0.5, 16.0);
  town(3, 1, 1.0 / 16.0, 7.0 / 8.0, 1.0 / 16.0, 15.0);
  town(4, 0, 0.25, 0.25, 0.5, 7.0);
  town(4, 1, 1.0 / 8.0, 0.75, 1.0 / 8.0, 4.0);
  env.model = m;
  env.expected.n_distinct_gains = 8;
  env.expected.n_distinct_biases = 16;
  env.expected.gain_min = 8.621;
  env.expected.gain_max = 13.345;
  env.expected.bias_min = -1.683;
  env.expected.bias_max = 35.907;
  env.expected.nbw_bias = 16.367;
  env.expected.n_nbw = 2;
  env.expected.tol = 1e-3;
  return env;
}

// Two transient routing states feeding a five-link chain where action 0
// advances with probability 0.8 and action 1 mostly resets; resets pay 2,
// holding the last link pays 10.
EnvCatalogEntry make_b3() {
  EnvCatalogEntry env;
  env.name = "B3";
  env.provenance = Provenance::reconstructed;
  env.default_beta0 = 100.0;
  MdpModel m = blank_model(7, 0);
  // 0 start, 1 gateway, 2..6 chain links.
  m.transition[0](0, 1) = 1.0;
  m.reward(0, 0) = 5.0;
  m.transition[1](0, 1) = 1.0;
  m.reward(0, 1) = 10.0;
  m.transition[0](1, 2) = 1.0;
  m.reward(1, 0) = 8.0;
  m.transition[1](1, 2) = 1.0;
  m.reward(1, 1) = 1.0;
  for (int i = 0; i < 5; ++i) {
    const int s = 2 + i;
    const int fwd = i < 4 ? s + 1 : s;  // the last link holds instead
    const double fwd_reward = i < 4 ? 0.0 : 10.0;
    // action 0: mostly forward, slip resets to the first link for 2
    m.transition[0](s, fwd) += 0.8;
    m.transition[0](s, 2) += 0.2;
    m.reward(s, 0) = 0.8 * fwd_reward + 0.2 * 2.0;
    // action 1: mostly reset, slip goes forward
    m.transition[1](s, 2) += 0.8;
    m.transition[1](s, fwd) += 0.2;
    m.reward(s, 1) = 0.8 * 2.0 + 0.2 * fwd_reward;
  }
  env.model = m;
  env.expected.n_distinct_gains = 32;
  env.expected.n_distinct_biases = 128;
  env.expected.gain_min = 0.732;
  env.expected.gain_max = 3.677;
  env.expected.bias_min = -14.461;
  env.expected.bias_max = 15.871;
  env.expected.nbw_bias = -2.461;
  env.expected.n_nbw = 1;
  env.expected.tol = 1e-3;
  return env;
}

// Canonical lookup key: uppercase, tolerate an optional "ENV" prefix and
// '_' / '-' separators, so "A1", "env_a1", and "Env-A1" all resolve alike.
std::string canonical_env_key(const std::string& name) {
  std::string key;
  for (char raw : name) {
    const auto c = static_cast<unsigned char>(raw);
    if (c == '_' || c == '-' || std::isspace(c)) continue;
    key.push_back(static_cast<char>(std::toupper(c)));
  }
  if (key.rfind("ENV", 0) == 0) key.erase(0, 3);
  return key;
}

}  // namespace

EnvCatalogEntry builtin(const std::string& name) {
  const std::string key = canonical_env_key(name);
  if (key == "A1") return make_a1();
  if (key == "A2") return make_a2();
  if (key == "A3") return make_a3();
  if (key == "B1") return make_b1();
  if (key == "B2") return make_b2();
  if (key == "B3") return make_b3();
  throw std::invalid_argument("unknown built-in environment: " + name);
}

std::vector<std::string> builtin_names() {
  return {"A1", "A2", "A3", "B1", "B2", "B3"};
}

namespace {

std::vector<double> distinct_sorted(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  for (double v : values) {
    if (out.empty() || v - out.back() > kValueDedupTol) out.push_back(v);
  }
  return out;
}

}  // namespace

EnumerationTable enumerate_deterministic(const MdpModel& mdp) {
  const int n = mdp.n_states;
  if (n > 20) {
    throw std::invalid_argument("too many states to enumerate");
  }
  EnumerationTable table;
  const std::size_t count = std::size_t{1} << n;
  table.rows.reserve(count);

  std::vector<double> gains, biases;
  for (std::size_t mask = 0; mask < count; ++mask) {
    TabularPolicy policy;
    policy.probs = Mat::Zero(n, 2);
    DetPolicyRow row;
    row.actions.resize(n);
    for (int s = 0; s < n; ++s) {
      const int a = static_cast<int>((mask >> s) & 1U);
      row.actions[s] = a;
      policy.probs(s, a) = 1.0;
    }
    const EvalBundle eval = evaluate(mdp, policy);
    row.gain = eval.gain;
    row.bias_s0 = eval.bias[mdp.initial_state];
    gains.push_back(row.gain);
    biases.push_back(row.bias_s0);
    table.rows.push_back(std::move(row));
  }

  table.distinct_gains = distinct_sorted(gains);
  table.distinct_biases = distinct_sorted(biases);

  const double best_gain =
      *std::max_element(gains.begin(), gains.end());
  double best_bias = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    if (gains[i] >= best_gain - kValueDedupTol) {
      table.gain_optimal_indices.push_back(i);
      best_bias = std::max(best_bias, biases[i]);
    }
  }
  for (std::size_t i : table.gain_optimal_indices) {
    if (biases[i] >= best_bias - kValueDedupTol) {
      table.nbw_indices.push_back(i);
    }
  }
  table.nbw_bias = best_bias;
  return table;
}

EnvCatalogEntry load_env(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open environment file: " + path);
  }
  json j;
  in >> j;
  if (!j.contains("format") || j["format"].get<int>() != 1) {
    throw std::runtime_error("unsupported environment format in " + path);
  }
  EnvCatalogEntry env;
  env.name = j.value("name", path);
  env.provenance = Provenance::full;
  const int n = j.at("n_states").get<int>();
  MdpModel m = blank_model(n, j.at("initial_state").get<int>());
  const auto& trans = j.at("transitions");
  const auto& rew = j.at("rewards");
  if (static_cast<int>(trans.size()) != n || static_cast<int>(rew.size()) != n) {
    throw std::runtime_error("transitions/rewards must have one row per state");
  }
  for (int s = 0; s < n; ++s) {
    if (trans[s].size() != 2 || rew[s].size() != 2) {
      throw std::runtime_error("state " + std::to_string(s) +
                               " must list exactly 2 actions");
    }
    for (int a = 0; a < 2; ++a) {
      const auto& dist = trans[s][a];
      if (static_cast<int>(dist.size()) != n) {
        throw std::runtime_error("transition row at state " +
                                 std::to_string(s) + ", action " +
                                 std::to_string(a) + " has wrong length");
      }
      for (int t = 0; t < n; ++t) {
        m.transition[a](s, t) = dist[t].get<double>();
      }
      m.reward(s, a) = rew[s][a].get<double>();
    }
  }
  validate_model(m);
  env.model = std::move(m);
  return env;
}

void save_env(const EnvCatalogEntry& env, const std::string& path) {
  const MdpModel& m = env.model;
  json j;
  j["format"] = 1;
  j["name"] = env.name;
  j["n_states"] = m.n_states;
  j["initial_state"] = m.initial_state;
  json trans = json::array();
  json rew = json::array();
  for (int s = 0; s < m.n_states; ++s) {
    json srow_t = json::array();
    json srow_r = json::array();
    for (int a = 0; a < 2; ++a) {
      json dist = json::array();
      for (int t = 0; t < m.n_states; ++t) dist.push_back(m.transition[a](s, t));
      srow_t.push_back(dist);
      srow_r.push_back(m.reward(s, a));
    }
    trans.push_back(srow_t);
    rew.push_back(srow_r);
  }
  j["transitions"] = trans;
  j["rewards"] = rew;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write environment file: " + path);
  }
  out << j.dump(2) << "\n";
}

EnvCatalogEntry resolve_env(const std::string& name_or_path) {
  const std::string key = canonical_env_key(name_or_path);
  for (const std::string& name : builtin_names()) {
    if (key == name) return builtin(name);
  }
  return load_env(name_or_path);
}

}  // namespace nbwpg
