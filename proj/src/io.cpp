#include "dvi/io.hpp"

#include <fstream>
#include <limits>

#include "dvi/errors.hpp"
#include "json.hpp"

namespace dvi::io {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

const json& need(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw InvalidSpec(path + ": missing key \"" + key + "\"");
  return *it;
}

std::vector<double> as_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidSpec(what + ": expected an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (x.is_null())  // hard zero in log domain
      v.push_back(-std::numeric_limits<double>::infinity());
    else if (x.is_number())
      v.push_back(x.get<double>());
    else
      throw InvalidSpec(what + ": expected numbers");
  }
  return v;
}

std::vector<std::vector<double>> as_matrix(const json& j,
                                           const std::string& what) {
  if (!j.is_array()) throw InvalidSpec(what + ": expected a matrix");
  std::vector<std::vector<double>> m;
  m.reserve(j.size());
  for (const auto& row : j) m.push_back(as_vector(row, what));
  return m;
}

std::vector<std::size_t> as_indices(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidSpec(what + ": expected an array");
  std::vector<std::size_t> v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number_unsigned())
      throw InvalidSpec(what + ": expected non-negative integers");
    v.push_back(x.get<std::size_t>());
  }
  return v;
}

json matrix_json(const std::vector<std::vector<double>>& m) {
  json j = json::array();
  for (const auto& row : m) j.push_back(row);
  return j;
}

json table_json(const ConditionalTable& t) {
  json j = json::array();
  for (std::size_t r = 0; r < t.n_conditions(); ++r) {
    const Categorical& row = t.row(r);
    j.push_back(std::vector<double>(row.probs().begin(), row.probs().end()));
  }
  return j;
}

// 3-D concentrations [s][a][k] -> row-major family with rows (s, a).
DirichletFamily family_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InvalidSpec(what + ": expected [s][a][k]");
  std::vector<double> conc;
  std::size_t n_states = j.size(), n_actions = 0, dim = 0;
  for (const auto& per_state : j) {
    if (!per_state.is_array()) throw InvalidSpec(what + ": expected [s][a][k]");
    if (n_actions == 0) n_actions = per_state.size();
    if (per_state.size() != n_actions) throw ShapeMismatch(what + ": ragged");
    for (const auto& row : per_state) {
      auto v = as_vector(row, what);
      if (dim == 0) dim = v.size();
      if (v.size() != dim) throw ShapeMismatch(what + ": ragged");
      conc.insert(conc.end(), v.begin(), v.end());
    }
  }
  return DirichletFamily(n_states * n_actions, dim, std::move(conc));
}

json family_to_json_3d(const DirichletFamily& fam, std::size_t n_states,
                       std::size_t n_actions) {
  if (fam.n_rows() != n_states * n_actions)
    throw ShapeMismatch("posterior save: family shape mismatch");
  json per_state = json::array();
  for (std::size_t s = 0; s < n_states; ++s) {
    json per_action = json::array();
    for (std::size_t a = 0; a < n_actions; ++a) {
      auto row = fam.row(s * n_actions + a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    per_state.push_back(std::move(per_action));
  }
  return per_state;
}

PomdpEpisode episode_from_json(const json& j, const std::string& path) {
  PomdpEpisode ep;
  ep.n_states = need(j, "n_states", path).get<std::size_t>();
  ep.n_actions = need(j, "n_actions", path).get<std::size_t>();
  ep.n_obs = need(j, "n_obs", path).get<std::size_t>();
  ep.s0 = need(j, "s0", path).get<std::size_t>();
  ep.actions = as_indices(need(j, "actions", path), path + ": actions");
  ep.observations =
      as_indices(need(j, "observations", path), path + ": observations");
  ep.validate();
  return ep;
}

json episode_to_json(const PomdpEpisode& ep) {
  return json{{"s0", ep.s0},
              {"actions", ep.actions},
              {"observations", ep.observations},
              {"n_states", ep.n_states},
              {"n_actions", ep.n_actions},
              {"n_obs", ep.n_obs}};
}

}  // namespace

ModelFile load_model(const std::string& path) {
  json j = load_json(path);
  ModelFile f{{Categorical(as_vector(need(j, "prior", path), path + ": prior")),
               as_matrix(need(j, "loglik", path), path + ": loglik")},
              as_vector(need(j, "theta_grid", path), path + ": theta_grid")};
  if (f.theta_grid.size() != f.model.grid_size())
    throw ShapeMismatch(path + ": theta_grid and prior sizes differ");
  f.model.validate();
  return f;
}

BanditProblem load_bandit(const std::string& path) {
  json j = load_json(path);
  BanditProblem p{Categorical(as_vector(need(j, "p_s", path), path + ": p_s")),
                  as_matrix(need(j, "reward", path), path + ": reward")};
  p.validate();
  return p;
}

EnvBundle load_env(const std::string& path) {
  json j = load_json(path);
  FiniteMdp m;
  m.init = Categorical(as_vector(need(j, "init", path), path + ": init"));
  m.n_states = m.init.size();
  m.reward = as_matrix(need(j, "reward", path), path + ": reward");
  if (m.reward.size() != m.n_states)
    throw ShapeMismatch(path + ": reward rows must match init");
  m.n_actions = m.reward.empty() ? 0 : m.reward[0].size();
  m.horizon = need(j, "horizon", path).get<std::size_t>();
  const json& trans = need(j, "trans", path);
  if (!trans.is_array() || trans.size() != m.n_states)
    throw ShapeMismatch(path + ": trans must have one block per state");
  std::vector<Categorical> rows;
  for (const auto& per_state : trans) {
    if (!per_state.is_array() || per_state.size() != m.n_actions)
      throw ShapeMismatch(path + ": trans blocks must have one row per action");
    for (const auto& row : per_state)
      rows.push_back(Categorical(as_vector(row, path + ": trans row")));
  }
  EnvBundle env{FiniteMdp{}, std::nullopt, "file:" + path};
  m.trans = ConditionalTable(std::move(rows));
  m.validate();
  env.mdp = std::move(m);
  if (j.contains("obs")) {
    std::vector<Categorical> obs_rows;
    for (const auto& row : j["obs"])
      obs_rows.push_back(Categorical(as_vector(row, path + ": obs row")));
    if (obs_rows.size() != env.mdp.n_states)
      throw ShapeMismatch(path + ": obs needs one row per state");
    env.obs_channel = ConditionalTable(std::move(obs_rows));
  }
  return env;
}

void save_env(const std::string& path, const EnvBundle& env) {
  const FiniteMdp& m = env.mdp;
  json trans = json::array();
  for (std::size_t s = 0; s < m.n_states; ++s) {
    json per_action = json::array();
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      const Categorical& row = m.trans_row(s, a);
      per_action.push_back(
          std::vector<double>(row.probs().begin(), row.probs().end()));
    }
    trans.push_back(std::move(per_action));
  }
  json j{{"init", std::vector<double>(m.init.probs().begin(),
                                      m.init.probs().end())},
         {"trans", std::move(trans)},
         {"reward", matrix_json(m.reward)},
         {"horizon", m.horizon}};
  if (env.obs_channel) j["obs"] = table_json(*env.obs_channel);
  save_json(path, j);
}

TransitionDataset load_dataset(const std::string& path) {
  json j = load_json(path);
  TransitionDataset d;
  d.n_states = need(j, "n_states", path).get<std::size_t>();
  d.n_actions = need(j, "n_actions", path).get<std::size_t>();
  for (const auto& t : need(j, "tuples", path)) {
    auto idx = as_indices(t, path + ": tuple");
    if (idx.size() != 3) throw ShapeMismatch(path + ": tuples must be triples");
    d.tuples.push_back({idx[0], idx[1], idx[2]});
  }
  d.validate();
  return d;
}

void save_dataset(const std::string& path, const TransitionDataset& data) {
  json tuples = json::array();
  for (const auto& [s, a, s2] : data.tuples)
    tuples.push_back(json::array({s, a, s2}));
  save_json(path, json{{"n_states", data.n_states},
                       {"n_actions", data.n_actions},
                       {"tuples", std::move(tuples)}});
}

DirichletFamily load_transition_posterior(const std::string& path) {
  json j = load_json(path);
  return family_from_json(need(j, "conc", path), path + ": conc");
}

void save_transition_posterior(const std::string& path,
                               const DirichletFamily& fam,
                               std::size_t n_states, std::size_t n_actions) {
  save_json(path, json{{"conc", family_to_json_3d(fam, n_states, n_actions)}});
}

std::vector<PomdpEpisode> load_episodes(const std::string& path) {
  json j = load_json(path);
  std::vector<PomdpEpisode> eps;
  if (j.contains("episodes")) {
    for (const auto& e : j["episodes"]) eps.push_back(episode_from_json(e, path));
  } else {
    eps.push_back(episode_from_json(j, path));
  }
  if (eps.empty()) throw InvalidSpec(path + ": no episodes");
  return eps;
}

void save_episodes(const std::string& path,
                   std::span<const PomdpEpisode> episodes) {
  json list = json::array();
  for (const PomdpEpisode& ep : episodes) list.push_back(episode_to_json(ep));
  save_json(path, json{{"episodes", std::move(list)}});
}

PomdpPosteriorFile load_pomdp_posterior(const std::string& path) {
  json j = load_json(path);
  DirichletFamily trans =
      family_from_json(need(j, "conc_s", path), path + ": conc_s");
  const json& obs = need(j, "conc_o", path);
  auto m = as_matrix(obs, path + ": conc_o");
  if (m.empty()) throw InvalidSpec(path + ": conc_o is empty");
  std::vector<double> conc;
  for (const auto& row : m) {
    if (row.size() != m[0].size()) throw ShapeMismatch(path + ": conc_o ragged");
    conc.insert(conc.end(), row.begin(), row.end());
  }
  DirichletFamily obs_fam(m.size(), m[0].size(), std::move(conc));
  if (trans.dim() != obs_fam.n_rows())
    throw ShapeMismatch(path + ": conc_s and conc_o disagree on n_states");
  return PomdpPosteriorFile{std::move(trans), std::move(obs_fam)};
}

void save_pomdp_posterior(const std::string& path, const DirichletFamily& trans,
                          const DirichletFamily& obs, std::size_t n_states,
                          std::size_t n_actions) {
  json conc_o = json::array();
  for (std::size_t r = 0; r < obs.n_rows(); ++r) {
    auto row = obs.row(r);
    conc_o.push_back(std::vector<double>(row.begin(), row.end()));
  }
  save_json(path, json{{"conc_s", family_to_json_3d(trans, n_states, n_actions)},
                       {"conc_o", std::move(conc_o)}});
}

TimeIndexedPolicy load_policy(const std::string& path, std::size_t horizon) {
  json j = load_json(path);
  auto table_from = [&](const json& rows_json) {
    std::vector<Categorical> rows;
    for (const auto& row : rows_json)
      rows.push_back(Categorical(as_vector(row, path + ": policy row")));
    return ConditionalTable(std::move(rows));
  };
  if (j.contains("stationary"))
    return TimeIndexedPolicy::broadcast(table_from(j["stationary"]), horizon);
  const json& steps = need(j, "per_step", path);
  if (steps.size() != horizon + 1)
    throw ShapeMismatch(path + ": per_step must cover t = 0..horizon");
  TimeIndexedPolicy pi;
  for (const auto& step : steps) pi.per_step.push_back(table_from(step));
  return pi;
}

void save_policy(const std::string& path, const TimeIndexedPolicy& policy) {
  json steps = json::array();
  for (const ConditionalTable& step : policy.per_step)
    steps.push_back(table_json(step));
  save_json(path, json{{"per_step", std::move(steps)}});
}

Categorical load_categorical(const std::string& path) {
  json j = load_json(path);
  return Categorical(as_vector(j, path));
}

ProblemKind detect_problem_kind(const std::string& path) {
  json j = load_json(path);
  return j.contains("trans") ? ProblemKind::kMdp : ProblemKind::kBandit;
}

}  // namespace dvi::io
