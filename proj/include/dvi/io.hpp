#pragma once

#include <string>
#include <vector>

#include "dvi/envs.hpp"
#include "dvi/evidence.hpp"

namespace dvi::io {

// File formats. All loaders throw IoError for unreadable files or malformed
// JSON and ShapeMismatch/InvalidSpec for structurally bad content.
//
//   model.v1      {"theta_grid": [...], "prior": [...], "loglik": [[...]]}
//                 (null log-likelihood entries mean hard zeros)
//   bandit.v1     {"p_s": [...], "reward": [[...]]}
//   mdp.v1        {"init": [...], "trans": [[[...]]], "reward": [[...]],
//                  "horizon": T, "obs": [[...]]?}  (obs makes it a POMDP env)
//   dataset.v1    {"n_states": S, "n_actions": A, "tuples": [[s,a,s2], ...]}
//   posterior.v1  {"conc": [[[...]]]}  (transition concentrations [s][a][s'])
//   episode.v1    {"s0": k, "actions": [...], "observations": [...],
//                  "n_states": S, "n_actions": A, "n_obs": O}
//                 or a bundle {"episodes": [episode.v1, ...]}
//   pomdp_posterior.v1  {"conc_s": [[[...]]], "conc_o": [[...]]}
//   policy.v1     {"per_step": [[[...]]]} or {"stationary": [[...]]}

struct ModelFile {
  DiscreteGenerativeModel model;
  std::vector<double> theta_grid;
};

ModelFile load_model(const std::string& path);

BanditProblem load_bandit(const std::string& path);

EnvBundle load_env(const std::string& path);
void save_env(const std::string& path, const EnvBundle& env);

TransitionDataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const TransitionDataset& data);

// Transition posterior, rows indexed (s, a) with dim n_states.
DirichletFamily load_transition_posterior(const std::string& path);
void save_transition_posterior(const std::string& path,
                               const DirichletFamily& fam,
                               std::size_t n_states, std::size_t n_actions);

std::vector<PomdpEpisode> load_episodes(const std::string& path);
void save_episodes(const std::string& path,
                   std::span<const PomdpEpisode> episodes);

struct PomdpPosteriorFile {
  DirichletFamily conc_trans;
  DirichletFamily conc_obs;
};

PomdpPosteriorFile load_pomdp_posterior(const std::string& path);
void save_pomdp_posterior(const std::string& path, const DirichletFamily& trans,
                          const DirichletFamily& obs, std::size_t n_states,
                          std::size_t n_actions);

// Stationary tables broadcast over the requested horizon; per-step tables
// must cover it exactly.
TimeIndexedPolicy load_policy(const std::string& path, std::size_t horizon);
void save_policy(const std::string& path, const TimeIndexedPolicy& policy);

// Bare JSON array of probabilities.
Categorical load_categorical(const std::string& path);

enum class ProblemKind { kBandit, kMdp };
// mdp.v1 carries a "trans" key, bandit.v1 does not.
ProblemKind detect_problem_kind(const std::string& path);

}  // namespace dvi::io
