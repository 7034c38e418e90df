#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dvi/errors.hpp"
#include "dvi/model_vi.hpp"
#include "dvi/prob.hpp"
#include "dvi/rng.hpp"

namespace dvi {

// One interaction episode with a known initial state: actions a_0..a_{T-1}
// and observations o_1..o_T (stored 0-indexed, observations[t-1] = o_t).
struct PomdpEpisode {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t n_obs = 0;
  std::size_t s0 = 0;
  std::vector<std::size_t> actions;
  std::vector<std::size_t> observations;

  std::size_t horizon() const { return actions.size(); }
  void validate() const;
};

// Fully factorized posterior for one episode: per-row Dirichlets over the
// transition and observation parameters plus one categorical belief per
// latent state s_1..s_T. The belief over s_0 is implicitly Dirac at the
// episode's known initial state and is never stored.
struct MeanFieldState {
  DirichletFamily q_trans;      // (s * n_actions + a) rows, dim n_states
  DirichletFamily q_obs;        // s rows, dim n_obs
  DirichletFamily prior_trans;
  DirichletFamily prior_obs;
  std::vector<Categorical> q_states;  // index t-1 holds q(s_t)
};

// Same parameter factors shared across several episodes, with one belief
// chain per episode.
struct SharedMeanField {
  DirichletFamily q_trans;
  DirichletFamily q_obs;
  DirichletFamily prior_trans;
  DirichletFamily prior_obs;
  std::vector<std::vector<Categorical>> q_states;  // [episode][t-1]
};

// Five-piece breakdown: elbo = obs_loglik - state_kl - trans_kl - obs_kl.
struct PomdpElboReport {
  double elbo = 0.0;
  double obs_loglik = 0.0;  // expected observation log-likelihood
  double state_kl = 0.0;    // expected KL of beliefs to the transition prior
  double trans_kl = 0.0;    // KL(q(theta_s) || p(theta_s))
  double obs_kl = 0.0;      // KL(q(theta_o) || p(theta_o))
};

PomdpElboReport pomdp_elbo(const PomdpEpisode& ep, const MeanFieldState& mf);
PomdpElboReport pomdp_elbo(std::span<const PomdpEpisode> eps,
                           const SharedMeanField& mf);

// Exact coordinate updates for the individual mean-field factors. Each one
// maximizes the ELBO over its factor with the others held fixed, so the
// ELBO never decreases across a call.
void update_state_factor(const PomdpEpisode& ep, MeanFieldState& mf,
                         std::size_t t);  // t in 1..T
void update_trans_factor(const PomdpEpisode& ep, MeanFieldState& mf);
void update_obs_factor(const PomdpEpisode& ep, MeanFieldState& mf);

struct SweepStats {
  double elbo_after = 0.0;
  PomdpElboReport report_after;
  // Smallest per-update ELBO change seen (only tracked when the sweep runs
  // with per_update_check); anything below -1e-12 means a broken update.
  double min_update_delta = 0.0;
};

// One full sweep: beliefs t = 1..T in order, then the transition factor,
// then the observation factor.
SweepStats cavi_sweep(const PomdpEpisode& ep, MeanFieldState& mf,
                      bool per_update_check = false);
SweepStats cavi_sweep(std::span<const PomdpEpisode> eps, SharedMeanField& mf,
                      bool per_update_check = false);

struct FitPomdpOptions {
  double tol = 1e-10;
  std::size_t max_sweeps = 500;
  std::size_t n_restarts = 8;
  Seed seed;
  // Evaluate the ELBO after every factor update and track the minimum
  // delta; cheap at desk scale.
  bool per_update_check = false;
};

struct FitPomdpResult {
  MeanFieldState state;
  ElboReport report;          // elbo/exp_loglik/kl + sweep count
  PomdpElboReport breakdown;
  std::size_t restart_index = 0;
  // Per-sweep breakdowns of the winning restart, in sweep order.
  std::vector<PomdpElboReport> trace;
  bool converged = false;
  double min_update_delta = 0.0;
};

struct SharedFitResult {
  SharedMeanField state;
  ElboReport report;
  PomdpElboReport breakdown;
  std::size_t restart_index = 0;
  std::vector<PomdpElboReport> trace;
  bool converged = false;
  double min_update_delta = 0.0;
};

class PomdpNotConverged : public NotConverged {
 public:
  PomdpNotConverged(std::string msg, SharedFitResult best)
      : NotConverged(std::move(msg)), best_(std::move(best)) {}
  const SharedFitResult& best() const { return best_; }

 private:
  SharedFitResult best_;
};

// Coordinate ascent to a local ELBO optimum, over n_restarts belief
// initializations (restart 0 is deterministic uniform beliefs; later
// restarts draw random simplex points from the seed). Returns the
// best-ELBO run; throws PomdpNotConverged (carrying the best run) when no
// restart meets tol within max_sweeps.
FitPomdpResult fit_pomdp(const PomdpEpisode& ep,
                         const DirichletFamily& prior_trans,
                         const DirichletFamily& prior_obs,
                         const FitPomdpOptions& opts);
SharedFitResult fit_pomdp_shared(std::span<const PomdpEpisode> eps,
                                 const DirichletFamily& prior_trans,
                                 const DirichletFamily& prior_obs,
                                 const FitPomdpOptions& opts);

// Exact observation-sequence law with both parameter families and the
// latent states integrated out. The trained state beliefs play no part
// here. Guard: (n_states * n_obs)^T <= 1e6.
SequenceLaw predict_observations_exact(const DirichletFamily& q_trans,
                                       const DirichletFamily& q_obs,
                                       std::size_t s0,
                                       std::span<const std::size_t> actions);
SequenceLaw predict_observations_exact(const MeanFieldState& mf, std::size_t s0,
                                       std::span<const std::size_t> actions);

// Monte Carlo unrolling: one (theta_s, theta_o) draw per sequence, held
// fixed while states and observations are rolled forward.
std::vector<std::vector<std::size_t>> predict_observations_sample(
    const DirichletFamily& q_trans, const DirichletFamily& q_obs,
    std::size_t s0, std::span<const std::size_t> actions,
    std::size_t n_samples, Seed seed);
std::vector<std::vector<std::size_t>> predict_observations_sample(
    const MeanFieldState& mf, std::size_t s0,
    std::span<const std::size_t> actions, std::size_t n_samples, Seed seed);

// Forward filter b_t(s) with explicit model tables (rows may contain hard
// zeros). Throws ZeroLikelihoodPrefix when the observation prefix has zero
// probability under the model.
Categorical filter_beliefs(const ConditionalTable& trans,
                           const ConditionalTable& obs, std::size_t s0,
                           std::span<const std::size_t> actions,
                           std::span<const std::size_t> observations);

// Plug-in filter using the posterior-mean tables of the mean-field state.
Categorical filter_beliefs(const MeanFieldState& mf, std::size_t s0,
                           std::span<const std::size_t> actions,
                           std::span<const std::size_t> observations);

}  // namespace dvi
