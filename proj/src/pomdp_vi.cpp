#include "dvi/pomdp_vi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dvi/special.hpp"

namespace dvi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Expected log table E_q[ln theta] per row, cached between factor updates.
std::vector<std::vector<double>> expected_logs(const DirichletFamily& fam) {
  std::vector<std::vector<double>> table(fam.n_rows());
  for (std::size_t r = 0; r < fam.n_rows(); ++r) {
    auto alpha = fam.row(r);
    double a0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    double psi_a0 = digamma(a0);
    table[r].resize(fam.dim());
    for (std::size_t k = 0; k < fam.dim(); ++k)
      table[r][k] = digamma(alpha[k]) - psi_a0;
  }
  return table;
}

struct Shapes {
  std::size_t n_states, n_actions, n_obs;
};

Shapes check(std::span<const PomdpEpisode> eps, const SharedMeanField& mf) {
  if (eps.empty()) throw EmptyInput("pomdp: no episodes");
  Shapes sh{eps[0].n_states, eps[0].n_actions, eps[0].n_obs};
  for (const PomdpEpisode& ep : eps) {
    ep.validate();
    if (ep.n_states != sh.n_states || ep.n_actions != sh.n_actions ||
        ep.n_obs != sh.n_obs)
      throw ShapeMismatch("pomdp: episodes disagree on dimensions");
  }
  if (mf.q_trans.n_rows() != sh.n_states * sh.n_actions ||
      mf.q_trans.dim() != sh.n_states)
    throw ShapeMismatch("pomdp: transition factor shape mismatch");
  if (mf.q_obs.n_rows() != sh.n_states || mf.q_obs.dim() != sh.n_obs)
    throw ShapeMismatch("pomdp: observation factor shape mismatch");
  if (mf.prior_trans.n_rows() != mf.q_trans.n_rows() ||
      mf.prior_trans.dim() != mf.q_trans.dim() ||
      mf.prior_obs.n_rows() != mf.q_obs.n_rows() ||
      mf.prior_obs.dim() != mf.q_obs.dim())
    throw ShapeMismatch("pomdp: prior shape mismatch");
  if (mf.q_states.size() != eps.size())
    throw ShapeMismatch("pomdp: one belief chain needed per episode");
  for (std::size_t e = 0; e < eps.size(); ++e) {
    if (mf.q_states[e].size() != eps[e].horizon())
      throw ShapeMismatch("pomdp: belief chain length mismatch");
    for (const Categorical& b : mf.q_states[e])
      if (b.size() != sh.n_states)
        throw ShapeMismatch("pomdp: belief dimension mismatch");
  }
  return sh;
}

// Belief over s_{t-1}: Dirac at s0 for t = 1, else the stored factor.
double belief_prev(const PomdpEpisode& ep,
                   const std::vector<Categorical>& beliefs, std::size_t t,
                   std::size_t j) {
  if (t == 1) return j == ep.s0 ? 1.0 : 0.0;
  return beliefs[t - 2][j];
}

PomdpElboReport elbo_impl(std::span<const PomdpEpisode> eps,
                          const SharedMeanField& mf) {
  Shapes sh = check(eps, mf);
  auto elog_trans = expected_logs(mf.q_trans);
  auto elog_obs = expected_logs(mf.q_obs);
  PomdpElboReport rep;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const PomdpEpisode& ep = eps[e];
    const auto& beliefs = mf.q_states[e];
    for (std::size_t t = 1; t <= ep.horizon(); ++t) {
      const Categorical& bt = beliefs[t - 1];
      std::size_t obs = ep.observations[t - 1];
      std::size_t act = ep.actions[t - 1];
      double cross = 0.0;  // E[ln P(s_t | s_{t-1}, a_{t-1})]
      double neg_entropy = 0.0;
      for (std::size_t k = 0; k < sh.n_states; ++k) {
        if (bt[k] == 0.0) continue;
        rep.obs_loglik += bt[k] * elog_obs[k][obs];
        neg_entropy += bt[k] * std::log(bt[k]);
        double inner = 0.0;
        for (std::size_t j = 0; j < sh.n_states; ++j) {
          double bj = belief_prev(ep, beliefs, t, j);
          if (bj > 0.0) inner += bj * elog_trans[j * sh.n_actions + act][k];
        }
        cross += bt[k] * inner;
      }
      rep.state_kl += neg_entropy - cross;
    }
  }
  for (std::size_t r = 0; r < mf.q_trans.n_rows(); ++r)
    rep.trans_kl += dirichlet_kl(mf.q_trans.row(r), mf.prior_trans.row(r));
  for (std::size_t r = 0; r < mf.q_obs.n_rows(); ++r)
    rep.obs_kl += dirichlet_kl(mf.q_obs.row(r), mf.prior_obs.row(r));
  rep.elbo = rep.obs_loglik - rep.state_kl - rep.trans_kl - rep.obs_kl;
  return rep;
}

void update_state_impl(const PomdpEpisode& ep, const Shapes& sh,
                       const std::vector<std::vector<double>>& elog_trans,
                       const std::vector<std::vector<double>>& elog_obs,
                       std::vector<Categorical>& beliefs, std::size_t t) {
  std::size_t obs = ep.observations[t - 1];
  std::size_t act_in = ep.actions[t - 1];
  std::vector<double> logw(sh.n_states);
  for (std::size_t k = 0; k < sh.n_states; ++k) {
    double w = elog_obs[k][obs];
    for (std::size_t j = 0; j < sh.n_states; ++j) {
      double bj = belief_prev(ep, beliefs, t, j);
      if (bj > 0.0) w += bj * elog_trans[j * sh.n_actions + act_in][k];
    }
    if (t < ep.horizon()) {
      std::size_t act_out = ep.actions[t];
      const Categorical& bnext = beliefs[t];
      for (std::size_t k2 = 0; k2 < sh.n_states; ++k2)
        if (bnext[k2] > 0.0)
          w += bnext[k2] * elog_trans[k * sh.n_actions + act_out][k2];
    }
    logw[k] = w;
  }
  beliefs[t - 1] = Categorical::from_log_weights(logw);
}

void update_trans_impl(std::span<const PomdpEpisode> eps, const Shapes& sh,
                       SharedMeanField& mf) {
  std::vector<double> conc(mf.prior_trans.flat().begin(),
                           mf.prior_trans.flat().end());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const PomdpEpisode& ep = eps[e];
    const auto& beliefs = mf.q_states[e];
    for (std::size_t t = 1; t <= ep.horizon(); ++t) {
      std::size_t act = ep.actions[t - 1];
      const Categorical& bt = beliefs[t - 1];
      for (std::size_t j = 0; j < sh.n_states; ++j) {
        double bj = belief_prev(ep, beliefs, t, j);
        if (bj == 0.0) continue;
        for (std::size_t k = 0; k < sh.n_states; ++k)
          conc[(j * sh.n_actions + act) * sh.n_states + k] += bj * bt[k];
      }
    }
  }
  mf.q_trans = DirichletFamily(mf.prior_trans.n_rows(), mf.prior_trans.dim(),
                               std::move(conc));
}

void update_obs_impl(std::span<const PomdpEpisode> eps, const Shapes& sh,
                     SharedMeanField& mf) {
  std::vector<double> conc(mf.prior_obs.flat().begin(),
                           mf.prior_obs.flat().end());
  for (std::size_t e = 0; e < eps.size(); ++e) {
    const PomdpEpisode& ep = eps[e];
    for (std::size_t t = 1; t <= ep.horizon(); ++t) {
      std::size_t obs = ep.observations[t - 1];
      const Categorical& bt = mf.q_states[e][t - 1];
      for (std::size_t k = 0; k < sh.n_states; ++k)
        conc[k * sh.n_obs + obs] += bt[k];
    }
  }
  mf.q_obs = DirichletFamily(mf.prior_obs.n_rows(), mf.prior_obs.dim(),
                             std::move(conc));
}

SweepStats sweep_impl(std::span<const PomdpEpisode> eps, SharedMeanField& mf,
                      bool per_update_check) {
  Shapes sh = check(eps, mf);
  double min_delta = 0.0;
  double before = per_update_check ? elbo_impl(eps, mf).elbo : 0.0;
  auto after_update = [&]() {
    if (!per_update_check) return;
    double now = elbo_impl(eps, mf).elbo;
    min_delta = std::min(min_delta, now - before);
    before = now;
  };
  auto elog_trans = expected_logs(mf.q_trans);
  auto elog_obs = expected_logs(mf.q_obs);
  for (std::size_t e = 0; e < eps.size(); ++e)
    for (std::size_t t = 1; t <= eps[e].horizon(); ++t) {
      update_state_impl(eps[e], sh, elog_trans, elog_obs, mf.q_states[e], t);
      after_update();
    }
  update_trans_impl(eps, sh, mf);
  after_update();
  update_obs_impl(eps, sh, mf);
  after_update();
  PomdpElboReport report = elbo_impl(eps, mf);
  return {report.elbo, report, min_delta};
}

SharedMeanField make_shared_state(std::span<const PomdpEpisode> eps,
                                  const DirichletFamily& prior_trans,
                                  const DirichletFamily& prior_obs) {
  SharedMeanField mf{prior_trans, prior_obs, prior_trans, prior_obs, {}};
  mf.q_states.reserve(eps.size());
  for (const PomdpEpisode& ep : eps)
    mf.q_states.emplace_back(ep.horizon(),
                             Categorical::uniform(ep.n_states));
  return mf;
}

void randomize_beliefs(SharedMeanField& mf, Rng& rng) {
  std::vector<double> ones;
  for (auto& chain : mf.q_states)
    for (Categorical& b : chain) {
      ones.assign(b.size(), 1.0);
      b = Categorical(rng.dirichlet(ones));
    }
}

MeanFieldState to_single(SharedMeanField&& mf) {
  return MeanFieldState{std::move(mf.q_trans), std::move(mf.q_obs),
                        std::move(mf.prior_trans), std::move(mf.prior_obs),
                        std::move(mf.q_states[0])};
}

SharedMeanField to_shared(const MeanFieldState& mf) {
  return SharedMeanField{mf.q_trans, mf.q_obs, mf.prior_trans, mf.prior_obs,
                         {mf.q_states}};
}

}  // namespace

void PomdpEpisode::validate() const {
  if (n_states == 0 || n_actions == 0 || n_obs == 0)
    throw InvalidSpec("episode: empty state, action, or observation set");
  if (s0 >= n_states) throw ShapeMismatch("episode: s0 out of range");
  if (actions.size() != observations.size())
    throw ShapeMismatch("episode: |actions| and |observations| must agree");
  for (std::size_t a : actions)
    if (a >= n_actions) throw ShapeMismatch("episode: action out of range");
  for (std::size_t o : observations)
    if (o >= n_obs) throw ShapeMismatch("episode: observation out of range");
}

PomdpElboReport pomdp_elbo(const PomdpEpisode& ep, const MeanFieldState& mf) {
  return elbo_impl({&ep, 1}, to_shared(mf));
}

PomdpElboReport pomdp_elbo(std::span<const PomdpEpisode> eps,
                           const SharedMeanField& mf) {
  return elbo_impl(eps, mf);
}

void update_state_factor(const PomdpEpisode& ep, MeanFieldState& mf,
                         std::size_t t) {
  if (t < 1 || t > ep.horizon())
    throw ShapeMismatch("update_state_factor: t out of range");
  SharedMeanField shared = to_shared(mf);
  Shapes sh = check({&ep, 1}, shared);
  auto elog_trans = expected_logs(mf.q_trans);
  auto elog_obs = expected_logs(mf.q_obs);
  update_state_impl(ep, sh, elog_trans, elog_obs, mf.q_states, t);
}

void update_trans_factor(const PomdpEpisode& ep, MeanFieldState& mf) {
  SharedMeanField shared = to_shared(mf);
  Shapes sh = check({&ep, 1}, shared);
  update_trans_impl({&ep, 1}, sh, shared);
  mf.q_trans = std::move(shared.q_trans);
}

void update_obs_factor(const PomdpEpisode& ep, MeanFieldState& mf) {
  SharedMeanField shared = to_shared(mf);
  Shapes sh = check({&ep, 1}, shared);
  update_obs_impl({&ep, 1}, sh, shared);
  mf.q_obs = std::move(shared.q_obs);
}

SweepStats cavi_sweep(const PomdpEpisode& ep, MeanFieldState& mf,
                      bool per_update_check) {
  SharedMeanField shared = to_shared(mf);
  SweepStats stats = sweep_impl({&ep, 1}, shared, per_update_check);
  mf.q_trans = std::move(shared.q_trans);
  mf.q_obs = std::move(shared.q_obs);
  mf.q_states = std::move(shared.q_states[0]);
  return stats;
}

SweepStats cavi_sweep(std::span<const PomdpEpisode> eps, SharedMeanField& mf,
                      bool per_update_check) {
  return sweep_impl(eps, mf, per_update_check);
}

SharedFitResult fit_pomdp_shared(std::span<const PomdpEpisode> eps,
                                 const DirichletFamily& prior_trans,
                                 const DirichletFamily& prior_obs,
                                 const FitPomdpOptions& opts) {
  if (!(opts.tol > 0.0)) throw InvalidSpec("fit_pomdp: tol must be > 0");
  if (opts.n_restarts == 0) throw InvalidSpec("fit_pomdp: need >= 1 restart");
  if (opts.max_sweeps == 0) throw InvalidSpec("fit_pomdp: need >= 1 sweep");
  bool any_converged = false;
  bool have_best = false;
  SharedFitResult best;
  for (std::size_t r = 0; r < opts.n_restarts; ++r) {
    SharedMeanField mf = make_shared_state(eps, prior_trans, prior_obs);
    if (r > 0) {
      Rng rng(derive_stream(opts.seed, "pomdp_restart", r));
      randomize_beliefs(mf, rng);
    }
    std::vector<PomdpElboReport> trace;
    double prev = kNegInf;
    double min_delta = 0.0;
    bool converged = false;
    std::size_t sweeps = 0;
    while (sweeps < opts.max_sweeps) {
      SweepStats stats = cavi_sweep(eps, mf, opts.per_update_check);
      ++sweeps;
      trace.push_back(stats.report_after);
      min_delta = std::min(min_delta, stats.min_update_delta);
      if (stats.elbo_after - prev < opts.tol) {
        prev = stats.elbo_after;
        converged = true;
        break;
      }
      prev = stats.elbo_after;
    }
    any_converged = any_converged || converged;
    if (!have_best || prev > best.report.elbo) {
      PomdpElboReport rep = elbo_impl(eps, mf);
      best = SharedFitResult{
          std::move(mf),
          ElboReport{rep.elbo, rep.obs_loglik,
                     rep.state_kl + rep.trans_kl + rep.obs_kl, sweeps},
          rep,
          r,
          std::move(trace),
          converged,
          min_delta};
      have_best = true;
    }
  }
  if (!any_converged)
    throw PomdpNotConverged("fit_pomdp: no restart converged within " +
                                std::to_string(opts.max_sweeps) + " sweeps",
                            std::move(best));
  return best;
}

FitPomdpResult fit_pomdp(const PomdpEpisode& ep,
                         const DirichletFamily& prior_trans,
                         const DirichletFamily& prior_obs,
                         const FitPomdpOptions& opts) {
  // PomdpNotConverged propagates as-is; its payload exposes the single
  // episode's belief chain as best().state.q_states[0].
  SharedFitResult shared =
      fit_pomdp_shared({&ep, 1}, prior_trans, prior_obs, opts);
  return FitPomdpResult{to_single(std::move(shared.state)), shared.report,
                        shared.breakdown, shared.restart_index,
                        std::move(shared.trace), shared.converged,
                        shared.min_update_delta};
}

SequenceLaw predict_observations_exact(const DirichletFamily& q_trans,
                                       const DirichletFamily& q_obs,
                                       std::size_t s0,
                                       std::span<const std::size_t> actions) {
  const std::size_t n_states = q_obs.n_rows();
  const std::size_t n_obs = q_obs.dim();
  if (q_trans.dim() != n_states || q_trans.n_rows() % n_states != 0)
    throw ShapeMismatch("predict_observations_exact: family shape mismatch");
  const std::size_t n_actions = q_trans.n_rows() / n_states;
  if (actions.empty())
    throw EmptyInput("predict_observations_exact: no actions");
  if (s0 >= n_states)
    throw ShapeMismatch("predict_observations_exact: s0 out of range");
  for (std::size_t a : actions)
    if (a >= n_actions)
      throw ShapeMismatch("predict_observations_exact: action out of range");
  const std::size_t horizon = actions.size();
  double space = std::pow(static_cast<double>(n_states * n_obs),
                          static_cast<double>(horizon));
  if (space > 1e6)
    throw TooLarge("predict_observations_exact: sequence space exceeds guard");

  const std::size_t n_state_seqs = static_cast<std::size_t>(
      std::pow(static_cast<double>(n_states), static_cast<double>(horizon)));
  const std::size_t n_obs_seqs = static_cast<std::size_t>(
      std::pow(static_cast<double>(n_obs), static_cast<double>(horizon)));
  SequenceLaw law{horizon, n_obs, std::vector<double>(n_obs_seqs, 0.0)};

  std::vector<std::size_t> states(horizon), obs(horizon);
  std::vector<double> trans_counts(q_trans.n_rows() * n_states);
  std::vector<double> obs_counts(n_states * n_obs);
  for (std::size_t si = 0; si < n_state_seqs; ++si) {
    std::size_t rem = si;
    for (std::size_t t = horizon; t-- > 0;) {
      states[t] = rem % n_states;
      rem /= n_states;
    }
    std::fill(trans_counts.begin(), trans_counts.end(), 0.0);
    std::size_t prev = s0;
    for (std::size_t t = 0; t < horizon; ++t) {
      trans_counts[(prev * n_actions + actions[t]) * n_states + states[t]] += 1.0;
      prev = states[t];
    }
    double log_ps = 0.0;  // Dirichlet-multinomial weight of the state path
    for (std::size_t r = 0; r < q_trans.n_rows(); ++r) {
      auto counts = std::span<const double>(trans_counts)
                        .subspan(r * n_states, n_states);
      bool any = false;
      for (double c : counts)
        if (c > 0.0) any = true;
      if (!any) continue;
      auto alpha = q_trans.row(r);
      std::vector<double> bumped(alpha.begin(), alpha.end());
      for (std::size_t k = 0; k < n_states; ++k) bumped[k] += counts[k];
      log_ps += log_multivariate_beta(bumped) - log_multivariate_beta(alpha);
    }
    for (std::size_t oi = 0; oi < n_obs_seqs; ++oi) {
      rem = oi;
      for (std::size_t t = horizon; t-- > 0;) {
        obs[t] = rem % n_obs;
        rem /= n_obs;
      }
      std::fill(obs_counts.begin(), obs_counts.end(), 0.0);
      for (std::size_t t = 0; t < horizon; ++t)
        obs_counts[states[t] * n_obs + obs[t]] += 1.0;
      double log_po = 0.0;
      for (std::size_t r = 0; r < n_states; ++r) {
        auto counts =
            std::span<const double>(obs_counts).subspan(r * n_obs, n_obs);
        bool any = false;
        for (double c : counts)
          if (c > 0.0) any = true;
        if (!any) continue;
        auto alpha = q_obs.row(r);
        std::vector<double> bumped(alpha.begin(), alpha.end());
        for (std::size_t k = 0; k < n_obs; ++k) bumped[k] += counts[k];
        log_po += log_multivariate_beta(bumped) - log_multivariate_beta(alpha);
      }
      law.probs[oi] += std::exp(log_ps + log_po);
    }
  }
  return law;
}

SequenceLaw predict_observations_exact(const MeanFieldState& mf,
                                       std::size_t s0,
                                       std::span<const std::size_t> actions) {
  return predict_observations_exact(mf.q_trans, mf.q_obs, s0, actions);
}

std::vector<std::vector<std::size_t>> predict_observations_sample(
    const DirichletFamily& q_trans, const DirichletFamily& q_obs,
    std::size_t s0, std::span<const std::size_t> actions,
    std::size_t n_samples, Seed seed) {
  const std::size_t n_states = q_obs.n_rows();
  if (q_trans.dim() != n_states || q_trans.n_rows() % n_states != 0)
    throw ShapeMismatch("predict_observations_sample: family shape mismatch");
  const std::size_t n_actions = q_trans.n_rows() / n_states;
  if (actions.empty())
    throw EmptyInput("predict_observations_sample: no actions");
  if (s0 >= n_states)
    throw ShapeMismatch("predict_observations_sample: s0 out of range");
  for (std::size_t a : actions)
    if (a >= n_actions)
      throw ShapeMismatch("predict_observations_sample: action out of range");
  Rng rng(derive_stream(seed, "predict_obs"));
  std::vector<std::vector<std::size_t>> out;
  out.reserve(n_samples);
  std::vector<std::vector<double>> theta_s(q_trans.n_rows());
  std::vector<std::vector<double>> theta_o(n_states);
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (std::size_t r = 0; r < q_trans.n_rows(); ++r)
      theta_s[r] = rng.dirichlet(q_trans.row(r));
    for (std::size_t r = 0; r < n_states; ++r)
      theta_o[r] = rng.dirichlet(q_obs.row(r));
    std::vector<std::size_t> seq(actions.size());
    std::size_t state = s0;
    for (std::size_t t = 0; t < actions.size(); ++t) {
      state = sample_categorical(
          Categorical(theta_s[state * n_actions + actions[t]]), rng);
      seq[t] = sample_categorical(Categorical(theta_o[state]), rng);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::vector<std::size_t>> predict_observations_sample(
    const MeanFieldState& mf, std::size_t s0,
    std::span<const std::size_t> actions, std::size_t n_samples, Seed seed) {
  return predict_observations_sample(mf.q_trans, mf.q_obs, s0, actions,
                                     n_samples, seed);
}

Categorical filter_beliefs(const ConditionalTable& trans,
                           const ConditionalTable& obs, std::size_t s0,
                           std::span<const std::size_t> actions,
                           std::span<const std::size_t> observations) {
  const std::size_t n_states = obs.n_conditions();
  if (trans.n_outcomes() != n_states || trans.n_conditions() % n_states != 0)
    throw ShapeMismatch("filter_beliefs: model shape mismatch");
  const std::size_t n_actions = trans.n_conditions() / n_states;
  if (actions.size() != observations.size())
    throw ShapeMismatch("filter_beliefs: prefix lengths disagree");
  if (s0 >= n_states) throw ShapeMismatch("filter_beliefs: s0 out of range");
  std::vector<double> belief(n_states, 0.0);
  belief[s0] = 1.0;
  std::vector<double> next(n_states);
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (actions[t] >= n_actions)
      throw ShapeMismatch("filter_beliefs: action out of range");
    if (observations[t] >= obs.n_outcomes())
      throw ShapeMismatch("filter_beliefs: observation out of range");
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t j = 0; j < n_states; ++j) {
      if (belief[j] == 0.0) continue;
      const Categorical& row = trans.row(j * n_actions + actions[t]);
      for (std::size_t k = 0; k < n_states; ++k)
        next[k] += belief[j] * row[k];
    }
    double total = 0.0;
    for (std::size_t k = 0; k < n_states; ++k) {
      next[k] *= obs.row(k)[observations[t]];
      total += next[k];
    }
    if (total <= 0.0)
      throw ZeroLikelihoodPrefix(
          "filter_beliefs: observation prefix has zero probability");
    for (std::size_t k = 0; k < n_states; ++k) belief[k] = next[k] / total;
  }
  return Categorical(std::move(belief));
}

Categorical filter_beliefs(const MeanFieldState& mf, std::size_t s0,
                           std::span<const std::size_t> actions,
                           std::span<const std::size_t> observations) {
  std::vector<Categorical> trans_rows, obs_rows;
  for (std::size_t r = 0; r < mf.q_trans.n_rows(); ++r)
    trans_rows.push_back(Categorical(mf.q_trans.mean_row(r)));
  for (std::size_t r = 0; r < mf.q_obs.n_rows(); ++r)
    obs_rows.push_back(Categorical(mf.q_obs.mean_row(r)));
  return filter_beliefs(ConditionalTable(std::move(trans_rows)),
                        ConditionalTable(std::move(obs_rows)), s0, actions,
                        observations);
}

}  // namespace dvi
