#include "cli.hpp"

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvi/bandit.hpp"
#include "dvi/envs.hpp"
#include "dvi/errors.hpp"
#include "dvi/evidence.hpp"
#include "dvi/io.hpp"
#include "dvi/mdp.hpp"
#include "dvi/model_vi.hpp"
#include "dvi/pomdp_vi.hpp"
#include "dvi/report.hpp"
#include "json.hpp"

namespace dvi::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic per-argv identifier so identical invocations produce
// byte-identical reports.
std::string make_run_id(int argc, const char* const* argv) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int i = 1; i < argc; ++i) {
    h = fnv1a(argv[i], h);
    h = fnv1a("\x1f", h);
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string basename_id(const std::string& path) {
  std::size_t slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  std::size_t dot = name.find_last_of('.');
  return dot == std::string::npos || dot == 0 ? name : name.substr(0, dot);
}

struct Ctx {
  std::string run_id;
  Clock::time_point start = Clock::now();
  std::uint64_t seed = 0;
  double tol = 1e-10;
  bool quiet = false;
  bool allow_partial = false;

  std::int64_t wall_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                 start)
        .count();
  }
  RunRecord record(const std::string& sub, const std::string& problem,
                   std::optional<double> beta, std::size_t iter, double elbo,
                   double reward, double kl) const {
    return RunRecord{run_id, sub,    problem,   beta,      iter,
                     elbo,   reward, kl,        wall_ms(), Seed{seed}};
  }
  void say(const std::string& line) const {
    if (!quiet) std::cout << line << '\n';
  }
};

std::vector<double> categorical_to_vec(const Categorical& c) {
  return std::vector<double>(c.probs().begin(), c.probs().end());
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

Categorical prior_from_flag(const std::string& flag, std::size_t n_actions) {
  if (flag == "uniform") return Categorical::uniform(n_actions);
  return io::load_categorical(flag);
}

json law_to_json(const SequenceLaw& law) {
  return json{{"mode", "exact"},
              {"horizon", law.horizon},
              {"base", law.base},
              {"probs", law.probs}};
}

json samples_to_json(const std::vector<std::vector<std::size_t>>& seqs) {
  json out = json::array();
  for (const auto& s : seqs) out.push_back(s);
  return json{{"mode", "sample"}, {"sequences", std::move(out)}};
}

// ---- subcommand handlers ----

int cmd_check_evidence(const Ctx& ctx, const std::string& model_path,
                       const std::string& q_flag, const std::string& out) {
  io::ModelFile file = io::load_model(model_path);
  PosteriorResult exact = exact_posterior(file.model);
  VariationalFactor q = exact.posterior;
  if (q_flag == "prior")
    q = VariationalFactor{file.model.prior};
  else if (q_flag != "posterior")
    q = VariationalFactor{io::load_categorical(q_flag)};
  ElboTerms terms = elbo(file.model, q, 1.0);
  double gap = evidence_gap(file.model, q);
  double kl_to_posterior = kl_divergence(q.q, exact.posterior.q);
  std::vector<RunRecord> records{ctx.record("check-evidence",
                                            basename_id(model_path), 1.0, 0,
                                            terms.value, terms.expected_log_lik,
                                            terms.kl)};
  write_report(records, out);
  ctx.say("log_evidence=" + format_real(exact.log_evidence) +
          " elbo=" + format_real(terms.value) + " gap=" + format_real(gap) +
          " kl_to_posterior=" + format_real(kl_to_posterior));
  if (std::abs(gap - kl_to_posterior) > ctx.tol) {
    std::cerr << "check-evidence: gap identity violated beyond tol\n";
    return 1;
  }
  return 0;
}

int cmd_solve_bandit(const Ctx& ctx, const std::string& problem_path,
                     double beta, bool optimize_prior, std::size_t max_iters,
                     const std::string& out, const std::string& policy_out) {
  BanditProblem p = io::load_bandit(problem_path);
  const std::string id = basename_id(problem_path);
  std::vector<RunRecord> records;
  ConditionalTable policy(p.n_states(), p.n_actions());
  Categorical pi0 = Categorical::uniform(p.n_actions());
  if (optimize_prior) {
    BlahutArimotoResult result{SoftBanditSolution{policy, pi0, 0, 0, 0, beta},
                               {},
                               0,
                               false};
    try {
      result = blahut_arimoto(p, beta, ctx.tol, max_iters);
    } catch (BanditNotConverged& e) {
      if (!ctx.allow_partial) throw;
      result = e.best();
      ctx.say("warning: not converged, writing best-so-far (--allow-partial)");
    }
    for (std::size_t i = 0; i < result.trace.size(); ++i)
      records.push_back(ctx.record("solve-bandit", id, beta, i,
                                   result.trace[i].objective,
                                   result.trace[i].reward_term,
                                   result.trace[i].kl_term));
    policy = result.solution.policy;
    pi0 = result.solution.prior;
    ctx.say("objective=" + format_real(result.solution.objective) +
            " iterations=" + std::to_string(result.iterations));
  } else {
    policy = soft_policy(p, pi0, beta);
    BanditTerms terms = bandit_elbo(p, pi0, policy, beta);
    records.push_back(ctx.record("solve-bandit", id, beta, 0, terms.objective,
                                 terms.reward_term, terms.kl_term));
    ctx.say("objective=" + format_real(terms.objective));
  }
  write_report(records, out);
  if (!policy_out.empty()) {
    json rows = json::array();
    for (std::size_t s = 0; s < policy.n_conditions(); ++s)
      rows.push_back(categorical_to_vec(policy.row(s)));
    save_json_file(policy_out, json{{"stationary", std::move(rows)},
                                    {"prior", categorical_to_vec(pi0)}});
  }
  return 0;
}

int cmd_solve_mdp(const Ctx& ctx, const std::string& problem_path, double beta,
                  const std::string& prior_flag, bool oracle,
                  double oracle_resolution, const std::string& out,
                  const std::string& policy_out) {
  EnvBundle env = io::load_env(problem_path);
  const FiniteMdp& m = env.mdp;
  const std::string id = basename_id(problem_path);
  Categorical pi0 = prior_from_flag(prior_flag, m.n_actions);
  SoftMdpSolution sol = soft_backward_induction(m, pi0, beta);
  std::vector<RunRecord> records{ctx.record("solve-mdp", id, beta, 0,
                                            sol.objective, sol.reward_term,
                                            sol.kl_term)};
  ctx.say("objective=" + format_real(sol.objective));
  if (!sol.policy.is_stationary(1e-9))
    ctx.say("note: optimal time-indexed policy is non-stationary");
  if (oracle) {
    SoftMdpSolution brute =
        brute_force_policy_search(m, pi0, beta, oracle_resolution);
    records.push_back(ctx.record("solve-mdp", id, beta, 1, brute.objective,
                                 brute.reward_term, brute.kl_term));
    ctx.say("oracle_objective=" + format_real(brute.objective) +
            " gap=" + format_real(sol.objective - brute.objective));
  }
  write_report(records, out);
  if (!policy_out.empty()) io::save_policy(policy_out, sol.policy);
  return 0;
}

int cmd_eval_policy(const Ctx& ctx, const std::string& problem_path,
                    const std::string& policy_path, double beta,
                    const std::string& prior_flag, const std::string& out) {
  EnvBundle env = io::load_env(problem_path);
  Categorical pi0 = prior_from_flag(prior_flag, env.mdp.n_actions);
  TimeIndexedPolicy pi = io::load_policy(policy_path, env.mdp.horizon);
  MdpTerms terms = mdp_elbo(env.mdp, pi0, pi, beta);
  std::vector<RunRecord> records{
      ctx.record("eval-policy", basename_id(problem_path), beta, 0,
                 terms.objective, terms.reward_term, terms.kl_term)};
  write_report(records, out);
  ctx.say("objective=" + format_real(terms.objective));
  return 0;
}

int cmd_learn_model(const Ctx& ctx, const std::string& data_path,
                    double prior_conc, const std::string& prior_file,
                    const std::string& out, const std::string& report_path) {
  TransitionDataset data = io::load_dataset(data_path);
  DirichletFamily prior(data.n_states * data.n_actions, data.n_states,
                        prior_conc);
  if (!prior_file.empty()) {
    prior = io::load_transition_posterior(prior_file);
    if (prior.n_rows() != data.n_states * data.n_actions ||
        prior.dim() != data.n_states)
      throw ShapeMismatch("learn-model: prior file shape mismatch");
  }
  FitResult fit = fit_variational(data, prior);
  io::save_transition_posterior(out, fit.posterior, data.n_states,
                                data.n_actions);
  if (!report_path.empty()) {
    std::vector<RunRecord> records{
        ctx.record("learn-model", basename_id(data_path), std::nullopt,
                   fit.report.iteration, fit.report.elbo, fit.report.exp_loglik,
                   fit.report.kl)};
    write_report(records, report_path);
  }
  ctx.say("elbo=" + format_real(fit.report.elbo) +
          " tuples=" + std::to_string(data.size()));
  return 0;
}

int cmd_predict_states(const Ctx& ctx, const std::string& posterior_path,
                       std::size_t s0, const std::vector<std::size_t>& actions,
                       std::size_t n_samples, bool exact,
                       const std::string& out) {
  DirichletFamily q = io::load_transition_posterior(posterior_path);
  if (exact) {
    SequenceLaw law = predict_states_exact(q, s0, actions);
    save_json_file(out, law_to_json(law));
    ctx.say("exact law over " + std::to_string(law.probs.size()) + " sequences");
  } else {
    auto seqs = predict_states_sample(q, s0, actions, n_samples, Seed{ctx.seed});
    save_json_file(out, samples_to_json(seqs));
    ctx.say("sampled " + std::to_string(seqs.size()) + " sequences");
  }
  return 0;
}

int cmd_learn_pomdp(const Ctx& ctx, const std::string& episodes_path,
                    double prior_s, double prior_o, std::size_t max_sweeps,
                    std::size_t restarts, const std::string& out,
                    const std::string& trace_path) {
  std::vector<PomdpEpisode> eps = io::load_episodes(episodes_path);
  const std::size_t S = eps[0].n_states, A = eps[0].n_actions,
                    O = eps[0].n_obs;
  DirichletFamily prior_trans(S * A, S, prior_s);
  DirichletFamily prior_obs(S, O, prior_o);
  FitPomdpOptions opts;
  opts.tol = ctx.tol;
  opts.max_sweeps = max_sweeps;
  opts.n_restarts = restarts;
  opts.seed = Seed{ctx.seed};
  SharedFitResult fit{SharedMeanField{prior_trans, prior_obs, prior_trans,
                                      prior_obs, {}},
                      {}, {}, 0, {}, false, 0.0};
  try {
    fit = fit_pomdp_shared(eps, prior_trans, prior_obs, opts);
  } catch (PomdpNotConverged& e) {
    if (!ctx.allow_partial) throw;
    fit = e.best();
    ctx.say("warning: not converged, writing best-so-far (--allow-partial)");
  }
  json beliefs = json::array();
  for (const auto& chain : fit.state.q_states) {
    json per_t = json::array();
    for (const Categorical& b : chain) per_t.push_back(categorical_to_vec(b));
    beliefs.push_back(std::move(per_t));
  }
  json conc_o = json::array();
  for (std::size_t r = 0; r < fit.state.q_obs.n_rows(); ++r) {
    auto row = fit.state.q_obs.row(r);
    conc_o.push_back(std::vector<double>(row.begin(), row.end()));
  }
  json conc_s = json::array();
  for (std::size_t s = 0; s < S; ++s) {
    json per_a = json::array();
    for (std::size_t a = 0; a < A; ++a) {
      auto row = fit.state.q_trans.row(s * A + a);
      per_a.push_back(std::vector<double>(row.begin(), row.end()));
    }
    conc_s.push_back(std::move(per_a));
  }
  save_json_file(out, json{{"conc_s", std::move(conc_s)},
                           {"conc_o", std::move(conc_o)},
                           {"beliefs", std::move(beliefs)},
                           {"elbo", fit.report.elbo},
                           {"restart", fit.restart_index},
                           {"sweeps", fit.report.iteration},
                           {"converged", fit.converged}});
  if (!trace_path.empty()) {
    std::vector<RunRecord> records;
    for (std::size_t i = 0; i < fit.trace.size(); ++i) {
      const PomdpElboReport& sweep = fit.trace[i];
      records.push_back(ctx.record(
          "learn-pomdp", basename_id(episodes_path), std::nullopt, i,
          sweep.elbo, sweep.obs_loglik,
          sweep.state_kl + sweep.trans_kl + sweep.obs_kl));
    }
    write_report(records, trace_path);
  }
  ctx.say("elbo=" + format_real(fit.report.elbo) + " restart=" +
          std::to_string(fit.restart_index) + " sweeps=" +
          std::to_string(fit.report.iteration) +
          (fit.converged ? "" : " (not converged)"));
  return 0;
}

int cmd_predict_obs(const Ctx& ctx, const std::string& posterior_path,
                    std::size_t s0, const std::vector<std::size_t>& actions,
                    std::size_t n_samples, bool exact, const std::string& out) {
  io::PomdpPosteriorFile post = io::load_pomdp_posterior(posterior_path);
  if (exact) {
    SequenceLaw law =
        predict_observations_exact(post.conc_trans, post.conc_obs, s0, actions);
    save_json_file(out, law_to_json(law));
    ctx.say("exact law over " + std::to_string(law.probs.size()) + " sequences");
  } else {
    auto seqs = predict_observations_sample(post.conc_trans, post.conc_obs, s0,
                                            actions, n_samples, Seed{ctx.seed});
    save_json_file(out, samples_to_json(seqs));
    ctx.say("sampled " + std::to_string(seqs.size()) + " sequences");
  }
  return 0;
}

int cmd_filter(const Ctx& ctx, const std::string& posterior_path,
               std::size_t s0, const std::vector<std::size_t>& actions,
               const std::vector<std::size_t>& observations,
               const std::string& out) {
  io::PomdpPosteriorFile post = io::load_pomdp_posterior(posterior_path);
  std::vector<Categorical> trans_rows, obs_rows;
  for (std::size_t r = 0; r < post.conc_trans.n_rows(); ++r)
    trans_rows.push_back(Categorical(post.conc_trans.mean_row(r)));
  for (std::size_t r = 0; r < post.conc_obs.n_rows(); ++r)
    obs_rows.push_back(Categorical(post.conc_obs.mean_row(r)));
  Categorical belief =
      filter_beliefs(ConditionalTable(std::move(trans_rows)),
                     ConditionalTable(std::move(obs_rows)), s0, actions,
                     observations);
  save_json_file(out, json{{"belief", categorical_to_vec(belief)}});
  ctx.say("belief over " + std::to_string(belief.size()) + " states written");
  return 0;
}

int cmd_gen_env(const Ctx& ctx, const std::string& gridworld_path,
                const std::vector<std::size_t>& random_dims, double conc,
                std::size_t horizon, const std::string& out) {
  EnvBundle env;
  if (!gridworld_path.empty()) {
    json j;
    {
      std::ifstream in(gridworld_path);
      if (!in) throw IoError("cannot open " + gridworld_path);
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw IoError(gridworld_path + ": " + e.what());
      }
    }
    GridworldSpec spec;
    spec.width = j.at("width").get<std::size_t>();
    spec.height = j.at("height").get<std::size_t>();
    spec.goal = j.at("goal").get<std::size_t>();
    if (j.contains("walls"))
      for (const auto& w : j["walls"]) spec.walls.insert(w.get<std::size_t>());
    spec.step_reward = j.value("step_reward", 0.0);
    spec.goal_reward = j.value("goal_reward", 1.0);
    spec.slip_prob = j.value("slip_prob", 0.0);
    spec.horizon = j.value("horizon", std::size_t{0});
    env = make_gridworld(spec);
  } else {
    std::optional<std::size_t> n_obs;
    if (random_dims.size() == 3) n_obs = random_dims[2];
    env = make_random_env(random_dims[0], random_dims[1], n_obs, conc,
                          Seed{ctx.seed}, horizon);
  }
  io::save_env(out, env);
  ctx.say("environment written: " + std::to_string(env.mdp.n_states) +
          " states, " + std::to_string(env.mdp.n_actions) + " actions" +
          (env.obs_channel ? ", observation channel" : ""));
  return 0;
}

int cmd_collect(const Ctx& ctx, const std::string& env_path,
                const std::string& policy_flag, std::size_t n_episodes,
                std::size_t horizon, const std::string& out,
                const std::string& episodes_out) {
  EnvBundle env = io::load_env(env_path);
  CollectResult result;
  if (policy_flag == "uniform") {
    result = collect_transitions(env, Categorical::uniform(env.mdp.n_actions),
                                 n_episodes, horizon, Seed{ctx.seed});
  } else {
    TimeIndexedPolicy pi = io::load_policy(policy_flag, horizon);
    result = collect_transitions(env, pi, n_episodes, horizon, Seed{ctx.seed});
  }
  io::save_dataset(out, result.dataset);
  if (!episodes_out.empty()) {
    if (result.episodes.empty())
      throw InvalidSpec("collect: --episodes-out needs an observation channel");
    io::save_episodes(episodes_out, result.episodes);
  }
  ctx.say("collected " + std::to_string(result.dataset.size()) + " tuples");
  return 0;
}

int cmd_sweep(const Ctx& ctx, const std::string& problem_path,
              const std::vector<double>& betas, const std::string& out) {
  const std::string id = basename_id(problem_path);
  std::vector<RunRecord> records;
  if (io::detect_problem_kind(problem_path) == io::ProblemKind::kBandit) {
    BanditProblem p = io::load_bandit(problem_path);
    Categorical pi0 = Categorical::uniform(p.n_actions());
    for (std::size_t i = 0; i < betas.size(); ++i) {
      ConditionalTable pi = soft_policy(p, pi0, betas[i]);
      BanditTerms terms = bandit_elbo(p, pi0, pi, betas[i]);
      records.push_back(ctx.record("sweep", id, betas[i], i, terms.objective,
                                   terms.reward_term, terms.kl_term));
    }
  } else {
    EnvBundle env = io::load_env(problem_path);
    Categorical pi0 = Categorical::uniform(env.mdp.n_actions);
    for (std::size_t i = 0; i < betas.size(); ++i) {
      SoftMdpSolution sol = soft_backward_induction(env.mdp, pi0, betas[i]);
      records.push_back(ctx.record("sweep", id, betas[i], i, sol.objective,
                                   sol.reward_term, sol.kl_term));
    }
  }
  write_report(records, out);
  ctx.say("swept " + std::to_string(betas.size()) + " beta values");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Tabular decision-making as variational inference"};
  app.require_subcommand(1);

  Ctx ctx;
  ctx.run_id = make_run_id(argc, argv);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ctx.seed, "RNG seed (64-bit)");
    sub->add_option("--tol", ctx.tol, "convergence / identity tolerance");
    sub->add_flag("--quiet", ctx.quiet, "suppress stdout summaries");
    sub->add_flag("--allow-partial", ctx.allow_partial,
                  "accept best-so-far results when a solver does not converge");
  };
  auto require_seed = [](const CLI::App* sub) {
    if (sub->count("--seed") == 0)
      throw InvalidSpec(sub->get_name() + ": stochastic run requires --seed");
  };

  std::map<const CLI::App*, std::function<int()>> handlers;

  {
    auto* sub = app.add_subcommand("check-evidence",
                                   "verify the evidence-gap identity on a "
                                   "discrete model file");
    auto model = std::make_shared<std::string>();
    auto q = std::make_shared<std::string>("posterior");
    auto out = std::make_shared<std::string>();
    sub->add_option("--model", *model, "model.v1 JSON")->required();
    sub->add_option("--q", *q, "posterior | prior | file with a bare array");
    sub->add_option("--out", *out, "CSV report path")->required();
    add_common(sub);
    handlers[sub] = [&ctx, model, q, out]() {
      return cmd_check_evidence(ctx, *model, *q, *out);
    };
  }
  {
    auto* sub = app.add_subcommand("solve-bandit",
                                   "soft policy (optionally optimizing the "
                                   "action prior) for a bandit problem");
    auto problem = std::make_shared<std::string>();
    auto beta = std::make_shared<double>(1.0);
    auto optimize = std::make_shared<bool>(false);
    auto max_iters = std::make_shared<std::size_t>(10000);
    auto out = std::make_shared<std::string>();
    auto policy_out = std::make_shared<std::string>();
    sub->add_option("--problem", *problem, "bandit.v1 JSON")->required();
    sub->add_option("--beta", *beta, "KL weight")->required();
    sub->add_flag("--optimize-prior", *optimize,
                  "optimize pi0 as well (Blahut-Arimoto)");
    sub->add_option("--max-iters", *max_iters, "iteration cap");
    sub->add_option("--out", *out, "CSV report path")->required();
    sub->add_option("--policy-out", *policy_out, "policy.v1 JSON path");
    add_common(sub);
    handlers[sub] = [&ctx, problem, beta, optimize, max_iters, out,
                     policy_out]() {
      return cmd_solve_bandit(ctx, *problem, *beta, *optimize, *max_iters,
                              *out, *policy_out);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "solve-mdp", "soft backward induction for a finite-horizon MDP");
    auto problem = std::make_shared<std::string>();
    auto beta = std::make_shared<double>(1.0);
    auto prior = std::make_shared<std::string>("uniform");
    auto oracle = std::make_shared<bool>(false);
    auto resolution = std::make_shared<double>(1e-2);
    auto out = std::make_shared<std::string>();
    auto policy_out = std::make_shared<std::string>();
    sub->add_option("--problem", *problem, "mdp.v1 JSON")->required();
    sub->add_option("--beta", *beta, "KL weight")->required();
    sub->add_option("--prior", *prior, "uniform | file with a bare array");
    sub->add_flag("--oracle", *oracle,
                  "also run the brute-force search and report the gap");
    sub->add_option("--oracle-resolution", *resolution,
                    "simplex grid resolution for --oracle");
    sub->add_option("--out", *out, "CSV report path")->required();
    sub->add_option("--policy-out", *policy_out, "policy.v1 JSON path");
    add_common(sub);
    handlers[sub] = [&ctx, problem, beta, prior, oracle, resolution, out,
                     policy_out]() {
      return cmd_solve_mdp(ctx, *problem, *beta, *prior, *oracle, *resolution,
                           *out, *policy_out);
    };
  }
  {
    auto* sub = app.add_subcommand("eval-policy",
                                   "evaluate a stored policy on an MDP");
    auto problem = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>();
    auto beta = std::make_shared<double>(1.0);
    auto prior = std::make_shared<std::string>("uniform");
    auto out = std::make_shared<std::string>();
    sub->add_option("--problem", *problem, "mdp.v1 JSON")->required();
    sub->add_option("--policy", *policy, "policy.v1 JSON")->required();
    sub->add_option("--beta", *beta, "KL weight")->required();
    sub->add_option("--prior", *prior, "uniform | file with a bare array");
    sub->add_option("--out", *out, "CSV report path")->required();
    add_common(sub);
    handlers[sub] = [&ctx, problem, policy, beta, prior, out]() {
      return cmd_eval_policy(ctx, *problem, *policy, *beta, *prior, *out);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "learn-model", "conjugate transition-model posterior from a dataset");
    auto data = std::make_shared<std::string>();
    auto conc = std::make_shared<double>(1.0);
    auto prior_file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report = std::make_shared<std::string>();
    sub->add_option("--data", *data, "dataset.v1 JSON")->required();
    sub->add_option("--prior-conc", *conc, "flat prior concentration");
    sub->add_option("--prior-file", *prior_file,
                    "posterior.v1 JSON with per-row prior concentrations");
    sub->add_option("--out", *out, "posterior.v1 JSON path")->required();
    sub->add_option("--report", *report, "optional CSV report path");
    add_common(sub);
    handlers[sub] = [&ctx, data, conc, prior_file, out, report]() {
      return cmd_learn_model(ctx, *data, *conc, *prior_file, *out, *report);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "predict-states", "unroll or enumerate future states under a "
                          "transition posterior");
    auto posterior = std::make_shared<std::string>();
    auto s0 = std::make_shared<std::size_t>(0);
    auto actions = std::make_shared<std::vector<std::size_t>>();
    auto samples = std::make_shared<std::size_t>(0);
    auto exact = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    sub->add_option("--posterior", *posterior, "posterior.v1 JSON")->required();
    sub->add_option("--s0", *s0, "initial state")->required();
    sub->add_option("--actions", *actions, "action sequence")
        ->required()
        ->delimiter(',');
    sub->add_option("--samples", *samples, "number of Monte Carlo rollouts");
    sub->add_flag("--exact", *exact, "exact sequence law instead of sampling");
    sub->add_option("--out", *out, "output JSON path")->required();
    add_common(sub);
    handlers[sub] = [&ctx, require_seed, posterior, s0, actions, samples,
                     exact, out, sub]() {
      if (!*exact && *samples == 0)
        throw InvalidSpec("predict-states: need --samples or --exact");
      if (!*exact) require_seed(sub);
      return cmd_predict_states(ctx, *posterior, *s0, *actions, *samples,
                                *exact, *out);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "learn-pomdp", "mean-field CAVI for transition + observation models");
    auto episodes = std::make_shared<std::string>();
    auto prior_s = std::make_shared<double>(1.0);
    auto prior_o = std::make_shared<double>(1.0);
    auto max_sweeps = std::make_shared<std::size_t>(500);
    auto restarts = std::make_shared<std::size_t>(8);
    auto out = std::make_shared<std::string>();
    auto trace = std::make_shared<std::string>();
    sub->add_option("--episodes", *episodes, "episode.v1 JSON (or bundle)")
        ->required();
    sub->add_option("--prior-s", *prior_s, "transition prior concentration");
    sub->add_option("--prior-o", *prior_o, "observation prior concentration");
    sub->add_option("--max-sweeps", *max_sweeps, "sweep cap per restart");
    sub->add_option("--restarts", *restarts, "number of restarts");
    sub->add_option("--out", *out, "pomdp_posterior.v1 JSON path")->required();
    sub->add_option("--trace", *trace, "optional per-sweep CSV report");
    add_common(sub);
    handlers[sub] = [&ctx, require_seed, episodes, prior_s, prior_o,
                     max_sweeps, restarts, out, trace, sub]() {
      require_seed(sub);
      return cmd_learn_pomdp(ctx, *episodes, *prior_s, *prior_o, *max_sweeps,
                             *restarts, *out, *trace);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "predict-obs", "unroll or enumerate future observations under a "
                       "POMDP posterior");
    auto posterior = std::make_shared<std::string>();
    auto s0 = std::make_shared<std::size_t>(0);
    auto actions = std::make_shared<std::vector<std::size_t>>();
    auto samples = std::make_shared<std::size_t>(0);
    auto exact = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    sub->add_option("--posterior", *posterior, "pomdp_posterior.v1 JSON")
        ->required();
    sub->add_option("--s0", *s0, "initial state")->required();
    sub->add_option("--actions", *actions, "action sequence")
        ->required()
        ->delimiter(',');
    sub->add_option("--samples", *samples, "number of Monte Carlo rollouts");
    sub->add_flag("--exact", *exact, "exact sequence law instead of sampling");
    sub->add_option("--out", *out, "output JSON path")->required();
    add_common(sub);
    handlers[sub] = [&ctx, require_seed, posterior, s0, actions, samples,
                     exact, out, sub]() {
      if (!*exact && *samples == 0)
        throw InvalidSpec("predict-obs: need --samples or --exact");
      if (!*exact) require_seed(sub);
      return cmd_predict_obs(ctx, *posterior, *s0, *actions, *samples, *exact,
                             *out);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "filter", "plug-in belief filtering under a POMDP posterior");
    auto posterior = std::make_shared<std::string>();
    auto s0 = std::make_shared<std::size_t>(0);
    auto actions = std::make_shared<std::vector<std::size_t>>();
    auto observations = std::make_shared<std::vector<std::size_t>>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--posterior", *posterior, "pomdp_posterior.v1 JSON")
        ->required();
    sub->add_option("--s0", *s0, "initial state")->required();
    sub->add_option("--actions", *actions, "actions so far")->delimiter(',');
    sub->add_option("--observations", *observations, "observations so far")
        ->delimiter(',');
    sub->add_option("--out", *out, "output JSON path")->required();
    add_common(sub);
    handlers[sub] = [&ctx, posterior, s0, actions, observations, out]() {
      return cmd_filter(ctx, *posterior, *s0, *actions, *observations, *out);
    };
  }
  {
    auto* sub = app.add_subcommand("gen-env",
                                   "generate a gridworld or random environment");
    auto gridworld = std::make_shared<std::string>();
    auto random_dims = std::make_shared<std::vector<std::size_t>>();
    auto conc = std::make_shared<double>(1.0);
    auto horizon = std::make_shared<std::size_t>(5);
    auto out = std::make_shared<std::string>();
    auto* gw_opt = sub->add_option("--gridworld", *gridworld,
                                   "gridworld spec JSON");
    auto* rnd_opt = sub->add_option("--random", *random_dims,
                                    "S,A or S,A,O dimension list")
                        ->delimiter(',')
                        ->expected(2, 3);
    gw_opt->excludes(rnd_opt);
    sub->add_option("--conc", *conc, "Dirichlet concentration for --random");
    sub->add_option("--horizon", *horizon, "horizon for --random");
    sub->add_option("--out", *out, "mdp.v1 JSON path")->required();
    add_common(sub);
    handlers[sub] = [&ctx, sub, gridworld, random_dims, conc, horizon, out]() {
      if (gridworld->empty() && random_dims->empty())
        throw InvalidSpec("gen-env: need --gridworld or --random");
      if (!random_dims->empty() && sub->count("--seed") == 0)
        throw InvalidSpec("gen-env: --random requires --seed");
      return cmd_gen_env(ctx, *gridworld, *random_dims, *conc, *horizon, *out);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "collect", "simulate episodes and emit the transition dataset");
    auto env = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>("uniform");
    auto episodes = std::make_shared<std::size_t>(1);
    auto horizon = std::make_shared<std::size_t>(0);
    auto out = std::make_shared<std::string>();
    auto episodes_out = std::make_shared<std::string>();
    sub->add_option("--env", *env, "mdp.v1 JSON")->required();
    sub->add_option("--policy", *policy, "uniform | policy.v1 JSON");
    sub->add_option("--episodes", *episodes, "episode count")->required();
    sub->add_option("--horizon", *horizon, "steps per episode")->required();
    sub->add_option("--out", *out, "dataset.v1 JSON path")->required();
    sub->add_option("--episodes-out", *episodes_out,
                    "episode.v1 bundle path (needs an observation channel)");
    add_common(sub);
    handlers[sub] = [&ctx, require_seed, env, policy, episodes, horizon, out,
                     episodes_out, sub]() {
      require_seed(sub);
      return cmd_collect(ctx, *env, *policy, *episodes, *horizon, *out,
                         *episodes_out);
    };
  }
  {
    auto* sub = app.add_subcommand(
        "sweep", "solve one problem across a list of beta values");
    auto problem = std::make_shared<std::string>();
    auto betas = std::make_shared<std::vector<double>>();
    auto out = std::make_shared<std::string>();
    sub->add_option("--problem", *problem, "bandit.v1 or mdp.v1 JSON")
        ->required();
    sub->add_option("--betas", *betas, "comma-separated beta list")
        ->required()
        ->delimiter(',');
    sub->add_option("--out", *out, "CSV report path")->required();
    add_common(sub);
    handlers[sub] = [&ctx, problem, betas, out]() {
      return cmd_sweep(ctx, *problem, *betas, *out);
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help goes to stdout, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // message on stderr
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands())
      if (handlers.count(sub)) return handlers[sub]();
    std::cerr << app.help();
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidSpec& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NotConverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace dvi::cli
