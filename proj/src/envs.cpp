#include "dvi/envs.hpp"

#include <cmath>

#include "dvi/errors.hpp"

namespace dvi {

namespace {

// dx/dy per action: up, down, left, right. Row 0 is the top of the grid.
constexpr int kDx[4] = {0, 0, -1, 1};
constexpr int kDy[4] = {-1, 1, 0, 0};

std::size_t resolve_move(const GridworldSpec& spec, std::size_t cell,
                         std::size_t dir) {
  int x = static_cast<int>(cell % spec.width);
  int y = static_cast<int>(cell / spec.width);
  int nx = x + kDx[dir];
  int ny = y + kDy[dir];
  if (nx < 0 || ny < 0 || nx >= static_cast<int>(spec.width) ||
      ny >= static_cast<int>(spec.height))
    return cell;  // boundary bounce
  std::size_t target = static_cast<std::size_t>(ny) * spec.width +
                       static_cast<std::size_t>(nx);
  return spec.walls.count(target) ? cell : target;  // wall bounce
}

template <typename ActionAt>
CollectResult collect_impl(const EnvBundle& env, ActionAt action_at,
                           std::size_t n_episodes, std::size_t horizon,
                           Seed seed) {
  env.mdp.validate();
  CollectResult out;
  out.dataset.n_states = env.mdp.n_states;
  out.dataset.n_actions = env.mdp.n_actions;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Rng rng(derive_stream(seed, "episode", e));
    std::size_t state = sample_categorical(env.mdp.init, rng);
    PomdpEpisode ep;
    ep.n_states = env.mdp.n_states;
    ep.n_actions = env.mdp.n_actions;
    ep.n_obs = env.obs_channel ? env.obs_channel->n_outcomes() : 0;
    ep.s0 = state;
    for (std::size_t t = 0; t < horizon; ++t) {
      std::size_t action = action_at(t, state, rng);
      std::size_t next = sample_categorical(env.mdp.trans_row(state, action), rng);
      out.dataset.tuples.push_back({state, action, next});
      if (env.obs_channel) {
        ep.actions.push_back(action);
        ep.observations.push_back(
            sample_categorical(env.obs_channel->row(next), rng));
      }
      state = next;
    }
    if (env.obs_channel) out.episodes.push_back(std::move(ep));
  }
  return out;
}

}  // namespace

EnvBundle make_gridworld(const GridworldSpec& spec) {
  if (spec.width == 0 || spec.height == 0)
    throw InvalidSpec("gridworld: dimensions must be >= 1");
  const std::size_t n = spec.width * spec.height;
  if (spec.goal >= n) throw InvalidSpec("gridworld: goal outside the grid");
  if (spec.walls.count(spec.goal))
    throw InvalidSpec("gridworld: goal must not be a wall");
  for (std::size_t w : spec.walls)
    if (w >= n) throw InvalidSpec("gridworld: wall outside the grid");
  if (spec.slip_prob < 0.0 || spec.slip_prob > 1.0)
    throw InvalidSpec("gridworld: slip_prob must be in [0, 1]");

  FiniteMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = 4;
  mdp.horizon = spec.horizon ? spec.horizon : 2 * (spec.width + spec.height);
  std::vector<Categorical> rows;
  rows.reserve(n * 4);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < 4; ++a) {
      std::vector<double> row(n, 0.0);
      if (s == spec.goal || spec.walls.count(s)) {
        row[s] = 1.0;  // absorbing goal; walls are unreachable self-loops
      } else {
        // Intended direction keeps 1 - slip, the slip mass spreads over
        // all four directions (including the intended one).
        for (std::size_t d = 0; d < 4; ++d) {
          double mass = spec.slip_prob / 4.0 + (d == a ? 1.0 - spec.slip_prob : 0.0);
          row[resolve_move(spec, s, d)] += mass;
        }
      }
      rows.push_back(Categorical(std::move(row)));
    }
  }
  mdp.trans = ConditionalTable(std::move(rows));
  mdp.reward.assign(n, std::vector<double>(4, spec.step_reward));
  for (std::size_t a = 0; a < 4; ++a) mdp.reward[spec.goal][a] = spec.goal_reward;

  // Start uniformly over free non-goal cells; a goal-only grid starts there.
  std::vector<double> init(n, 0.0);
  std::size_t free_cells = 0;
  for (std::size_t s = 0; s < n; ++s)
    if (s != spec.goal && !spec.walls.count(s)) {
      init[s] = 1.0;
      ++free_cells;
    }
  if (free_cells == 0)
    init[spec.goal] = 1.0;
  else
    for (double& p : init) p /= static_cast<double>(free_cells);
  mdp.init = Categorical(std::move(init));
  mdp.validate();
  return EnvBundle{std::move(mdp), std::nullopt, "gridworld"};
}

EnvBundle make_random_env(std::size_t n_states, std::size_t n_actions,
                          std::optional<std::size_t> n_obs,
                          double concentration, Seed seed,
                          std::size_t horizon) {
  if (n_states == 0 || n_actions == 0 || (n_obs && *n_obs == 0))
    throw InvalidSpec("random env: counts must be >= 1");
  if (!(concentration > 0.0))
    throw InvalidSpec("random env: concentration must be > 0");
  Rng rng(derive_stream(seed, "random_env"));
  const std::vector<double> trans_conc(n_states, concentration);

  FiniteMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.horizon = horizon;
  std::vector<Categorical> rows;
  rows.reserve(n_states * n_actions);
  for (std::size_t i = 0; i < n_states * n_actions; ++i)
    rows.push_back(Categorical(rng.dirichlet(trans_conc)));
  mdp.trans = ConditionalTable(std::move(rows));
  mdp.reward.assign(n_states, std::vector<double>(n_actions, 0.0));
  for (auto& row : mdp.reward)
    for (double& r : row) r = rng.uniform01();
  mdp.init = Categorical(rng.dirichlet(trans_conc));
  mdp.validate();

  std::optional<ConditionalTable> channel;
  if (n_obs) {
    const std::vector<double> obs_conc(*n_obs, concentration);
    std::vector<Categorical> obs_rows;
    obs_rows.reserve(n_states);
    for (std::size_t s = 0; s < n_states; ++s)
      obs_rows.push_back(Categorical(rng.dirichlet(obs_conc)));
    channel = ConditionalTable(std::move(obs_rows));
  }
  return EnvBundle{std::move(mdp), std::move(channel), "random"};
}

CollectResult collect_transitions(const EnvBundle& env,
                                  const Categorical& behavior,
                                  std::size_t n_episodes, std::size_t horizon,
                                  Seed seed) {
  if (behavior.size() != env.mdp.n_actions)
    throw ShapeMismatch("collect_transitions: behavior shape mismatch");
  return collect_impl(
      env,
      [&behavior](std::size_t, std::size_t, Rng& rng) {
        return sample_categorical(behavior, rng);
      },
      n_episodes, horizon, seed);
}

CollectResult collect_transitions(const EnvBundle& env,
                                  const TimeIndexedPolicy& behavior,
                                  std::size_t n_episodes, std::size_t horizon,
                                  Seed seed) {
  if (horizon > behavior.per_step.size())
    throw ShapeMismatch("collect_transitions: policy shorter than horizon");
  for (const ConditionalTable& step : behavior.per_step)
    if (step.n_conditions() != env.mdp.n_states ||
        step.n_outcomes() != env.mdp.n_actions)
      throw ShapeMismatch("collect_transitions: behavior shape mismatch");
  return collect_impl(
      env,
      [&behavior](std::size_t t, std::size_t s, Rng& rng) {
        return sample_categorical(behavior.per_step[t].row(s), rng);
      },
      n_episodes, horizon, seed);
}

BanditProblem fixture_b1() {
  return BanditProblem{Categorical::uniform(2), {{1.0, 0.0}, {0.0, 1.0}}};
}

FiniteMdp fixture_m1() {
  FiniteMdp m;
  m.n_states = 2;
  m.n_actions = 2;
  m.horizon = 2;
  m.init = Categorical::uniform(2);
  // Action 0 stays, action 1 flips; reward 1 whenever the state is 1.
  std::vector<Categorical> rows;
  rows.push_back(Categorical::dirac(2, 0));  // s=0, stay
  rows.push_back(Categorical::dirac(2, 1));  // s=0, flip
  rows.push_back(Categorical::dirac(2, 1));  // s=1, stay
  rows.push_back(Categorical::dirac(2, 0));  // s=1, flip
  m.trans = ConditionalTable(std::move(rows));
  m.reward = {{0.0, 0.0}, {1.0, 1.0}};
  m.validate();
  return m;
}

}  // namespace dvi
