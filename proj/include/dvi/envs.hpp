#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dvi/bandit.hpp"
#include "dvi/mdp.hpp"
#include "dvi/model_vi.hpp"
#include "dvi/pomdp_vi.hpp"
#include "dvi/rng.hpp"

namespace dvi {

// Rectangular gridworld with four actions (up, down, left, right), slip
// dynamics, wall bounce-back, and an absorbing goal. Cells are indexed
// row-major, state = y * width + x.
struct GridworldSpec {
  std::size_t width = 1;
  std::size_t height = 1;
  std::set<std::size_t> walls;
  std::size_t goal = 0;
  double step_reward = 0.0;
  double goal_reward = 1.0;
  double slip_prob = 0.0;
  // 0 means the default traversal bound 2 * (width + height).
  std::size_t horizon = 0;
};

// An environment with known ground truth, for recovery tests and data
// collection. obs_channel present makes it a POMDP.
struct EnvBundle {
  FiniteMdp mdp;
  std::optional<ConditionalTable> obs_channel;  // P(o|s)
  std::string true_params_tag;
};

EnvBundle make_gridworld(const GridworldSpec& spec);

// Transition (and observation) rows drawn from a symmetric
// Dirichlet(concentration), rewards uniform in [0,1], init from the same
// Dirichlet; fully determined by the seed.
EnvBundle make_random_env(std::size_t n_states, std::size_t n_actions,
                          std::optional<std::size_t> n_obs,
                          double concentration, Seed seed,
                          std::size_t horizon = 5);

struct CollectResult {
  TransitionDataset dataset;
  // Present only when the environment has an observation channel.
  std::vector<PomdpEpisode> episodes;
};

// Simulates n_episodes of the given length from p(s0) under the behavior
// policy. Episode i draws from its own derived stream, so a prefix of the
// episode budget reproduces exactly.
CollectResult collect_transitions(const EnvBundle& env,
                                  const Categorical& behavior,
                                  std::size_t n_episodes, std::size_t horizon,
                                  Seed seed);
CollectResult collect_transitions(const EnvBundle& env,
                                  const TimeIndexedPolicy& behavior,
                                  std::size_t n_episodes, std::size_t horizon,
                                  Seed seed);

// Canonical fixtures: B1 is the 2x2 diagonal-reward bandit with uniform
// p(s); M1 is the 2-state stay/flip chain that pays 1 in state 1, T = 2.
BanditProblem fixture_b1();
FiniteMdp fixture_m1();

}  // namespace dvi
