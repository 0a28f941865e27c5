#pragma once

#include <functional>
#include <utility>

#include "teamcredit/core.hpp"
#include "teamcredit/rng.hpp"

namespace teamcredit::synthenv {

enum class RewardFamily { kLinear, kMlp };
enum class Tier { kRandom, kMedium, kMediumReplay, kExpert };

std::string to_string(RewardFamily f);
std::string to_string(Tier t);
RewardFamily family_from_string(const std::string& s);
Tier tier_from_string(const std::string& s);

// Declarative description of an environment draw. The joint state is the
// concatenation of per-agent blocks; actions are discrete per agent and enter
// rewards through their one-hot encoding. Dynamics are a linear drift per
// block plus an action-dependent displacement and Gaussian noise.
struct EnvSpec {
  int n_agents = 3;
  std::vector<int> agent_state_dims{6, 6, 6};
  std::vector<int> agent_action_counts{5, 5, 5};
  int horizon = 25;
  RewardFamily family = RewardFamily::kLinear;
  double sparsity = 0.3;     // expected density of each true mask
  double noise_sigma = 0.0;  // std of the per-agent reward noise
  bool local_rewards = false;  // restrict causal parents to the agent's own blocks
  std::uint64_t seed = 1;
  int score_episodes = 200;  // rollouts per tier when measuring anchor scores

  double drift = 0.9;
  double act_scale = 0.6;
  double trans_noise = 0.3;
  double init_scale = 1.0;

  int joint_state_dim() const;
  int joint_action_dim() const;
  int state_offset(int agent) const;
  int action_offset(int agent) const;
  DatasetMeta meta(Tier tier) const;
  void validate() const;
};

// A realized environment instance: the binary causal masks, the individual
// reward parameters, the action displacement table, and the measured anchor
// returns of the random and expert tiers.
struct GroundTruthSpec {
  int version = 1;
  EnvSpec env;
  std::vector<VectorXd> state_masks;   // entries exactly 0 or 1, length D_s
  std::vector<VectorXd> action_masks;  // length D_a

  // LINEAR family: r_i = w_i . (mask_i * [s; onehot(a)]), weights zero off
  // the mask support and bounded away from zero on it.
  std::vector<VectorXd> linear_w;

  // MLP family: r_i = w2 . tanh(W1 (mask_i * [s; onehot(a)]) + b1).
  std::vector<MatrixXd> mlp_w1;
  std::vector<VectorXd> mlp_b1;
  std::vector<VectorXd> mlp_w2;

  // disp[i] has one column per action of agent i, rows = that agent's block.
  std::vector<MatrixXd> disp;

  double expert_score = 0.0;
  double random_score = 0.0;
  double expert_score_se = 0.0;
  double random_score_se = 0.0;
};

// Draws masks and reward parameters from spec.seed, measures the tier anchor
// returns, and retries with a derived seed until the tier ordering
// RANDOM < MEDIUM < EXPERT holds. Throws DataError if no draw satisfies it.
GroundTruthSpec make_env(const EnvSpec& spec);

// Noiseless individual reward of one agent.
double true_reward(const GroundTruthSpec& g, int agent, const VectorXd& s,
                   const std::vector<int>& a);

// One dynamics step; writes s_next and uses rng for the transition noise.
void step_state(const GroundTruthSpec& g, const VectorXd& s, const std::vector<int>& a,
                Rng& rng, VectorXd& s_next);

VectorXd sample_initial_state(const GroundTruthSpec& g, Rng& rng);

// Per-agent action distribution of a behavior tier. progress in [0, 1] is the
// position within the collection run; only MEDIUM_REPLAY depends on it, it
// anneals the expert mixture weight from 0 (pure random) to the MEDIUM value.
std::vector<VectorXd> behavior_action_probs(const GroundTruthSpec& g, Tier tier,
                                            const VectorXd& s, double progress);

// Rolls out episodes and collects transitions plus the hidden per-agent
// rewards. Episode e draws from an independent stream derived from
// (seed, e), so results do not depend on collection order.
std::pair<OfflineDataset, HiddenRewards> collect_dataset(const GroundTruthSpec& g, Tier tier,
                                                         int n_episodes, std::uint64_t seed);

struct EvalStats {
  double mean_return = 0.0;
  double std_return = 0.0;  // sample std over episodes
  int n_episodes = 0;

  double se() const;
};

using ActionFn = std::function<std::vector<int>(const VectorXd& s, double progress, Rng& rng)>;

// Undiscounted team return statistics of an arbitrary policy.
EvalStats rollout_returns(const GroundTruthSpec& g, const ActionFn& act, int n_episodes,
                          std::uint64_t seed);

}  // namespace teamcredit::synthenv
