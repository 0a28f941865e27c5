#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace teamcredit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Error taxonomy mirrored by the CLI exit codes: config/data problems exit
// with 3, numerical failures with 4, argument misuse with 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class GraphMode { kFcg, kFg, kDg };

std::string to_string(GraphMode mode);
GraphMode graph_mode_from_string(const std::string& s);

// One decision step of every agent. Actions are discrete indices; states are
// the concatenation of all agents' observation blocks.
struct Transition {
  int episode = 0;
  int t = 0;
  VectorXd s;
  std::vector<int> a;
  double team_reward = 0.0;
  VectorXd s_next;
  bool done = false;
};

struct DatasetMeta {
  int version = 1;
  int n_agents = 0;
  std::vector<int> agent_state_dims;
  std::vector<int> agent_action_counts;
  std::string env;
  std::string tier;
  std::uint64_t seed = 0;

  int joint_state_dim() const;
  int joint_action_dim() const;  // sum of action counts, one-hot width
  int state_offset(int agent) const;
  int action_offset(int agent) const;
};

struct OfflineDataset {
  DatasetMeta meta;
  std::vector<Transition> rows;
};

// Per-agent causal masks over the joint state and the one-hot joint action.
// Soft masks carry values in [0, 1]; hardened masks are exactly 0 or 1.
struct MaskPair {
  VectorXd state;
  VectorXd action;
};

// Noiseless per-agent rewards plus the realized team noise, kept next to a
// dataset for diagnostics only. Nothing in training may read this.
struct HiddenRow {
  int episode = 0;
  int t = 0;
  VectorXd r;
  double eps = 0.0;
};

struct HiddenRewards {
  std::vector<HiddenRow> rows;
};

// Dataset plus per-transition per-agent reward estimates.
struct AssignedDataset {
  OfflineDataset data;
  std::vector<VectorXd> r_hat;
};

struct RunConfig {
  double lambda1 = 7e-3;       // L1 weight on state masks
  double lambda2 = 7e-3;       // L1 weight on action masks
  double h = 0.1;              // mask clipping threshold
  double model_lr = 3e-4;
  double policy_lr = 3e-4;
  int batch_size = 1024;
  double gamma = 0.95;
  double cql_alpha = 5.0;      // conservative penalty weight
  long train_steps = 2000;
  // Steps at the start of model training where only the reward network
  // moves. The reward fit settles on the prior-weighted inputs first, so
  // when the mask networks unfreeze the reconstruction gradient defends
  // the entries the fit actually uses instead of every correlated copy.
  long mask_warmup = 200;
  std::uint64_t seed = 1;
  GraphMode graph_mode = GraphMode::kDg;
  bool clip_enabled = true;
  long eval_interval = 1000;
  int eval_episodes = 10;
  int model_hidden = 256;      // hidden width of the decomposition networks
  int q_hidden = 64;           // hidden width of the Q networks

  void validate() const;  // throws ConfigError on out-of-range fields
};

struct Violation {
  int episode = -1;
  int t = -1;
  std::string message;
};

// Structural checks on a dataset: dimension agreement with the header,
// action ranges, consecutive timesteps, contiguous episodes, and exactly one
// terminal flag sitting on each episode's last row. Empty result means every
// downstream consumer will accept the dataset.
std::vector<Violation> validate_dataset(const OfflineDataset& ds);

}  // namespace teamcredit
