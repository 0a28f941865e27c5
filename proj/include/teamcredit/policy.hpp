#pragma once

#include <limits>
#include <string>
#include <vector>

#include "teamcredit/core.hpp"
#include "teamcredit/metrics.hpp"
#include "teamcredit/mlp.hpp"
#include "teamcredit/synthenv.hpp"

namespace teamcredit::policy {

enum class RewardMode { kIndividual, kTeam };

std::string to_string(RewardMode m);
RewardMode reward_mode_from_string(const std::string& s);

// Tier-dependent conservative penalty defaults (expert 5.0, medium 0.5,
// medium-replay 1.0, random 1.0); unknown tiers get 1.0. Applied only when a
// config does not pin cql_alpha itself.
double default_cql_alpha(const std::string& tier);

// Per-agent double Q networks with lagged target copies. Each agent observes
// only its own state block; a Q net maps that block to one value per action.
struct QEnsemble {
  int n_agents = 0;
  std::vector<int> agent_state_dims;
  std::vector<int> agent_action_counts;
  std::vector<nn::Mlp> q1, q2;    // online
  std::vector<nn::Mlp> tq1, tq2;  // targets
  RewardMode reward_mode = RewardMode::kIndividual;
  std::string config_hash;
  int version = 1;

  int obs_offset(int agent) const;
  bool matches(const DatasetMeta& meta) const;
};

QEnsemble make_ensemble(const DatasetMeta& meta, int hidden, std::uint64_t seed);

// Greedy action under the pessimistic value min(q1, q2); ties take the
// lowest action index.
int greedy_action(const QEnsemble& ens, int agent, const VectorXd& obs);
std::vector<int> greedy_joint_action(const QEnsemble& ens, const VectorXd& s);

struct CqlParts {
  double total = 0.0;         // sum over agents
  double td = 0.0;            // sum over agents of the double-Q TD terms
  double conservative = 0.0;  // sum over agents of the penalty terms
  VectorXd per_agent;         // per-agent totals
};

struct PolicyGradients {
  std::vector<nn::Gradients> q1, q2;
};

PolicyGradients zero_policy_gradients(const QEnsemble& ens);

// Conservative double-Q loss over a batch of rows, summed over agents.
// Targets: y = r + gamma * (1 - done) * min_k tq_k(o', a*), where a* is the
// greedy action of the first target net (ties to the lowest index) and y is
// held fixed. The TD term averages (q_k(o, a_data) - y)^2 over the batch and
// both online nets; the penalty is alpha * mean(logsumexp_a q_k - q_k(a_data))
// over the same. INDIVIDUAL mode reads each agent's assigned reward, TEAM
// feeds every agent the raw team reward. grads may be null.
CqlParts cql_loss(const QEnsemble& ens, const AssignedDataset& asg,
                  const std::vector<long>& batch, RewardMode mode, double gamma, double alpha,
                  PolicyGradients* grads);

// Copies the online nets over the targets.
void sync_targets(QEnsemble& ens);

struct TrainPolicyResult {
  QEnsemble policy;
  std::vector<metrics::MetricsRow> log;
  synthenv::EvalStats final_eval;
  double final_normalized = std::numeric_limits<double>::quiet_NaN();
};

// Adam over minibatches shared across agents; targets refresh every 100
// steps. Q values beyond 1e6 in magnitude raise NumericError. When truth is
// given, greedy rollouts are scored every eval_interval steps and at the end,
// filling the normalized-score column of the log.
TrainPolicyResult train_policy(const AssignedDataset& asg, const RunConfig& cfg, RewardMode mode,
                               const synthenv::GroundTruthSpec* truth = nullptr);

// Greedy-policy rollout statistics in the true environment.
synthenv::EvalStats evaluate(const QEnsemble& ens, const synthenv::GroundTruthSpec& truth,
                             int n_episodes, std::uint64_t seed);

}  // namespace teamcredit::policy
