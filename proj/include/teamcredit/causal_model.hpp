#pragma once

#include "teamcredit/core.hpp"
#include "teamcredit/metrics.hpp"
#include "teamcredit/mlp.hpp"
#include "teamcredit/synthenv.hpp"

namespace teamcredit::causal {

struct ModelDims {
  int n_agents = 0;
  std::vector<int> agent_state_dims;
  std::vector<int> agent_action_counts;

  int ds() const;
  int da() const;
  int g_in() const { return ds() + da() + n_agents; }  // [s; onehot(a); onehot(i)]
  int state_offset(int agent) const;
  int action_offset(int agent) const;

  static ModelDims from_meta(const DatasetMeta& meta);
  bool matches(const DatasetMeta& meta) const;
};

// The learned decomposition: mask predictors plus the individual-reward
// network. All three networks read [s; onehot(a); onehot(agent)]. The mask
// predictors emit logits over the joint state / joint action dims, squashed
// to (0, 1); psi_r reads the mask-weighted inputs and the agent id and emits
// that agent's reward share.
//
// graph_mode selects where masks come from: DG predicts them per timestep,
// FG keeps one learnable logit row per agent, FCG fixes them to all-ones.
struct CausalModel {
  GraphMode mode = GraphMode::kDg;
  double h = 0.1;
  bool clip_enabled = true;  // whether assignment applies the threshold
  ModelDims dims;
  nn::Mlp psi_g_state;
  nn::Mlp psi_g_action;
  nn::Mlp psi_r;
  MatrixXd fg_state_logits;   // n_agents x D_s, used in FG mode
  MatrixXd fg_action_logits;  // n_agents x D_a
  std::string config_hash;
  int version = 1;
};

CausalModel make_model(const ModelDims& dims, GraphMode mode, double h, bool clip_enabled,
                       int hidden, std::uint64_t seed);

// Soft masks for one transition, one MaskPair per agent. Values lie in (0,1)
// for DG/FG and are exactly 1 in FCG mode.
std::vector<MaskPair> predict_masks(const CausalModel& model, const VectorXd& s,
                                    const std::vector<int>& a);

// Entries with value < h drop to zero, everything else keeps its soft value.
std::vector<MaskPair> clip_masks(const std::vector<MaskPair>& masks, double h);
MaskPair clip_mask(const MaskPair& mask, double h);

// Retained entries become exactly 1.
std::vector<MaskPair> harden_masks(const std::vector<MaskPair>& masks);

// Per-agent reward estimates for one transition, through the clipped masks
// (or raw soft masks when the model was trained with clipping disabled; FCG
// ignores h entirely).
VectorXd assign_rewards_row(const CausalModel& model, const VectorXd& s,
                            const std::vector<int>& a);
AssignedDataset assign_rewards(const CausalModel& model, const OfflineDataset& ds);

struct ModelLossParts {
  double total = 0.0;
  double recon = 0.0;     // mean squared team-reward reconstruction error
  double l1_state = 0.0;  // lambda1 * mean_t sum_i ||soft state mask||_1
  double l1_action = 0.0;
};

struct ModelGradients {
  nn::Gradients g_state, g_action, r;
  MatrixXd fg_state, fg_action;
};

ModelGradients zero_model_gradients(const CausalModel& model);

// Team-reward reconstruction loss plus the L1 mask regularizers over one
// batch of row indices. Training always flows through the soft masks; the
// clipping threshold plays no role here. grads may be null for loss-only
// evaluation.
ModelLossParts model_loss(const CausalModel& model, const OfflineDataset& ds,
                          const std::vector<long>& batch, double lambda1, double lambda2,
                          ModelGradients* grads);

struct TrainModelResult {
  CausalModel model;
  std::vector<metrics::MetricsRow> log;
  double holdout_mse = 0.0;    // reconstruction MSE on held-out episodes
  double holdout_var_r = 0.0;  // Var(R_t) over the same rows
};

// Adam on minibatches sampled from the non-holdout episodes (episode index
// 9 mod 10 is held out; tiny datasets without such episodes fall back to
// training rows). Logs a metrics row every eval_interval steps and at the
// final step; mask F1 and reward correlation columns are filled when the
// ground truth / hidden rewards are supplied.
TrainModelResult train_model(const OfflineDataset& ds, const RunConfig& cfg,
                             const synthenv::GroundTruthSpec* truth = nullptr,
                             const HiddenRewards* hidden = nullptr);

// Hard masks over a deterministic subsample of rows, for metrics: at most
// `max_samples` transitions taken with even stride.
std::vector<std::vector<MaskPair>> sample_hard_masks(const CausalModel& model,
                                                     const OfflineDataset& ds,
                                                     int max_samples = 512);

}  // namespace teamcredit::causal
