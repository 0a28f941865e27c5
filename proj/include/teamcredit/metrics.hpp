#pragma once

#include <limits>
#include <string>
#include <vector>

#include "teamcredit/core.hpp"

namespace teamcredit::metrics {

enum class MaskKind { kState, kAction };

// One evaluation-time log record. Fields that a given context cannot fill
// stay NaN and are written as nan in the CSV.
struct MetricsRow {
  long step = 0;
  double s_sr = std::numeric_limits<double>::quiet_NaN();
  double s_ar = std::numeric_limits<double>::quiet_NaN();
  double recon_mse = std::numeric_limits<double>::quiet_NaN();
  double mask_f1_state = std::numeric_limits<double>::quiet_NaN();
  double mask_f1_action = std::numeric_limits<double>::quiet_NaN();
  double decomp_corr = std::numeric_limits<double>::quiet_NaN();
  double normalized_score = std::numeric_limits<double>::quiet_NaN();

  // Extra diagnostics kept out of the CSV.
  double l1_state = std::numeric_limits<double>::quiet_NaN();
  double l1_action = std::numeric_limits<double>::quiet_NaN();
  double s_sr_cross = std::numeric_limits<double>::quiet_NaN();
  double s_ar_cross = std::numeric_limits<double>::quiet_NaN();
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

// Sparsity of hardened masks, split into the share of active entries inside
// each agent's own block (the headline rate) and the share of active entries
// in other agents' blocks. Dynamic masks pass several sampled timesteps and
// the rates average over them.
struct SparsityReport {
  double own = 0.0;
  double cross = 0.0;
};

SparsityReport sparsity_rate(const std::vector<std::vector<MaskPair>>& samples, MaskKind kind,
                             const std::vector<int>& agent_state_dims,
                             const std::vector<int>& agent_action_counts);

// Entry-wise majority vote across sampled timesteps; exact halves round up.
std::vector<MaskPair> majority_vote(const std::vector<std::vector<MaskPair>>& samples);

std::vector<MaskPair> to_mask_pairs(const std::vector<VectorXd>& state,
                                    const std::vector<VectorXd>& action);

struct F1Report {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

F1Report mask_f1(const std::vector<MaskPair>& pred, const std::vector<MaskPair>& truth,
                 MaskKind kind);
// State and action entries pooled into one confusion matrix.
F1Report mask_f1_pooled(const std::vector<MaskPair>& pred, const std::vector<MaskPair>& truth);

// Per-agent agreement between estimated and hidden rewards. Both series are
// mean-centered per agent first, since the team-sum supervision leaves
// per-agent constants unidentified. A constant series has correlation 0 by
// convention.
struct FidelityReport {
  VectorXd per_agent_corr;
  VectorXd per_agent_centered_mse;
  double mean_corr = 0.0;
};

FidelityReport decomposition_fidelity(const std::vector<VectorXd>& r_hat,
                                      const std::vector<VectorXd>& r_true);

// 100 * (score - random) / (expert - random).
double normalized_score(double score, double random_score, double expert_score);

}  // namespace teamcredit::metrics
