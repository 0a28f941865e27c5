#include "teamcredit/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace teamcredit::metrics {

namespace {

void write_cell(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
    return;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  os << buf;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open metrics csv for writing: " + path);
  os << "step,S_sr,S_ar,recon_mse,mask_f1_state,mask_f1_action,decomp_corr,normalized_score\n";
  for (const MetricsRow& r : rows) {
    os << r.step;
    for (double v : {r.s_sr, r.s_ar, r.recon_mse, r.mask_f1_state, r.mask_f1_action,
                     r.decomp_corr, r.normalized_score}) {
      os << ',';
      write_cell(os, v);
    }
    os << '\n';
  }
}

SparsityReport sparsity_rate(const std::vector<std::vector<MaskPair>>& samples, MaskKind kind,
                             const std::vector<int>& agent_state_dims,
                             const std::vector<int>& agent_action_counts) {
  if (samples.empty()) throw DataError("sparsity_rate: no mask samples");
  const auto& dims = kind == MaskKind::kState ? agent_state_dims : agent_action_counts;
  const int n = static_cast<int>(dims.size());
  const int joint = std::accumulate(dims.begin(), dims.end(), 0);

  double own_sum = 0.0;
  double cross_sum = 0.0;
  for (const auto& sample : samples) {
    if (static_cast<int>(sample.size()) != n)
      throw DataError("sparsity_rate: sample has wrong agent count");
    int off = 0;
    for (int i = 0; i < n; ++i) {
      const VectorXd& m = kind == MaskKind::kState ? sample[i].state : sample[i].action;
      if (m.size() != joint) throw DataError("sparsity_rate: mask width mismatch");
      const double own_active = m.segment(off, dims[i]).sum();
      own_sum += own_active / dims[i];
      if (joint > dims[i]) cross_sum += (m.sum() - own_active) / (joint - dims[i]);
      off += dims[i];
    }
  }
  const double denom = static_cast<double>(samples.size()) * n;
  return {own_sum / denom, cross_sum / denom};
}

std::vector<MaskPair> majority_vote(const std::vector<std::vector<MaskPair>>& samples) {
  if (samples.empty()) throw DataError("majority_vote: no samples");
  const std::size_t n = samples[0].size();
  std::vector<MaskPair> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    VectorXd s = VectorXd::Zero(samples[0][i].state.size());
    VectorXd a = VectorXd::Zero(samples[0][i].action.size());
    for (const auto& sample : samples) {
      s += sample[i].state;
      a += sample[i].action;
    }
    const double half = static_cast<double>(samples.size()) / 2.0;
    out[i].state = (s.array() >= half).cast<double>();
    out[i].action = (a.array() >= half).cast<double>();
  }
  return out;
}

std::vector<MaskPair> to_mask_pairs(const std::vector<VectorXd>& state,
                                    const std::vector<VectorXd>& action) {
  if (state.size() != action.size()) throw DataError("to_mask_pairs: length mismatch");
  std::vector<MaskPair> out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) out[i] = {state[i], action[i]};
  return out;
}

namespace {

F1Report f1_from_counts(long tp, long fp, long fn) {
  F1Report rep;
  rep.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  rep.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  rep.f1 = rep.precision + rep.recall > 0.0
               ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
               : 0.0;
  return rep;
}

void tally(const VectorXd& pred, const VectorXd& truth, long& tp, long& fp, long& fn) {
  if (pred.size() != truth.size()) throw DataError("mask_f1: width mismatch");
  for (int k = 0; k < pred.size(); ++k) {
    const bool p = pred[k] > 0.5;
    const bool t = truth[k] > 0.5;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
  }
}

}  // namespace

F1Report mask_f1(const std::vector<MaskPair>& pred, const std::vector<MaskPair>& truth,
                 MaskKind kind) {
  if (pred.size() != truth.size()) throw DataError("mask_f1: agent count mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (kind == MaskKind::kState)
      tally(pred[i].state, truth[i].state, tp, fp, fn);
    else
      tally(pred[i].action, truth[i].action, tp, fp, fn);
  }
  return f1_from_counts(tp, fp, fn);
}

F1Report mask_f1_pooled(const std::vector<MaskPair>& pred, const std::vector<MaskPair>& truth) {
  if (pred.size() != truth.size()) throw DataError("mask_f1: agent count mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tally(pred[i].state, truth[i].state, tp, fp, fn);
    tally(pred[i].action, truth[i].action, tp, fp, fn);
  }
  return f1_from_counts(tp, fp, fn);
}

FidelityReport decomposition_fidelity(const std::vector<VectorXd>& r_hat,
                                      const std::vector<VectorXd>& r_true) {
  if (r_hat.size() != r_true.size() || r_hat.empty())
    throw DataError("decomposition_fidelity: series length mismatch or empty");
  const int n_agents = static_cast<int>(r_hat[0].size());
  const long n = static_cast<long>(r_hat.size());

  FidelityReport rep;
  rep.per_agent_corr = VectorXd::Zero(n_agents);
  rep.per_agent_centered_mse = VectorXd::Zero(n_agents);
  for (int i = 0; i < n_agents; ++i) {
    VectorXd x(n), y(n);
    for (long t = 0; t < n; ++t) {
      if (r_hat[t].size() != n_agents || r_true[t].size() != n_agents)
        throw DataError("decomposition_fidelity: agent count mismatch");
      x[t] = r_hat[t][i];
      y[t] = r_true[t][i];
    }
    x.array() -= x.mean();
    y.array() -= y.mean();
    const double vx = x.squaredNorm();
    const double vy = y.squaredNorm();
    rep.per_agent_corr[i] = (vx > 1e-24 && vy > 1e-24) ? x.dot(y) / std::sqrt(vx * vy) : 0.0;
    rep.per_agent_centered_mse[i] = (x - y).squaredNorm() / static_cast<double>(n);
  }
  rep.mean_corr = rep.per_agent_corr.mean();
  return rep;
}

double normalized_score(double score, double random_score, double expert_score) {
  if (expert_score == random_score)
    throw DataError("normalized_score: expert and random anchors coincide");
  return 100.0 * (score - random_score) / (expert_score - random_score);
}

}  // namespace teamcredit::metrics
