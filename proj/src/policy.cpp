#include "teamcredit/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "teamcredit/rng.hpp"

namespace teamcredit::policy {

namespace {

constexpr long kTargetSyncPeriod = 100;
constexpr double kQDivergence = 1e6;

VectorXd stable_logsumexp_cols(const MatrixXd& q) {
  VectorXd out(q.cols());
  for (long t = 0; t < q.cols(); ++t) {
    const double m = q.col(t).maxCoeff();
    out[t] = m + std::log((q.col(t).array() - m).exp().sum());
  }
  return out;
}

int argmax_lowest(const VectorXd& v) {
  int best = 0;
  for (int j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

}  // namespace

std::string to_string(RewardMode m) {
  return m == RewardMode::kIndividual ? "INDIVIDUAL" : "TEAM";
}

RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "INDIVIDUAL") return RewardMode::kIndividual;
  if (s == "TEAM") return RewardMode::kTeam;
  throw ConfigError("unknown reward mode: " + s + " (expected INDIVIDUAL or TEAM)");
}

double default_cql_alpha(const std::string& tier) {
  if (tier == "expert") return 5.0;
  if (tier == "medium") return 0.5;
  return 1.0;  // medium-replay, random, anything else
}

int QEnsemble::obs_offset(int agent) const {
  return std::accumulate(agent_state_dims.begin(), agent_state_dims.begin() + agent, 0);
}

bool QEnsemble::matches(const DatasetMeta& meta) const {
  return n_agents == meta.n_agents && agent_state_dims == meta.agent_state_dims &&
         agent_action_counts == meta.agent_action_counts;
}

QEnsemble make_ensemble(const DatasetMeta& meta, int hidden, std::uint64_t seed) {
  if (hidden <= 0) throw ConfigError("q_hidden must be positive");
  QEnsemble ens;
  ens.n_agents = meta.n_agents;
  ens.agent_state_dims = meta.agent_state_dims;
  ens.agent_action_counts = meta.agent_action_counts;
  for (int i = 0; i < meta.n_agents; ++i) {
    const auto arch = nn::arch3(meta.agent_state_dims[i], hidden, meta.agent_action_counts[i]);
    ens.q1.push_back(nn::make_mlp(arch, derive_seed(derive_seed(seed, "q1"), std::uint64_t(i))));
    ens.q2.push_back(nn::make_mlp(arch, derive_seed(derive_seed(seed, "q2"), std::uint64_t(i))));
  }
  ens.tq1 = ens.q1;
  ens.tq2 = ens.q2;
  return ens;
}

int greedy_action(const QEnsemble& ens, int agent, const VectorXd& obs) {
  const MatrixXd v1 = nn::forward(ens.q1[agent], obs);
  const MatrixXd v2 = nn::forward(ens.q2[agent], obs);
  const VectorXd v = v1.col(0).cwiseMin(v2.col(0));
  return argmax_lowest(v);
}

std::vector<int> greedy_joint_action(const QEnsemble& ens, const VectorXd& s) {
  std::vector<int> a(ens.n_agents);
  for (int i = 0; i < ens.n_agents; ++i) {
    const VectorXd obs = s.segment(ens.obs_offset(i), ens.agent_state_dims[i]);
    a[i] = greedy_action(ens, i, obs);
  }
  return a;
}

PolicyGradients zero_policy_gradients(const QEnsemble& ens) {
  PolicyGradients g;
  for (int i = 0; i < ens.n_agents; ++i) {
    g.q1.push_back(nn::zero_gradients(ens.q1[i]));
    g.q2.push_back(nn::zero_gradients(ens.q2[i]));
  }
  return g;
}

void sync_targets(QEnsemble& ens) {
  ens.tq1 = ens.q1;
  ens.tq2 = ens.q2;
}

CqlParts cql_loss(const QEnsemble& ens, const AssignedDataset& asg,
                  const std::vector<long>& batch, RewardMode mode, double gamma, double alpha,
                  PolicyGradients* grads) {
  if (batch.empty()) throw DataError("cql_loss: empty batch");
  if (!ens.matches(asg.data.meta)) throw DataError("cql_loss: dataset dims mismatch");
  if (mode == RewardMode::kIndividual && asg.r_hat.size() != asg.data.rows.size())
    throw DataError("cql_loss: INDIVIDUAL mode needs assigned rewards for every row");
  const long b = static_cast<long>(batch.size());
  const double bn = static_cast<double>(b);

  CqlParts parts;
  parts.per_agent = VectorXd::Zero(ens.n_agents);

  for (int i = 0; i < ens.n_agents; ++i) {
    const int d = ens.agent_state_dims[i];
    const int off = ens.obs_offset(i);
    const int na = ens.agent_action_counts[i];

    MatrixXd obs(d, b), obs_next(d, b);
    VectorXd reward(b), not_done(b);
    std::vector<int> a_data(b);
    for (long t = 0; t < b; ++t) {
      const Transition& row = asg.data.rows[batch[t]];
      obs.col(t) = row.s.segment(off, d);
      obs_next.col(t) = row.s_next.segment(off, d);
      a_data[t] = row.a[i];
      not_done[t] = row.done ? 0.0 : 1.0;
      reward[t] = mode == RewardMode::kIndividual ? asg.r_hat[batch[t]][i] : row.team_reward;
    }

    const MatrixXd t1 = nn::forward(ens.tq1[i], obs_next);
    const MatrixXd t2 = nn::forward(ens.tq2[i], obs_next);
    VectorXd y(b);
    for (long t = 0; t < b; ++t) {
      const int astar = argmax_lowest(t1.col(t));
      y[t] = reward[t] + gamma * not_done[t] * std::min(t1(astar, t), t2(astar, t));
    }

    nn::ForwardCache c1, c2;
    const MatrixXd q1 = nn::forward(ens.q1[i], obs, grads ? &c1 : nullptr);
    const MatrixXd q2 = nn::forward(ens.q2[i], obs, grads ? &c2 : nullptr);
    if (q1.cwiseAbs().maxCoeff() > kQDivergence || q2.cwiseAbs().maxCoeff() > kQDivergence ||
        t1.cwiseAbs().maxCoeff() > kQDivergence || t2.cwiseAbs().maxCoeff() > kQDivergence)
      throw NumericError("Q values exceeded 1e6 for agent " + std::to_string(i));

    double td = 0.0, cons = 0.0;
    const VectorXd lse1 = stable_logsumexp_cols(q1);
    const VectorXd lse2 = stable_logsumexp_cols(q2);
    for (long t = 0; t < b; ++t) {
      const double s1 = q1(a_data[t], t), s2 = q2(a_data[t], t);
      td += (s1 - y[t]) * (s1 - y[t]) + (s2 - y[t]) * (s2 - y[t]);
      cons += (lse1[t] - s1) + (lse2[t] - s2);
    }
    td /= 2.0 * bn;
    cons = alpha * cons / (2.0 * bn);
    parts.td += td;
    parts.conservative += cons;
    parts.per_agent[i] = td + cons;

    if (grads) {
      // d/dq_k(j,t): the penalty contributes alpha/(2B) (softmax_j - 1[j=a]),
      // the TD term adds (q_k(a,t) - y_t)/B at the data action.
      MatrixXd dq1(na, b), dq2(na, b);
      for (long t = 0; t < b; ++t) {
        dq1.col(t) = (q1.col(t).array() - lse1[t]).exp() * (alpha / (2.0 * bn));
        dq2.col(t) = (q2.col(t).array() - lse2[t]).exp() * (alpha / (2.0 * bn));
        dq1(a_data[t], t) += -alpha / (2.0 * bn) + (q1(a_data[t], t) - y[t]) / bn;
        dq2(a_data[t], t) += -alpha / (2.0 * bn) + (q2(a_data[t], t) - y[t]) / bn;
      }
      nn::backward(ens.q1[i], c1, dq1, grads->q1[i]);
      nn::backward(ens.q2[i], c2, dq2, grads->q2[i]);
    }
  }
  parts.total = parts.td + parts.conservative;
  return parts;
}

synthenv::EvalStats evaluate(const QEnsemble& ens, const synthenv::GroundTruthSpec& truth,
                             int n_episodes, std::uint64_t seed) {
  const synthenv::ActionFn act = [&](const VectorXd& s, double, Rng&) {
    return greedy_joint_action(ens, s);
  };
  return synthenv::rollout_returns(truth, act, n_episodes, seed);
}

TrainPolicyResult train_policy(const AssignedDataset& asg, const RunConfig& cfg, RewardMode mode,
                               const synthenv::GroundTruthSpec* truth) {
  cfg.validate();
  if (asg.data.rows.empty()) throw DataError("train_policy: empty dataset");
  if (mode == RewardMode::kIndividual) {
    if (asg.r_hat.size() != asg.data.rows.size())
      throw DataError("train_policy: INDIVIDUAL mode needs an assigned dataset");
    if (!asg.r_hat.empty() && asg.r_hat[0].size() != asg.data.meta.n_agents)
      throw DataError("train_policy: assigned reward width != n_agents");
  }

  TrainPolicyResult res;
  res.policy = make_ensemble(asg.data.meta, cfg.q_hidden, derive_seed(cfg.seed, "policy-init"));
  res.policy.reward_mode = mode;
  QEnsemble& ens = res.policy;

  std::vector<nn::AdamState> adam1, adam2;
  for (int i = 0; i < ens.n_agents; ++i) {
    adam1.push_back(nn::make_adam(ens.q1[i]));
    adam2.push_back(nn::make_adam(ens.q2[i]));
  }
  PolicyGradients grads = zero_policy_gradients(ens);
  auto zero_all = [&] {
    for (int i = 0; i < ens.n_agents; ++i) {
      for (auto& m : grads.q1[i].dw) m.setZero();
      for (auto& v : grads.q1[i].db) v.setZero();
      for (auto& m : grads.q2[i].dw) m.setZero();
      for (auto& v : grads.q2[i].db) v.setZero();
    }
  };

  Rng batch_rng(derive_seed(cfg.seed, "policy-train"));
  const long n_rows = static_cast<long>(asg.data.rows.size());
  std::vector<long> batch(cfg.batch_size);

  auto log_eval = [&](long step) {
    if (!truth) return;
    const synthenv::EvalStats stats =
        evaluate(ens, *truth, cfg.eval_episodes,
                 derive_seed(derive_seed(cfg.seed, "policy-eval"), std::uint64_t(step)));
    metrics::MetricsRow row;
    row.step = step;
    row.normalized_score =
        metrics::normalized_score(stats.mean_return, truth->random_score, truth->expert_score);
    res.log.push_back(row);
  };

  for (long step = 1; step <= cfg.train_steps; ++step) {
    for (int j = 0; j < cfg.batch_size; ++j)
      batch[j] = batch_rng.uniform_int(static_cast<int>(n_rows));
    zero_all();
    const CqlParts parts = cql_loss(ens, asg, batch, mode, cfg.gamma, cfg.cql_alpha, &grads);
    if (!std::isfinite(parts.total))
      throw NumericError("policy loss diverged at step " + std::to_string(step));
    for (int i = 0; i < ens.n_agents; ++i) {
      nn::check_finite(grads.q1[i], "q1[" + std::to_string(i) + "]");
      nn::check_finite(grads.q2[i], "q2[" + std::to_string(i) + "]");
      nn::adam_step(ens.q1[i], grads.q1[i], adam1[i], cfg.policy_lr);
      nn::adam_step(ens.q2[i], grads.q2[i], adam2[i], cfg.policy_lr);
    }
    if (step % kTargetSyncPeriod == 0) sync_targets(ens);
    if (step % cfg.eval_interval == 0 && step != cfg.train_steps) log_eval(step);
  }

  if (truth) {
    res.final_eval = evaluate(ens, *truth, std::max(cfg.eval_episodes, 100),
                              derive_seed(cfg.seed, "policy-final-eval"));
    res.final_normalized = metrics::normalized_score(res.final_eval.mean_return,
                                                     truth->random_score, truth->expert_score);
    metrics::MetricsRow row;
    row.step = cfg.train_steps;
    row.normalized_score = res.final_normalized;
    res.log.push_back(row);
  }
  return res;
}

}  // namespace teamcredit::policy
