#include "teamcredit/core.hpp"

#include <cmath>
#include <numeric>

namespace teamcredit {

std::string to_string(GraphMode mode) {
  switch (mode) {
    case GraphMode::kFcg: return "FCG";
    case GraphMode::kFg: return "FG";
    case GraphMode::kDg: return "DG";
  }
  return "DG";
}

GraphMode graph_mode_from_string(const std::string& s) {
  if (s == "FCG") return GraphMode::kFcg;
  if (s == "FG") return GraphMode::kFg;
  if (s == "DG") return GraphMode::kDg;
  throw ConfigError("unknown graph_mode '" + s + "' (expected FCG, FG or DG)");
}

int DatasetMeta::joint_state_dim() const {
  return std::accumulate(agent_state_dims.begin(), agent_state_dims.end(), 0);
}

int DatasetMeta::joint_action_dim() const {
  return std::accumulate(agent_action_counts.begin(), agent_action_counts.end(), 0);
}

int DatasetMeta::state_offset(int agent) const {
  return std::accumulate(agent_state_dims.begin(), agent_state_dims.begin() + agent, 0);
}

int DatasetMeta::action_offset(int agent) const {
  return std::accumulate(agent_action_counts.begin(), agent_action_counts.begin() + agent, 0);
}

void RunConfig::validate() const {
  if (lambda1 < 0) throw ConfigError("lambda1 must be >= 0");
  if (lambda2 < 0) throw ConfigError("lambda2 must be >= 0");
  if (h < 0) throw ConfigError("h must be >= 0");
  if (model_lr <= 0) throw ConfigError("model_lr must be positive");
  if (policy_lr <= 0) throw ConfigError("policy_lr must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (gamma < 0 || gamma >= 1) throw ConfigError("gamma must lie in [0, 1)");
  if (cql_alpha < 0) throw ConfigError("cql_alpha must be >= 0");
  if (train_steps <= 0) throw ConfigError("train_steps must be positive");
  if (mask_warmup < 0) throw ConfigError("mask_warmup must be >= 0");
  if (eval_interval <= 0) throw ConfigError("eval_interval must be positive");
  if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
  if (model_hidden <= 0) throw ConfigError("model_hidden must be positive");
  if (q_hidden <= 0) throw ConfigError("q_hidden must be positive");
}

namespace {

bool meta_ok(const DatasetMeta& m, std::vector<Violation>& out) {
  bool ok = true;
  auto flag = [&](const std::string& msg) {
    out.push_back({-1, -1, msg});
    ok = false;
  };
  if (m.version != 1) flag("unsupported dataset version " + std::to_string(m.version));
  if (m.n_agents <= 0) flag("n_agents must be positive");
  if (static_cast<int>(m.agent_state_dims.size()) != m.n_agents)
    flag("agent_state_dims length does not match n_agents");
  if (static_cast<int>(m.agent_action_counts.size()) != m.n_agents)
    flag("agent_action_counts length does not match n_agents");
  for (int d : m.agent_state_dims)
    if (d <= 0) flag("agent state dims must be positive");
  for (int k : m.agent_action_counts)
    if (k <= 0) flag("agent action counts must be positive");
  return ok;
}

}  // namespace

std::vector<Violation> validate_dataset(const OfflineDataset& ds) {
  std::vector<Violation> out;
  if (!meta_ok(ds.meta, out)) return out;

  const int ds_dim = ds.meta.joint_state_dim();
  const int n = ds.meta.n_agents;

  int prev_episode = -1;
  int expected_t = 0;
  std::vector<int> seen_episodes;

  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const Transition& row = ds.rows[i];
    auto flag = [&](const std::string& msg) { out.push_back({row.episode, row.t, msg}); };

    if (row.s.size() != ds_dim) flag("state length does not match header dims");
    if (row.s_next.size() != ds_dim) flag("next-state length does not match header dims");
    if (static_cast<int>(row.a.size()) != n) {
      flag("action vector length does not match n_agents");
    } else {
      for (int j = 0; j < n; ++j)
        if (row.a[j] < 0 || row.a[j] >= ds.meta.agent_action_counts[j])
          flag("action out of range for agent " + std::to_string(j));
    }
    if (!row.s.allFinite() || !row.s_next.allFinite() || !std::isfinite(row.team_reward))
      flag("non-finite value");

    if (row.episode != prev_episode) {
      if (prev_episode >= 0 && expected_t != 0)
        out.push_back({prev_episode, -1, "episode ended without a terminal row"});
      for (int e : seen_episodes)
        if (e == row.episode) flag("episode id reappears after other episodes");
      seen_episodes.push_back(row.episode);
      prev_episode = row.episode;
      expected_t = 0;
    }
    if (row.t != expected_t) flag("timestep not consecutive from 0");
    expected_t = row.done ? 0 : expected_t + 1;
    if (row.done && i + 1 < ds.rows.size() && ds.rows[i + 1].episode == row.episode)
      flag("terminal row is not the episode's last");
  }
  if (!ds.rows.empty() && !ds.rows.back().done)
    out.push_back({ds.rows.back().episode, -1, "episode ended without a terminal row"});
  return out;
}

}  // namespace teamcredit
