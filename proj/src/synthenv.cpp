#include "teamcredit/synthenv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace teamcredit::synthenv {

namespace {

constexpr double kExpertEps = 0.05;   // epsilon-greedy exploration of the expert tier
constexpr int kMlpRewardHidden = 16;  // hidden width of the MLP reward family
constexpr int kMaxEnvAttempts = 512;
constexpr int kMaxMaskDraws = 200;

int sample_categorical(const VectorXd& probs, Rng& rng) {
  double u = rng.uniform();
  double cum = 0.0;
  for (int k = 0; k < probs.size(); ++k) {
    cum += probs[k];
    if (u < cum) return k;
  }
  return static_cast<int>(probs.size()) - 1;
}

VectorXd one_hot_action(const EnvSpec& env, const std::vector<int>& a) {
  VectorXd xa = VectorXd::Zero(env.joint_action_dim());
  for (int i = 0; i < env.n_agents; ++i) xa[env.action_offset(i) + a[i]] = 1.0;
  return xa;
}

// Individual reward from an explicit (possibly partial) one-hot action vector.
double reward_from_onehot(const GroundTruthSpec& g, int agent, const VectorXd& s,
                          const VectorXd& xa) {
  const int ds = g.env.joint_state_dim();
  const int da = g.env.joint_action_dim();
  VectorXd xm(ds + da);
  xm.head(ds) = g.state_masks[agent].cwiseProduct(s);
  xm.tail(da) = g.action_masks[agent].cwiseProduct(xa);
  if (g.env.family == RewardFamily::kLinear) return g.linear_w[agent].dot(xm);
  VectorXd hid = (g.mlp_w1[agent] * xm + g.mlp_b1[agent]).array().tanh();
  return g.mlp_w2[agent].dot(hid);
}

std::vector<VectorXd> expert_probs(const GroundTruthSpec& g, const VectorXd& s) {
  const EnvSpec& env = g.env;
  std::vector<VectorXd> probs(env.n_agents);
  VectorXd xa = VectorXd::Zero(env.joint_action_dim());
  const VectorXd xa_none = VectorXd::Zero(env.joint_action_dim());
  for (int i = 0; i < env.n_agents; ++i) {
    const int na = env.agent_action_counts[i];
    const int off = env.action_offset(i);
    const int soff = env.state_offset(i);
    const int slen = env.agent_state_dims[i];
    // Greedy on the agent's own reward one step ahead: immediate term plus
    // the reward at the predicted next state, where only this agent's block
    // is displaced (other agents' simultaneous choices are unknown, so their
    // one-hot blocks stay zero and their state blocks just drift).
    int best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    VectorXd s1 = env.drift * s;
    for (int k = 0; k < na; ++k) {
      xa[off + k] = 1.0;
      s1.segment(soff, slen) =
          env.drift * s.segment(soff, slen) + env.act_scale * g.disp[i].col(k);
      double v = reward_from_onehot(g, i, s, xa) + reward_from_onehot(g, i, s1, xa_none);
      xa[off + k] = 0.0;
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    VectorXd p = VectorXd::Constant(na, kExpertEps / na);
    p[best] += 1.0 - kExpertEps;
    probs[i] = p;
  }
  return probs;
}

struct MaskDraw {
  std::vector<VectorXd> state;
  std::vector<VectorXd> action;
};

bool masks_valid(const EnvSpec& env, const MaskDraw& m) {
  for (int i = 0; i < env.n_agents; ++i) {
    auto count = [](const VectorXd& v) { return static_cast<int>(v.sum()); };
    if (count(m.state[i]) < 1 || count(m.state[i]) == m.state[i].size()) return false;
    if (count(m.action[i]) < 1 || count(m.action[i]) == m.action[i].size()) return false;
    // Each agent's action must be able to move its own reward, otherwise the
    // expert tier has nothing to be greedy about.
    const int off = env.action_offset(i);
    if (m.action[i].segment(off, env.agent_action_counts[i]).sum() < 1.0) return false;
  }
  return true;
}

// Each dimension feeds at most one agent's reward. Drawing ownership this way
// keeps the per-agent active count Binomial(D, sparsity) while making the
// decomposition of the team reward unique, so recovery can be scored against
// a single well-defined target.
void draw_joint_masks(const EnvSpec& env, Rng& rng, int joint_dim, bool state_part,
                      std::vector<VectorXd>& out) {
  const double q = env.sparsity * env.n_agents;
  for (int i = 0; i < env.n_agents; ++i) out[i] = VectorXd::Zero(joint_dim);
  for (int k = 0; k < joint_dim; ++k) {
    if (rng.uniform() >= q) continue;
    int owner = rng.uniform_int(env.n_agents);
    out[owner][k] = 1.0;
  }
  (void)state_part;
}

void draw_local_masks(const EnvSpec& env, Rng& rng, bool state_part, std::vector<VectorXd>& out) {
  const int joint = state_part ? env.joint_state_dim() : env.joint_action_dim();
  for (int i = 0; i < env.n_agents; ++i) {
    out[i] = VectorXd::Zero(joint);
    const int off = state_part ? env.state_offset(i) : env.action_offset(i);
    const int len = state_part ? env.agent_state_dims[i] : env.agent_action_counts[i];
    if (state_part) {
      for (int k = 0; k < len; ++k)
        if (rng.uniform() < env.sparsity) out[i][off + k] = 1.0;
    } else {
      // One preferred action per agent. The greedy tiers then take it most
      // of the time, and the exploration rows where they deviate carry the
      // reward drop that identifies the entry; entries on actions that are
      // hardly ever taken would be statistically invisible.
      out[i][off + rng.uniform_int(len)] = 1.0;
    }
  }
}

MaskDraw draw_masks(const EnvSpec& env, Rng& rng) {
  MaskDraw m;
  m.state.resize(env.n_agents);
  m.action.resize(env.n_agents);
  for (int tries = 0; tries < kMaxMaskDraws; ++tries) {
    if (env.local_rewards) {
      draw_local_masks(env, rng, true, m.state);
      draw_local_masks(env, rng, false, m.action);
    } else {
      draw_joint_masks(env, rng, env.joint_state_dim(), true, m.state);
      draw_joint_masks(env, rng, env.joint_action_dim(), false, m.action);
    }
    if (masks_valid(env, m)) return m;
  }
  throw DataError("mask draw failed validity constraints; dims too small for the sparsity");
}

GroundTruthSpec draw_instance(const EnvSpec& env, std::uint64_t attempt_seed) {
  GroundTruthSpec g;
  g.env = env;
  Rng rng(derive_seed(attempt_seed, "env-draw"));

  MaskDraw m = draw_masks(env, rng);
  g.state_masks = std::move(m.state);
  g.action_masks = std::move(m.action);

  const int d = env.joint_state_dim() + env.joint_action_dim();
  if (env.family == RewardFamily::kLinear) {
    g.linear_w.resize(env.n_agents);
    for (int i = 0; i < env.n_agents; ++i) {
      VectorXd w = VectorXd::Zero(d);
      for (int k = 0; k < d; ++k) {
        const bool is_state = k < env.joint_state_dim();
        const bool active = is_state ? g.state_masks[i][k] > 0.5
                                     : g.action_masks[i][k - env.joint_state_dim()] > 0.5;
        if (!active) continue;
        // Action one-hots vary rarely under the greedy tiers, so their
        // weights sit higher than the state weights and stay positive,
        // keeping the marked action the one the greedy tiers favor.
        if (is_state) {
          double mag = rng.uniform(1.0, 2.0);
          w[k] = rng.uniform() < 0.5 ? -mag : mag;
        } else {
          w[k] = rng.uniform(2.0, 4.0);
        }
      }
      g.linear_w[i] = w;
    }
  } else {
    g.mlp_w1.resize(env.n_agents);
    g.mlp_b1.resize(env.n_agents);
    g.mlp_w2.resize(env.n_agents);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < env.n_agents; ++i) {
      g.mlp_w1[i].resize(kMlpRewardHidden, d);
      for (int r = 0; r < kMlpRewardHidden; ++r)
        for (int c = 0; c < d; ++c) g.mlp_w1[i](r, c) = rng.normal() * scale;
      g.mlp_b1[i].resize(kMlpRewardHidden);
      for (int r = 0; r < kMlpRewardHidden; ++r) g.mlp_b1[i][r] = rng.uniform(-0.5, 0.5);
      g.mlp_w2[i].resize(kMlpRewardHidden);
      for (int r = 0; r < kMlpRewardHidden; ++r) g.mlp_w2[i][r] = rng.normal();
    }
  }

  g.disp.resize(env.n_agents);
  for (int i = 0; i < env.n_agents; ++i) {
    g.disp[i].resize(env.agent_state_dims[i], env.agent_action_counts[i]);
    for (int r = 0; r < g.disp[i].rows(); ++r)
      for (int c = 0; c < g.disp[i].cols(); ++c) g.disp[i](r, c) = rng.uniform(-1.0, 1.0);
  }
  return g;
}

ActionFn tier_action_fn(const GroundTruthSpec& g, Tier tier) {
  return [&g, tier](const VectorXd& s, double progress, Rng& rng) {
    std::vector<VectorXd> probs = behavior_action_probs(g, tier, s, progress);
    std::vector<int> a(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) a[i] = sample_categorical(probs[i], rng);
    return a;
  };
}

}  // namespace

std::string to_string(RewardFamily f) { return f == RewardFamily::kLinear ? "LINEAR" : "MLP"; }

std::string to_string(Tier t) {
  switch (t) {
    case Tier::kRandom: return "random";
    case Tier::kMedium: return "medium";
    case Tier::kMediumReplay: return "medium-replay";
    case Tier::kExpert: return "expert";
  }
  return "random";
}

RewardFamily family_from_string(const std::string& s) {
  if (s == "LINEAR") return RewardFamily::kLinear;
  if (s == "MLP") return RewardFamily::kMlp;
  throw ConfigError("unknown reward family '" + s + "' (expected LINEAR or MLP)");
}

Tier tier_from_string(const std::string& s) {
  if (s == "random") return Tier::kRandom;
  if (s == "medium") return Tier::kMedium;
  if (s == "medium-replay") return Tier::kMediumReplay;
  if (s == "expert") return Tier::kExpert;
  throw ConfigError("unknown tier '" + s + "'");
}

int EnvSpec::joint_state_dim() const {
  return std::accumulate(agent_state_dims.begin(), agent_state_dims.end(), 0);
}
int EnvSpec::joint_action_dim() const {
  return std::accumulate(agent_action_counts.begin(), agent_action_counts.end(), 0);
}
int EnvSpec::state_offset(int agent) const {
  return std::accumulate(agent_state_dims.begin(), agent_state_dims.begin() + agent, 0);
}
int EnvSpec::action_offset(int agent) const {
  return std::accumulate(agent_action_counts.begin(), agent_action_counts.begin() + agent, 0);
}

DatasetMeta EnvSpec::meta(Tier tier) const {
  DatasetMeta m;
  m.version = 1;
  m.n_agents = n_agents;
  m.agent_state_dims = agent_state_dims;
  m.agent_action_counts = agent_action_counts;
  m.env = to_string(family);
  m.tier = to_string(tier);
  m.seed = seed;
  return m;
}

void EnvSpec::validate() const {
  if (n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (static_cast<int>(agent_state_dims.size()) != n_agents ||
      static_cast<int>(agent_action_counts.size()) != n_agents)
    throw ConfigError("per-agent dim lists must have n_agents entries");
  for (int d : agent_state_dims)
    if (d < 1) throw ConfigError("agent state dims must be >= 1");
  for (int k : agent_action_counts)
    if (k < 2) throw ConfigError("agents need at least 2 actions");
  if (horizon < 2) throw ConfigError("horizon must be >= 2");
  if (sparsity <= 0.0 || sparsity >= 1.0) throw ConfigError("sparsity must lie in (0, 1)");
  if (!local_rewards && sparsity * n_agents > 1.0)
    throw ConfigError("joint mask draw needs sparsity * n_agents <= 1");
  if (sparsity * (local_rewards ? *std::min_element(agent_state_dims.begin(),
                                                    agent_state_dims.end())
                                : joint_state_dim()) < 1.0)
    throw ConfigError("sparsity too low: expected active count below 1");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (score_episodes < 2) throw ConfigError("score_episodes must be >= 2");
}

// Under the linear local family each agent has one rewarded action, and the
// greedy ranking over actions does not depend on the state (the common
// drift terms cancel), so checking it at the origin settles it everywhere.
// An instance where the lookahead dynamics term overrides the rewarded
// action would leave that action almost never taken and its mask entry
// statistically invisible, so such draws are rejected.
bool rewarded_actions_modal(const GroundTruthSpec& g) {
  const VectorXd origin = VectorXd::Zero(g.env.joint_state_dim());
  const auto probs = expert_probs(g, origin);
  for (int i = 0; i < g.env.n_agents; ++i) {
    int best = 0;
    probs[i].maxCoeff(&best);
    const int off = g.env.action_offset(i);
    if (g.action_masks[i][off + best] < 0.5) return false;
  }
  return true;
}

GroundTruthSpec make_env(const EnvSpec& spec) {
  spec.validate();
  for (int attempt = 0; attempt < kMaxEnvAttempts; ++attempt) {
    const std::uint64_t aseed = derive_seed(spec.seed, static_cast<std::uint64_t>(attempt));
    GroundTruthSpec g = draw_instance(spec, aseed);
    if (spec.local_rewards && spec.family == RewardFamily::kLinear &&
        !rewarded_actions_modal(g))
      continue;
    EvalStats random_s = rollout_returns(g, tier_action_fn(g, Tier::kRandom), spec.score_episodes,
                                         derive_seed(aseed, "score-random"));
    EvalStats medium_s = rollout_returns(g, tier_action_fn(g, Tier::kMedium), spec.score_episodes,
                                         derive_seed(aseed, "score-medium"));
    EvalStats expert_s = rollout_returns(g, tier_action_fn(g, Tier::kExpert), spec.score_episodes,
                                         derive_seed(aseed, "score-expert"));
    if (random_s.mean_return < medium_s.mean_return &&
        medium_s.mean_return < expert_s.mean_return) {
      g.expert_score = expert_s.mean_return;
      g.random_score = random_s.mean_return;
      g.expert_score_se = expert_s.se();
      g.random_score_se = random_s.se();
      return g;
    }
  }
  throw DataError("env generation could not satisfy the tier ordering; adjust dims or sparsity");
}

double true_reward(const GroundTruthSpec& g, int agent, const VectorXd& s,
                   const std::vector<int>& a) {
  return reward_from_onehot(g, agent, s, one_hot_action(g.env, a));
}

void step_state(const GroundTruthSpec& g, const VectorXd& s, const std::vector<int>& a,
                Rng& rng, VectorXd& s_next) {
  const EnvSpec& env = g.env;
  s_next.resize(s.size());
  for (int i = 0; i < env.n_agents; ++i) {
    const int off = env.state_offset(i);
    for (int dft = 0; dft < env.agent_state_dims[i]; ++dft)
      s_next[off + dft] = env.drift * s[off + dft] +
                          env.act_scale * g.disp[i](dft, a[i]) +
                          env.trans_noise * rng.normal();
  }
}

VectorXd sample_initial_state(const GroundTruthSpec& g, Rng& rng) {
  VectorXd s(g.env.joint_state_dim());
  for (int k = 0; k < s.size(); ++k) s[k] = g.env.init_scale * rng.normal();
  return s;
}

std::vector<VectorXd> behavior_action_probs(const GroundTruthSpec& g, Tier tier,
                                            const VectorXd& s, double progress) {
  const EnvSpec& env = g.env;
  auto uniform_rows = [&] {
    std::vector<VectorXd> p(env.n_agents);
    for (int i = 0; i < env.n_agents; ++i)
      p[i] = VectorXd::Constant(env.agent_action_counts[i],
                                1.0 / env.agent_action_counts[i]);
    return p;
  };
  switch (tier) {
    case Tier::kRandom: return uniform_rows();
    case Tier::kExpert: return expert_probs(g, s);
    case Tier::kMedium:
    case Tier::kMediumReplay: {
      // MEDIUM is an even mixture of expert and random; MEDIUM_REPLAY anneals
      // the expert weight from 0 up to that mixture across the run.
      const double w = tier == Tier::kMedium ? 0.5 : 0.5 * progress;
      std::vector<VectorXd> p = uniform_rows();
      std::vector<VectorXd> e = expert_probs(g, s);
      for (int i = 0; i < env.n_agents; ++i) p[i] = (1.0 - w) * p[i] + w * e[i];
      return p;
    }
  }
  return uniform_rows();
}

std::pair<OfflineDataset, HiddenRewards> collect_dataset(const GroundTruthSpec& g, Tier tier,
                                                         int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  const EnvSpec& env = g.env;
  OfflineDataset ds;
  ds.meta = env.meta(tier);
  ds.meta.seed = seed;
  ds.rows.reserve(static_cast<std::size_t>(n_episodes) * env.horizon);
  HiddenRewards hidden;
  hidden.rows.reserve(ds.rows.capacity());

  ActionFn act = tier_action_fn(g, tier);
  for (int e = 0; e < n_episodes; ++e) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    const double progress = n_episodes > 1 ? static_cast<double>(e) / (n_episodes - 1) : 0.0;
    VectorXd s = sample_initial_state(g, rng);
    VectorXd s_next;
    for (int t = 0; t < env.horizon; ++t) {
      std::vector<int> a = act(s, progress, rng);
      VectorXd r(env.n_agents);
      for (int i = 0; i < env.n_agents; ++i) r[i] = true_reward(g, i, s, a);
      double eps = 0.0;
      if (env.noise_sigma > 0.0)
        for (int i = 0; i < env.n_agents; ++i) eps += env.noise_sigma * rng.normal();
      double team = 0.0;
      for (int i = 0; i < env.n_agents; ++i) team += r[i];
      team += eps;
      step_state(g, s, a, rng, s_next);

      Transition row;
      row.episode = e;
      row.t = t;
      row.s = s;
      row.a = a;
      row.team_reward = team;
      row.s_next = s_next;
      row.done = (t == env.horizon - 1);
      ds.rows.push_back(std::move(row));
      hidden.rows.push_back({e, t, r, eps});
      s = s_next;
    }
  }
  return {std::move(ds), std::move(hidden)};
}

double EvalStats::se() const {
  return n_episodes > 0 ? std_return / std::sqrt(static_cast<double>(n_episodes)) : 0.0;
}

EvalStats rollout_returns(const GroundTruthSpec& g, const ActionFn& act, int n_episodes,
                          std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  const EnvSpec& env = g.env;
  VectorXd returns(n_episodes);
  VectorXd s_next;
  for (int e = 0; e < n_episodes; ++e) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    const double progress = n_episodes > 1 ? static_cast<double>(e) / (n_episodes - 1) : 0.0;
    VectorXd s = sample_initial_state(g, rng);
    double total = 0.0;
    for (int t = 0; t < env.horizon; ++t) {
      std::vector<int> a = act(s, progress, rng);
      VectorXd r(env.n_agents);
      for (int i = 0; i < env.n_agents; ++i) r[i] = true_reward(g, i, s, a);
      double eps = 0.0;
      if (env.noise_sigma > 0.0)
        for (int i = 0; i < env.n_agents; ++i) eps += env.noise_sigma * rng.normal();
      double team = 0.0;
      for (int i = 0; i < env.n_agents; ++i) team += r[i];
      total += team + eps;
      step_state(g, s, a, rng, s_next);
      s = s_next;
    }
    returns[e] = total;
  }
  EvalStats st;
  st.n_episodes = n_episodes;
  st.mean_return = returns.mean();
  if (n_episodes > 1)
    st.std_return = std::sqrt((returns.array() - st.mean_return).square().sum() /
                              (n_episodes - 1));
  return st;
}

}  // namespace teamcredit::synthenv
