#include <cmath>
#include <cstdlib>

#include "helpers.hpp"
#include "properties.hpp"
#include "teamcredit/synthenv.hpp"

namespace teamcredit::testing {

namespace {

using synthenv::GroundTruthSpec;
using synthenv::RewardFamily;
using synthenv::Tier;

constexpr double kSumTol = 1e-9;

void check_team_reward_identity(Rng& rng) {
  TinyEnvOpts opts;
  opts.noise = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.05, 0.5);
  opts.family = rng.uniform() < 0.5 ? RewardFamily::kLinear : RewardFamily::kMlp;
  const GroundTruthSpec g = tiny_env(rng, opts);
  const Tier tier = static_cast<Tier>(rng.uniform_int(4));
  const auto [ds, hidden] = synthenv::collect_dataset(g, tier, 2, rng.next_u64() % 100000);
  prop_check(ds.rows.size() == hidden.rows.size(), "hidden rows misaligned");
  for (size_t r = 0; r < ds.rows.size(); ++r) {
    const double sum = hidden.rows[r].r.sum() + hidden.rows[r].eps;
    prop_check(std::abs(sum - ds.rows[r].team_reward) <= kSumTol,
               "team reward is not the sum of hidden rewards plus noise");
    if (g.env.noise_sigma == 0.0)
      prop_check(hidden.rows[r].eps == 0.0, "noiseless env stored nonzero noise");
    // hidden rewards recompute from the ground truth
    const double direct = synthenv::true_reward(g, static_cast<int>(r) % g.env.n_agents,
                                                ds.rows[r].s, ds.rows[r].a);
    prop_check(std::abs(direct - hidden.rows[r].r[static_cast<int>(r) % g.env.n_agents]) <= kSumTol,
               "hidden reward disagrees with true_reward");
  }
}

// Inactive mask entries must have no influence; active entries must carry a
// nonzero parameter (and for the linear family, visible influence).
void check_mask_reachability(Rng& rng) {
  TinyEnvOpts opts;
  opts.family = rng.uniform() < 0.5 ? RewardFamily::kLinear : RewardFamily::kMlp;
  const GroundTruthSpec g = tiny_env(rng, opts);
  const int agent = rng.uniform_int(g.env.n_agents);
  const int ds_dim = g.env.joint_state_dim();

  VectorXd s(ds_dim);
  for (int k = 0; k < ds_dim; ++k) s[k] = rng.normal();
  std::vector<int> a;
  for (int i = 0; i < g.env.n_agents; ++i)
    a.push_back(rng.uniform_int(g.env.agent_action_counts[i]));

  const double base = synthenv::true_reward(g, agent, s, a);

  for (int k = 0; k < ds_dim; ++k) {
    const bool active = g.state_masks[agent][k] > 0.5;
    if (!active) {
      VectorXd s2 = s;
      s2[k] += rng.uniform(0.5, 3.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      prop_check(synthenv::true_reward(g, agent, s2, a) == base,
                 "inactive state dim moved the reward");
    } else if (g.env.family == RewardFamily::kLinear) {
      VectorXd s2 = s;
      s2[k] += 1.0;
      prop_check(std::abs(synthenv::true_reward(g, agent, s2, a) - base) > 1e-6,
                 "active state dim has no influence");
      prop_check(g.linear_w[agent][k] != 0.0, "active state dim carries zero weight");
    } else {
      double col = 0.0;
      for (int h = 0; h < g.mlp_w1[agent].rows(); ++h) col += std::abs(g.mlp_w1[agent](h, k));
      prop_check(col > 0.0, "active state dim has all-zero first-layer weights");
    }
  }

  // two actions of one agent whose one-hot entries are both inactive give the
  // same reward; the state is held fixed so only the action term could move
  const int off = g.env.action_offset(agent);
  const int n_act = g.env.agent_action_counts[agent];
  for (int u = 0; u < n_act; ++u)
    for (int v = u + 1; v < n_act; ++v) {
      if (g.action_masks[agent][off + u] > 0.5 || g.action_masks[agent][off + v] > 0.5) continue;
      auto au = a;
      auto av = a;
      au[static_cast<size_t>(agent)] = u;
      av[static_cast<size_t>(agent)] = v;
      prop_check(synthenv::true_reward(g, agent, s, au) ==
                     synthenv::true_reward(g, agent, s, av),
                 "two unmasked actions give different rewards");
    }
}

void check_tier_ordering(Rng& rng) {
  const GroundTruthSpec g = tiny_env(rng);
  prop_check(g.random_score < g.expert_score, "anchor scores are not ordered");
  prop_check(std::isfinite(g.expert_score_se) && g.expert_score_se >= 0.0, "bad expert se");
  // behavior distributions are proper per tier
  VectorXd s(g.env.joint_state_dim());
  for (int k = 0; k < s.size(); ++k) s[k] = rng.normal();
  for (const Tier tier : {Tier::kRandom, Tier::kMedium, Tier::kMediumReplay, Tier::kExpert}) {
    const auto probs = synthenv::behavior_action_probs(g, tier, s, rng.uniform());
    for (int i = 0; i < g.env.n_agents; ++i) {
      prop_check(std::abs(probs[i].sum() - 1.0) <= 1e-9, "action probabilities do not sum to 1");
      prop_check(probs[i].minCoeff() >= 0.0, "negative action probability");
      if (tier == Tier::kRandom)
        prop_check(std::abs(probs[i].maxCoeff() - probs[i].minCoeff()) <= 1e-12,
                   "random tier is not uniform");
    }
  }
}

void check_generation_determinism(Rng& rng) {
  TinyEnvOpts opts;
  opts.noise = rng.uniform() < 0.5 ? 0.0 : 0.2;
  Rng fork1(rng.next_u64());
  Rng fork2(fork1);
  const GroundTruthSpec a = tiny_env(fork1, opts);
  const GroundTruthSpec b = tiny_env(fork2, opts);
  prop_check(a.env.seed == b.env.seed, "env draw consumed different seeds");
  for (int i = 0; i < a.env.n_agents; ++i) {
    prop_check(vectors_equal(a.state_masks[i], b.state_masks[i]), "state masks differ");
    prop_check(vectors_equal(a.action_masks[i], b.action_masks[i]), "action masks differ");
  }
  prop_check(a.expert_score == b.expert_score && a.random_score == b.random_score,
             "anchor scores differ");

  const std::uint64_t cseed = fork1.next_u64() % 100000;
  const auto [d1, h1] = synthenv::collect_dataset(a, Tier::kMedium, 2, cseed);
  const auto [d2, h2] = synthenv::collect_dataset(b, Tier::kMedium, 2, cseed);
  prop_check(d1.rows.size() == d2.rows.size(), "row counts differ");
  for (size_t r = 0; r < d1.rows.size(); ++r) {
    prop_check(vectors_equal(d1.rows[r].s, d2.rows[r].s), "states differ");
    prop_check(d1.rows[r].a == d2.rows[r].a, "actions differ");
    prop_check(d1.rows[r].team_reward == d2.rows[r].team_reward, "rewards differ");
    prop_check(vectors_equal(h1.rows[r].r, h2.rows[r].r), "hidden rewards differ");
  }
}

void check_n1_collapse(Rng& rng) {
  TinyEnvOpts opts;
  opts.max_agents = 1;
  opts.noise = rng.uniform() < 0.5 ? 0.0 : 0.3;
  const GroundTruthSpec g = tiny_env(rng, opts);
  prop_check(g.env.n_agents == 1, "collapse opts ignored");
  const auto [ds, hidden] = synthenv::collect_dataset(g, Tier::kExpert, 2, rng.next_u64() % 1000);
  for (size_t r = 0; r < ds.rows.size(); ++r) {
    prop_check(hidden.rows[r].r.size() == 1, "single agent has multi-entry reward");
    prop_check(std::abs(hidden.rows[r].r[0] + hidden.rows[r].eps - ds.rows[r].team_reward) <=
                   kSumTol,
               "N=1 team reward is not the lone individual reward");
  }
}

}  // namespace

void add_synthenv_properties(std::vector<Property>& out) {
  out.push_back({"synthenv.team_reward_identity", check_team_reward_identity});
  out.push_back({"synthenv.mask_reachability", check_mask_reachability});
  out.push_back({"synthenv.tier_ordering", check_tier_ordering});
  out.push_back({"synthenv.generation_determinism", check_generation_determinism});
  out.push_back({"synthenv.n1_collapse", check_n1_collapse});
}

}  // namespace teamcredit::testing
