#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "properties.hpp"
#include "teamcredit/metrics.hpp"

namespace teamcredit::testing {

namespace {

std::vector<MaskPair> random_hard_masks(Rng& rng, const std::vector<int>& sdims,
                                        const std::vector<int>& adims) {
  const int ds = std::accumulate(sdims.begin(), sdims.end(), 0);
  const int da = std::accumulate(adims.begin(), adims.end(), 0);
  std::vector<MaskPair> out;
  for (size_t i = 0; i < sdims.size(); ++i) {
    MaskPair m;
    m.state = VectorXd::Zero(ds);
    m.action = VectorXd::Zero(da);
    for (int k = 0; k < ds; ++k) m.state[k] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    for (int k = 0; k < da; ++k) m.action[k] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    out.push_back(std::move(m));
  }
  return out;
}

void check_normalized_affine(Rng& rng) {
  const double score = rng.normal() * 100.0;
  const double rnd = rng.normal() * 50.0;
  const double exp_s = rnd + rng.uniform(1.0, 200.0);
  const double base = metrics::normalized_score(score, rnd, exp_s);

  const double shift = rng.normal() * 40.0;
  const double scale = rng.uniform(0.1, 20.0);
  const double shifted = metrics::normalized_score(score + shift, rnd + shift, exp_s + shift);
  const double scaled = metrics::normalized_score(score * scale, rnd * scale, exp_s * scale);
  prop_check(std::abs(shifted - base) <= 1e-7 * (1.0 + std::abs(base)),
             "shift changed the normalized score");
  prop_check(std::abs(scaled - base) <= 1e-7 * (1.0 + std::abs(base)),
             "positive scaling changed the normalized score");
}

void check_fcg_sparsity_one(Rng& rng) {
  std::vector<int> sdims, adims;
  const int n = 1 + rng.uniform_int(4);
  for (int i = 0; i < n; ++i) {
    sdims.push_back(1 + rng.uniform_int(5));
    adims.push_back(2 + rng.uniform_int(4));
  }
  const int ds = std::accumulate(sdims.begin(), sdims.end(), 0);
  const int da = std::accumulate(adims.begin(), adims.end(), 0);
  std::vector<MaskPair> ones;
  for (int i = 0; i < n; ++i) ones.push_back({VectorXd::Ones(ds), VectorXd::Ones(da)});
  const int t_samples = 1 + rng.uniform_int(4);
  std::vector<std::vector<MaskPair>> samples(static_cast<size_t>(t_samples), ones);
  const auto s = metrics::sparsity_rate(samples, metrics::MaskKind::kState, sdims, adims);
  const auto a = metrics::sparsity_rate(samples, metrics::MaskKind::kAction, sdims, adims);
  prop_check(s.own == 1.0 && a.own == 1.0, "all-ones masks do not score sparsity 1");
  if (n > 1) prop_check(s.cross == 1.0 && a.cross == 1.0, "all-ones cross rate off");
}

void check_f1_permutation(Rng& rng) {
  const int n = 2 + rng.uniform_int(3);
  std::vector<int> sdims, adims;
  // identical per-agent block sizes so a permutation stays dimensionally valid
  const int sd = 1 + rng.uniform_int(3);
  const int ad = 2 + rng.uniform_int(3);
  for (int i = 0; i < n; ++i) {
    sdims.push_back(sd);
    adims.push_back(ad);
  }
  const auto pred = random_hard_masks(rng, sdims, adims);
  const auto truth = random_hard_masks(rng, sdims, adims);

  std::vector<size_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0u);
  for (size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

  // permute agents and their joint-dimension blocks simultaneously
  auto apply = [&](const std::vector<MaskPair>& masks) {
    std::vector<MaskPair> out(masks.size());
    for (size_t i = 0; i < perm.size(); ++i) {
      const auto& src = masks[perm[i]];
      MaskPair m;
      m.state = VectorXd::Zero(src.state.size());
      m.action = VectorXd::Zero(src.action.size());
      for (int j = 0; j < n; ++j) {
        m.state.segment(j * sd, sd) = src.state.segment(static_cast<int>(perm[static_cast<size_t>(j)]) * sd, sd);
        m.action.segment(j * ad, ad) = src.action.segment(static_cast<int>(perm[static_cast<size_t>(j)]) * ad, ad);
      }
      out[i] = std::move(m);
    }
    return out;
  };

  const auto f_base_s = metrics::mask_f1(pred, truth, metrics::MaskKind::kState);
  const auto f_base_a = metrics::mask_f1(pred, truth, metrics::MaskKind::kAction);
  const auto f_perm_s = metrics::mask_f1(apply(pred), apply(truth), metrics::MaskKind::kState);
  const auto f_perm_a = metrics::mask_f1(apply(pred), apply(truth), metrics::MaskKind::kAction);
  prop_check(std::abs(f_base_s.f1 - f_perm_s.f1) <= 1e-12, "state F1 not permutation symmetric");
  prop_check(std::abs(f_base_a.f1 - f_perm_a.f1) <= 1e-12,
             "action F1 not permutation symmetric");
  prop_check(std::abs(f_base_s.precision - f_perm_s.precision) <= 1e-12 &&
                 std::abs(f_base_s.recall - f_perm_s.recall) <= 1e-12,
             "precision or recall not permutation symmetric");
}

void check_fidelity_conventions(Rng& rng) {
  const int n_agents = 1 + rng.uniform_int(3);
  const int rows = 5 + rng.uniform_int(20);
  std::vector<VectorXd> truth(static_cast<size_t>(rows));
  for (auto& r : truth) {
    r = VectorXd::Zero(n_agents);
    for (int i = 0; i < n_agents; ++i) r[i] = rng.normal() * 2.0;
  }
  std::vector<VectorXd> shifted = truth;
  VectorXd consts(n_agents);
  for (int i = 0; i < n_agents; ++i) consts[i] = rng.normal() * 5.0;
  for (auto& r : shifted) r += consts;

  const auto rep = metrics::decomposition_fidelity(shifted, truth);
  for (int i = 0; i < n_agents; ++i) {
    prop_check(std::abs(rep.per_agent_corr[i] - 1.0) <= 1e-9,
               "per-agent shift broke the correlation");
    prop_check(rep.per_agent_centered_mse[i] <= 1e-18, "centered MSE sees constant shifts");
  }

  std::vector<VectorXd> negated = truth;
  for (auto& r : negated) r = -r;
  const auto neg = metrics::decomposition_fidelity(negated, truth);
  for (int i = 0; i < n_agents; ++i)
    prop_check(std::abs(neg.per_agent_corr[i] + 1.0) <= 1e-9, "negation is not correlation -1");

  std::vector<VectorXd> constant(truth.size(), VectorXd::Constant(n_agents, 3.25));
  const auto flat = metrics::decomposition_fidelity(constant, truth);
  for (int i = 0; i < n_agents; ++i)
    prop_check(flat.per_agent_corr[i] == 0.0, "constant series correlation is not 0");
}

void check_majority_vote(Rng& rng) {
  std::vector<int> sdims{1 + rng.uniform_int(3)};
  std::vector<int> adims{2};
  const int t_samples = 1 + 2 * rng.uniform_int(3);  // odd => strict majority exists
  std::vector<std::vector<MaskPair>> samples;
  for (int t = 0; t < t_samples; ++t) samples.push_back(random_hard_masks(rng, sdims, adims));
  const auto voted = metrics::majority_vote(samples);
  for (int k = 0; k < voted[0].state.size(); ++k) {
    int on = 0;
    for (const auto& s : samples) on += s[0].state[k] > 0.5 ? 1 : 0;
    const double want = on * 2 >= t_samples ? 1.0 : 0.0;
    prop_check(voted[0].state[k] == want, "majority vote miscounted");
  }
}

}  // namespace

void add_metrics_properties(std::vector<Property>& out) {
  out.push_back({"metrics.normalized_affine", check_normalized_affine});
  out.push_back({"metrics.fcg_sparsity_one", check_fcg_sparsity_one});
  out.push_back({"metrics.f1_permutation", check_f1_permutation});
  out.push_back({"metrics.fidelity_conventions", check_fidelity_conventions});
  out.push_back({"metrics.majority_vote", check_majority_vote});
}

}  // namespace teamcredit::testing
