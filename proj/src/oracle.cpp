#include "teamcredit/oracle.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "teamcredit/rng.hpp"

namespace teamcredit::oracle {

namespace {

constexpr double kTieRelTol = 1e-9;    // validation MSEs this close count as tied
constexpr int kMaxTiedReported = 8;
constexpr int kVerifyRows = 512;       // rows used for the dual-checked final refit

VectorXd llt_solve(const MatrixXd& a, const VectorXd& rhs, const char* what) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericError(std::string(what) + ": Cholesky factorization failed");
  return llt.solve(rhs);
}

}  // namespace

RidgeSolution ridge_solve(const MatrixXd& features, const VectorXd& targets, double lambda,
                          double tol) {
  const long n = features.rows();
  const long d = features.cols();
  if (n < 1 || d < 1) throw DataError("ridge_solve: empty problem");
  if (targets.size() != n) throw DataError("ridge_solve: targets length mismatch");
  if (lambda <= 0.0) throw ConfigError("ridge_solve: lambda must be positive");

  // Primal: (lambda I_d + X'X) w = X'y.
  MatrixXd a = lambda * MatrixXd::Identity(d, d);
  a.noalias() += features.transpose() * features;
  VectorXd w_primal = llt_solve(a, features.transpose() * targets, "ridge primal");

  // Dual: w = X' (XX' + lambda I_n)^-1 y.
  MatrixXd k = lambda * MatrixXd::Identity(n, n);
  k.noalias() += features * features.transpose();
  VectorXd w_dual = features.transpose() * llt_solve(k, targets, "ridge dual");

  RidgeSolution sol;
  sol.agreement = (w_primal - w_dual).cwiseAbs().maxCoeff();
  if (!std::isfinite(sol.agreement) || sol.agreement > tol)
    throw NumericError("ridge primal/dual solutions disagree by " +
                       std::to_string(sol.agreement) + " (tol " + std::to_string(tol) + ")");
  sol.w = std::move(w_primal);
  return sol;
}

GradCheckReport finite_diff_check(const std::function<double(const VectorXd&)>& loss,
                                  const VectorXd& analytic, const VectorXd& params,
                                  int n_probes, double step, double tol, std::uint64_t seed) {
  if (analytic.size() != params.size())
    throw DataError("finite_diff_check: gradient/parameter size mismatch");
  if (step <= 0.0) throw ConfigError("finite_diff_check: step must be positive");

  const long dim = params.size();
  std::vector<long> order(dim);
  for (long i = 0; i < dim; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "fd-probe"));
  for (long i = dim - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(static_cast<int>(i + 1))]);

  GradCheckReport rep;
  rep.n_checked = static_cast<int>(std::min<long>(n_probes, dim));
  VectorXd p = params;
  for (int j = 0; j < rep.n_checked; ++j) {
    const long idx = order[j];
    const double keep = p[idx];
    p[idx] = keep + step;
    const double up = loss(p);
    p[idx] = keep - step;
    const double down = loss(p);
    p[idx] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[idx]), 1e-3});
    rep.max_rel_err = std::max(rep.max_rel_err, std::abs(numeric - analytic[idx]) / denom);
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

namespace {

// One row of the blocked oracle feature map: per-agent truth-masked
// [s; onehot(a)] plus a shared trailing intercept.
void blocked_features(const synthenv::GroundTruthSpec& truth, const Transition& row,
                      Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  const auto& env = truth.env;
  const int ds = env.joint_state_dim();
  const int da = env.joint_action_dim();
  const int width = ds + da;
  out.setZero();
  for (int i = 0; i < env.n_agents; ++i) {
    const int base = i * width;
    for (int kk = 0; kk < ds; ++kk)
      if (truth.state_masks[i][kk] > 0.5) out[base + kk] = row.s[kk];
    const int aoff = env.action_offset(i) + row.a[i];
    if (truth.action_masks[i][aoff] > 0.5) out[base + ds + aoff] = 1.0;
  }
  out[env.n_agents * width] = 1.0;
}

std::vector<long> stride_subsample(long n, long cap) {
  std::vector<long> idx;
  if (n <= cap) {
    idx.resize(n);
    for (long i = 0; i < n; ++i) idx[i] = i;
  } else {
    idx.resize(cap);
    for (long j = 0; j < cap; ++j) idx[j] = j * n / cap;
  }
  return idx;
}

}  // namespace

DecompositionOracleReport linear_decomposition_oracle(const OfflineDataset& ds,
                                                      const synthenv::GroundTruthSpec& truth,
                                                      double lambda, int max_fit_rows) {
  const auto& env = truth.env;
  if (ds.meta.joint_state_dim() != env.joint_state_dim() ||
      ds.meta.joint_action_dim() != env.joint_action_dim() ||
      ds.meta.n_agents != env.n_agents)
    throw DataError("oracle: dataset dims do not match the ground truth spec");
  if (ds.rows.empty()) throw DataError("oracle: empty dataset");
  if (max_fit_rows < 1) throw ConfigError("oracle: max_fit_rows must be positive");

  const long n = static_cast<long>(ds.rows.size());
  const int width = env.joint_state_dim() + env.joint_action_dim();
  const int d = env.n_agents * width + 1;
  const std::vector<long> fit = stride_subsample(n, max_fit_rows);

  MatrixXd f(static_cast<long>(fit.size()), d);
  VectorXd y(static_cast<long>(fit.size()));
  for (std::size_t j = 0; j < fit.size(); ++j) {
    blocked_features(truth, ds.rows[fit[j]], f.row(static_cast<long>(j)));
    y[static_cast<long>(j)] = ds.rows[fit[j]].team_reward;
  }
  RidgeSolution sol = ridge_solve(f, y, lambda);

  DecompositionOracleReport rep;
  rep.ridge_agreement = sol.agreement;
  rep.intercept = sol.w[d - 1];
  rep.weights.resize(env.n_agents);
  for (int i = 0; i < env.n_agents; ++i) rep.weights[i] = sol.w.segment(i * width, width);

  // Residual over every row, not just the fitted subsample.
  Eigen::RowVectorXd phi(d);
  double sq = 0.0;
  for (const Transition& row : ds.rows) {
    blocked_features(truth, row, phi);
    const double e = phi * sol.w - row.team_reward;
    sq += e * e;
  }
  rep.residual_mse = sq / static_cast<double>(n);
  return rep;
}

namespace {

struct GramSplit {
  MatrixXd g_train, g_val;
  VectorXd b_train, b_val;
  double yy_val = 0.0;
  long n_train = 0, n_val = 0;
};

// Full-width blocked features with all-ones masks; candidate masks are then
// column subsets, so each candidate fit only needs a slice of these Grams.
GramSplit build_grams(const OfflineDataset& ds, int width) {
  const int n_agents = ds.meta.n_agents;
  const int d = n_agents * width + 1;
  const int ds_dim = ds.meta.joint_state_dim();
  GramSplit gs;
  MatrixXd f_train(static_cast<long>(ds.rows.size()), d);
  MatrixXd f_val(static_cast<long>(ds.rows.size()), d);
  VectorXd y_train(static_cast<long>(ds.rows.size()));
  VectorXd y_val(static_cast<long>(ds.rows.size()));
  Eigen::RowVectorXd phi(d);
  for (std::size_t r = 0; r < ds.rows.size(); ++r) {
    const Transition& row = ds.rows[r];
    phi.setZero();
    for (int i = 0; i < n_agents; ++i) {
      phi.segment(i * width, ds_dim) = row.s.transpose();
      phi[i * width + ds_dim + ds.meta.action_offset(i) + row.a[i]] = 1.0;
    }
    phi[d - 1] = 1.0;
    if (r % 3 == 2) {
      f_val.row(gs.n_val) = phi;
      y_val[gs.n_val++] = row.team_reward;
    } else {
      f_train.row(gs.n_train) = phi;
      y_train[gs.n_train++] = row.team_reward;
    }
  }
  if (gs.n_train == 0 || gs.n_val == 0)
    throw DataError("brute_force_masks: dataset too small for a train/validation split");
  f_train.conservativeResize(gs.n_train, d);
  f_val.conservativeResize(gs.n_val, d);
  y_train.conservativeResize(gs.n_train);
  y_val.conservativeResize(gs.n_val);
  gs.g_train.noalias() = f_train.transpose() * f_train;
  gs.g_val.noalias() = f_val.transpose() * f_val;
  gs.b_train.noalias() = f_train.transpose() * y_train;
  gs.b_val.noalias() = f_val.transpose() * y_val;
  gs.yy_val = y_val.squaredNorm();
  return gs;
}

double candidate_val_mse(const GramSplit& gs, const std::vector<int>& cols, double lambda) {
  const int m = static_cast<int>(cols.size());
  MatrixXd a(m, m);
  VectorXd rhs(m);
  for (int i = 0; i < m; ++i) {
    rhs[i] = gs.b_train[cols[i]];
    for (int j = 0; j < m; ++j) a(i, j) = gs.g_train(cols[i], cols[j]);
    a(i, i) += lambda;
  }
  VectorXd w = llt_solve(a, rhs, "brute force candidate");
  double quad = 0.0;
  double lin = 0.0;
  for (int i = 0; i < m; ++i) {
    lin += w[i] * gs.b_val[cols[i]];
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += gs.g_val(cols[i], cols[j]) * w[j];
    quad += w[i] * acc;
  }
  return (gs.yy_val - 2.0 * lin + quad) / static_cast<double>(gs.n_val);
}

// The intercept rides along on every fit. Dominant actions give the team
// reward a large constant component, and without an explicit intercept the
// search would route that constant through some agent's full action block
// (the one-hots sum to one) instead of leaving the masks sparse. With two
// actions per agent the complement identity makes single-action candidates
// tie exactly either way; those ties are flagged and broken canonically.
std::vector<int> active_columns(const std::vector<VectorXd>& masks, int width, int d) {
  std::vector<int> cols;
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (int k = 0; k < width; ++k)
      if (masks[i][k] > 0.5) cols.push_back(static_cast<int>(i) * width + k);
  cols.push_back(d - 1);
  return cols;
}

int popcount_mask(std::uint32_t c) { return __builtin_popcount(c); }

}  // namespace

BruteForceResult brute_force_masks(const OfflineDataset& ds, int max_dims, double lambda) {
  const int n_agents = ds.meta.n_agents;
  const int ds_dim = ds.meta.joint_state_dim();
  const int width = ds_dim + ds.meta.joint_action_dim();
  if (max_dims > 20) throw ConfigError("brute_force_masks: max_dims above 20 is not tractable");
  for (int i = 0; i < n_agents; ++i) {
    const int own = ds.meta.agent_state_dims[i] + ds.meta.agent_action_counts[i];
    if (own > max_dims)
      throw ConfigError("brute_force_masks: agent " + std::to_string(i) + " searches " +
                        std::to_string(own) + " dims, over the budget of " +
                        std::to_string(max_dims));
  }
  if (lambda <= 0.0) throw ConfigError("brute_force_masks: lambda must be positive");

  const int d = n_agents * width + 1;
  GramSplit gs = build_grams(ds, width);

  // Bit b of a candidate pattern toggles the agent's b-th own dimension:
  // own state block first, then the own action block.
  const auto own_column = [&](int agent, int b) {
    const int slen = ds.meta.agent_state_dims[agent];
    return b < slen ? ds.meta.state_offset(agent) + b
                    : ds_dim + ds.meta.action_offset(agent) + (b - slen);
  };

  // Sweeps start from empty masks. A full action block sums to a constant
  // column, and with one of those in play complementary action patterns fit
  // identically, so the empty start keeps the first sweep free of implicit
  // intercepts and each agent first fits just its own contribution.
  BruteForceResult res;
  res.masks.assign(n_agents, VectorXd::Zero(width));
  res.ambiguous_agents.clear();
  res.tied_masks.clear();

  std::vector<std::vector<VectorXd>> rivals(n_agents);

  for (int sweep = 0; sweep < 2; ++sweep) {
    for (int agent = 0; agent < n_agents; ++agent) {
      const int own = ds.meta.agent_state_dims[agent] + ds.meta.agent_action_counts[agent];
      const std::uint32_t n_candidates = 1u << own;
      double best_mse = std::numeric_limits<double>::infinity();
      std::uint32_t best_c = 0;
      std::vector<std::pair<double, std::uint32_t>> scored;
      scored.reserve(n_candidates);
      std::vector<VectorXd> trial = res.masks;
      for (std::uint32_t c = 0; c < n_candidates; ++c) {
        trial[agent].setZero();
        for (int b = 0; b < own; ++b)
          if ((c >> b) & 1u) trial[agent][own_column(agent, b)] = 1.0;
        const double mse = candidate_val_mse(gs, active_columns(trial, width, d), lambda);
        scored.emplace_back(mse, c);
        if (mse < best_mse) {
          best_mse = mse;
          best_c = c;
        }
      }
      // Ties break toward sparser masks, then toward the lower bit pattern.
      const double tie_tol = kTieRelTol * std::max(1.0, best_mse);
      std::uint32_t chosen = best_c;
      for (auto& [mse, c] : scored) {
        if (mse - best_mse > tie_tol) continue;
        if (popcount_mask(c) < popcount_mask(chosen) ||
            (popcount_mask(c) == popcount_mask(chosen) && c < chosen))
          chosen = c;
      }
      rivals[agent].clear();
      for (auto& [mse, c] : scored) {
        if (c == chosen || mse - best_mse > tie_tol) continue;
        if (popcount_mask(c) != popcount_mask(chosen)) continue;
        if (static_cast<int>(rivals[agent].size()) >= kMaxTiedReported) break;
        VectorXd rv = VectorXd::Zero(width);
        for (int b = 0; b < own; ++b)
          if ((c >> b) & 1u) rv[own_column(agent, b)] = 1.0;
        rivals[agent].push_back(std::move(rv));
      }
      res.masks[agent].setZero();
      for (int b = 0; b < own; ++b)
        if ((chosen >> b) & 1u) res.masks[agent][own_column(agent, b)] = 1.0;
    }
  }
  res.val_mse = candidate_val_mse(gs, active_columns(res.masks, width, d), lambda);

  for (int agent = 0; agent < n_agents; ++agent) {
    if (rivals[agent].empty()) continue;
    res.ambiguous_agents.push_back(agent);
    res.tied_masks.push_back(std::move(rivals[agent]));
  }

  // Refit the winning active set through the dual-checked solver so the
  // returned answer has passed the primal/dual agreement gate.
  const std::vector<int> cols = active_columns(res.masks, width, d);
  const std::vector<long> rows = stride_subsample(static_cast<long>(ds.rows.size()), kVerifyRows);
  MatrixXd f(static_cast<long>(rows.size()), static_cast<long>(cols.size()));
  VectorXd y(static_cast<long>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Transition& row = ds.rows[rows[r]];
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const int col = cols[j];
      double v = 0.0;
      if (col == d - 1) {
        v = 1.0;
      } else {
        const int agent = col / width;
        const int k = col % width;
        if (k < ds_dim)
          v = row.s[k];
        else
          v = (k - ds_dim == ds.meta.action_offset(agent) + row.a[agent]) ? 1.0 : 0.0;
      }
      f(static_cast<long>(r), static_cast<long>(j)) = v;
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) y[static_cast<long>(r)] = ds.rows[rows[r]].team_reward;
  ridge_solve(f, y, lambda);
  return res;
}

}  // namespace teamcredit::oracle
