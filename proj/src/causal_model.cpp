#include "teamcredit/causal_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "teamcredit/io.hpp"
#include "teamcredit/oracle.hpp"
#include "teamcredit/rng.hpp"

namespace teamcredit::causal {

namespace {

constexpr int kAssignChunk = 2048;   // rows per forward pass when assigning
constexpr int kMetricsSamples = 512; // transitions sampled for mask metrics

// log(19): sigmoid gives 0.95 on an agent's own block, 0.05 elsewhere.
constexpr double kPriorLogit = 2.9444389791664403;

double stable_sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

MatrixXd sigmoid(const MatrixXd& z) {
  return z.unaryExpr([](double v) { return stable_sigmoid(v); });
}

// Network input for a batch of rows: one column per (agent, sample) pair,
// agent-major, holding [s; onehot(a); onehot(agent)].
MatrixXd build_inputs(const ModelDims& dims, const OfflineDataset& ds,
                      const std::vector<long>& batch) {
  const long b = static_cast<long>(batch.size());
  const int dstate = dims.ds();
  const int daction = dims.da();
  MatrixXd xg = MatrixXd::Zero(dims.g_in(), b * dims.n_agents);
  for (long t = 0; t < b; ++t) {
    const Transition& row = ds.rows[batch[t]];
    for (int i = 0; i < dims.n_agents; ++i) {
      const long col = static_cast<long>(i) * b + t;
      xg.col(col).head(dstate) = row.s;
      xg(dstate + dims.action_offset(i) + row.a[i], col) = 1.0;
      xg(dstate + daction + i, col) = 1.0;
    }
  }
  // The action one-hot above marked only agent i's own choice; every agent
  // column must carry the full joint action.
  for (long t = 0; t < b; ++t) {
    const Transition& row = ds.rows[batch[t]];
    for (int i = 0; i < dims.n_agents; ++i) {
      const long col = static_cast<long>(i) * b + t;
      for (int j = 0; j < dims.n_agents; ++j)
        xg(dstate + dims.action_offset(j) + row.a[j], col) = 1.0;
    }
  }
  return xg;
}

struct MaskForward {
  MatrixXd cs, ca;                    // soft masks per column
  nn::ForwardCache cache_s, cache_a;  // only filled in DG mode with grads
};

void masks_forward(const CausalModel& model, const MatrixXd& xg, long b, bool want_cache,
                   MaskForward& mf) {
  const int dstate = model.dims.ds();
  const int daction = model.dims.da();
  const long cols = xg.cols();
  switch (model.mode) {
    case GraphMode::kFcg:
      mf.cs = MatrixXd::Ones(dstate, cols);
      mf.ca = MatrixXd::Ones(daction, cols);
      return;
    case GraphMode::kFg: {
      mf.cs.resize(dstate, cols);
      mf.ca.resize(daction, cols);
      for (int i = 0; i < model.dims.n_agents; ++i) {
        const VectorXd srow = model.fg_state_logits.row(i).unaryExpr(
            [](double v) { return stable_sigmoid(v); });
        const VectorXd arow = model.fg_action_logits.row(i).unaryExpr(
            [](double v) { return stable_sigmoid(v); });
        mf.cs.middleCols(static_cast<long>(i) * b, b).colwise() = srow;
        mf.ca.middleCols(static_cast<long>(i) * b, b).colwise() = arow;
      }
      return;
    }
    case GraphMode::kDg:
      mf.cs = sigmoid(nn::forward(model.psi_g_state, xg, want_cache ? &mf.cache_s : nullptr));
      mf.ca = sigmoid(nn::forward(model.psi_g_action, xg, want_cache ? &mf.cache_a : nullptr));
      return;
  }
}

}  // namespace

int ModelDims::ds() const {
  return std::accumulate(agent_state_dims.begin(), agent_state_dims.end(), 0);
}
int ModelDims::da() const {
  return std::accumulate(agent_action_counts.begin(), agent_action_counts.end(), 0);
}
int ModelDims::state_offset(int agent) const {
  return std::accumulate(agent_state_dims.begin(), agent_state_dims.begin() + agent, 0);
}
int ModelDims::action_offset(int agent) const {
  return std::accumulate(agent_action_counts.begin(), agent_action_counts.begin() + agent, 0);
}

ModelDims ModelDims::from_meta(const DatasetMeta& meta) {
  ModelDims d;
  d.n_agents = meta.n_agents;
  d.agent_state_dims = meta.agent_state_dims;
  d.agent_action_counts = meta.agent_action_counts;
  return d;
}

bool ModelDims::matches(const DatasetMeta& meta) const {
  return n_agents == meta.n_agents && agent_state_dims == meta.agent_state_dims &&
         agent_action_counts == meta.agent_action_counts;
}

// Mask logits start at +kPriorLogit on the agent's own block and
// -kPriorLogit elsewhere. The team reward is a sum over agents, so
// reconstruction alone cannot decide which agent's mask should carry a
// shared dimension; the prior resolves that toward the agent whose block
// the dimension lives in, while leaving every entry trainable in both
// directions. Implemented by reserving hidden unit i of each layer as a
// pass-through for agent one-hot input i and writing the per-agent logit
// pattern into the output columns of those units.
void install_locality_prior(nn::Mlp& net, const ModelDims& dims, bool state_part) {
  const int n = dims.n_agents;
  const int hidden = net.arch[1];
  if (hidden < n) return;  // tiny test nets keep their plain init
  const int onehot_off = dims.ds() + dims.da();
  for (int u = 0; u < n; ++u) {
    net.w[0].row(u).setZero();
    net.w[0](u, onehot_off + u) = 1.0;
    net.b[0][u] = 0.0;
    for (int l = 1; l <= 2; ++l) {
      net.w[l].row(u).setZero();
      net.w[l].col(u).setZero();
      net.w[l](u, u) = 1.0;
      net.b[l][u] = 0.0;
    }
    const int off = state_part ? dims.state_offset(u) : dims.action_offset(u);
    const int len = state_part ? dims.agent_state_dims[u] : dims.agent_action_counts[u];
    auto col = net.w[3].col(u);
    col.setConstant(-kPriorLogit);
    col.segment(off, len).setConstant(kPriorLogit);
  }
}

MatrixXd prior_logits(const ModelDims& dims, bool state_part) {
  const int width = state_part ? dims.ds() : dims.da();
  MatrixXd z = MatrixXd::Constant(dims.n_agents, width, -kPriorLogit);
  for (int i = 0; i < dims.n_agents; ++i) {
    const int off = state_part ? dims.state_offset(i) : dims.action_offset(i);
    const int len = state_part ? dims.agent_state_dims[i] : dims.agent_action_counts[i];
    z.row(i).segment(off, len).setConstant(kPriorLogit);
  }
  return z;
}

CausalModel make_model(const ModelDims& dims, GraphMode mode, double h, bool clip_enabled,
                       int hidden, std::uint64_t seed) {
  if (h < 0.0) throw ConfigError("mask threshold h must be >= 0");
  if (hidden <= 0) throw ConfigError("hidden width must be positive");
  CausalModel m;
  m.mode = mode;
  m.h = h;
  m.clip_enabled = clip_enabled;
  m.dims = dims;
  m.psi_g_state = nn::make_mlp(nn::arch3(dims.g_in(), hidden, dims.ds()),
                               derive_seed(seed, "psi-g-state"));
  m.psi_g_action = nn::make_mlp(nn::arch3(dims.g_in(), hidden, dims.da()),
                                derive_seed(seed, "psi-g-action"));
  m.psi_r = nn::make_mlp(nn::arch3(dims.g_in(), hidden, 1), derive_seed(seed, "psi-r"));
  install_locality_prior(m.psi_g_state, dims, true);
  install_locality_prior(m.psi_g_action, dims, false);
  m.fg_state_logits = prior_logits(dims, true);
  m.fg_action_logits = prior_logits(dims, false);
  return m;
}

std::vector<MaskPair> predict_masks(const CausalModel& model, const VectorXd& s,
                                    const std::vector<int>& a) {
  const ModelDims& dims = model.dims;
  if (s.size() != dims.ds()) throw DataError("predict_masks: state width mismatch");
  if (static_cast<int>(a.size()) != dims.n_agents)
    throw DataError("predict_masks: action count mismatch");

  OfflineDataset tmp;
  tmp.meta.n_agents = dims.n_agents;
  tmp.meta.agent_state_dims = dims.agent_state_dims;
  tmp.meta.agent_action_counts = dims.agent_action_counts;
  Transition row;
  row.s = s;
  row.a = a;
  row.s_next = s;
  tmp.rows.push_back(std::move(row));

  MatrixXd xg = build_inputs(dims, tmp, {0});
  MaskForward mf;
  masks_forward(model, xg, 1, false, mf);
  std::vector<MaskPair> out(dims.n_agents);
  for (int i = 0; i < dims.n_agents; ++i) out[i] = {mf.cs.col(i), mf.ca.col(i)};
  return out;
}

MaskPair clip_mask(const MaskPair& mask, double h) {
  if (h < 0.0) throw ConfigError("clip threshold must be >= 0");
  MaskPair out;
  out.state = (mask.state.array().abs() < h).select(0.0, mask.state);
  out.action = (mask.action.array().abs() < h).select(0.0, mask.action);
  return out;
}

std::vector<MaskPair> clip_masks(const std::vector<MaskPair>& masks, double h) {
  std::vector<MaskPair> out(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) out[i] = clip_mask(masks[i], h);
  return out;
}

std::vector<MaskPair> harden_masks(const std::vector<MaskPair>& masks) {
  std::vector<MaskPair> out(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    out[i].state = (masks[i].state.array() > 0.0).cast<double>();
    out[i].action = (masks[i].action.array() > 0.0).cast<double>();
  }
  return out;
}

ModelGradients zero_model_gradients(const CausalModel& model) {
  ModelGradients g;
  g.g_state = nn::zero_gradients(model.psi_g_state);
  g.g_action = nn::zero_gradients(model.psi_g_action);
  g.r = nn::zero_gradients(model.psi_r);
  g.fg_state = MatrixXd::Zero(model.fg_state_logits.rows(), model.fg_state_logits.cols());
  g.fg_action = MatrixXd::Zero(model.fg_action_logits.rows(), model.fg_action_logits.cols());
  return g;
}

ModelLossParts model_loss(const CausalModel& model, const OfflineDataset& ds,
                          const std::vector<long>& batch, double lambda1, double lambda2,
                          ModelGradients* grads) {
  if (batch.empty()) throw DataError("model_loss: empty batch");
  if (!model.dims.matches(ds.meta)) throw DataError("model_loss: dataset dims mismatch");
  const long b = static_cast<long>(batch.size());
  const int n = model.dims.n_agents;
  const int dstate = model.dims.ds();
  const int daction = model.dims.da();

  MatrixXd xg = build_inputs(model.dims, ds, batch);
  MaskForward mf;
  masks_forward(model, xg, b, grads != nullptr, mf);

  MatrixXd u = xg;
  u.topRows(dstate).array() *= mf.cs.array();
  u.middleRows(dstate, daction).array() *= mf.ca.array();

  nn::ForwardCache cache_r;
  MatrixXd rhat = nn::forward(model.psi_r, u, grads ? &cache_r : nullptr);

  VectorXd err(b);
  for (long t = 0; t < b; ++t) {
    double pred = 0.0;
    for (int i = 0; i < n; ++i) pred += rhat(0, static_cast<long>(i) * b + t);
    err[t] = pred - ds.rows[batch[t]].team_reward;
  }

  ModelLossParts parts;
  parts.recon = err.squaredNorm() / static_cast<double>(b);
  parts.l1_state = lambda1 * mf.cs.sum() / static_cast<double>(b);
  parts.l1_action = lambda2 * mf.ca.sum() / static_cast<double>(b);
  parts.total = parts.recon + parts.l1_state + parts.l1_action;

  if (!grads) return parts;

  MatrixXd drhat(1, b * n);
  for (long t = 0; t < b; ++t) {
    const double g = 2.0 * err[t] / static_cast<double>(b);
    for (int i = 0; i < n; ++i) drhat(0, static_cast<long>(i) * b + t) = g;
  }
  MatrixXd du = nn::backward(model.psi_r, cache_r, drhat, grads->r);

  if (model.mode == GraphMode::kFcg) return parts;

  // d(loss)/d(soft mask): the reconstruction path times the raw input, plus
  // the L1 term (masks are positive, so |c| differentiates to +1).
  MatrixXd dcs = du.topRows(dstate).cwiseProduct(xg.topRows(dstate));
  dcs.array() += lambda1 / static_cast<double>(b);
  MatrixXd dca = du.middleRows(dstate, daction).cwiseProduct(xg.middleRows(dstate, daction));
  dca.array() += lambda2 / static_cast<double>(b);
  MatrixXd dzs = dcs.cwiseProduct(mf.cs.cwiseProduct((1.0 - mf.cs.array()).matrix()));
  MatrixXd dza = dca.cwiseProduct(mf.ca.cwiseProduct((1.0 - mf.ca.array()).matrix()));

  if (model.mode == GraphMode::kDg) {
    nn::backward(model.psi_g_state, mf.cache_s, dzs, grads->g_state);
    nn::backward(model.psi_g_action, mf.cache_a, dza, grads->g_action);
  } else {
    for (int i = 0; i < n; ++i) {
      grads->fg_state.row(i) += dzs.middleCols(static_cast<long>(i) * b, b).rowwise().sum();
      grads->fg_action.row(i) += dza.middleCols(static_cast<long>(i) * b, b).rowwise().sum();
    }
  }
  return parts;
}

namespace {

// Soft -> assignment masks, honoring the mode and the clip switch.
void assignment_masks(const CausalModel& model, MaskForward& mf) {
  if (model.mode == GraphMode::kFcg || !model.clip_enabled) return;
  mf.cs = (mf.cs.array() < model.h).select(0.0, mf.cs);
  mf.ca = (mf.ca.array() < model.h).select(0.0, mf.ca);
}

void assign_chunk(const CausalModel& model, const OfflineDataset& ds,
                  const std::vector<long>& rows, std::vector<VectorXd>& out) {
  const long b = static_cast<long>(rows.size());
  const int n = model.dims.n_agents;
  MatrixXd xg = build_inputs(model.dims, ds, rows);
  MaskForward mf;
  masks_forward(model, xg, b, false, mf);
  assignment_masks(model, mf);
  MatrixXd u = xg;
  u.topRows(model.dims.ds()).array() *= mf.cs.array();
  u.middleRows(model.dims.ds(), model.dims.da()).array() *= mf.ca.array();
  MatrixXd rhat = nn::forward(model.psi_r, u);
  for (long t = 0; t < b; ++t) {
    VectorXd r(n);
    for (int i = 0; i < n; ++i) r[i] = rhat(0, static_cast<long>(i) * b + t);
    out.push_back(std::move(r));
  }
}

}  // namespace

VectorXd assign_rewards_row(const CausalModel& model, const VectorXd& s,
                            const std::vector<int>& a) {
  OfflineDataset tmp;
  tmp.meta.n_agents = model.dims.n_agents;
  tmp.meta.agent_state_dims = model.dims.agent_state_dims;
  tmp.meta.agent_action_counts = model.dims.agent_action_counts;
  Transition row;
  row.s = s;
  row.a = a;
  row.s_next = s;
  tmp.rows.push_back(std::move(row));
  std::vector<VectorXd> out;
  assign_chunk(model, tmp, {0}, out);
  return out[0];
}

AssignedDataset assign_rewards(const CausalModel& model, const OfflineDataset& ds) {
  if (!model.dims.matches(ds.meta)) throw DataError("assign_rewards: dataset dims mismatch");
  AssignedDataset out;
  out.data = ds;
  out.r_hat.reserve(ds.rows.size());
  std::vector<long> chunk;
  for (long start = 0; start < static_cast<long>(ds.rows.size()); start += kAssignChunk) {
    const long stop = std::min<long>(start + kAssignChunk, static_cast<long>(ds.rows.size()));
    chunk.resize(stop - start);
    std::iota(chunk.begin(), chunk.end(), start);
    assign_chunk(model, ds, chunk, out.r_hat);
  }
  return out;
}

std::vector<std::vector<MaskPair>> sample_hard_masks(const CausalModel& model,
                                                     const OfflineDataset& ds,
                                                     int max_samples) {
  const long n = static_cast<long>(ds.rows.size());
  if (n == 0) throw DataError("sample_hard_masks: empty dataset");
  std::vector<long> idx;
  if (n <= max_samples) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
  } else {
    idx.resize(max_samples);
    for (long j = 0; j < max_samples; ++j) idx[j] = j * n / max_samples;
  }

  const int n_agents = model.dims.n_agents;
  std::vector<std::vector<MaskPair>> out;
  out.reserve(idx.size());
  if (model.mode == GraphMode::kFcg) {
    std::vector<MaskPair> ones(n_agents);
    for (int i = 0; i < n_agents; ++i)
      ones[i] = {VectorXd::Ones(model.dims.ds()), VectorXd::Ones(model.dims.da())};
    out.assign(idx.size(), ones);
    return out;
  }

  MatrixXd xg = build_inputs(model.dims, ds, idx);
  MaskForward mf;
  masks_forward(model, xg, static_cast<long>(idx.size()), false, mf);
  const long b = static_cast<long>(idx.size());
  for (long t = 0; t < b; ++t) {
    std::vector<MaskPair> sample(n_agents);
    for (int i = 0; i < n_agents; ++i) {
      const long col = static_cast<long>(i) * b + t;
      sample[i].state = (mf.cs.col(col).array() >= model.h).cast<double>();
      sample[i].action = (mf.ca.col(col).array() >= model.h).cast<double>();
    }
    out.push_back(std::move(sample));
  }
  return out;
}

namespace {

double holdout_recon(const CausalModel& model, const OfflineDataset& ds,
                     const std::vector<long>& rows) {
  double acc = 0.0;
  std::vector<long> chunk;
  for (long start = 0; start < static_cast<long>(rows.size()); start += kAssignChunk) {
    const long stop = std::min<long>(start + kAssignChunk, static_cast<long>(rows.size()));
    chunk.assign(rows.begin() + start, rows.begin() + stop);
    ModelLossParts parts = model_loss(model, ds, chunk, 0.0, 0.0, nullptr);
    acc += parts.recon * static_cast<double>(chunk.size());
  }
  return acc / static_cast<double>(rows.size());
}

struct FgAdam {
  nn::AdamBuf state, action;
  long step = 0;
};

}  // namespace

TrainModelResult train_model(const OfflineDataset& ds, const RunConfig& cfg,
                             const synthenv::GroundTruthSpec* truth,
                             const HiddenRewards* hidden) {
  cfg.validate();
  if (ds.rows.empty()) throw DataError("train_model: empty dataset");
  {
    const std::vector<Violation> bad = validate_dataset(ds);
    if (!bad.empty())
      throw DataError("train_model: dataset fails validation (" +
                      std::to_string(bad.size()) + " violations, first: " + bad[0].message + ")");
  }
  if (hidden && hidden->rows.size() != ds.rows.size())
    throw DataError("train_model: hidden rewards do not align with the dataset");

  const ModelDims dims = ModelDims::from_meta(ds.meta);
  std::vector<long> train_rows, holdout_rows;
  for (long i = 0; i < static_cast<long>(ds.rows.size()); ++i) {
    if (ds.rows[i].episode % 10 == 9)
      holdout_rows.push_back(i);
    else
      train_rows.push_back(i);
  }
  if (holdout_rows.empty()) holdout_rows = train_rows;
  if (train_rows.empty()) throw DataError("train_model: no training rows");

  TrainModelResult res;
  res.model = make_model(dims, cfg.graph_mode, cfg.h, cfg.clip_enabled, cfg.model_hidden,
                         derive_seed(cfg.seed, "model-init"));
  res.model.config_hash = io::config_hash(cfg);
  CausalModel& model = res.model;

  // Start the reward head at the dataset mean so the first steps fit
  // deviations instead of the offset. Without this, any near-constant input
  // column (a dominant action's one-hot) gets grabbed by every agent's mask
  // during the offset-fitting phase and the copies saturate beyond what the
  // sparsity penalty can undo.
  double mean_r = 0.0;
  for (long i : train_rows) mean_r += ds.rows[i].team_reward;
  mean_r /= static_cast<double>(train_rows.size());
  model.psi_r.b.back().setConstant(mean_r / dims.n_agents);

  nn::AdamState adam_r = nn::make_adam(model.psi_r);
  nn::AdamState adam_gs = nn::make_adam(model.psi_g_state);
  nn::AdamState adam_ga = nn::make_adam(model.psi_g_action);
  FgAdam adam_fg;
  adam_fg.state.m = MatrixXd::Zero(dims.n_agents, dims.ds());
  adam_fg.state.v = adam_fg.state.m;
  adam_fg.action.m = MatrixXd::Zero(dims.n_agents, dims.da());
  adam_fg.action.v = adam_fg.action.m;

  ModelGradients grads = zero_model_gradients(model);
  Rng batch_rng(derive_seed(cfg.seed, "model-batch"));
  std::vector<long> batch(cfg.batch_size);

  auto zero_all = [&] {
    for (auto& m : grads.r.dw) m.setZero();
    for (auto& v : grads.r.db) v.setZero();
    for (auto& m : grads.g_state.dw) m.setZero();
    for (auto& v : grads.g_state.db) v.setZero();
    for (auto& m : grads.g_action.dw) m.setZero();
    for (auto& v : grads.g_action.db) v.setZero();
    grads.fg_state.setZero();
    grads.fg_action.setZero();
  };

  auto log_metrics = [&](long step) {
    metrics::MetricsRow row;
    row.step = step;
    row.recon_mse = holdout_recon(model, ds, holdout_rows);
    {
      // L1 diagnostics on a fixed-size evaluation batch.
      const long take = std::min<long>(static_cast<long>(holdout_rows.size()), kAssignChunk);
      std::vector<long> sub(holdout_rows.begin(), holdout_rows.begin() + take);
      ModelLossParts p = model_loss(model, ds, sub, cfg.lambda1, cfg.lambda2, nullptr);
      row.l1_state = p.l1_state;
      row.l1_action = p.l1_action;
    }
    const auto samples = sample_hard_masks(model, ds, kMetricsSamples);
    const auto spars_s = metrics::sparsity_rate(samples, metrics::MaskKind::kState,
                                                dims.agent_state_dims, dims.agent_action_counts);
    const auto spars_a = metrics::sparsity_rate(samples, metrics::MaskKind::kAction,
                                                dims.agent_state_dims, dims.agent_action_counts);
    row.s_sr = spars_s.own;
    row.s_sr_cross = spars_s.cross;
    row.s_ar = spars_a.own;
    row.s_ar_cross = spars_a.cross;
    if (truth) {
      const auto voted = metrics::majority_vote(samples);
      const auto truth_pairs = metrics::to_mask_pairs(truth->state_masks, truth->action_masks);
      row.mask_f1_state = metrics::mask_f1(voted, truth_pairs, metrics::MaskKind::kState).f1;
      row.mask_f1_action = metrics::mask_f1(voted, truth_pairs, metrics::MaskKind::kAction).f1;
    }
    if (hidden) {
      const long n = static_cast<long>(ds.rows.size());
      std::vector<long> idx;
      if (n <= kMetricsSamples) {
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), 0);
      } else {
        idx.resize(kMetricsSamples);
        for (long j = 0; j < kMetricsSamples; ++j) idx[j] = j * n / kMetricsSamples;
      }
      std::vector<VectorXd> r_hat;
      r_hat.reserve(idx.size());
      OfflineDataset view;  // assign a subsample without copying the whole set
      view.meta = ds.meta;
      for (long i : idx) view.rows.push_back(ds.rows[i]);
      std::vector<long> all(view.rows.size());
      std::iota(all.begin(), all.end(), 0);
      assign_chunk(model, view, all, r_hat);
      std::vector<VectorXd> r_true;
      r_true.reserve(idx.size());
      for (long i : idx) r_true.push_back(hidden->rows[i].r);
      row.decomp_corr = metrics::decomposition_fidelity(r_hat, r_true).mean_corr;
    }
    res.log.push_back(row);
  };

  for (long step = 1; step <= cfg.train_steps; ++step) {
    for (int j = 0; j < cfg.batch_size; ++j)
      batch[j] = train_rows[batch_rng.uniform_int(static_cast<int>(train_rows.size()))];
    zero_all();
    ModelLossParts parts = model_loss(model, ds, batch, cfg.lambda1, cfg.lambda2, &grads);
    if (!std::isfinite(parts.total))
      throw NumericError("model loss diverged at step " + std::to_string(step));

    nn::check_finite(grads.r, "psi_r");
    nn::adam_step(model.psi_r, grads.r, adam_r, cfg.model_lr);
    if (step <= cfg.mask_warmup) {
      if (step % cfg.eval_interval == 0 || step == cfg.train_steps) log_metrics(step);
      continue;
    }
    if (model.mode == GraphMode::kDg) {
      nn::check_finite(grads.g_state, "psi_g_state");
      nn::check_finite(grads.g_action, "psi_g_action");
      nn::adam_step(model.psi_g_state, grads.g_state, adam_gs, cfg.model_lr);
      nn::adam_step(model.psi_g_action, grads.g_action, adam_ga, cfg.model_lr);
    } else if (model.mode == GraphMode::kFg) {
      if (!grads.fg_state.allFinite() || !grads.fg_action.allFinite())
        throw NumericError("fg_table gradient is non-finite");
      ++adam_fg.step;
      nn::adam_step_tensor(model.fg_state_logits, grads.fg_state, adam_fg.state, adam_fg.step,
                           cfg.model_lr, 0.9, 0.999, 1e-8);
      nn::adam_step_tensor(model.fg_action_logits, grads.fg_action, adam_fg.action, adam_fg.step,
                           cfg.model_lr, 0.9, 0.999, 1e-8);
    }

    if (step % cfg.eval_interval == 0 || step == cfg.train_steps) log_metrics(step);
  }

  res.holdout_mse = holdout_recon(model, ds, holdout_rows);
  VectorXd r(holdout_rows.size());
  for (std::size_t i = 0; i < holdout_rows.size(); ++i)
    r[static_cast<long>(i)] = ds.rows[holdout_rows[i]].team_reward;
  res.holdout_var_r = (r.array() - r.mean()).square().mean();
  return res;
}

}  // namespace teamcredit::causal
