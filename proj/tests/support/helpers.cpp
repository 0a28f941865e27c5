#include "helpers.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace teamcredit::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string tmpl = (fs::temp_directory_path() / "teamcredit_test_XXXXXX").string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
  path_ = buf.data();
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CaptureStdout::CaptureStdout(bool also_stderr) {
  fflush(stdout);
  std::cout.flush();
  saved_fd_ = dup(STDOUT_FILENO);
  std::string tmpl = (fs::temp_directory_path() / "teamcredit_cap_XXXXXX").string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  int fd = mkstemp(buf.data());
  if (fd < 0 || saved_fd_ < 0) throw std::runtime_error("stdout capture setup failed");
  path_ = buf.data();
  dup2(fd, STDOUT_FILENO);
  if (also_stderr) {
    fflush(stderr);
    saved_err_ = dup(STDERR_FILENO);
    dup2(fd, STDERR_FILENO);
  }
  close(fd);
}

CaptureStdout::~CaptureStdout() {
  fflush(stdout);
  std::cout.flush();
  dup2(saved_fd_, STDOUT_FILENO);
  close(saved_fd_);
  if (saved_err_ >= 0) {
    fflush(stderr);
    dup2(saved_err_, STDERR_FILENO);
    close(saved_err_);
  }
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string CaptureStdout::text() {
  fflush(stdout);
  std::cout.flush();
  return read_file(path_);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DatasetMeta random_meta(Rng& rng) {
  DatasetMeta meta;
  meta.n_agents = 1 + rng.uniform_int(3);
  for (int i = 0; i < meta.n_agents; ++i) {
    meta.agent_state_dims.push_back(1 + rng.uniform_int(3));
    meta.agent_action_counts.push_back(2 + rng.uniform_int(3));
  }
  meta.env = "LINEAR";
  meta.tier = "expert";
  meta.seed = rng.next_u64() % 100000;
  return meta;
}

OfflineDataset random_valid_dataset(Rng& rng) {
  OfflineDataset ds;
  ds.meta = random_meta(rng);
  const int n_eps = 1 + rng.uniform_int(3);
  const int horizon = 2 + rng.uniform_int(4);
  for (int e = 0; e < n_eps; ++e) {
    for (int t = 0; t < horizon; ++t) {
      Transition tr;
      tr.episode = e;
      tr.t = t;
      tr.s = VectorXd::Zero(ds.meta.joint_state_dim());
      tr.s_next = VectorXd::Zero(ds.meta.joint_state_dim());
      for (int k = 0; k < tr.s.size(); ++k) {
        tr.s[k] = rng.normal();
        tr.s_next[k] = rng.normal();
      }
      for (int i = 0; i < ds.meta.n_agents; ++i)
        tr.a.push_back(rng.uniform_int(ds.meta.agent_action_counts[i]));
      tr.team_reward = rng.normal() * 3.0;
      tr.done = t == horizon - 1;
      ds.rows.push_back(std::move(tr));
    }
  }
  return ds;
}

synthenv::GroundTruthSpec tiny_env(Rng& rng, const TinyEnvOpts& opts) {
  synthenv::EnvSpec spec;
  spec.n_agents = 1 + rng.uniform_int(opts.max_agents);
  spec.agent_state_dims.clear();
  spec.agent_action_counts.clear();
  for (int i = 0; i < spec.n_agents; ++i) {
    spec.agent_state_dims.push_back(1 + rng.uniform_int(opts.max_state_dims));
    spec.agent_action_counts.push_back(2 + rng.uniform_int(opts.max_actions - 1));
  }
  spec.horizon = opts.horizon;
  spec.family = opts.family;
  spec.sparsity = 0.5;
  spec.noise_sigma = opts.noise;
  spec.local_rewards = opts.local;
  spec.seed = rng.next_u64() % 1000000;
  spec.score_episodes = opts.score_episodes;
  return synthenv::make_env(spec);
}

namespace {

void flatten_net(const nn::Mlp& net, std::vector<double>& out) {
  for (const auto& w : net.w)
    for (int j = 0; j < w.size(); ++j) out.push_back(w.data()[j]);
  for (const auto& b : net.b)
    for (int j = 0; j < b.size(); ++j) out.push_back(b.data()[j]);
}

void unflatten_net(nn::Mlp& net, const VectorXd& flat, long& pos) {
  for (auto& w : net.w)
    for (int j = 0; j < w.size(); ++j) w.data()[j] = flat[pos++];
  for (auto& b : net.b)
    for (int j = 0; j < b.size(); ++j) b.data()[j] = flat[pos++];
}

void flatten_grads(const nn::Gradients& g, std::vector<double>& out) {
  for (const auto& w : g.dw)
    for (int j = 0; j < w.size(); ++j) out.push_back(w.data()[j]);
  for (const auto& b : g.db)
    for (int j = 0; j < b.size(); ++j) out.push_back(b.data()[j]);
}

VectorXd to_vec(const std::vector<double>& v) {
  VectorXd out(static_cast<long>(v.size()));
  for (long i = 0; i < out.size(); ++i) out[i] = v[static_cast<size_t>(i)];
  return out;
}

}  // namespace

VectorXd flatten_model(const causal::CausalModel& m) {
  std::vector<double> out;
  flatten_net(m.psi_g_state, out);
  flatten_net(m.psi_g_action, out);
  flatten_net(m.psi_r, out);
  if (m.mode == GraphMode::kFg) {
    for (int j = 0; j < m.fg_state_logits.size(); ++j) out.push_back(m.fg_state_logits.data()[j]);
    for (int j = 0; j < m.fg_action_logits.size(); ++j)
      out.push_back(m.fg_action_logits.data()[j]);
  }
  return to_vec(out);
}

void unflatten_model(causal::CausalModel& m, const VectorXd& flat) {
  long pos = 0;
  unflatten_net(m.psi_g_state, flat, pos);
  unflatten_net(m.psi_g_action, flat, pos);
  unflatten_net(m.psi_r, flat, pos);
  if (m.mode == GraphMode::kFg) {
    for (int j = 0; j < m.fg_state_logits.size(); ++j) m.fg_state_logits.data()[j] = flat[pos++];
    for (int j = 0; j < m.fg_action_logits.size(); ++j)
      m.fg_action_logits.data()[j] = flat[pos++];
  }
  if (pos != flat.size()) throw std::runtime_error("model flat size mismatch");
}

VectorXd flatten_model_grads(const causal::CausalModel& m, const causal::ModelGradients& g) {
  std::vector<double> out;
  flatten_grads(g.g_state, out);
  flatten_grads(g.g_action, out);
  flatten_grads(g.r, out);
  if (m.mode == GraphMode::kFg) {
    for (int j = 0; j < g.fg_state.size(); ++j) out.push_back(g.fg_state.data()[j]);
    for (int j = 0; j < g.fg_action.size(); ++j) out.push_back(g.fg_action.data()[j]);
  }
  return to_vec(out);
}

VectorXd flatten_ensemble(const policy::QEnsemble& ens) {
  std::vector<double> out;
  for (const auto& net : ens.q1) flatten_net(net, out);
  for (const auto& net : ens.q2) flatten_net(net, out);
  return to_vec(out);
}

void unflatten_ensemble(policy::QEnsemble& ens, const VectorXd& flat) {
  long pos = 0;
  for (auto& net : ens.q1) unflatten_net(net, flat, pos);
  for (auto& net : ens.q2) unflatten_net(net, flat, pos);
  if (pos != flat.size()) throw std::runtime_error("ensemble flat size mismatch");
}

VectorXd flatten_policy_grads(const policy::QEnsemble& ens, const policy::PolicyGradients& g) {
  std::vector<double> out;
  for (int i = 0; i < ens.n_agents; ++i) flatten_grads(g.q1[static_cast<size_t>(i)], out);
  for (int i = 0; i < ens.n_agents; ++i) flatten_grads(g.q2[static_cast<size_t>(i)], out);
  return to_vec(out);
}

AssignedDataset random_assigned(Rng& rng, const OfflineDataset& ds) {
  AssignedDataset asg;
  asg.data = ds;
  for (const auto& row : ds.rows) {
    VectorXd r(ds.meta.n_agents);
    for (int i = 0; i < r.size(); ++i) r[i] = rng.normal();
    // keep the sum loosely tied to the team reward so targets look sane
    r[0] += row.team_reward - r.sum();
    asg.r_hat.push_back(r);
  }
  return asg;
}

bool vectors_equal(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (long i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

bool mlp_equal(const nn::Mlp& a, const nn::Mlp& b) {
  if (a.arch != b.arch) return false;
  for (size_t l = 0; l < a.w.size(); ++l) {
    for (int j = 0; j < a.w[l].size(); ++j)
      if (a.w[l].data()[j] != b.w[l].data()[j]) return false;
    for (int j = 0; j < a.b[l].size(); ++j)
      if (a.b[l].data()[j] != b.b[l].data()[j]) return false;
  }
  return true;
}

}  // namespace teamcredit::testing
