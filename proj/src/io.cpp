#include "teamcredit/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace teamcredit::io {

using nlohmann::json;

namespace {

json vec_to_json(const VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

VectorXd vec_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array()) throw DataError(what + ": expected an array");
  VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw DataError(what + ": non-numeric entry");
    v[static_cast<long>(i)] = arr[i].get<double>();
  }
  return v;
}

json mat_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd mat_from_json(const json& rows, const std::string& what) {
  if (!rows.is_array()) throw DataError(what + ": expected an array of rows");
  if (rows.empty()) return MatrixXd(0, 0);
  const std::size_t ncol = rows[0].size();
  MatrixXd m(rows.size(), ncol);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != ncol)
      throw DataError(what + ": ragged rows");
    for (std::size_t c = 0; c < ncol; ++c)
      m(static_cast<long>(r), static_cast<long>(c)) = rows[r][c].get<double>();
  }
  return m;
}

std::vector<int> ints_from_json(const json& arr, const std::string& what) {
  if (!arr.is_array()) throw DataError(what + ": expected an array");
  std::vector<int> v;
  v.reserve(arr.size());
  for (const auto& e : arr) {
    if (!e.is_number_integer()) throw DataError(what + ": non-integer entry");
    v.push_back(e.get<int>());
  }
  return v;
}

const json& need(const json& obj, const char* key, const std::string& what) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(what + ": missing key '" + key + "'");
  return *it;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!f) throw DataError("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for reading: " + path);
  return f;
}

json parse_line(const std::string& line, const std::string& path, long lineno) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
  }
}

json parse_whole(std::istream& in, const std::string& path) {
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

json meta_to_json(const DatasetMeta& meta) {
  json h;
  h["version"] = meta.version;
  h["n_agents"] = meta.n_agents;
  h["agent_state_dims"] = meta.agent_state_dims;
  h["agent_action_counts"] = meta.agent_action_counts;
  h["env"] = meta.env;
  h["tier"] = meta.tier;
  h["seed"] = meta.seed;
  return h;
}

DatasetMeta meta_from_json(const json& h, const std::string& what) {
  DatasetMeta meta;
  meta.version = need(h, "version", what).get<int>();
  meta.n_agents = need(h, "n_agents", what).get<int>();
  meta.agent_state_dims = ints_from_json(need(h, "agent_state_dims", what), what);
  meta.agent_action_counts = ints_from_json(need(h, "agent_action_counts", what), what);
  meta.env = need(h, "env", what).get<std::string>();
  meta.tier = need(h, "tier", what).get<std::string>();
  meta.seed = need(h, "seed", what).get<std::uint64_t>();
  if (meta.version != 1) throw DataError(what + ": unsupported version " + std::to_string(meta.version));
  return meta;
}

json row_to_json(const Transition& row) {
  json j;
  j["episode"] = row.episode;
  j["t"] = row.t;
  j["s"] = vec_to_json(row.s);
  j["a"] = row.a;
  j["R"] = row.team_reward;
  j["s_next"] = vec_to_json(row.s_next);
  j["done"] = row.done;
  return j;
}

Transition row_from_json(const json& j, const DatasetMeta& meta, const std::string& where) {
  Transition row;
  row.episode = need(j, "episode", where).get<int>();
  row.t = need(j, "t", where).get<int>();
  row.s = vec_from_json(need(j, "s", where), where + " key 's'");
  row.a = ints_from_json(need(j, "a", where), where + " key 'a'");
  row.team_reward = need(j, "R", where).get<double>();
  row.s_next = vec_from_json(need(j, "s_next", where), where + " key 's_next'");
  row.done = need(j, "done", where).get<bool>();
  const int ds = meta.joint_state_dim();
  if (row.s.size() != ds || row.s_next.size() != ds)
    throw DataError(where + ": state width " + std::to_string(row.s.size()) +
                    " != header D_s " + std::to_string(ds));
  if (static_cast<int>(row.a.size()) != meta.n_agents)
    throw DataError(where + ": " + std::to_string(row.a.size()) + " actions vs header n_agents " +
                    std::to_string(meta.n_agents));
  return row;
}

void write_dataset_impl(const std::string& path, const OfflineDataset& ds,
                        const std::vector<VectorXd>* r_hat) {
  if (r_hat && r_hat->size() != ds.rows.size())
    throw DataError("assigned rewards do not align with rows");
  auto f = open_out(path);
  f << meta_to_json(ds.meta).dump() << '\n';
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    json j = row_to_json(ds.rows[i]);
    if (r_hat) j["r_hat"] = vec_to_json((*r_hat)[i]);
    f << j.dump() << '\n';
  }
  if (!f) throw DataError("write failed: " + path);
}

json mlp_to_json(const nn::Mlp& net) {
  json j;
  j["arch"] = net.arch;
  j["seed"] = net.seed;
  j["init_id"] = net.init_id;
  json w = json::array(), b = json::array();
  for (const auto& m : net.w) w.push_back(mat_to_json(m));
  for (const auto& v : net.b) b.push_back(vec_to_json(v));
  j["w"] = std::move(w);
  j["b"] = std::move(b);
  return j;
}

nn::Mlp mlp_from_json(const json& j, const std::string& what) {
  nn::Mlp net;
  net.arch = ints_from_json(need(j, "arch", what), what + " arch");
  net.seed = need(j, "seed", what).get<std::uint64_t>();
  net.init_id = need(j, "init_id", what).get<std::string>();
  const json& w = need(j, "w", what);
  const json& b = need(j, "b", what);
  if (net.arch.size() < 2 || w.size() != net.arch.size() - 1 || b.size() != w.size())
    throw DataError(what + ": layer count disagrees with arch");
  for (std::size_t l = 0; l < w.size(); ++l) {
    MatrixXd wl = mat_from_json(w[l], what + " w");
    VectorXd bl = vec_from_json(b[l], what + " b");
    if (wl.rows() != net.arch[l + 1] || wl.cols() != net.arch[l] || bl.size() != net.arch[l + 1])
      throw DataError(what + ": layer " + std::to_string(l) + " shape " +
                      std::to_string(wl.rows()) + "x" + std::to_string(wl.cols()) +
                      " disagrees with arch");
    net.w.push_back(std::move(wl));
    net.b.push_back(std::move(bl));
  }
  return net;
}

}  // namespace

void write_dataset(const std::string& path, const OfflineDataset& ds) {
  write_dataset_impl(path, ds, nullptr);
}

OfflineDataset read_dataset(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  long lineno = 0;
  OfflineDataset ds;
  bool have_header = false;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    const std::string where = path + ":" + std::to_string(lineno);
    if (!have_header) {
      ds.meta = meta_from_json(j, where);
      have_header = true;
    } else {
      ds.rows.push_back(row_from_json(j, ds.meta, where));
    }
  }
  if (!have_header) throw DataError(path + ": missing header line");
  return ds;
}

void write_assigned(const std::string& path, const AssignedDataset& asg) {
  write_dataset_impl(path, asg.data, &asg.r_hat);
}

AssignedDataset read_assigned(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  long lineno = 0;
  AssignedDataset asg;
  bool have_header = false;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    const std::string where = path + ":" + std::to_string(lineno);
    if (!have_header) {
      asg.data.meta = meta_from_json(j, where);
      have_header = true;
    } else {
      asg.data.rows.push_back(row_from_json(j, asg.data.meta, where));
      VectorXd r = vec_from_json(need(j, "r_hat", where), where + " key 'r_hat'");
      if (r.size() != asg.data.meta.n_agents)
        throw DataError(where + ": r_hat width " + std::to_string(r.size()) +
                        " != n_agents " + std::to_string(asg.data.meta.n_agents));
      asg.r_hat.push_back(std::move(r));
    }
  }
  if (!have_header) throw DataError(path + ": missing header line");
  return asg;
}

void write_hidden(const std::string& path, const HiddenRewards& hr) {
  auto f = open_out(path);
  for (const auto& row : hr.rows) {
    json j;
    j["episode"] = row.episode;
    j["t"] = row.t;
    j["r"] = vec_to_json(row.r);
    j["eps"] = row.eps;
    f << j.dump() << '\n';
  }
  if (!f) throw DataError("write failed: " + path);
}

HiddenRewards read_hidden(const std::string& path) {
  auto f = open_in(path);
  std::string line;
  long lineno = 0;
  HiddenRewards hr;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, path, lineno);
    const std::string where = path + ":" + std::to_string(lineno);
    HiddenRow row;
    row.episode = need(j, "episode", where).get<int>();
    row.t = need(j, "t", where).get<int>();
    row.r = vec_from_json(need(j, "r", where), where + " key 'r'");
    row.eps = need(j, "eps", where).get<double>();
    hr.rows.push_back(std::move(row));
  }
  return hr;
}

void write_truth(const std::string& path, const synthenv::GroundTruthSpec& g) {
  json env;
  env["n_agents"] = g.env.n_agents;
  env["agent_state_dims"] = g.env.agent_state_dims;
  env["agent_action_counts"] = g.env.agent_action_counts;
  env["horizon"] = g.env.horizon;
  env["family"] = synthenv::to_string(g.env.family);
  env["sparsity"] = g.env.sparsity;
  env["noise_sigma"] = g.env.noise_sigma;
  env["local_rewards"] = g.env.local_rewards;
  env["seed"] = g.env.seed;
  env["score_episodes"] = g.env.score_episodes;
  env["drift"] = g.env.drift;
  env["act_scale"] = g.env.act_scale;
  env["trans_noise"] = g.env.trans_noise;
  env["init_scale"] = g.env.init_scale;

  json j;
  j["version"] = g.version;
  j["env"] = std::move(env);
  json sm = json::array(), am = json::array(), lw = json::array();
  json w1 = json::array(), b1 = json::array(), w2 = json::array(), dp = json::array();
  for (const auto& v : g.state_masks) sm.push_back(vec_to_json(v));
  for (const auto& v : g.action_masks) am.push_back(vec_to_json(v));
  for (const auto& v : g.linear_w) lw.push_back(vec_to_json(v));
  for (const auto& m : g.mlp_w1) w1.push_back(mat_to_json(m));
  for (const auto& v : g.mlp_b1) b1.push_back(vec_to_json(v));
  for (const auto& v : g.mlp_w2) w2.push_back(vec_to_json(v));
  for (const auto& m : g.disp) dp.push_back(mat_to_json(m));
  j["state_masks"] = std::move(sm);
  j["action_masks"] = std::move(am);
  j["linear_w"] = std::move(lw);
  j["mlp_w1"] = std::move(w1);
  j["mlp_b1"] = std::move(b1);
  j["mlp_w2"] = std::move(w2);
  j["disp"] = std::move(dp);
  j["expert_score"] = g.expert_score;
  j["random_score"] = g.random_score;
  j["expert_score_se"] = g.expert_score_se;
  j["random_score_se"] = g.random_score_se;

  auto f = open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw DataError("write failed: " + path);
}

synthenv::GroundTruthSpec read_truth(const std::string& path) {
  auto f = open_in(path);
  const json j = parse_whole(f, path);
  const std::string what = path;
  synthenv::GroundTruthSpec g;
  g.version = need(j, "version", what).get<int>();
  const json& env = need(j, "env", what);
  g.env.n_agents = need(env, "n_agents", what).get<int>();
  g.env.agent_state_dims = ints_from_json(need(env, "agent_state_dims", what), what);
  g.env.agent_action_counts = ints_from_json(need(env, "agent_action_counts", what), what);
  g.env.horizon = need(env, "horizon", what).get<int>();
  g.env.family = synthenv::family_from_string(need(env, "family", what).get<std::string>());
  g.env.sparsity = need(env, "sparsity", what).get<double>();
  g.env.noise_sigma = need(env, "noise_sigma", what).get<double>();
  g.env.local_rewards = need(env, "local_rewards", what).get<bool>();
  g.env.seed = need(env, "seed", what).get<std::uint64_t>();
  g.env.score_episodes = need(env, "score_episodes", what).get<int>();
  g.env.drift = need(env, "drift", what).get<double>();
  g.env.act_scale = need(env, "act_scale", what).get<double>();
  g.env.trans_noise = need(env, "trans_noise", what).get<double>();
  g.env.init_scale = need(env, "init_scale", what).get<double>();

  for (const auto& v : need(j, "state_masks", what)) g.state_masks.push_back(vec_from_json(v, what));
  for (const auto& v : need(j, "action_masks", what)) g.action_masks.push_back(vec_from_json(v, what));
  for (const auto& v : need(j, "linear_w", what)) g.linear_w.push_back(vec_from_json(v, what));
  for (const auto& m : need(j, "mlp_w1", what)) g.mlp_w1.push_back(mat_from_json(m, what));
  for (const auto& v : need(j, "mlp_b1", what)) g.mlp_b1.push_back(vec_from_json(v, what));
  for (const auto& v : need(j, "mlp_w2", what)) g.mlp_w2.push_back(vec_from_json(v, what));
  for (const auto& m : need(j, "disp", what)) g.disp.push_back(mat_from_json(m, what));
  g.expert_score = need(j, "expert_score", what).get<double>();
  g.random_score = need(j, "random_score", what).get<double>();
  g.expert_score_se = need(j, "expert_score_se", what).get<double>();
  g.random_score_se = need(j, "random_score_se", what).get<double>();
  return g;
}

void write_model(const std::string& path, const causal::CausalModel& m) {
  json j;
  j["version"] = m.version;
  j["kind"] = "causal_model";
  j["graph_mode"] = to_string(m.mode);
  j["h"] = m.h;
  j["clip_enabled"] = m.clip_enabled;
  json dims;
  dims["n_agents"] = m.dims.n_agents;
  dims["agent_state_dims"] = m.dims.agent_state_dims;
  dims["agent_action_counts"] = m.dims.agent_action_counts;
  j["dims"] = std::move(dims);
  j["psi_g_state"] = mlp_to_json(m.psi_g_state);
  j["psi_g_action"] = mlp_to_json(m.psi_g_action);
  j["psi_r"] = mlp_to_json(m.psi_r);
  json fg;
  fg["state"] = mat_to_json(m.fg_state_logits);
  fg["action"] = mat_to_json(m.fg_action_logits);
  j["fg_table"] = std::move(fg);
  j["config_hash"] = m.config_hash;

  auto f = open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw DataError("write failed: " + path);
}

causal::CausalModel read_model(const std::string& path) {
  auto f = open_in(path);
  const json j = parse_whole(f, path);
  const std::string what = path;
  if (need(j, "kind", what).get<std::string>() != "causal_model")
    throw DataError(path + ": not a causal model artifact");
  causal::CausalModel m;
  m.version = need(j, "version", what).get<int>();
  m.mode = graph_mode_from_string(need(j, "graph_mode", what).get<std::string>());
  m.h = need(j, "h", what).get<double>();
  m.clip_enabled = need(j, "clip_enabled", what).get<bool>();
  const json& dims = need(j, "dims", what);
  m.dims.n_agents = need(dims, "n_agents", what).get<int>();
  m.dims.agent_state_dims = ints_from_json(need(dims, "agent_state_dims", what), what);
  m.dims.agent_action_counts = ints_from_json(need(dims, "agent_action_counts", what), what);
  m.psi_g_state = mlp_from_json(need(j, "psi_g_state", what), what + " psi_g_state");
  m.psi_g_action = mlp_from_json(need(j, "psi_g_action", what), what + " psi_g_action");
  m.psi_r = mlp_from_json(need(j, "psi_r", what), what + " psi_r");
  const json& fg = need(j, "fg_table", what);
  m.fg_state_logits = mat_from_json(need(fg, "state", what), what + " fg state");
  m.fg_action_logits = mat_from_json(need(fg, "action", what), what + " fg action");
  m.config_hash = need(j, "config_hash", what).get<std::string>();

  const int ds = m.dims.ds(), da = m.dims.da(), gin = m.dims.g_in();
  if (m.psi_g_state.in_dim() != gin || m.psi_g_state.out_dim() != ds ||
      m.psi_g_action.out_dim() != da || m.psi_r.out_dim() != 1 ||
      m.fg_state_logits.rows() != m.dims.n_agents || m.fg_state_logits.cols() != ds ||
      m.fg_action_logits.cols() != da)
    throw DataError(path + ": network shapes disagree with dims");
  return m;
}

void write_policy(const std::string& path, const policy::QEnsemble& ens) {
  json j;
  j["version"] = ens.version;
  j["kind"] = "policy";
  j["reward_mode"] = policy::to_string(ens.reward_mode);
  j["n_agents"] = ens.n_agents;
  j["agent_state_dims"] = ens.agent_state_dims;
  j["agent_action_counts"] = ens.agent_action_counts;
  json q1 = json::array(), q2 = json::array(), t1 = json::array(), t2 = json::array();
  for (const auto& net : ens.q1) q1.push_back(mlp_to_json(net));
  for (const auto& net : ens.q2) q2.push_back(mlp_to_json(net));
  for (const auto& net : ens.tq1) t1.push_back(mlp_to_json(net));
  for (const auto& net : ens.tq2) t2.push_back(mlp_to_json(net));
  j["q1"] = std::move(q1);
  j["q2"] = std::move(q2);
  j["tq1"] = std::move(t1);
  j["tq2"] = std::move(t2);
  j["config_hash"] = ens.config_hash;

  auto f = open_out(path);
  f << j.dump(2) << '\n';
  if (!f) throw DataError("write failed: " + path);
}

policy::QEnsemble read_policy(const std::string& path) {
  auto f = open_in(path);
  const json j = parse_whole(f, path);
  const std::string what = path;
  if (need(j, "kind", what).get<std::string>() != "policy")
    throw DataError(path + ": not a policy artifact");
  policy::QEnsemble ens;
  ens.version = need(j, "version", what).get<int>();
  ens.reward_mode = policy::reward_mode_from_string(need(j, "reward_mode", what).get<std::string>());
  ens.n_agents = need(j, "n_agents", what).get<int>();
  ens.agent_state_dims = ints_from_json(need(j, "agent_state_dims", what), what);
  ens.agent_action_counts = ints_from_json(need(j, "agent_action_counts", what), what);
  for (const auto& n : need(j, "q1", what)) ens.q1.push_back(mlp_from_json(n, what + " q1"));
  for (const auto& n : need(j, "q2", what)) ens.q2.push_back(mlp_from_json(n, what + " q2"));
  for (const auto& n : need(j, "tq1", what)) ens.tq1.push_back(mlp_from_json(n, what + " tq1"));
  for (const auto& n : need(j, "tq2", what)) ens.tq2.push_back(mlp_from_json(n, what + " tq2"));
  ens.config_hash = need(j, "config_hash", what).get<std::string>();
  const std::size_t n = static_cast<std::size_t>(ens.n_agents);
  if (ens.q1.size() != n || ens.q2.size() != n || ens.tq1.size() != n || ens.tq2.size() != n)
    throw DataError(path + ": per-agent network counts disagree with n_agents");
  return ens;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + v + "'");
  }
}

long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': bad boolean '" + v + "'");
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "lambda1") cfg.lambda1 = parse_real(key, value);
  else if (key == "lambda2") cfg.lambda2 = parse_real(key, value);
  else if (key == "h") cfg.h = parse_real(key, value);
  else if (key == "model_lr") cfg.model_lr = parse_real(key, value);
  else if (key == "policy_lr") cfg.policy_lr = parse_real(key, value);
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_long(key, value));
  else if (key == "gamma") cfg.gamma = parse_real(key, value);
  else if (key == "cql_alpha") cfg.cql_alpha = parse_real(key, value);
  else if (key == "train_steps") cfg.train_steps = parse_long(key, value);
  else if (key == "mask_warmup") cfg.mask_warmup = parse_long(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "graph_mode") cfg.graph_mode = graph_mode_from_string(value);
  else if (key == "clip_enabled") cfg.clip_enabled = parse_bool(key, value);
  else if (key == "eval_interval") cfg.eval_interval = parse_long(key, value);
  else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(parse_long(key, value));
  else if (key == "model_hidden") cfg.model_hidden = static_cast<int>(parse_long(key, value));
  else if (key == "q_hidden") cfg.q_hidden = static_cast<int>(parse_long(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig read_config_file(const std::string& path, std::vector<std::string>* keys_seen) {
  auto f = open_in(path);
  RunConfig cfg;
  std::string line;
  long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (keys_seen) keys_seen->push_back(key);
  }
  cfg.validate();
  return cfg;
}

std::string resolved_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "lambda1 = " << format_double(cfg.lambda1) << '\n';
  out << "lambda2 = " << format_double(cfg.lambda2) << '\n';
  out << "h = " << format_double(cfg.h) << '\n';
  out << "model_lr = " << format_double(cfg.model_lr) << '\n';
  out << "policy_lr = " << format_double(cfg.policy_lr) << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "gamma = " << format_double(cfg.gamma) << '\n';
  out << "cql_alpha = " << format_double(cfg.cql_alpha) << '\n';
  out << "train_steps = " << cfg.train_steps << '\n';
  out << "mask_warmup = " << cfg.mask_warmup << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "graph_mode = " << to_string(cfg.graph_mode) << '\n';
  out << "clip_enabled = " << (cfg.clip_enabled ? "true" : "false") << '\n';
  out << "eval_interval = " << cfg.eval_interval << '\n';
  out << "eval_episodes = " << cfg.eval_episodes << '\n';
  out << "model_hidden = " << cfg.model_hidden << '\n';
  out << "q_hidden = " << cfg.q_hidden << '\n';
  return out.str();
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = resolved_config_text(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace teamcredit::io
