#include "teamcredit/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "teamcredit/causal_model.hpp"
#include "teamcredit/core.hpp"
#include "teamcredit/io.hpp"
#include "teamcredit/metrics.hpp"
#include "teamcredit/oracle.hpp"
#include "teamcredit/policy.hpp"
#include "teamcredit/rng.hpp"
#include "teamcredit/synthenv.hpp"

namespace teamcredit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsageExit = 2;
constexpr int kDataExit = 3;
constexpr int kNumericExit = 4;
constexpr int kAblateSeeds = 3;

// MACCA_SEED beats every other seed source when set.
bool seed_override(std::uint64_t& seed) {
  const char* env = std::getenv("MACCA_SEED");
  if (!env || !*env) return false;
  std::string v(env);
  try {
    std::size_t used = 0;
    seed = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
  } catch (const std::exception&) {
    throw ConfigError("MACCA_SEED is not an unsigned integer: '" + v + "'");
  }
  return true;
}

void echo_config(const RunConfig& cfg) {
  std::cout << "# resolved config\n" << io::resolved_config_text(cfg) << std::flush;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << text;
  if (!f) throw DataError("write failed: " + path);
}

std::string join_path(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

struct GenArgs {
  std::string family = "LINEAR";
  int agents = 3;
  std::string tier = "expert";
  int episodes = 400;
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
  int state_dims = 6;
  int actions = 5;
  int horizon = 25;
  double sparsity = 0.3;
  double noise = 0.0;
  bool local = false;
};

int cmd_gen(const GenArgs& args) {
  synthenv::EnvSpec spec;
  spec.n_agents = args.agents;
  spec.agent_state_dims.assign(args.agents, args.state_dims);
  spec.agent_action_counts.assign(args.agents, args.actions);
  spec.horizon = args.horizon;
  spec.family = synthenv::family_from_string(args.family);
  spec.sparsity = args.sparsity;
  spec.noise_sigma = args.noise;
  spec.local_rewards = args.local;
  spec.seed = args.seed;
  seed_override(spec.seed);
  const synthenv::Tier tier = synthenv::tier_from_string(args.tier);
  spec.validate();

  std::cout << "# resolved config\n"
            << "env = " << synthenv::to_string(spec.family) << '\n'
            << "agents = " << spec.n_agents << '\n'
            << "state_dims = " << args.state_dims << '\n'
            << "actions = " << args.actions << '\n'
            << "horizon = " << spec.horizon << '\n'
            << "tier = " << synthenv::to_string(tier) << '\n'
            << "episodes = " << args.episodes << '\n'
            << "sparsity = " << io::format_double(spec.sparsity) << '\n'
            << "noise_sigma = " << io::format_double(spec.noise_sigma) << '\n'
            << "local_rewards = " << (spec.local_rewards ? "true" : "false") << '\n'
            << "seed = " << spec.seed << '\n'
            << "out = " << args.out << '\n'
            << std::flush;

  if (fs::exists(args.out) && fs::is_directory(args.out) && !fs::is_empty(args.out) &&
      !args.force) {
    std::cerr << "error: output directory " << args.out
              << " is not empty (use --force to write anyway)\n";
    return kUsageExit;
  }
  ensure_out_dir(args.out);

  const synthenv::GroundTruthSpec truth = synthenv::make_env(spec);
  auto [ds, hidden] = synthenv::collect_dataset(truth, tier, args.episodes, spec.seed);
  io::write_dataset(join_path(args.out, "dataset.jsonl"), ds);
  io::write_hidden(join_path(args.out, "hidden.jsonl"), hidden);
  io::write_truth(join_path(args.out, "truth.json"), truth);
  std::cout << "wrote " << ds.rows.size() << " transitions over " << args.episodes
            << " episodes to " << args.out << '\n';
  return 0;
}

struct TrainModelArgs {
  std::string data, config, out, truth, hidden;
};

int cmd_train_model(const TrainModelArgs& args) {
  RunConfig cfg = args.config.empty() ? RunConfig{} : io::read_config_file(args.config);
  seed_override(cfg.seed);
  echo_config(cfg);

  const OfflineDataset ds = io::read_dataset(args.data);
  synthenv::GroundTruthSpec truth;
  const bool have_truth = !args.truth.empty();
  if (have_truth) truth = io::read_truth(args.truth);
  HiddenRewards hidden;
  const bool have_hidden = !args.hidden.empty();
  if (have_hidden) hidden = io::read_hidden(args.hidden);

  ensure_out_dir(args.out);
  const causal::TrainModelResult res =
      causal::train_model(ds, cfg, have_truth ? &truth : nullptr, have_hidden ? &hidden : nullptr);
  io::write_model(join_path(args.out, "model.json"), res.model);
  metrics::write_metrics_csv(join_path(args.out, "metrics.csv"), res.log);
  std::cout << "holdout recon_mse = " << io::format_double(res.holdout_mse)
            << " (Var(R) = " << io::format_double(res.holdout_var_r) << ")\n";
  return 0;
}

int cmd_assign(const std::string& data, const std::string& model_path, const std::string& out) {
  const OfflineDataset ds = io::read_dataset(data);
  const causal::CausalModel model = io::read_model(model_path);
  if (!model.dims.matches(ds.meta))
    throw DataError("model dims (" + std::to_string(model.dims.n_agents) +
                    " agents) do not match dataset (" + std::to_string(ds.meta.n_agents) +
                    " agents)");
  const AssignedDataset asg = causal::assign_rewards(model, ds);
  io::write_assigned(out, asg);
  std::cout << "assigned " << asg.r_hat.size() << " rows to " << out << '\n';
  return 0;
}

struct TrainPolicyArgs {
  std::string data, mode, config, out, truth;
};

int cmd_train_policy(const TrainPolicyArgs& args) {
  std::vector<std::string> keys_seen;
  RunConfig cfg = args.config.empty() ? RunConfig{} : io::read_config_file(args.config, &keys_seen);
  seed_override(cfg.seed);

  std::string mode_name = args.mode;
  for (auto& c : mode_name) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  const policy::RewardMode mode = policy::reward_mode_from_string(mode_name);

  AssignedDataset asg;
  if (mode == policy::RewardMode::kIndividual) {
    asg = io::read_assigned(args.data);
  } else {
    asg.data = io::read_dataset(args.data);
  }
  if (std::find(keys_seen.begin(), keys_seen.end(), "cql_alpha") == keys_seen.end())
    cfg.cql_alpha = policy::default_cql_alpha(asg.data.meta.tier);
  echo_config(cfg);
  synthenv::GroundTruthSpec truth;
  const bool have_truth = !args.truth.empty();
  if (have_truth) truth = io::read_truth(args.truth);

  ensure_out_dir(args.out);
  const policy::TrainPolicyResult res =
      policy::train_policy(asg, cfg, mode, have_truth ? &truth : nullptr);
  io::write_policy(join_path(args.out, "policy.json"), res.policy);
  metrics::write_metrics_csv(join_path(args.out, "metrics.csv"), res.log);
  if (have_truth)
    std::cout << "final mean_return = " << io::format_double(res.final_eval.mean_return)
              << " normalized_score = " << io::format_double(res.final_normalized) << '\n';
  return 0;
}

struct EvalArgs {
  std::string policy_path, truth_path, out;
  int episodes = 100;
  std::uint64_t seed = 1;
};

int cmd_eval(const EvalArgs& args) {
  std::uint64_t seed = args.seed;
  seed_override(seed);
  const policy::QEnsemble ens = io::read_policy(args.policy_path);
  const synthenv::GroundTruthSpec truth = io::read_truth(args.truth_path);
  if (ens.agent_state_dims != truth.env.agent_state_dims ||
      ens.agent_action_counts != truth.env.agent_action_counts)
    throw DataError("policy dims do not match the environment in " + args.truth_path);

  std::cout << "# resolved config\n"
            << "episodes = " << args.episodes << '\n'
            << "seed = " << seed << '\n';

  const synthenv::EvalStats stats = policy::evaluate(ens, truth, args.episodes, seed);
  json rep;
  rep["mean_return"] = stats.mean_return;
  rep["std_return"] = stats.std_return;
  rep["n_episodes"] = stats.n_episodes;
  rep["normalized_score"] =
      metrics::normalized_score(stats.mean_return, truth.random_score, truth.expert_score);
  const std::string text = rep.dump(2) + "\n";
  std::cout << text;
  if (!args.out.empty()) write_text(args.out, text);
  return 0;
}

json vec_json(const VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

int cmd_oracle(const std::string& data, const std::string& truth_path, const std::string& out) {
  const OfflineDataset ds = io::read_dataset(data);
  const synthenv::GroundTruthSpec truth = io::read_truth(truth_path);
  const oracle::DecompositionOracleReport rep = oracle::linear_decomposition_oracle(ds, truth);
  json j;
  j["residual_mse"] = rep.residual_mse;
  j["ridge_agreement_error"] = rep.ridge_agreement;
  j["intercept"] = rep.intercept;
  json w = json::array();
  for (const auto& v : rep.weights) w.push_back(vec_json(v));
  j["weights"] = std::move(w);

  // Exhaustive mask search only fits small instances; skip it gracefully on
  // anything over the dimension budget.
  try {
    const oracle::BruteForceResult bf = oracle::brute_force_masks(ds);
    json masks = json::array();
    for (const auto& m : bf.masks) masks.push_back(vec_json(m));
    j["masks"] = std::move(masks);
    j["ambiguities"] = bf.ambiguous_agents;
    j["brute_force_val_mse"] = bf.val_mse;
  } catch (const ConfigError& e) {
    j["masks"] = nullptr;
    j["ambiguities"] = json::array();
    j["masks_skipped"] = e.what();
  }

  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!out.empty()) write_text(out, text);
  return 0;
}

struct AblateArgs {
  std::string sweep, values, data, config, out, truth;
};

struct CellStats {
  double mean = 0.0, stdev = 0.0;
};

CellStats cell_stats(const std::vector<double>& xs) {
  CellStats cs;
  for (double x : xs) cs.mean += x;
  cs.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - cs.mean) * (x - cs.mean);
    cs.stdev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return cs;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int cmd_ablate(const AblateArgs& args) {
  RunConfig base = args.config.empty() ? RunConfig{} : io::read_config_file(args.config);
  seed_override(base.seed);
  echo_config(base);

  const OfflineDataset ds = io::read_dataset(args.data);
  synthenv::GroundTruthSpec truth;
  const bool have_truth = !args.truth.empty();
  if (have_truth) truth = io::read_truth(args.truth);
  if (args.sweep == "graph" && !have_truth)
    throw ConfigError("ablate --sweep graph needs --truth for evaluation returns");

  const std::vector<std::string> values = split_csv(args.values);
  if (values.empty() || (values.size() == 1 && values[0].empty()))
    throw ConfigError("ablate: --values is empty");
  ensure_out_dir(args.out);

  std::ostringstream csv;
  if (args.sweep == "lambda1" || args.sweep == "lambda2") {
    csv << "value,s_sr_mean,s_sr_std,s_ar_mean,s_ar_std,recon_mse_mean,recon_mse_std\n";
    for (const std::string& val : values) {
      RunConfig cfg = base;
      io::apply_config_entry(cfg, args.sweep, val);
      std::vector<double> ssr, sar, recon;
      for (int k = 0; k < kAblateSeeds; ++k) {
        cfg.seed = base.seed + static_cast<std::uint64_t>(k);
        const causal::TrainModelResult res = causal::train_model(ds, cfg);
        const metrics::MetricsRow& last = res.log.back();
        ssr.push_back(last.s_sr);
        sar.push_back(last.s_ar);
        recon.push_back(last.recon_mse);
        std::cout << args.sweep << "=" << val << " seed=" << cfg.seed
                  << " S_sr=" << io::format_double(last.s_sr)
                  << " S_ar=" << io::format_double(last.s_ar) << '\n';
      }
      const CellStats a = cell_stats(ssr), b = cell_stats(sar), c = cell_stats(recon);
      csv << val << ',' << io::format_double(a.mean) << ',' << io::format_double(a.stdev) << ','
          << io::format_double(b.mean) << ',' << io::format_double(b.stdev) << ','
          << io::format_double(c.mean) << ',' << io::format_double(c.stdev) << '\n';
    }
  } else if (args.sweep == "graph") {
    csv << "value,return_mean,return_std,normalized_mean,normalized_std\n";
    for (const std::string& val : values) {
      RunConfig cfg = base;
      std::string mode_name = val;
      cfg.clip_enabled = true;
      if (const auto pos = mode_name.find("_noclip"); pos != std::string::npos) {
        cfg.clip_enabled = false;
        mode_name = mode_name.substr(0, pos);
      }
      cfg.graph_mode = graph_mode_from_string(mode_name);
      std::vector<double> ret, norm;
      for (int k = 0; k < kAblateSeeds; ++k) {
        cfg.seed = base.seed + static_cast<std::uint64_t>(k);
        const causal::TrainModelResult mres = causal::train_model(ds, cfg);
        const AssignedDataset asg = causal::assign_rewards(mres.model, ds);
        const policy::TrainPolicyResult pres =
            policy::train_policy(asg, cfg, policy::RewardMode::kIndividual, &truth);
        ret.push_back(pres.final_eval.mean_return);
        norm.push_back(pres.final_normalized);
        std::cout << "graph=" << val << " seed=" << cfg.seed
                  << " return=" << io::format_double(pres.final_eval.mean_return) << '\n';
      }
      const CellStats r = cell_stats(ret), n = cell_stats(norm);
      csv << val << ',' << io::format_double(r.mean) << ',' << io::format_double(r.stdev) << ','
          << io::format_double(n.mean) << ',' << io::format_double(n.stdev) << '\n';
    }
  } else {
    throw ConfigError("ablate: unknown sweep '" + args.sweep +
                      "' (expected lambda1, lambda2 or graph)");
  }
  write_text(join_path(args.out, "summary.csv"), csv.str());
  std::cout << "wrote " << join_path(args.out, "summary.csv") << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Causal team-reward decomposition and conservative offline Q-learning"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* g = app.add_subcommand("gen", "Generate an offline dataset with ground truth");
  g->add_option("--env", gen.family, "Reward family: LINEAR or MLP")
      ->check(CLI::IsMember({"LINEAR", "MLP"}));
  g->add_option("--agents", gen.agents, "Number of agents")->check(CLI::PositiveNumber);
  g->add_option("--tier", gen.tier, "Behavior tier")
      ->check(CLI::IsMember({"random", "medium", "medium-replay", "expert"}));
  g->add_option("--episodes", gen.episodes, "Episodes to collect")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Top-level seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_flag("--force", gen.force, "Write into a non-empty directory");
  g->add_option("--state-dims", gen.state_dims, "State dims per agent")->check(CLI::PositiveNumber);
  g->add_option("--actions", gen.actions, "Actions per agent")->check(CLI::Range(2, 1 << 20));
  g->add_option("--horizon", gen.horizon, "Episode length")->check(CLI::Range(2, 1 << 20));
  g->add_option("--sparsity", gen.sparsity, "Expected true-mask density");
  g->add_option("--noise", gen.noise, "Team reward noise sigma");
  g->add_flag("--local", gen.local, "Restrict causal parents to each agent's own blocks");

  TrainModelArgs tm;
  CLI::App* t = app.add_subcommand("train-model", "Fit the causal decomposition model");
  t->add_option("--data", tm.data, "Dataset JSONL")->required();
  t->add_option("--config", tm.config, "Config file (key = value lines)");
  t->add_option("--out", tm.out, "Output directory")->required();
  t->add_option("--truth", tm.truth, "Ground-truth JSON for mask F1 logging");
  t->add_option("--hidden", tm.hidden, "Hidden rewards JSONL for fidelity logging");

  std::string as_data, as_model, as_out;
  CLI::App* a = app.add_subcommand("assign", "Decompose team rewards with a trained model");
  a->add_option("--data", as_data, "Dataset JSONL")->required();
  a->add_option("--model", as_model, "Model artifact JSON")->required();
  a->add_option("--out", as_out, "Assigned dataset JSONL to write")->required();

  TrainPolicyArgs tp;
  CLI::App* p = app.add_subcommand("train-policy", "Train per-agent conservative Q-learning");
  p->add_option("--data", tp.data, "Dataset JSONL (assigned for individual mode)")->required();
  p->add_option("--mode", tp.mode, "Reward mode: individual or team")
      ->required()
      ->check(CLI::IsMember({"individual", "team", "INDIVIDUAL", "TEAM"}));
  p->add_option("--config", tp.config, "Config file");
  p->add_option("--out", tp.out, "Output directory")->required();
  p->add_option("--truth", tp.truth, "Ground-truth JSON enabling greedy evaluation");

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "Evaluate a policy artifact in its environment");
  e->add_option("--policy", ev.policy_path, "Policy artifact JSON")->required();
  e->add_option("--truth", ev.truth_path, "Ground-truth JSON")->required();
  e->add_option("--episodes", ev.episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "Evaluation seed");
  e->add_option("--out", ev.out, "Also write the JSON report here");

  std::string or_data, or_truth, or_out;
  CLI::App* o = app.add_subcommand("oracle", "Closed-form decomposition on true mask features");
  o->add_option("--data", or_data, "Dataset JSONL")->required();
  o->add_option("--truth", or_truth, "Ground-truth JSON")->required();
  o->add_option("--out", or_out, "Also write the JSON report here");

  AblateArgs ab;
  CLI::App* b = app.add_subcommand("ablate", "Sweep one knob over 3 seeds per value");
  b->add_option("--sweep", ab.sweep, "One of lambda1, lambda2, graph")
      ->required()
      ->check(CLI::IsMember({"lambda1", "lambda2", "graph"}));
  b->add_option("--values", ab.values, "Comma-separated values")->required();
  b->add_option("--data", ab.data, "Dataset JSONL")->required();
  b->add_option("--config", ab.config, "Config file");
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--truth", ab.truth, "Ground-truth JSON (required for graph sweeps)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsageExit;
  }

  try {
    if (g->parsed()) return cmd_gen(gen);
    if (t->parsed()) return cmd_train_model(tm);
    if (a->parsed()) return cmd_assign(as_data, as_model, as_out);
    if (p->parsed()) return cmd_train_policy(tp);
    if (e->parsed()) return cmd_eval(ev);
    if (o->parsed()) return cmd_oracle(or_data, or_truth, or_out);
    if (b->parsed()) return cmd_ablate(ab);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataExit;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kDataExit;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << '\n';
    return kNumericExit;
  }
  return kUsageExit;
}

}  // namespace teamcredit::cli
