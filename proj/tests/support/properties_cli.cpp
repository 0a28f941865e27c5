#include <cstdlib>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "properties.hpp"
#include "teamcredit/cli.hpp"

namespace teamcredit::testing {

namespace {

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr,
            bool swallow_stderr = true) {
  std::vector<const char*> argv;
  argv.push_back("teamcredit");
  for (const auto& a : args) argv.push_back(a.c_str());
  CaptureStdout cap(swallow_stderr);
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  if (out) *out = cap.text();
  return code;
}

struct GenFlags {
  std::string agents, sdims, actions, episodes, horizon, seed;
  std::string tier;
  bool local = false;
};

GenFlags random_gen_flags(Rng& rng) {
  GenFlags f;
  f.agents = std::to_string(1 + rng.uniform_int(2));
  f.sdims = std::to_string(2 + rng.uniform_int(2));
  f.actions = std::to_string(2 + rng.uniform_int(2));
  f.episodes = std::to_string(1 + rng.uniform_int(3));
  f.horizon = std::to_string(2 + rng.uniform_int(4));
  f.seed = std::to_string(rng.next_u64() % 100000);
  const char* tiers[] = {"random", "medium", "medium-replay", "expert"};
  f.tier = tiers[rng.uniform_int(4)];
  f.local = rng.uniform() < 0.3;
  return f;
}

std::vector<std::string> gen_args(const GenFlags& f, const std::string& out_dir) {
  std::vector<std::string> args{"gen",        "--env",     "LINEAR",   "--agents", f.agents,
                                "--state-dims", f.sdims,   "--actions", f.actions,
                                "--episodes", f.episodes,  "--horizon", f.horizon,
                                "--tier",     f.tier,      "--seed",    f.seed,
                                "--sparsity", "0.6",       "--out",     out_dir};
  if (f.local) args.push_back("--local");
  return args;
}

void check_usage_exit_codes(Rng& rng) {
  const int kind = rng.uniform_int(4);
  std::string out;
  if (kind == 0) {
    prop_check(run_cli({"definitely-not-a-command"}, &out) == 2,
               "unknown subcommand did not exit 2");
  } else if (kind == 1) {
    prop_check(run_cli({"gen", "--agents", "2"}, &out) == 2, "missing --out did not exit 2");
  } else if (kind == 2) {
    TempDir dir;
    prop_check(run_cli({"gen", "--agents", "0", "--out", dir.file("d")}, &out) == 2,
               "--agents 0 did not exit 2");
  } else {
    prop_check(run_cli({"gen", "--agents", "2", "--no-such-flag", "1", "--out", "/tmp/x"},
                       &out) == 2,
               "unknown flag did not exit 2");
  }
}

void check_gen_determinism(Rng& rng) {
  const GenFlags f = random_gen_flags(rng);
  TempDir dir;
  std::string echo1, echo2;
  const int c1 = run_cli(gen_args(f, dir.file("a")), &echo1);
  const int c2 = run_cli(gen_args(f, dir.file("b")), &echo2);
  prop_check(c1 == 0 && c2 == 0, "tiny gen failed");
  prop_check(echo1.find("# resolved config") != std::string::npos,
             "resolved config echo missing");
  for (const char* name : {"dataset.jsonl", "hidden.jsonl", "truth.json"}) {
    const std::string a = read_file(dir.file("a") + "/" + name);
    const std::string b = read_file(dir.file("b") + "/" + name);
    prop_check(!a.empty() && a == b, std::string("rerun changed ") + name);
  }
}

void check_env_seed_override(Rng& rng) {
  GenFlags f = random_gen_flags(rng);
  const std::string real_seed = std::to_string(rng.next_u64() % 100000);
  TempDir dir;

  f.seed = real_seed;
  const int c1 = run_cli(gen_args(f, dir.file("direct")), nullptr);

  f.seed = "977";  // should be ignored under the env override
  setenv("MACCA_SEED", real_seed.c_str(), 1);
  const int c2 = run_cli(gen_args(f, dir.file("override")), nullptr);
  unsetenv("MACCA_SEED");

  prop_check(c1 == 0 && c2 == 0, "gen failed");
  prop_check(read_file(dir.file("direct") + "/dataset.jsonl") ==
                 read_file(dir.file("override") + "/dataset.jsonl"),
             "MACCA_SEED did not override --seed");
}

}  // namespace

void add_cli_properties(std::vector<Property>& out) {
  out.push_back({"cli.usage_exit_codes", check_usage_exit_codes});
  out.push_back({"cli.gen_determinism", check_gen_determinism});
  out.push_back({"cli.env_seed_override", check_env_seed_override});
}

}  // namespace teamcredit::testing
