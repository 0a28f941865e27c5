#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "../support/helpers.hpp"
#include "../support/properties.hpp"
#include "teamcredit/core.hpp"
#include "teamcredit/io.hpp"

using namespace teamcredit;
using namespace teamcredit::testing;

TEST_CASE("run config defaults match the pinned experiment values") {
  const RunConfig cfg;
  CHECK(cfg.lambda1 == doctest::Approx(7e-3).epsilon(1e-12));
  CHECK(cfg.lambda2 == doctest::Approx(7e-3).epsilon(1e-12));
  CHECK(cfg.h == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(cfg.model_lr == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(cfg.policy_lr == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(cfg.batch_size == 1024);
  CHECK(cfg.gamma == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(cfg.eval_episodes == 10);
  CHECK(cfg.cql_alpha == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(cfg.graph_mode == GraphMode::kDg);
  CHECK(cfg.clip_enabled);
}

TEST_CASE("run config validation rejects out-of-range fields") {
  RunConfig cfg;
  cfg.h = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.mask_warmup = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("dataset file header and row keys match the published format") {
  Rng rng(7);
  const OfflineDataset ds = random_valid_dataset(rng);
  TempDir dir;
  const std::string path = dir.file("ds.jsonl");
  io::write_dataset(path, ds);

  std::ifstream in(path);
  std::string header_line, row_line;
  REQUIRE(std::getline(in, header_line));
  REQUIRE(std::getline(in, row_line));

  const auto header = nlohmann::json::parse(header_line);
  for (const char* key :
       {"version", "n_agents", "agent_state_dims", "agent_action_counts", "env", "tier", "seed"})
    CHECK_MESSAGE(header.contains(key), "header missing " << key);
  CHECK(header["n_agents"].get<int>() == ds.meta.n_agents);

  const auto row = nlohmann::json::parse(row_line);
  for (const char* key : {"episode", "t", "s", "a", "R", "s_next", "done"})
    CHECK_MESSAGE(row.contains(key), "row missing " << key);
  CHECK(row["s"].size() == static_cast<size_t>(ds.meta.joint_state_dim()));
  CHECK(row["a"].size() == static_cast<size_t>(ds.meta.n_agents));
}

TEST_CASE("meta offsets partition the joint spaces") {
  DatasetMeta meta;
  meta.n_agents = 3;
  meta.agent_state_dims = {2, 4, 3};
  meta.agent_action_counts = {2, 5, 3};
  CHECK(meta.joint_state_dim() == 9);
  CHECK(meta.joint_action_dim() == 10);
  CHECK(meta.state_offset(0) == 0);
  CHECK(meta.state_offset(1) == 2);
  CHECK(meta.state_offset(2) == 6);
  CHECK(meta.action_offset(2) == 7);
}

TEST_CASE("graph mode names round trip") {
  for (const GraphMode m : {GraphMode::kFcg, GraphMode::kFg, GraphMode::kDg})
    CHECK(graph_mode_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(graph_mode_from_string("nonsense"), ConfigError);
}

TEST_CASE("core property suites") {
  std::vector<Property> props;
  add_core_properties(props);
  for (const auto& p : props) {
    const auto rep = run_property(p, 200, 0xC0DE2026);
    CHECK_MESSAGE(rep.failures == 0,
                  p.name << " failed " << rep.failures << "/" << rep.cases << ": "
                         << rep.first_failure);
  }
}
