#pragma once

#include <string>

#include "teamcredit/causal_model.hpp"
#include "teamcredit/core.hpp"
#include "teamcredit/policy.hpp"
#include "teamcredit/synthenv.hpp"

namespace teamcredit::io {

// JSON Lines dataset: line 1 is the header object, each following line one
// transition. Doubles survive the round trip exactly; read errors carry the
// offending line number.
void write_dataset(const std::string& path, const OfflineDataset& ds);
OfflineDataset read_dataset(const std::string& path);

// Same format plus a per-line "r_hat" array.
void write_assigned(const std::string& path, const AssignedDataset& asg);
AssignedDataset read_assigned(const std::string& path);

// JSON Lines, one row per transition: episode, t, r (per-agent), eps.
void write_hidden(const std::string& path, const HiddenRewards& hr);
HiddenRewards read_hidden(const std::string& path);

// Single JSON object with the env spec, masks, reward parameters, dynamics
// table and anchor scores.
void write_truth(const std::string& path, const synthenv::GroundTruthSpec& g);
synthenv::GroundTruthSpec read_truth(const std::string& path);

void write_model(const std::string& path, const causal::CausalModel& m);
causal::CausalModel read_model(const std::string& path);

void write_policy(const std::string& path, const policy::QEnsemble& ens);
policy::QEnsemble read_policy(const std::string& path);

// Flat "key = value" lines, '#' comments, keys exactly the RunConfig fields.
// Unknown keys and malformed values raise ConfigError; the result is
// validated before returning. keys_seen, when given, collects which fields
// the file set explicitly.
RunConfig read_config_file(const std::string& path,
                           std::vector<std::string>* keys_seen = nullptr);
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical text of a fully resolved config, one key per line, and its
// FNV-1a hash (hex). Equal configs hash equally across runs and platforms.
std::string resolved_config_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

std::string format_double(double v);  // shortest text that parses back exactly

}  // namespace teamcredit::io
