#pragma once

#include <string>
#include <vector>

#include "teamcredit/causal_model.hpp"
#include "teamcredit/core.hpp"
#include "teamcredit/policy.hpp"
#include "teamcredit/rng.hpp"
#include "teamcredit/synthenv.hpp"

namespace teamcredit::testing {

// Temporary directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

// Redirects stdout (optionally stderr too) to a buffer for the lifetime of
// the object; text() gives everything written so far. Used by the in-process
// CLI tests.
class CaptureStdout {
 public:
  explicit CaptureStdout(bool also_stderr = false);
  ~CaptureStdout();
  std::string text();

 private:
  int saved_fd_ = -1;
  int saved_err_ = -1;
  std::string path_;
};

std::string read_file(const std::string& path);

// Structurally valid dataset with random contents: contiguous episodes,
// consecutive timesteps, done on each last row. Dims and lengths drawn small.
OfflineDataset random_valid_dataset(Rng& rng);

// Random DatasetMeta within the same small ranges.
DatasetMeta random_meta(Rng& rng);

struct TinyEnvOpts {
  int max_agents = 2;
  int max_state_dims = 3;
  int max_actions = 3;
  int horizon = 6;
  int score_episodes = 50;
  bool local = false;
  double noise = 0.0;
  synthenv::RewardFamily family = synthenv::RewardFamily::kLinear;
};

// Small random environment; dims drawn from [1, max]; actions from [2, max].
synthenv::GroundTruthSpec tiny_env(Rng& rng, const TinyEnvOpts& opts = {});

// Flat parameter views over a whole causal model / Q ensemble, for
// finite-difference checks against the composite losses.
VectorXd flatten_model(const causal::CausalModel& m);
void unflatten_model(causal::CausalModel& m, const VectorXd& flat);
VectorXd flatten_model_grads(const causal::CausalModel& m, const causal::ModelGradients& g);

VectorXd flatten_ensemble(const policy::QEnsemble& ens);
void unflatten_ensemble(policy::QEnsemble& ens, const VectorXd& flat);
VectorXd flatten_policy_grads(const policy::QEnsemble& ens, const policy::PolicyGradients& g);

// AssignedDataset with r_hat rows filled from the hidden rewards or randoms.
AssignedDataset random_assigned(Rng& rng, const OfflineDataset& ds);

bool vectors_equal(const VectorXd& a, const VectorXd& b);
bool mlp_equal(const nn::Mlp& a, const nn::Mlp& b);

}  // namespace teamcredit::testing
