#pragma once

#include <functional>

#include "teamcredit/core.hpp"
#include "teamcredit/synthenv.hpp"

namespace teamcredit::oracle {

// Ridge regression solved two independent ways: the d x d normal-equation
// form (lambda I + X'X) w = X'y and the n x n kernel form w = X'(XX' +
// lambda I)^-1 y. Both use a Cholesky factorization; they must agree
// element-wise or the solve throws NumericError. This double route is the
// backbone of the identifiability checks, so it must never be collapsed into
// a single path.
struct RidgeSolution {
  VectorXd w;            // the primal solution, used downstream
  double agreement = 0;  // max |primal - dual| over coefficients
};

RidgeSolution ridge_solve(const MatrixXd& features, const VectorXd& targets, double lambda,
                          double tol = 1e-8);

// Central-difference gradient probe. loss must be a pure function of the
// flat parameter vector; analytic is the gradient under test. Probes pick
// random coordinates. Relative error uses a 1e-3 floor in the denominator so
// near-zero coordinates do not produce spurious failures.
struct GradCheckReport {
  double max_rel_err = 0.0;
  int n_checked = 0;
  bool pass = false;
};

GradCheckReport finite_diff_check(const std::function<double(const VectorXd&)>& loss,
                                  const VectorXd& analytic, const VectorXd& params,
                                  int n_probes, double step, double tol, std::uint64_t seed);

// Closed-form answer to "what can a linear decomposer identify from team
// rewards alone": per-agent blocks of truth-masked [s; onehot(a)] features
// plus one shared intercept, ridge-fitted against R_t. Rows are capped with a
// deterministic stride subsample so the dual route stays tractable; the
// residual is still measured on every row.
struct DecompositionOracleReport {
  std::vector<VectorXd> weights;  // per agent, width D_s + D_a, zero off-mask
  double intercept = 0.0;
  double residual_mse = 0.0;      // over the full dataset
  double ridge_agreement = 0.0;
};

DecompositionOracleReport linear_decomposition_oracle(const OfflineDataset& ds,
                                                      const synthenv::GroundTruthSpec& truth,
                                                      double lambda = 1e-6,
                                                      int max_fit_rows = 2000);

// Exhaustive mask search at tiny scale: coordinate sweeps over agents (two
// passes, others held at their current best), every binary pattern over one
// agent's own state and action blocks enumerated, each candidate scored by
// ridge-fit validation MSE. Entries outside the agent's own blocks stay
// zero; the team reward is a sum over agents, so a shared dimension fits
// equally well from any agent's slot and only the own-block restriction
// makes the attribution well posed. Ties within tolerance break toward
// fewer active entries; leftover ties are reported as ambiguities.
struct BruteForceResult {
  std::vector<VectorXd> masks;  // per agent, width D_s + D_a, entries 0/1
  double val_mse = 0.0;
  // Agents whose winning mask has an equally scoring, equally sparse rival.
  std::vector<int> ambiguous_agents;
  std::vector<std::vector<VectorXd>> tied_masks;  // rivals per ambiguous agent
};

BruteForceResult brute_force_masks(const OfflineDataset& ds, int max_dims = 12,
                                   double lambda = 1e-6);

}  // namespace teamcredit::oracle
