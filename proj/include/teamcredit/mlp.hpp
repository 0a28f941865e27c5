#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "teamcredit/core.hpp"

namespace teamcredit::nn {

// Fully connected network, ReLU hidden activations, linear output, double
// precision end to end. Batches are laid out column-wise: one sample per
// column, so a forward pass is a chain of GEMMs.
struct Mlp {
  std::vector<MatrixXd> w;  // w[l] maps layer l activations to layer l+1
  std::vector<VectorXd> b;
  std::vector<int> arch;    // [in, hidden..., out]
  std::uint64_t seed = 0;
  // Recorded so artifacts are reproducible: He-uniform fan-in scaling on the
  // hidden layers, plain 1/sqrt(fan_in) uniform on the output layer, zero
  // biases.
  std::string init_id = "he_uniform_v1";

  int in_dim() const { return arch.front(); }
  int out_dim() const { return arch.back(); }
  long param_count() const;
};

Mlp make_mlp(const std::vector<int>& arch, std::uint64_t seed);

// Standard width used by the decomposition networks; Q networks default to a
// narrower body (see RunConfig::q_hidden).
std::vector<int> arch3(int in, int hidden, int out);

struct ForwardCache {
  MatrixXd input;
  std::vector<MatrixXd> pre;  // pre-activation of each layer
  std::vector<MatrixXd> act;  // post-ReLU activations of hidden layers
};

// cache may be null when no backward pass will follow.
MatrixXd forward(const Mlp& net, const MatrixXd& x, ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<MatrixXd> dw;
  std::vector<VectorXd> db;
};

Gradients zero_gradients(const Mlp& net);
void scale_gradients(Gradients& g, double factor);

// Backpropagates dL/d(output) through the cached forward pass. Parameter
// gradients are accumulated into grads; the return value is dL/d(input).
MatrixXd backward(const Mlp& net, const ForwardCache& cache, const MatrixXd& dout,
                  Gradients& grads);

// Throws NumericError naming the offending tensor if any gradient entry is
// non-finite. `what` identifies the network in the message.
void check_finite(const Gradients& g, const std::string& what);

// Adam on a single tensor; Mlp training applies it layer by layer.
struct AdamBuf {
  MatrixXd m, v;
};

struct AdamState {
  std::vector<AdamBuf> wbuf;
  std::vector<AdamBuf> bbuf;
  long step = 0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const Mlp& net);
void adam_step_tensor(Eigen::Ref<MatrixXd> p, const MatrixXd& g, AdamBuf& buf, long step,
                      double lr, double beta1, double beta2, double eps);
void adam_step(Mlp& net, const Gradients& g, AdamState& st, double lr);

// Flat parameter views used by the finite-difference gradient checks.
VectorXd flatten_params(const Mlp& net);
VectorXd flatten_gradients(const Gradients& g);
void unflatten_params(Mlp& net, const VectorXd& flat);

}  // namespace teamcredit::nn
