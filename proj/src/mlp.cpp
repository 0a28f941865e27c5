#include "teamcredit/mlp.hpp"

#include <cmath>

#include "teamcredit/rng.hpp"

namespace teamcredit::nn {

long Mlp::param_count() const {
  long n = 0;
  for (std::size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
  return n;
}

std::vector<int> arch3(int in, int hidden, int out) { return {in, hidden, hidden, hidden, out}; }

Mlp make_mlp(const std::vector<int>& arch, std::uint64_t seed) {
  if (arch.size() < 2) throw ConfigError("mlp arch needs at least input and output sizes");
  for (int d : arch)
    if (d <= 0) throw ConfigError("mlp arch sizes must be positive");

  Mlp net;
  net.arch = arch;
  net.seed = seed;
  Rng rng(derive_seed(seed, "mlp-init"));
  const std::size_t layers = arch.size() - 1;
  net.w.resize(layers);
  net.b.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const int fan_in = arch[l];
    const int fan_out = arch[l + 1];
    const bool output_layer = (l + 1 == layers);
    const double limit =
        output_layer ? std::sqrt(1.0 / fan_in) : std::sqrt(6.0 / fan_in);
    net.w[l].resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) net.w[l](r, c) = rng.uniform(-limit, limit);
    net.b[l] = VectorXd::Zero(fan_out);
  }
  return net;
}

MatrixXd forward(const Mlp& net, const MatrixXd& x, ForwardCache* cache) {
  if (x.rows() != net.in_dim())
    throw DataError("mlp forward: input has " + std::to_string(x.rows()) +
                    " rows, network expects " + std::to_string(net.in_dim()));
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->act.clear();
  }
  MatrixXd h = x;
  const std::size_t layers = net.w.size();
  for (std::size_t l = 0; l < layers; ++l) {
    MatrixXd z = (net.w[l] * h).colwise() + net.b[l];
    if (l + 1 < layers) {
      MatrixXd a = z.cwiseMax(0.0);
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->act.push_back(a);
      }
      h = std::move(a);
    } else {
      if (cache) cache->pre.push_back(z);
      h = std::move(z);
    }
  }
  return h;
}

Gradients zero_gradients(const Mlp& net) {
  Gradients g;
  g.dw.reserve(net.w.size());
  g.db.reserve(net.b.size());
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    g.dw.emplace_back(MatrixXd::Zero(net.w[l].rows(), net.w[l].cols()));
    g.db.emplace_back(VectorXd::Zero(net.b[l].size()));
  }
  return g;
}

void scale_gradients(Gradients& g, double factor) {
  for (auto& m : g.dw) m *= factor;
  for (auto& v : g.db) v *= factor;
}

MatrixXd backward(const Mlp& net, const ForwardCache& cache, const MatrixXd& dout,
                  Gradients& grads) {
  const std::size_t layers = net.w.size();
  MatrixXd delta = dout;  // dL/d(pre-activation of current layer)
  for (std::size_t l = layers; l-- > 0;) {
    const MatrixXd& below = (l == 0) ? cache.input : cache.act[l - 1];
    grads.dw[l].noalias() += delta * below.transpose();
    grads.db[l] += delta.rowwise().sum();
    if (l == 0) break;
    MatrixXd da = net.w[l].transpose() * delta;
    // ReLU gate; the zero side of the kink contributes nothing.
    delta = (cache.pre[l - 1].array() > 0.0).select(da, 0.0);
  }
  return net.w[0].transpose() * delta;
}

void check_finite(const Gradients& g, const std::string& what) {
  for (std::size_t l = 0; l < g.dw.size(); ++l) {
    if (!g.dw[l].allFinite())
      throw NumericError(what + " layer " + std::to_string(l) + " weight gradient is non-finite");
    if (!g.db[l].allFinite())
      throw NumericError(what + " layer " + std::to_string(l) + " bias gradient is non-finite");
  }
}

AdamState make_adam(const Mlp& net) {
  AdamState st;
  st.wbuf.resize(net.w.size());
  st.bbuf.resize(net.b.size());
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    st.wbuf[l].m = MatrixXd::Zero(net.w[l].rows(), net.w[l].cols());
    st.wbuf[l].v = st.wbuf[l].m;
    st.bbuf[l].m = MatrixXd::Zero(net.b[l].size(), 1);
    st.bbuf[l].v = st.bbuf[l].m;
  }
  return st;
}

void adam_step_tensor(Eigen::Ref<MatrixXd> p, const MatrixXd& g, AdamBuf& buf, long step,
                      double lr, double beta1, double beta2, double eps) {
  buf.m = beta1 * buf.m + (1.0 - beta1) * g;
  buf.v = beta2 * buf.v + (1.0 - beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  p -= (lr / c1) * buf.m.cwiseQuotient(((buf.v / c2).cwiseSqrt().array() + eps).matrix());
}

void adam_step(Mlp& net, const Gradients& g, AdamState& st, double lr) {
  ++st.step;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    adam_step_tensor(net.w[l], g.dw[l], st.wbuf[l], st.step, lr, st.beta1, st.beta2, st.eps);
    MatrixXd gb = g.db[l];
    Eigen::Map<MatrixXd> bm(net.b[l].data(), net.b[l].size(), 1);
    adam_step_tensor(bm, gb, st.bbuf[l], st.step, lr, st.beta1, st.beta2, st.eps);
  }
}

VectorXd flatten_params(const Mlp& net) {
  VectorXd flat(net.param_count());
  long at = 0;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    flat.segment(at, net.w[l].size()) = Eigen::Map<const VectorXd>(net.w[l].data(), net.w[l].size());
    at += net.w[l].size();
    flat.segment(at, net.b[l].size()) = net.b[l];
    at += net.b[l].size();
  }
  return flat;
}

VectorXd flatten_gradients(const Gradients& g) {
  long total = 0;
  for (std::size_t l = 0; l < g.dw.size(); ++l) total += g.dw[l].size() + g.db[l].size();
  VectorXd flat(total);
  long at = 0;
  for (std::size_t l = 0; l < g.dw.size(); ++l) {
    flat.segment(at, g.dw[l].size()) = Eigen::Map<const VectorXd>(g.dw[l].data(), g.dw[l].size());
    at += g.dw[l].size();
    flat.segment(at, g.db[l].size()) = g.db[l];
    at += g.db[l].size();
  }
  return flat;
}

void unflatten_params(Mlp& net, const VectorXd& flat) {
  if (flat.size() != net.param_count())
    throw DataError("unflatten_params: size mismatch");
  long at = 0;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    net.w[l] = Eigen::Map<const MatrixXd>(flat.data() + at, net.w[l].rows(), net.w[l].cols());
    at += net.w[l].size();
    net.b[l] = flat.segment(at, net.b[l].size());
    at += net.b[l].size();
  }
}

}  // namespace teamcredit::nn
