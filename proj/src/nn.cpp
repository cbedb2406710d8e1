#include "cids/nn.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cids/errors.hpp"
#include "cids/rng.hpp"

namespace cids {

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size()) + l.b.size();
  return n;
}

DenseNet init_mlp(int in, int out, int hidden, int hidden_layers, std::uint64_t seed) {
  if (in <= 0 || out <= 0 || hidden <= 0 || hidden_layers < 0)
    throw std::invalid_argument("init_mlp: dimensions must be positive");
  Rng rng(seed);
  DenseNet net;
  std::vector<int> widths;
  widths.push_back(in);
  for (int i = 0; i < hidden_layers; ++i) widths.push_back(hidden);
  widths.push_back(out);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fi = widths[l], fo = widths[l + 1];
    const double bound = std::sqrt(6.0 / (fi + fo));
    Layer layer;
    layer.W.resize(fo, fi);
    for (int r = 0; r < fo; ++r)
      for (int c = 0; c < fi; ++c) layer.W(r, c) = rng.uniform(-bound, bound);
    layer.b = Eigen::VectorXd::Zero(fo);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& X, ForwardCache* cache) {
  if (X.cols() != net.in_dim()) throw std::invalid_argument("forward: input width mismatch");
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(X);
  }
  Eigen::MatrixXd h = X;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = (h * net.layers[l].W.transpose()).rowwise() + net.layers[l].b.transpose();
    if (l + 1 < net.layers.size()) h = h.cwiseMax(0.0);
    if (cache) cache->acts.push_back(h);
  }
  return h;
}

void NetGrads::scale(double f) {
  for (auto& l : g) {
    l.W *= f;
    l.b *= f;
  }
}

void NetGrads::add(const NetGrads& other) {
  if (other.g.size() != g.size()) throw std::invalid_argument("NetGrads::add: shape mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i].W += other.g[i].W;
    g[i].b += other.g[i].b;
  }
}

NetGrads zero_grads(const DenseNet& net) {
  NetGrads grads;
  for (const auto& l : net.layers)
    grads.g.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                       Eigen::VectorXd::Zero(l.b.size())});
  return grads;
}

Eigen::MatrixXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& dY, NetGrads& grads) {
  if (cache.acts.size() != net.layers.size() + 1)
    throw std::invalid_argument("backward: cache does not match net");
  if (grads.g.size() != net.layers.size())
    throw std::invalid_argument("backward: grads do not match net");
  Eigen::MatrixXd delta = dY;  // dLoss/d(pre-ReLU output of current layer)
  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const Eigen::MatrixXd& input = cache.acts[static_cast<std::size_t>(l)];
    grads.g[static_cast<std::size_t>(l)].W += delta.transpose() * input;
    grads.g[static_cast<std::size_t>(l)].b += delta.colwise().sum().transpose();
    if (l == 0) {
      delta = delta * net.layers[0].W;
      break;
    }
    delta = delta * net.layers[static_cast<std::size_t>(l)].W;
    // cache.acts[l] is the post-ReLU activation feeding layer l; its zero
    // entries kill the gradient flowing through them.
    const Eigen::MatrixXd& act = cache.acts[static_cast<std::size_t>(l)];
    delta = ((act.array() > 0.0).cast<double>() * delta.array()).matrix();
  }
  return delta;
}

GaussianHead split_gaussian(const Eigen::MatrixXd& net_output) {
  if (net_output.cols() % 2 != 0)
    throw std::invalid_argument("split_gaussian: output width must be even");
  const int m = static_cast<int>(net_output.cols()) / 2;
  GaussianHead head;
  head.mean = net_output.leftCols(m);
  const Eigen::MatrixXd raw = net_output.rightCols(m);
  head.logvar = raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  head.clamp_pass =
      ((raw.array() > kLogVarMin) && (raw.array() < kLogVarMax)).cast<double>().matrix();
  return head;
}

Eigen::MatrixXd gaussian_nll_per_dim(const Eigen::MatrixXd& target, const GaussianHead& head) {
  if (target.rows() != head.mean.rows() || target.cols() != head.mean.cols())
    throw std::invalid_argument("gaussian_nll: target shape mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);
  Eigen::ArrayXXd var = head.logvar.array().exp();
  Eigen::ArrayXXd sq = (target.array() - head.mean.array()).square();
  return (half_log_2pi + 0.5 * head.logvar.array() + sq / (2.0 * var)).matrix();
}

double gaussian_nll(const Eigen::MatrixXd& target, const GaussianHead& head) {
  return gaussian_nll_per_dim(target, head).sum() / static_cast<double>(target.rows());
}

Eigen::MatrixXd gaussian_nll_backward(const Eigen::MatrixXd& target, const GaussianHead& head,
                                      const Eigen::MatrixXd& weight) {
  const auto n = target.rows();
  const auto m = target.cols();
  if (weight.rows() != n || weight.cols() != m)
    throw std::invalid_argument("gaussian_nll_backward: weight shape mismatch");
  Eigen::ArrayXXd w = weight.array() / static_cast<double>(n);
  Eigen::ArrayXXd var = head.logvar.array().exp();
  Eigen::ArrayXXd diff = head.mean.array() - target.array();
  Eigen::MatrixXd dOut(n, 2 * m);
  dOut.leftCols(m) = (w * diff / var).matrix();
  // d nll / d logvar = 0.5 - diff^2 / (2 var); zero where the clamp saturated.
  dOut.rightCols(m) =
      (w * head.clamp_pass.array() * (0.5 - diff.square() / (2.0 * var))).matrix();
  return dOut;
}

AdamState make_adam(const DenseNet& net) {
  AdamState st;
  for (const auto& l : net.layers) {
    st.m.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                    Eigen::VectorXd::Zero(l.b.size())});
    st.v.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()),
                    Eigen::VectorXd::Zero(l.b.size())});
  }
  return st;
}

void adam_step(DenseNet& net, const NetGrads& grads, double lr, AdamState& st) {
  if (grads.g.size() != net.layers.size() || st.m.size() != net.layers.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  st.step += 1;
  const double b1t = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double b2t = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto upd = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = (st.beta1 * m.array() + (1.0 - st.beta1) * g.array()).matrix();
    v = (st.beta2 * v.array() + (1.0 - st.beta2) * g.array().square()).matrix();
    p.array() -= lr * (m.array() / b1t) / ((v.array() / b2t).sqrt() + st.eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    upd(net.layers[l].W, st.m[l].W, st.v[l].W, grads.g[l].W);
    upd(net.layers[l].b, st.m[l].b, st.v[l].b, grads.g[l].b);
  }
}

void soft_update(DenseNet& target, const DenseNet& net, double tau) {
  if (target.layers.size() != net.layers.size())
    throw std::invalid_argument("soft_update: net shapes differ");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    target.layers[l].W = (1.0 - tau) * target.layers[l].W + tau * net.layers[l].W;
    target.layers[l].b = (1.0 - tau) * target.layers[l].b + tau * net.layers[l].b;
  }
}

double finite_diff_check(const DenseNet& net,
                         const std::function<double(const Eigen::MatrixXd&)>& loss,
                         const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& loss_grad,
                         const Eigen::MatrixXd& X, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be positive");
  ForwardCache cache;
  Eigen::MatrixXd Y = forward(net, X, &cache);
  NetGrads grads = zero_grads(net);
  backward(net, cache, loss_grad(Y), grads);

  DenseNet probe = net;
  double worst = 0.0;
  auto check_param = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + eps;
    const double up = loss(forward(probe, X));
    p = saved - eps;
    const double down = loss(forward(probe, X));
    p = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double rel = std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8);
    if (rel > worst) worst = rel;
  };
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    auto& L = probe.layers[l];
    for (int r = 0; r < L.W.rows(); ++r)
      for (int c = 0; c < L.W.cols(); ++c) check_param(L.W(r, c), grads.g[l].W(r, c));
    for (int r = 0; r < L.b.size(); ++r) check_param(L.b(r), grads.g[l].b(r));
  }
  return worst;
}

namespace {

void write_matrix(std::FILE* f, const Eigen::MatrixXd& M) {
  for (int r = 0; r < M.rows(); ++r) {
    for (int c = 0; c < M.cols(); ++c)
      std::fprintf(f, "%s%.17g", c == 0 ? "" : " ", M(r, c));
    std::fprintf(f, "\n");
  }
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const DenseNet*>>& nets) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  std::fprintf(f, "# cids-ckpt v1 nets=%zu\n", nets.size());
  for (const auto& [name, net] : nets) {
    if (name.find_first_of(" \t\n") != std::string::npos) {
      std::fclose(f);
      throw std::invalid_argument("checkpoint net names must not contain whitespace");
    }
    std::fprintf(f, "net %s layers=%zu\n", name.c_str(), net->layers.size());
    for (const auto& l : net->layers) {
      std::fprintf(f, "layer %d %d\n", static_cast<int>(l.W.rows()),
                   static_cast<int>(l.W.cols()));
      write_matrix(f, l.W);
      write_matrix(f, l.b.transpose());
    }
  }
  std::fclose(f);
}

namespace {

std::string next_line(std::istream& in, int& lineno) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("checkpoint: unexpected end of file");
  ++lineno;
  return line;
}

Eigen::MatrixXd read_matrix(std::istream& in, int rows, int cols, int& lineno) {
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r) {
    std::istringstream ls(next_line(in, lineno));
    for (int c = 0; c < cols; ++c) {
      if (!(ls >> M(r, c)))
        throw DataError("checkpoint: bad number at line " + std::to_string(lineno));
    }
  }
  return M;
}

}  // namespace

std::map<std::string, DenseNet> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  int lineno = 0;
  std::string header = next_line(in, lineno);
  std::size_t n_nets = 0;
  if (std::sscanf(header.c_str(), "# cids-ckpt v1 nets=%zu", &n_nets) != 1)
    throw DataError("checkpoint: bad header: " + header);
  std::map<std::string, DenseNet> out;
  for (std::size_t i = 0; i < n_nets; ++i) {
    std::string line = next_line(in, lineno);
    char name_buf[256];
    std::size_t n_layers = 0;
    if (std::sscanf(line.c_str(), "net %255s layers=%zu", name_buf, &n_layers) != 2)
      throw DataError("checkpoint: bad net header at line " + std::to_string(lineno));
    DenseNet net;
    for (std::size_t l = 0; l < n_layers; ++l) {
      line = next_line(in, lineno);
      int rows = 0, cols = 0;
      if (std::sscanf(line.c_str(), "layer %d %d", &rows, &cols) != 2 || rows <= 0 || cols <= 0)
        throw DataError("checkpoint: bad layer header at line " + std::to_string(lineno));
      Layer layer;
      layer.W = read_matrix(in, rows, cols, lineno);
      layer.b = read_matrix(in, 1, rows, lineno).transpose();
      net.layers.push_back(std::move(layer));
    }
    if (net.layers.empty())
      throw DataError("checkpoint: net '" + std::string(name_buf) + "' has no layers");
    out.emplace(name_buf, std::move(net));
  }
  return out;
}

}  // namespace cids
