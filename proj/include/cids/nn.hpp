#ifndef CIDS_NN_HPP
#define CIDS_NN_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cids {

// Minimal dense-network stack: ReLU MLPs with hand-written reverse-mode
// gradients, diagonal-Gaussian output heads, and Adam. Batches are row-major:
// one sample per row.

struct Layer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

struct DenseNet {
  std::vector<Layer> layers;  // ReLU after every layer except the last

  int in_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().W.rows()); }
  std::size_t param_count() const;
};

// Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
// hidden_layers hidden blocks of `hidden` units each.
DenseNet init_mlp(int in, int out, int hidden, int hidden_layers, std::uint64_t seed);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = X, acts[i] = output of layer i-1
};

// X: n x in. Returns n x out. Fill `cache` to enable backward().
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& X,
                        ForwardCache* cache = nullptr);

struct NetGrads {
  std::vector<Layer> g;  // same shapes as the net's layers

  void scale(double f);
  void add(const NetGrads& other);
};

NetGrads zero_grads(const DenseNet& net);

// dY: gradient of the scalar loss w.r.t. the network output (n x out).
// Accumulates parameter gradients into `grads` and returns dLoss/dX.
Eigen::MatrixXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& dY, NetGrads& grads);

// Diagonal Gaussian head over m dims, split from a 2m-wide network output:
// first m columns are means, last m are log-variances clamped to [-8, 8].
struct GaussianHead {
  Eigen::MatrixXd mean;        // n x m
  Eigen::MatrixXd logvar;      // n x m, clamped
  Eigen::MatrixXd clamp_pass;  // n x m, 1 where the raw logvar was inside the clamp
};

GaussianHead split_gaussian(const Eigen::MatrixXd& net_output);

inline constexpr double kLogVarMin = -8.0;
inline constexpr double kLogVarMax = 8.0;

// Per-sample-per-dim negative log density:
//   0.5*ln(2*pi) + 0.5*logvar + (target - mean)^2 / (2*exp(logvar)).
Eigen::MatrixXd gaussian_nll_per_dim(const Eigen::MatrixXd& target, const GaussianHead& head);

// Scalar form: mean over the batch of the per-sample dim sums.
double gaussian_nll(const Eigen::MatrixXd& target, const GaussianHead& head);

// Gradient of (1/n) * sum_{n,j} weight(n,j) * nll(n,j) w.r.t. the raw 2m-wide
// network output (clamped logvar entries get zero gradient).
Eigen::MatrixXd gaussian_nll_backward(const Eigen::MatrixXd& target, const GaussianHead& head,
                                      const Eigen::MatrixXd& weight);

struct AdamState {
  std::vector<Layer> m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

AdamState make_adam(const DenseNet& net);
void adam_step(DenseNet& net, const NetGrads& grads, double lr, AdamState& state);

// Soft update target <- (1 - tau) * target + tau * net.
void soft_update(DenseNet& target, const DenseNet& net, double tau);

// Compare analytic parameter gradients against central finite differences of
// loss(forward(net, X)). loss_grad must return dLoss/dY for the analytic side.
// Returns max over parameters of |analytic - numeric| / (|analytic| + 1e-8).
// eps must be > 0.
double finite_diff_check(const DenseNet& net,
                         const std::function<double(const Eigen::MatrixXd&)>& loss,
                         const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& loss_grad,
                         const Eigen::MatrixXd& X, double eps);

// "cids-ckpt v1" text checkpoints holding named nets; 17-significant-digit
// values, so save/load round trips bit-exactly.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const DenseNet*>>& nets);
std::map<std::string, DenseNet> load_checkpoint(const std::string& path);

}  // namespace cids

#endif
