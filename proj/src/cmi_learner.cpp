#include "cids/cmi_learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "cids/errors.hpp"
#include "cids/rng.hpp"

namespace cids {

namespace {

double sigmoid1(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
  return x.unaryExpr([](double v) { return sigmoid1(v); });
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return sigmoid1(v); });
}

// Broadcast a per-dim gate across the rows of a batch.
Eigen::MatrixXd gated(const Eigen::MatrixXd& S, const Eigen::VectorXd& g) {
  return (S.array().rowwise() * g.transpose().array()).matrix();
}

Eigen::MatrixXd with_action(const Eigen::MatrixXd& X, const Eigen::MatrixXd& A) {
  Eigen::MatrixXd out(X.rows(), X.cols() + A.cols());
  out << X, A;
  return out;
}

// Rotate rows by half the batch: a deterministic permutation used as the
// "unrelated action" null.
Eigen::MatrixXd rotate_half(const Eigen::MatrixXd& A) {
  const auto n = A.rows();
  const auto k = n / 2;
  Eigen::MatrixXd out(n, A.cols());
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = A.row((i + k) % n);
  return out;
}

void check_batch(const TransitionBatch& batch, const PredictiveModels& models) {
  if (batch.rows() < 1) throw std::invalid_argument("empty batch");
  if (batch.s.cols() != models.d || batch.s1.cols() != models.d ||
      batch.a.cols() != models.action_dim)
    throw std::invalid_argument("batch width does not match models");
  if (batch.a.rows() != batch.rows() || batch.s1.rows() != batch.rows())
    throw std::invalid_argument("batch matrices have mismatched row counts");
}

Eigen::VectorXd mean_nll_per_dim(const DenseNet& net, const Eigen::MatrixXd& X,
                                 const Eigen::MatrixXd& target) {
  GaussianHead head = split_gaussian(forward(net, X));
  return gaussian_nll_per_dim(target, head).colwise().mean().transpose();
}

}  // namespace

Eigen::VectorXd GateParams::a_gate() const { return sigmoid((a_logits / temperature).eval()); }

Eigen::MatrixXd GateParams::s_gate() const { return sigmoid((s_logits / temperature).eval()); }

GateParams init_gates(int d, double init_logit) {
  if (d < 1) throw std::invalid_argument("init_gates: d must be >= 1");
  GateParams g;
  g.a_logits = Eigen::VectorXd::Constant(d, init_logit);
  g.s_logits = Eigen::MatrixXd::Constant(d, d, init_logit);
  return g;
}

PredictiveModels init_models(int d, int action_dim, int hidden, int hidden_layers,
                             std::uint64_t seed) {
  Rng rng(seed);
  PredictiveModels m;
  m.d = d;
  m.action_dim = action_dim;
  m.d1 = init_mlp(d, 2 * d, hidden, hidden_layers, rng.next_u64());
  m.d2 = init_mlp(d + action_dim, 2 * d, hidden, hidden_layers, rng.next_u64());
  m.a1 = init_mlp(d, 2 * d, hidden, hidden_layers, rng.next_u64());
  m.a2 = init_mlp(d + action_dim, 2 * d, hidden, hidden_layers, rng.next_u64());
  return m;
}

TransitionBatch batch_from_log(const TrajectoryLog& log) {
  const int n = static_cast<int>(log.records.size());
  TransitionBatch b;
  b.s.resize(n, log.d);
  b.a.resize(n, log.action_dim);
  b.s1.resize(n, log.d);
  for (int i = 0; i < n; ++i) {
    b.s.row(i) = log.records[static_cast<std::size_t>(i)].s.transpose();
    b.a.row(i) = log.records[static_cast<std::size_t>(i)].a.transpose();
    b.s1.row(i) = log.records[static_cast<std::size_t>(i)].s1.transpose();
  }
  return b;
}

Eigen::VectorXd aia_weights(const GateParams& gates) {
  const int d = static_cast<int>(gates.a_logits.size());
  const Eigen::VectorXd ga = gates.a_gate();
  const Eigen::MatrixXd gs = gates.s_gate();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (j != i) w(i) = std::max(w(i), gs(i, j) * ga(j));
  return w;
}

double cmi_dais_batch(const PredictiveModels& models, const GateParams& gates,
                      const TransitionBatch& batch) {
  check_batch(batch, models);
  const Eigen::VectorXd g = gates.a_gate();
  const Eigen::MatrixXd X1 = gated(batch.s, g);
  const Eigen::VectorXd nll1 = mean_nll_per_dim(models.d1, X1, batch.s1);
  const Eigen::VectorXd nll2 = mean_nll_per_dim(models.d2, with_action(X1, batch.a), batch.s1);
  return g.dot(nll1 - nll2);
}

double cmi_aia_batch(const PredictiveModels& models, const GateParams& gates,
                     const TransitionBatch& batch) {
  check_batch(batch, models);
  const Eigen::VectorXd g = gates.a_gate();
  const Eigen::VectorXd w = aia_weights(gates);
  const Eigen::MatrixXd Z1 = gated(batch.s1, g);
  const Eigen::VectorXd nll1 = mean_nll_per_dim(models.a1, Z1, batch.s);
  const Eigen::VectorXd nll2 = mean_nll_per_dim(models.a2, with_action(Z1, batch.a), batch.s);
  return w.dot(nll1 - nll2);
}

namespace {

// Forward both models of a pair, accumulate maximum-likelihood gradients, and
// return the per-dim mean-NLL gap (baseline minus action-conditioned).
struct PairFit {
  Eigen::VectorXd nll1, nll2;
};

PairFit fit_pair(const DenseNet& net1, const DenseNet& net2, const Eigen::MatrixXd& X1,
                 const Eigen::MatrixXd& X2, const Eigen::MatrixXd& target, NetGrads& g1,
                 NetGrads& g2) {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(target.rows(), target.cols());
  ForwardCache c1, c2;
  GaussianHead h1 = split_gaussian(forward(net1, X1, &c1));
  GaussianHead h2 = split_gaussian(forward(net2, X2, &c2));
  backward(net1, c1, gaussian_nll_backward(target, h1, ones), g1);
  backward(net2, c2, gaussian_nll_backward(target, h2, ones), g2);
  PairFit f;
  f.nll1 = gaussian_nll_per_dim(target, h1).colwise().mean().transpose();
  f.nll2 = gaussian_nll_per_dim(target, h2).colwise().mean().transpose();
  return f;
}

}  // namespace

DaisLoss loss_dais_model(const PredictiveModels& models, const GateParams& gates,
                         const TransitionBatch& batch, double lambda1) {
  if (lambda1 < 0.0) throw std::invalid_argument("lambda1 must be >= 0");
  check_batch(batch, models);
  DaisLoss out;
  out.g_d1 = zero_grads(models.d1);
  out.g_d2 = zero_grads(models.d2);
  const Eigen::VectorXd g = gates.a_gate();
  const Eigen::MatrixXd X1 = gated(batch.s, g);
  PairFit fit = fit_pair(models.d1, models.d2, X1, with_action(X1, batch.a), batch.s1,
                         out.g_d1, out.g_d2);
  const Eigen::VectorXd gap = fit.nll1 - fit.nll2;
  out.cmi = g.dot(gap);
  out.value = -out.cmi + lambda1 * g.sum();
  const Eigen::ArrayXd sp = g.array() * (1.0 - g.array()) / gates.temperature;
  out.g_a_logits = (sp * (lambda1 - gap.array())).matrix();
  return out;
}

AiaLoss loss_aia_model(const PredictiveModels& models, const GateParams& gates,
                       const TransitionBatch& batch, double lambda2) {
  if (lambda2 < 0.0) throw std::invalid_argument("lambda2 must be >= 0");
  check_batch(batch, models);
  const int d = models.d;
  AiaLoss out;
  out.g_a1 = zero_grads(models.a1);
  out.g_a2 = zero_grads(models.a2);
  const Eigen::VectorXd g = gates.a_gate();
  const Eigen::MatrixXd gs = gates.s_gate();
  const Eigen::MatrixXd Z1 = gated(batch.s1, g);
  PairFit fit = fit_pair(models.a1, models.a2, Z1, with_action(Z1, batch.a), batch.s,
                         out.g_a1, out.g_a2);
  const Eigen::VectorXd gap = fit.nll1 - fit.nll2;

  double penalty = 0.0;
  out.g_s_logits = Eigen::MatrixXd::Zero(d, d);
  double cmi = 0.0;
  for (int i = 0; i < d; ++i) {
    int best = -1;
    double w = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      penalty += lambda2 * gs(i, j);
      const double sp = gs(i, j) * (1.0 - gs(i, j)) / gates.temperature;
      out.g_s_logits(i, j) = lambda2 * sp;
      const double cand = gs(i, j) * g(j);
      if (cand > w) {
        w = cand;
        best = j;
      }
    }
    cmi += w * gap(i);
    if (best >= 0) {
      // -cmi differentiated through the max-aggregated weight (subgradient at
      // the arg max), NLL estimates held fixed.
      const double sp = gs(i, best) * (1.0 - gs(i, best)) / gates.temperature;
      out.g_s_logits(i, best) -= sp * g(best) * gap(i);
    }
  }
  out.cmi = cmi;
  out.value = -cmi + penalty;
  return out;
}

GateStats gate_statistics(const PredictiveModels& models, const GateParams& gates,
                          const TransitionBatch& batch) {
  check_batch(batch, models);
  const int d = models.d;
  GateStats st;
  st.stat_a = Eigen::VectorXd::Zero(d);
  st.stat_s = Eigen::MatrixXd::Zero(d, d);
  if (batch.rows() < 2) return st;  // rotation degenerates; no signal either way

  const Eigen::VectorXd g = gates.a_gate();
  const Eigen::MatrixXd X1 = gated(batch.s, g);
  const Eigen::MatrixXd W = with_action(X1, batch.a);
  GaussianHead real = split_gaussian(forward(models.d2, W));
  const Eigen::ArrayXXd var = real.logvar.array().exp();

  {  // how much does the action shift the prediction of s1?
    const Eigen::MatrixXd Ap = rotate_half(batch.a);
    GaussianHead perm = split_gaussian(forward(models.d2, with_action(X1, Ap)));
    Eigen::ArrayXXd sq = (perm.mean - real.mean).array().square() / (4.0 * var);
    st.stat_a = sq.colwise().mean().transpose();
  }

  // How much does each state input inform each next-state dim? Zero-ablating
  // input column i shifts the predicted mean of exactly the dims that read it;
  // squared shift over 2*var is the Gaussian information of edge i -> j in
  // nats. Rows index the source dim, columns the destination dim.
  for (int i = 0; i < d; ++i) {
    Eigen::MatrixXd Wi = W;
    Wi.col(i).setZero();
    GaussianHead abl = split_gaussian(forward(models.d2, Wi));
    const Eigen::ArrayXXd info = (abl.mean - real.mean).array().square() / (2.0 * var);
    st.stat_s.row(i) = info.colwise().mean();
  }
  st.stat_s.diagonal().setZero();  // self-edges are fixed by assumption
  return st;
}

void LearnerConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("lambdas must be >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("threshold must be in (0,1)");
  if (hidden < 1 || hidden_layers < 0) throw std::invalid_argument("bad net shape");
  if (gate_lr < 0.0) throw std::invalid_argument("gate_lr must be >= 0");
  if (!(gate_ema > 0.0 && gate_ema < 1.0))
    throw std::invalid_argument("gate_ema must be in (0,1)");
  if (gate_interval < 1 || gate_warmup < 0 || gate_eval_rows < 1)
    throw std::invalid_argument("bad gate schedule");
  if (!(val_fraction > 0.0 && val_fraction <= 0.5))
    throw std::invalid_argument("val_fraction must be in (0, 0.5]");
}

MaskMetrics metrics_a(const StructureMasks& learned, const StructureMasks& truth) {
  if (learned.d() != truth.d()) throw std::invalid_argument("mask shape mismatch");
  int tp = 0, fp = 0, fn = 0;
  for (int j = 0; j < learned.d(); ++j) {
    const bool p = learned.a_to_s(j) != 0, t = truth.a_to_s(j) != 0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  MaskMetrics m;
  m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 1.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 1.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

MaskMetrics metrics_s(const StructureMasks& learned, const StructureMasks& truth) {
  if (learned.d() != truth.d()) throw std::invalid_argument("mask shape mismatch");
  int tp = 0, fp = 0, fn = 0;
  for (int i = 0; i < learned.d(); ++i)
    for (int j = 0; j < learned.d(); ++j) {
      if (i == j) continue;  // self-edges fixed by assumption, not scored
      const bool p = learned.s_to_s(i, j) != 0, t = truth.s_to_s(i, j) != 0;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
  MaskMetrics m;
  m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 1.0;
  m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 1.0;
  m.f1 = (m.precision + m.recall > 0.0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

StructureMasks extract_binary_masks(const GateParams& gates, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("threshold must be in (0,1)");
  const int d = static_cast<int>(gates.a_logits.size());
  const Eigen::VectorXd ga = gates.a_gate();
  const Eigen::MatrixXd gs = gates.s_gate();
  StructureMasks m;
  m.a_to_s.resize(d);
  m.s_to_s.resize(d, d);
  for (int j = 0; j < d; ++j) m.a_to_s(j) = ga(j) >= threshold ? 1 : 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m.s_to_s(i, j) = (i == j || gs(i, j) >= threshold) ? 1 : 0;
  return m;
}

namespace {

TransitionBatch gather_rows(const TransitionBatch& all, const std::vector<int>& idx, int from,
                            int count) {
  TransitionBatch b;
  b.s.resize(count, all.s.cols());
  b.a.resize(count, all.a.cols());
  b.s1.resize(count, all.s1.cols());
  for (int r = 0; r < count; ++r) {
    const int src = idx[static_cast<std::size_t>(from + r)];
    b.s.row(r) = all.s.row(src);
    b.a.row(r) = all.a.row(src);
    b.s1.row(r) = all.s1.row(src);
  }
  return b;
}

TransitionBatch head_rows(const TransitionBatch& all, int count) {
  TransitionBatch b;
  b.s = all.s.topRows(count);
  b.a = all.a.topRows(count);
  b.s1 = all.s1.topRows(count);
  return b;
}

int count_active(const Eigen::VectorXd& logits, double temperature, double threshold) {
  int n = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    n += sigmoid1(logits(i) / temperature) >= threshold;
  return n;
}

int count_active_offdiag(const Eigen::MatrixXd& logits, double temperature, double threshold) {
  int n = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    for (Eigen::Index j = 0; j < logits.cols(); ++j)
      if (i != j) n += sigmoid1(logits(i, j) / temperature) >= threshold;
  return n;
}

constexpr double kLogitClamp = 8.0;

}  // namespace

MaskReport train_masks(const TrajectoryLog& log, const LearnerConfig& config,
                       const StructureMasks* truth) {
  config.validate();
  const int d = log.d, adim = log.action_dim;
  const int n = static_cast<int>(log.records.size());
  if (n < 10 * config.batch_size)
    throw DataError("train_masks: need at least " + std::to_string(10 * config.batch_size) +
                    " transitions, got " + std::to_string(n));

  // Episode-level held-out split: every period-th episode is validation.
  const int period = std::max<int>(2, std::lround(1.0 / config.val_fraction));
  std::vector<int> train_idx, val_idx;
  for (int i = 0; i < n; ++i) {
    if (log.records[static_cast<std::size_t>(i)].episode % period == period - 1)
      val_idx.push_back(i);
    else
      train_idx.push_back(i);
  }
  if (val_idx.empty() || static_cast<int>(train_idx.size()) < config.batch_size) {
    // Degenerate episode structure (e.g. a single long episode): fall back to
    // a tail split on raw rows.
    train_idx.clear();
    val_idx.clear();
    const int nval = std::max(1, n / 10);
    for (int i = 0; i < n - nval; ++i) train_idx.push_back(i);
    for (int i = n - nval; i < n; ++i) val_idx.push_back(i);
  }

  const TransitionBatch all = batch_from_log(log);
  const TransitionBatch val =
      gather_rows(all, val_idx, 0, static_cast<int>(val_idx.size()));
  const TransitionBatch gate_val =
      head_rows(val, std::min<int>(config.gate_eval_rows, val.rows()));

  Rng rng(config.seed);
  PredictiveModels models =
      init_models(d, adim, config.hidden, config.hidden_layers, rng.next_u64());
  GateParams gates = init_gates(d, config.init_logit);
  AdamState ad1 = make_adam(models.d1), ad2 = make_adam(models.d2);
  AdamState aa1 = make_adam(models.a1), aa2 = make_adam(models.a2);

  const int ntr = static_cast<int>(train_idx.size());
  const int steps_per_epoch = ntr / config.batch_size;
  if (steps_per_epoch < 1) throw DataError("train_masks: not enough training rows per batch");

  MaskReport report;
  report.d = d;
  report.action_dim = adim;
  report.threshold = config.threshold;
  report.history.reserve(static_cast<std::size_t>(config.epochs) * steps_per_epoch);

  Eigen::VectorXd ema_a = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd ema_s = Eigen::MatrixXd::Zero(d, d);
  long ema_n = 0;
  long step = 0;

  std::vector<int> perm = train_idx;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = ntr - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(rng.below(i + 1))]);
    for (int b = 0; b < steps_per_epoch; ++b) {
      const TransitionBatch batch =
          gather_rows(all, perm, b * config.batch_size, config.batch_size);

      DaisLoss dais = loss_dais_model(models, gates, batch, config.lambda1);
      adam_step(models.d1, dais.g_d1, config.lr, ad1);
      adam_step(models.d2, dais.g_d2, config.lr, ad2);

      AiaLoss aia = loss_aia_model(models, gates, batch, config.lambda2);
      adam_step(models.a1, aia.g_a1, config.lr, aa1);
      adam_step(models.a2, aia.g_a2, config.lr, aa2);

      ++step;
      if (!config.freeze_gates && config.gate_lr > 0.0 && step >= config.gate_warmup &&
          step % config.gate_interval == 0) {
        const GateStats st = gate_statistics(models, gates, gate_val);
        ++ema_n;
        ema_a = config.gate_ema * ema_a + (1.0 - config.gate_ema) * st.stat_a;
        ema_s = config.gate_ema * ema_s + (1.0 - config.gate_ema) * st.stat_s;
        const double corr = 1.0 - std::pow(config.gate_ema, static_cast<double>(ema_n));
        const Eigen::ArrayXd ca = ema_a.array() / corr;
        const Eigen::ArrayXXd cs = ema_s.array() / corr;

        const Eigen::ArrayXd ga = gates.a_gate().array();
        const Eigen::ArrayXd spa = ga * (1.0 - ga) / gates.temperature;
        gates.a_logits.array() += config.gate_lr * spa * (ca - config.lambda1);
        gates.a_logits = gates.a_logits.cwiseMax(-kLogitClamp).cwiseMin(kLogitClamp);

        const Eigen::ArrayXXd gs = gates.s_gate().array();
        const Eigen::ArrayXXd sps = gs * (1.0 - gs) / gates.temperature;
        Eigen::MatrixXd delta =
            (config.gate_lr * sps * (cs - config.lambda2)).matrix();
        delta.diagonal().setZero();  // self-edges are fixed by assumption
        gates.s_logits += delta;
        gates.s_logits = gates.s_logits.cwiseMax(-kLogitClamp).cwiseMin(kLogitClamp);
      }

      HistoryRow row;
      row.step = step;
      row.loss_dais = dais.value;
      row.loss_aia = aia.value;
      row.cmi_dais = dais.cmi;
      row.cmi_aia = aia.cmi;
      row.active_gates_a = count_active(gates.a_logits, gates.temperature, config.threshold);
      row.active_gates_s =
          count_active_offdiag(gates.s_logits, gates.temperature, config.threshold);
      report.history.push_back(row);
    }
  }

  // Final estimates on the full held-out slice with the trained models.
  const GateStats fin = gate_statistics(models, gates, val);
  report.score_a = fin.stat_a;
  report.score_s = fin.stat_s;
  report.soft_a = gates.a_gate();
  report.soft_s = gates.s_gate();
  report.binary = extract_binary_masks(gates, config.threshold);
  report.cmi_dais = cmi_dais_batch(models, gates, val);
  report.cmi_aia = cmi_aia_batch(models, gates, val);
  {
    const Eigen::VectorXd g = gates.a_gate();
    const Eigen::MatrixXd X1 = gated(val.s, g);
    report.gap_a = mean_nll_per_dim(models.d1, X1, val.s1) -
                   mean_nll_per_dim(models.d2, with_action(X1, val.a), val.s1);
  }
  if (truth) {
    report.metrics_a_to_s = metrics_a(report.binary, *truth);
    report.metrics_s_to_s = metrics_s(report.binary, *truth);
  }
  return report;
}

namespace {

nlohmann::ordered_json vec_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

nlohmann::ordered_json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::ordered_json ivec_json(const Eigen::VectorXi& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

nlohmann::ordered_json imat_json(const Eigen::MatrixXi& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::VectorXd vec_from(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

Eigen::MatrixXd mat_from(const nlohmann::json& a) {
  const std::size_t r = a.size();
  const std::size_t c = r ? a[0].size() : 0;
  Eigen::MatrixXd m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (a[i].size() != c) throw DataError("mask report: ragged matrix");
    for (std::size_t j = 0; j < c; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
  }
  return m;
}

Eigen::VectorXi ivec_from(const nlohmann::json& a) {
  Eigen::VectorXi v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<int>();
  return v;
}

Eigen::MatrixXi imat_from(const nlohmann::json& a) {
  const std::size_t r = a.size();
  const std::size_t c = r ? a[0].size() : 0;
  Eigen::MatrixXi m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (a[i].size() != c) throw DataError("mask report: ragged matrix");
    for (std::size_t j = 0; j < c; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<int>();
  }
  return m;
}

nlohmann::ordered_json metrics_json(const std::optional<MaskMetrics>& m) {
  if (!m) return nullptr;
  nlohmann::ordered_json j;
  j["precision"] = m->precision;
  j["recall"] = m->recall;
  j["f1"] = m->f1;
  return j;
}

}  // namespace

void save_mask_report(const std::string& dir, const MaskReport& report) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json j;
  j["d"] = report.d;
  j["action_dim"] = report.action_dim;
  j["threshold"] = report.threshold;
  j["soft_a"] = vec_json(report.soft_a);
  j["soft_s"] = mat_json(report.soft_s);
  j["binary_a"] = ivec_json(report.binary.a_to_s);
  j["binary_s"] = imat_json(report.binary.s_to_s);
  j["score_a"] = vec_json(report.score_a);
  j["score_s"] = mat_json(report.score_s);
  j["gap_a"] = vec_json(report.gap_a);
  j["cmi_dais"] = report.cmi_dais;
  j["cmi_aia"] = report.cmi_aia;
  j["metrics_a_to_s"] = metrics_json(report.metrics_a_to_s);
  j["metrics_s_to_s"] = metrics_json(report.metrics_s_to_s);
  {
    std::ofstream out(dir + "/mask_report.json");
    if (!out) throw DataError("cannot write " + dir + "/mask_report.json");
    out << j.dump(2) << "\n";
  }
  std::FILE* f = std::fopen((dir + "/loss_history.csv").c_str(), "w");
  if (!f) throw DataError("cannot write " + dir + "/loss_history.csv");
  std::fprintf(f, "step,loss_dais,loss_aia,cmi_dais,cmi_aia,active_gates_a,active_gates_s\n");
  for (const auto& r : report.history)
    std::fprintf(f, "%ld,%.17g,%.17g,%.17g,%.17g,%d,%d\n", r.step, r.loss_dais, r.loss_aia,
                 r.cmi_dais, r.cmi_aia, r.active_gates_a, r.active_gates_s);
  std::fclose(f);
}

MaskReport load_mask_report(const std::string& dir) {
  std::ifstream in(dir + "/mask_report.json");
  if (!in) throw DataError("cannot open " + dir + "/mask_report.json");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed mask report: " + std::string(e.what()));
  }
  MaskReport r;
  try {
    r.d = j.at("d").get<int>();
    r.action_dim = j.at("action_dim").get<int>();
    r.threshold = j.at("threshold").get<double>();
    r.soft_a = vec_from(j.at("soft_a"));
    r.soft_s = mat_from(j.at("soft_s"));
    r.binary.a_to_s = ivec_from(j.at("binary_a"));
    r.binary.s_to_s = imat_from(j.at("binary_s"));
    r.score_a = vec_from(j.at("score_a"));
    r.score_s = mat_from(j.at("score_s"));
    r.gap_a = vec_from(j.at("gap_a"));
    r.cmi_dais = j.at("cmi_dais").get<double>();
    r.cmi_aia = j.at("cmi_aia").get<double>();
    if (!j.at("metrics_a_to_s").is_null()) {
      MaskMetrics m;
      m.precision = j["metrics_a_to_s"]["precision"].get<double>();
      m.recall = j["metrics_a_to_s"]["recall"].get<double>();
      m.f1 = j["metrics_a_to_s"]["f1"].get<double>();
      r.metrics_a_to_s = m;
    }
    if (!j.at("metrics_s_to_s").is_null()) {
      MaskMetrics m;
      m.precision = j["metrics_s_to_s"]["precision"].get<double>();
      m.recall = j["metrics_s_to_s"]["recall"].get<double>();
      m.f1 = j["metrics_s_to_s"]["f1"].get<double>();
      r.metrics_s_to_s = m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("mask report missing field: " + std::string(e.what()));
  }
  r.binary.validate();
  return r;
}

}  // namespace cids
