#ifndef CIDS_CMI_LEARNER_HPP
#define CIDS_CMI_LEARNER_HPP

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cids/env.hpp"
#include "cids/masks.hpp"
#include "cids/nn.hpp"

namespace cids {

// Structure-mask learning from logged transitions. Two conditional-information
// objectives drive two sets of sigmoid gates:
//   action gates  g_a[j]   — does a_t influence s^j_{t+1} directly?
//   state gates   g_s[i,j] — does s^i_t feed s^j_{t+1}? (learned through the
//                            explaining-away signal at action-influenced j's)
// Four Gaussian-head predictors supply the information estimates:
//   d1: s_t ⊙ g_a            -> density of s_{t+1}
//   d2: (s_t ⊙ g_a, a_t)     -> density of s_{t+1}
//   a1: s_{t+1} ⊙ g_a        -> density of s_t   (backward model)
//   a2: (s_{t+1} ⊙ g_a, a_t) -> density of s_t

struct GateParams {
  Eigen::VectorXd a_logits;  // d
  Eigen::MatrixXd s_logits;  // d x d, (source row, destination col)
  double temperature = 1.0;

  Eigen::VectorXd a_gate() const;  // sigmoid(a_logits / temperature)
  Eigen::MatrixXd s_gate() const;
};

GateParams init_gates(int d, double init_logit = 0.0);

struct PredictiveModels {
  DenseNet d1, d2, a1, a2;
  int d = 0, action_dim = 0;
};

PredictiveModels init_models(int d, int action_dim, int hidden, int hidden_layers,
                             std::uint64_t seed);

struct TransitionBatch {
  Eigen::MatrixXd s, a, s1;  // n x d, n x action_dim, n x d

  int rows() const { return static_cast<int>(s.rows()); }
};

TransitionBatch batch_from_log(const TrajectoryLog& log);

// AIA weight of source dim i: max over destinations j != i of
// sigmoid(s_logits[i,j]/T) * g_a[j] — the strongest currently-open route from
// i into an action-influenced dim.
Eigen::VectorXd aia_weights(const GateParams& gates);

// Gate-weighted difference of batch-mean NLLs: sum_j g_a[j]*(NLL_d1_j - NLL_d2_j).
double cmi_dais_batch(const PredictiveModels& models, const GateParams& gates,
                      const TransitionBatch& batch);

// Same shape with the backward models and AIA weights over target dims of s_t.
double cmi_aia_batch(const PredictiveModels& models, const GateParams& gates,
                     const TransitionBatch& batch);

// Loss bundles. `value` is the optimized scalar (-cmi + lambda * L1(soft gates)).
// Model gradients descend each model's own NLL (maximum likelihood); gate
// gradients are the subgradient of `value` holding the NLL estimates fixed
// (the input-gating channel is intentionally not differentiated through).
struct DaisLoss {
  double value = 0.0;
  double cmi = 0.0;
  NetGrads g_d1, g_d2;
  Eigen::VectorXd g_a_logits;
};

struct AiaLoss {
  double value = 0.0;
  double cmi = 0.0;
  NetGrads g_a1, g_a2;
  Eigen::MatrixXd g_s_logits;  // diagonal fixed at zero
};

DaisLoss loss_dais_model(const PredictiveModels& models, const GateParams& gates,
                         const TransitionBatch& batch, double lambda1);
AiaLoss loss_aia_model(const PredictiveModels& models, const GateParams& gates,
                       const TransitionBatch& batch, double lambda2);

struct LearnerConfig {
  double lambda1 = 5e-4;
  double lambda2 = 1e-4;
  double lr = 1e-3;
  int batch_size = 256;
  int epochs = 8;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  int hidden = 128;
  int hidden_layers = 3;
  // Gate-update plumbing: logits move by plain gradient steps on smoothed,
  // permutation-debiased per-entry information statistics from a held-out slice.
  double gate_lr = 25.0;
  double gate_ema = 0.9;     // EMA factor for the statistics (bias-corrected)
  int gate_interval = 20;    // optimizer steps between gate updates
  int gate_warmup = 100;     // steps before gates start moving
  int gate_eval_rows = 4096; // cap on validation rows used per gate update
  double val_fraction = 0.1; // held-out fraction (episode-level split)
  double init_logit = 0.0;
  bool freeze_gates = false;

  void validate() const;  // throws std::invalid_argument
};

struct GateStats {
  Eigen::VectorXd stat_a;  // d: per-dim action info (nats, quadratic form)
  Eigen::MatrixXd stat_s;  // d x d: per-edge transition info (nats), diag 0
};

// Quadratic mean-shift statistics on a validation batch (see README), both
// computed from the action-conditioned forward model:
//   stat_a[j]   = mean_n (mu_d2_j(s⊙g, a~) - mu_d2_j(s⊙g, a))^2 / (4 var_j)
//   stat_s[i,j] = mean_n (mu_d2_j(s⊙g with dim i zeroed, a) - mu_d2_j(s⊙g, a))^2
//                 / (2 var_j)   — rows index the source dim, diagonal zero.
// a~ is the batch rotated by half its length (deterministic permutation).
GateStats gate_statistics(const PredictiveModels& models, const GateParams& gates,
                          const TransitionBatch& batch);

struct MaskMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// a_to_s over all d entries; s_to_s over off-diagonal entries only.
// Convention: precision = 1 when nothing is predicted positive.
MaskMetrics metrics_a(const StructureMasks& learned, const StructureMasks& truth);
MaskMetrics metrics_s(const StructureMasks& learned, const StructureMasks& truth);

StructureMasks extract_binary_masks(const GateParams& gates, double threshold);

struct HistoryRow {
  long step = 0;
  double loss_dais = 0.0, loss_aia = 0.0, cmi_dais = 0.0, cmi_aia = 0.0;
  int active_gates_a = 0, active_gates_s = 0;
};

struct MaskReport {
  int d = 0, action_dim = 0;
  double threshold = 0.5;
  Eigen::VectorXd soft_a;
  Eigen::MatrixXd soft_s;
  StructureMasks binary;
  Eigen::VectorXd score_a;  // final smoothed per-dim action statistics
  Eigen::MatrixXd score_s;  // final smoothed per-edge statistics
  Eigen::VectorXd gap_a;    // raw per-dim NLL gap mean(nll_d1 - nll_d2) on validation
  double cmi_dais = 0.0;    // gate-weighted estimates on the validation slice
  double cmi_aia = 0.0;
  std::optional<MaskMetrics> metrics_a_to_s;
  std::optional<MaskMetrics> metrics_s_to_s;
  std::vector<HistoryRow> history;
};

// Full learning loop: alternating minibatch Adam on the DAIS then AIA model
// losses, periodic gate updates, final statistics on the held-out slice.
// Deterministic per (log, config). truth, when given, fills the metrics.
MaskReport train_masks(const TrajectoryLog& log, const LearnerConfig& config,
                       const StructureMasks* truth = nullptr);

// mask_report.json + loss_history.csv (header:
// step,loss_dais,loss_aia,cmi_dais,cmi_aia,active_gates_a,active_gates_s).
void save_mask_report(const std::string& dir, const MaskReport& report);
MaskReport load_mask_report(const std::string& dir);  // loss history not reloaded

}  // namespace cids

#endif
