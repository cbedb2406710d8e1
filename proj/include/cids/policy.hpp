#ifndef CIDS_POLICY_HPP
#define CIDS_POLICY_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cids/env.hpp"
#include "cids/masks.hpp"
#include "cids/nn.hpp"
#include "cids/rng.hpp"

namespace cids {

// DDPG-style actor-critic over masked states, plus the selector machinery for
// the FULL / DAIS / AIA / CIDS ablation modes.

struct PolicyConfig {
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double gamma = 0.95;
  double tau = 0.001;
  int hidden = 128;
  int hidden_layers = 3;
  std::size_t buffer_capacity = 1000000;
  int batch_size = 128;
  double exploration_noise_sigma = 0.1;
  int warmup_steps = 1000;  // uniform-random action steps before updates begin
  int episodes = 300;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

enum class SelectorMode { FULL, DAIS, AIA, CIDS };

std::string to_string(SelectorMode mode);
SelectorMode selector_mode_from_string(const std::string& name);  // throws invalid_argument

// Indispensable-dims vector: dim i is kept iff it has its own action edge or
// feeds (i != j) some dim j that has one.
Eigen::VectorXi compose_cids_mask(const StructureMasks& masks);

// The one-hop-ancestor dims alone (CIDS minus the directly-driven dims).
Eigen::VectorXi aia_only_vector(const StructureMasks& masks);

struct StateSelector {
  SelectorMode mode = SelectorMode::FULL;
  Eigen::VectorXi mask;  // length d, entries 0/1

  static StateSelector make(SelectorMode mode, const StructureMasks& masks);
  bool degenerate() const { return mask.sum() == 0; }
};

// Elementwise product; masked dims are zeroed, never dropped.
Eigen::VectorXd select_state(const Eigen::VectorXd& s, const StateSelector& selector);

struct Transition {
  Eigen::VectorXd s, a, s1;  // s and s1 stored already masked
  double r = 0.0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);  // FIFO overwrite once full
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  struct Batch {
    Eigen::MatrixXd s, a, s1;
    Eigen::VectorXd r;
    int rows() const { return static_cast<int>(s.rows()); }
  };

  // Uniform without replacement within the batch; k <= size().
  Batch sample(int k, Rng& rng) const;

 private:
  std::vector<Transition> data_;
  std::size_t capacity_ = 0;
  std::size_t cursor_ = 0;
};

struct ActorCritic {
  DenseNet actor, critic;         // actor output is pre-tanh
  DenseNet actor_target, critic_target;
  AdamState actor_opt, critic_opt;
};

ActorCritic init_actor_critic(int d, int action_dim, const PolicyConfig& config);

// tanh-squashed actor output plus Gaussian exploration noise, clipped to
// [-1,1]. noise_sigma = 0 draws nothing from rng (fully deterministic).
Eigen::VectorXd act(const DenseNet& actor, const Eigen::VectorXd& masked_state,
                    double noise_sigma, Rng& rng);

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;  // mean Q(s, pi(s)) before the update
};

// One DDPG step: critic toward y = r + gamma * Q'(s', pi'(s')), actor up the
// critic, then tau-soft target updates.
UpdateStats ddpg_update(ActorCritic& ac, const ReplayBuffer::Batch& batch,
                        const PolicyConfig& config);

struct EpisodeRecord {
  int episode = 0;
  double ret = 0.0;
  double ctr = 0.0;
  double critic_loss = 0.0;  // mean over the episode's updates (0 before updates start)
};

struct TrainPolicyResult {
  std::vector<EpisodeRecord> curve;
  ActorCritic nets;
};

// Called after each episode finishes (post-updates), e.g. to snapshot the
// actor for mid-training evaluation.
using EpisodeHook = std::function<void(int episode, const ActorCritic& nets)>;

// Full training loop on a fresh env built from env_config. Throws
// std::invalid_argument on a degenerate (all-zero) selector — callers decide
// whether to fall back to FULL.
TrainPolicyResult train_policy(const EnvConfig& env_config, const StateSelector& selector,
                               const PolicyConfig& config,
                               const EpisodeHook& on_episode_end = {});

struct EvalStats {
  double return_mean = 0.0, return_std = 0.0;
  double ctr_mean = 0.0, ctr_std = 0.0;
};

// Greedy rollouts on env clones with per-episode derived seeds.
EvalStats evaluate(const Env& env, const DenseNet& actor, const StateSelector& selector,
                   int episodes);

// cids-ckpt v1 files holding actor/critic/actor_target/critic_target.
void save_policy(const std::string& path, const ActorCritic& ac);
ActorCritic load_policy(const std::string& path, const PolicyConfig& config);

}  // namespace cids

#endif
