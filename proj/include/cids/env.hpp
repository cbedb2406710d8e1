#ifndef CIDS_ENV_HPP
#define CIDS_ENV_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cids/masks.hpp"
#include "cids/rng.hpp"

namespace cids {

// Synthetic recommender dynamics: each state dim follows
//   s'_j = tanh( sum_i W_s(i,j) M_s(i,j) s_i + [M_a(j)] sum_k W_a(k,j) a_k ) + noise,
// reward = clip( r_w . s', -max_reward, max_reward ). Actions live in [-1,1]^k.
struct EnvConfig {
  int d = 0;
  int action_dim = 0;
  StructureMasks masks;
  Eigen::MatrixXd weights_s;       // d x d, (source, destination)
  Eigen::MatrixXd weights_a;       // action_dim x d
  double noise_sigma = 0.1;
  Eigen::VectorXd reward_weights;  // d
  int episode_length = 20;
  double max_reward = 1.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws DataError on inconsistent shapes/values
};

// Structured-text (JSON) round trip with a fixed key order, so identical
// configs serialize byte-identically.
std::string env_config_to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const std::string& text);
void save_env_config(const EnvConfig& cfg, const std::string& path);
EnvConfig load_env_config(const std::string& path);

// FNV-1a hash of the canonical config text with the seed zeroed; stamped into
// trajectory logs so a log can be matched back to the dynamics that produced
// it regardless of which noise stream was drawn.
std::uint64_t env_fingerprint(const EnvConfig& cfg);

class Env {
public:
  explicit Env(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }
  const StructureMasks& ground_truth_masks() const { return cfg_.masks; }

  Eigen::VectorXd reset();

  struct StepResult {
    Eigen::VectorXd next_state;
    double reward = 0.0;
    bool done = false;
  };
  // Throws std::invalid_argument on a wrong-sized action, std::logic_error if
  // the episode already ended or reset() was never called.
  StepResult step(const Eigen::VectorXd& action);

  const Eigen::VectorXd& state() const { return state_; }
  int steps_taken() const { return steps_; }
  bool terminated() const { return steps_ >= cfg_.episode_length; }

  // Same config, fresh deterministic stream; used for paired evaluations.
  Env clone_with_seed(std::uint64_t seed) const;

private:
  EnvConfig cfg_;
  Rng noise_rng_;
  Eigen::VectorXd state_;
  int steps_ = 0;
  bool live_ = false;
};

// Fraction of the best attainable per-step reward actually collected:
// episode_return / (episode_length * max_reward).
double ctr(double episode_return, int episode_length, double max_reward);

struct LoggedTransition {
  int episode = 0;
  int step = 0;
  Eigen::VectorXd s, a, s1;
  double r = 0.0;
  bool done = false;
};

struct TrajectoryLog {
  int d = 0;
  int action_dim = 0;
  std::uint64_t fingerprint = 0;
  std::vector<LoggedTransition> records;
};

// Behavior policy for data collection; receives the current state and the
// collection RNG stream.
using BehaviorPolicy = std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)>;

// Uniform-random actions in [-1,1]^k: the default sub-optimal logging policy.
BehaviorPolicy uniform_behavior(int action_dim);

// Roll `episodes` full episodes and log every transition.
TrajectoryLog collect(Env& env, int episodes, const BehaviorPolicy& behavior, Rng& action_rng);

// Line-oriented text format:
//   # cids-log v1 d=<d> adim=<k> fingerprint=<hex>
//   ep=<int> t=<int> s=[...] a=[...] s1=[...] r=<real> done=<0|1>
// Reals print with 17 significant digits, so write/read round trips bit-exactly.
void write_log(const TrajectoryLog& log, std::ostream& out);
TrajectoryLog read_log(std::istream& in);  // throws DataError with line numbers
void save_log(const TrajectoryLog& log, const std::string& path);
TrajectoryLog load_log(const std::string& path);

}  // namespace cids

#endif
