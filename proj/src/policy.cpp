#include "cids/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cids/errors.hpp"

namespace cids {

void PolicyConfig::validate() const {
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw std::invalid_argument("lrs must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0,1]");
  if (hidden < 1 || hidden_layers < 0) throw std::invalid_argument("bad net shape");
  if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (exploration_noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
}

std::string to_string(SelectorMode mode) {
  switch (mode) {
    case SelectorMode::FULL: return "FULL";
    case SelectorMode::DAIS: return "DAIS";
    case SelectorMode::AIA: return "AIA";
    case SelectorMode::CIDS: return "CIDS";
  }
  throw std::invalid_argument("unknown selector mode");
}

SelectorMode selector_mode_from_string(const std::string& name) {
  if (name == "FULL") return SelectorMode::FULL;
  if (name == "DAIS") return SelectorMode::DAIS;
  if (name == "AIA") return SelectorMode::AIA;
  if (name == "CIDS") return SelectorMode::CIDS;
  throw std::invalid_argument("unknown selector mode: " + name);
}

Eigen::VectorXi compose_cids_mask(const StructureMasks& masks) {
  masks.validate();
  const int d = masks.d();
  Eigen::VectorXi out(d);
  for (int i = 0; i < d; ++i) {
    int keep = masks.a_to_s(i);
    for (int j = 0; j < d && !keep; ++j)
      if (j != i && masks.s_to_s(i, j) == 1 && masks.a_to_s(j) == 1) keep = 1;
    out(i) = keep;
  }
  return out;
}

Eigen::VectorXi aia_only_vector(const StructureMasks& masks) {
  Eigen::VectorXi cids = compose_cids_mask(masks);
  for (int i = 0; i < masks.d(); ++i)
    if (masks.a_to_s(i) == 1) cids(i) = 0;
  return cids;
}

StateSelector StateSelector::make(SelectorMode mode, const StructureMasks& masks) {
  masks.validate();
  StateSelector sel;
  sel.mode = mode;
  switch (mode) {
    case SelectorMode::FULL: sel.mask = Eigen::VectorXi::Ones(masks.d()); break;
    case SelectorMode::DAIS: sel.mask = masks.a_to_s; break;
    case SelectorMode::AIA: sel.mask = aia_only_vector(masks); break;
    case SelectorMode::CIDS: sel.mask = compose_cids_mask(masks); break;
  }
  return sel;
}

Eigen::VectorXd select_state(const Eigen::VectorXd& s, const StateSelector& selector) {
  if (s.size() != selector.mask.size())
    throw std::invalid_argument("select_state: state length does not match mask");
  return s.cwiseProduct(selector.mask.cast<double>());
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

ReplayBuffer::Batch ReplayBuffer::sample(int k, Rng& rng) const {
  if (k < 1 || static_cast<std::size_t>(k) > data_.size())
    throw std::invalid_argument("ReplayBuffer::sample: k out of range");
  const std::vector<int> idx =
      rng.sample_without_replacement(static_cast<int>(data_.size()), k);
  Batch b;
  const auto d = data_.front().s.size();
  const auto adim = data_.front().a.size();
  b.s.resize(k, d);
  b.a.resize(k, adim);
  b.s1.resize(k, d);
  b.r.resize(k);
  for (int r = 0; r < k; ++r) {
    const Transition& t = data_[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
    b.s.row(r) = t.s.transpose();
    b.a.row(r) = t.a.transpose();
    b.s1.row(r) = t.s1.transpose();
    b.r(r) = t.r;
  }
  return b;
}

ActorCritic init_actor_critic(int d, int action_dim, const PolicyConfig& config) {
  config.validate();
  Rng rng(config.seed);
  ActorCritic ac;
  ac.actor = init_mlp(d, action_dim, config.hidden, config.hidden_layers, rng.next_u64());
  ac.critic = init_mlp(d + action_dim, 1, config.hidden, config.hidden_layers, rng.next_u64());
  ac.actor_target = ac.actor;
  ac.critic_target = ac.critic;
  ac.actor_opt = make_adam(ac.actor);
  ac.critic_opt = make_adam(ac.critic);
  return ac;
}

Eigen::VectorXd act(const DenseNet& actor, const Eigen::VectorXd& masked_state,
                    double noise_sigma, Rng& rng) {
  Eigen::VectorXd a =
      forward(actor, masked_state.transpose()).row(0).transpose().array().tanh().matrix();
  if (noise_sigma > 0.0)
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += noise_sigma * rng.normal();
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

namespace {

Eigen::MatrixXd hcat(const Eigen::MatrixXd& X, const Eigen::MatrixXd& A) {
  Eigen::MatrixXd out(X.rows(), X.cols() + A.cols());
  out << X, A;
  return out;
}

}  // namespace

UpdateStats ddpg_update(ActorCritic& ac, const ReplayBuffer::Batch& batch,
                        const PolicyConfig& config) {
  if (batch.rows() < 1) throw std::invalid_argument("ddpg_update: empty batch");
  const int n = batch.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  // TD target from the target nets: y = r + gamma * Q'(s', tanh(pi'(s'))).
  const Eigen::MatrixXd a1 =
      forward(ac.actor_target, batch.s1).array().tanh().matrix();
  const Eigen::VectorXd q1 = forward(ac.critic_target, hcat(batch.s1, a1)).col(0);
  const Eigen::VectorXd y = batch.r + config.gamma * q1;

  UpdateStats stats;

  {  // critic regression
    ForwardCache cache;
    const Eigen::VectorXd q = forward(ac.critic, hcat(batch.s, batch.a), &cache).col(0);
    const Eigen::VectorXd err = q - y;
    stats.critic_loss = err.squaredNorm() * inv_n;
    NetGrads grads = zero_grads(ac.critic);
    backward(ac.critic, cache, (2.0 * inv_n * err).eval(), grads);
    adam_step(ac.critic, grads, config.critic_lr, ac.critic_opt);
  }

  {  // actor ascends Q(s, tanh(pi(s))) through the freshly-updated critic
    ForwardCache actor_cache;
    const Eigen::MatrixXd u = forward(ac.actor, batch.s, &actor_cache);
    const Eigen::MatrixXd a_pi = u.array().tanh().matrix();
    ForwardCache critic_cache;
    const Eigen::VectorXd q = forward(ac.critic, hcat(batch.s, a_pi), &critic_cache).col(0);
    stats.actor_objective = q.mean();
    NetGrads critic_scratch = zero_grads(ac.critic);
    const Eigen::MatrixXd dInput =
        backward(ac.critic, critic_cache,
                 Eigen::MatrixXd::Constant(n, 1, -inv_n), critic_scratch);
    const Eigen::MatrixXd dA = dInput.rightCols(a_pi.cols());
    const Eigen::MatrixXd dU =
        (dA.array() * (1.0 - a_pi.array().square())).matrix();
    NetGrads grads = zero_grads(ac.actor);
    backward(ac.actor, actor_cache, dU, grads);
    adam_step(ac.actor, grads, config.actor_lr, ac.actor_opt);
  }

  soft_update(ac.actor_target, ac.actor, config.tau);
  soft_update(ac.critic_target, ac.critic, config.tau);
  return stats;
}

TrainPolicyResult train_policy(const EnvConfig& env_config, const StateSelector& selector,
                               const PolicyConfig& config, const EpisodeHook& on_episode_end) {
  config.validate();
  env_config.validate();
  if (selector.mask.size() != env_config.d)
    throw std::invalid_argument("train_policy: selector length does not match env d");
  if (selector.degenerate())
    throw std::invalid_argument(
        "train_policy: selector masks out every dim (degenerate); use FULL or fix the masks");

  Env env(env_config);
  const int d = env_config.d, k = env_config.action_dim;

  TrainPolicyResult result;
  result.nets = init_actor_critic(d, k, config);
  ActorCritic& ac = result.nets;

  Rng rng(config.seed);
  Rng noise_rng = rng.fork(1);
  Rng warmup_rng = rng.fork(2);
  Rng sample_rng = rng.fork(3);

  ReplayBuffer buffer(config.buffer_capacity);
  long steps = 0;
  result.curve.reserve(static_cast<std::size_t>(config.episodes));

  for (int ep = 0; ep < config.episodes; ++ep) {
    Eigen::VectorXd s = env.reset();
    double ret = 0.0;
    double loss_sum = 0.0;
    long loss_count = 0;
    while (!env.terminated()) {
      const Eigen::VectorXd ms = select_state(s, selector);
      Eigen::VectorXd a(k);
      if (steps < config.warmup_steps) {
        for (int i = 0; i < k; ++i) a(i) = warmup_rng.uniform(-1.0, 1.0);
      } else {
        a = act(ac.actor, ms, config.exploration_noise_sigma, noise_rng);
      }
      const Env::StepResult sr = env.step(a);
      buffer.push({ms, a, select_state(sr.next_state, selector), sr.reward});
      ret += sr.reward;
      ++steps;
      if (steps >= config.warmup_steps &&
          buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
        const UpdateStats us = ddpg_update(ac, buffer.sample(config.batch_size, sample_rng),
                                           config);
        loss_sum += us.critic_loss;
        ++loss_count;
      }
      s = sr.next_state;
    }
    EpisodeRecord rec;
    rec.episode = ep;
    rec.ret = ret;
    rec.ctr = ctr(ret, env_config.episode_length, env_config.max_reward);
    rec.critic_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.curve.push_back(rec);
    if (on_episode_end) on_episode_end(ep, ac);
  }
  return result;
}

EvalStats evaluate(const Env& env, const DenseNet& actor, const StateSelector& selector,
                   int episodes) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  Rng dummy(0);
  std::vector<double> rets, ctrs;
  rets.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    // Independent clone per rollout with a documented derived seed.
    Env rollout = env.clone_with_seed(env.config().seed + 7919ULL * (static_cast<std::uint64_t>(e) + 1));
    Eigen::VectorXd s = rollout.reset();
    double ret = 0.0;
    while (!rollout.terminated()) {
      const Env::StepResult sr = rollout.step(act(actor, select_state(s, selector), 0.0, dummy));
      ret += sr.reward;
      s = sr.next_state;
    }
    rets.push_back(ret);
    ctrs.push_back(ctr(ret, env.config().episode_length, env.config().max_reward));
  }
  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  EvalStats out;
  std::tie(out.return_mean, out.return_std) = mean_std(rets);
  std::tie(out.ctr_mean, out.ctr_std) = mean_std(ctrs);
  return out;
}

void save_policy(const std::string& path, const ActorCritic& ac) {
  save_checkpoint(path, {{"actor", &ac.actor},
                         {"critic", &ac.critic},
                         {"actor_target", &ac.actor_target},
                         {"critic_target", &ac.critic_target}});
}

ActorCritic load_policy(const std::string& path, const PolicyConfig& config) {
  auto nets = load_checkpoint(path);
  const char* names[] = {"actor", "critic", "actor_target", "critic_target"};
  for (const char* name : names)
    if (!nets.count(name)) throw DataError(std::string("policy checkpoint missing net: ") + name);
  ActorCritic ac;
  ac.actor = std::move(nets["actor"]);
  ac.critic = std::move(nets["critic"]);
  ac.actor_target = std::move(nets["actor_target"]);
  ac.critic_target = std::move(nets["critic_target"]);
  ac.actor_opt = make_adam(ac.actor);
  ac.critic_opt = make_adam(ac.critic);
  (void)config;
  return ac;
}

}  // namespace cids
