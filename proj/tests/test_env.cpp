#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "cids/env.hpp"

using namespace cids;

namespace {

EnvConfig small_config(std::uint64_t seed = 0, double noise = 0.1) {
  EnvConfig cfg;
  cfg.d = 2;
  cfg.action_dim = 1;
  cfg.masks = StructureMasks::identity(2);
  cfg.masks.a_to_s(0) = 1;
  cfg.weights_s = Eigen::MatrixXd::Zero(2, 2);
  cfg.weights_s(0, 0) = 0.3;
  cfg.weights_s(1, 1) = 0.8;
  cfg.weights_a = Eigen::MatrixXd::Zero(1, 2);
  cfg.weights_a(0, 0) = 0.9;
  cfg.reward_weights = Eigen::VectorXd::Zero(2);
  cfg.reward_weights(0) = 1.0;
  cfg.noise_sigma = noise;
  cfg.episode_length = 5;
  cfg.max_reward = 1.0;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("ctr is return over best attainable return") {
  CHECK(ctr(12.0, 4, 5.0) == doctest::Approx(0.6));
  CHECK(ctr(0.0, 20, 1.0) == 0.0);
  CHECK(ctr(20.0 * 0.5, 20, 0.5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ctr(1.0, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ctr(1.0, 5, 0.0), std::invalid_argument);
}

TEST_CASE("config validation catches shape mismatches") {
  EnvConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  EnvConfig bad = cfg;
  bad.weights_s = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.weights_a = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.reward_weights = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.noise_sigma = -0.1;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.episode_length = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cfg;
  bad.masks.s_to_s(0, 0) = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("step applies the documented update rule") {
  // noise_sigma must stay positive, so use a sigma tiny enough that the noise
  // term is far below the comparison tolerance and the tanh update dominates.
  Env env(small_config(3, 1e-12));
  const Eigen::VectorXd s0 = env.reset();
  Eigen::VectorXd a(1);
  a << 0.4;
  const auto res = env.step(a);
  const double want0 = std::tanh(0.3 * s0(0) + 0.9 * 0.4);  // action-driven dim
  const double want1 = std::tanh(0.8 * s0(1));              // inert dim: self only
  CHECK(std::abs(res.next_state(0) - want0) < 1e-9);
  CHECK(std::abs(res.next_state(1) - want1) < 1e-9);
  CHECK(std::abs(res.reward - want0) < 1e-9);  // r_w = (1, 0), no clipping
  CHECK(!res.done);
}

TEST_CASE("episodes terminate after episode_length steps") {
  Env env(small_config());
  CHECK_THROWS_AS(env.step(Eigen::VectorXd::Zero(1)), std::logic_error);  // before reset
  env.reset();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(1);
  for (int t = 0; t < 5; ++t) {
    CHECK(!env.terminated());
    const auto res = env.step(a);
    CHECK(res.done == (t == 4));
  }
  CHECK(env.terminated());
  CHECK_THROWS_AS(env.step(a), std::logic_error);
  env.reset();
  CHECK(!env.terminated());
  CHECK_THROWS_AS(env.step(Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("same seed and actions replay bit-identically") {
  Env e1(small_config(11)), e2(small_config(11));
  const Eigen::VectorXd s1 = e1.reset(), s2 = e2.reset();
  CHECK(s1 == s2);
  Eigen::VectorXd a(1);
  for (int t = 0; t < 5; ++t) {
    a << 0.1 * t - 0.2;
    const auto r1 = e1.step(a), r2 = e2.step(a);
    CHECK(r1.next_state == r2.next_state);
    CHECK(r1.reward == r2.reward);
  }
}

TEST_CASE("clone_with_seed keeps dynamics but switches the noise stream") {
  Env base(small_config(11));
  Env clone = base.clone_with_seed(12);
  CHECK(clone.config().d == base.config().d);
  CHECK(clone.config().seed == 12);
  CHECK(env_fingerprint(clone.config()) == env_fingerprint(base.config()));
  // Same-seed clone replays the base exactly.
  Env replay = base.clone_with_seed(11);
  CHECK(replay.reset() == base.reset());
}

TEST_CASE("dims without an action edge ignore the action for one step") {
  Eigen::VectorXd a1(1), a2(1);
  a1 << 0.9;
  a2 << -0.7;
  Env e1(small_config(21)), e2(small_config(21));
  e1.reset();
  e2.reset();
  const auto r1 = e1.step(a1), r2 = e2.step(a2);
  CHECK(r1.next_state(1) == r2.next_state(1));  // no a edge into dim 1
  CHECK(r1.next_state(0) != r2.next_state(0));
}

TEST_CASE("reward is clipped to max_reward") {
  EnvConfig cfg = small_config(31);
  cfg.reward_weights << 50.0, 50.0;  // force saturation
  cfg.max_reward = 0.25;
  Env env(cfg);
  env.reset();
  Eigen::VectorXd a(1);
  a << 1.0;
  for (int t = 0; t < 5; ++t) {
    const auto res = env.step(a);
    CHECK(std::abs(res.reward) <= 0.25);
  }
}

TEST_CASE("collect logs every transition with consistent chaining") {
  Env env(small_config(41));
  Rng actions(7);
  const TrajectoryLog log = collect(env, 3, uniform_behavior(1), actions);
  CHECK(log.d == 2);
  CHECK(log.action_dim == 1);
  CHECK(log.fingerprint == env_fingerprint(env.config()));
  REQUIRE(log.records.size() == 3 * 5);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& t = log.records[i];
    CHECK(t.episode == static_cast<int>(i) / 5);
    CHECK(t.step == static_cast<int>(i) % 5);
    CHECK(t.done == (t.step == 4));
    CHECK(t.a.cwiseAbs().maxCoeff() <= 1.0);
    if (t.step > 0) CHECK(t.s == log.records[i - 1].s1);
  }
}

TEST_CASE("trajectory log text round-trips exactly") {
  Env env(small_config(51));
  Rng actions(9);
  const TrajectoryLog log = collect(env, 2, uniform_behavior(1), actions);
  std::ostringstream out;
  write_log(log, out);
  std::istringstream in(out.str());
  const TrajectoryLog back = read_log(in);
  CHECK(back.d == log.d);
  CHECK(back.action_dim == log.action_dim);
  CHECK(back.fingerprint == log.fingerprint);
  REQUIRE(back.records.size() == log.records.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    CHECK(back.records[i].episode == log.records[i].episode);
    CHECK(back.records[i].step == log.records[i].step);
    CHECK(back.records[i].s == log.records[i].s);    // bit-exact via %.17g
    CHECK(back.records[i].a == log.records[i].a);
    CHECK(back.records[i].s1 == log.records[i].s1);
    CHECK(back.records[i].r == log.records[i].r);
    CHECK(back.records[i].done == log.records[i].done);
  }
  std::ostringstream out2;
  write_log(back, out2);
  CHECK(out2.str() == out.str());
}

TEST_CASE("read_log reports the offending line") {
  std::istringstream bad1("nonsense\n");
  CHECK_THROWS_WITH_AS(read_log(bad1), doctest::Contains("line 1"), DataError);
  std::istringstream bad2(
      "# cids-log v1 d=2 adim=1 fingerprint=0\n"
      "ep=0 t=0 s=[0.0] a=[0.0] s1=[0.0 0.0] r=0 done=0\n");
  CHECK_THROWS_WITH_AS(read_log(bad2), doctest::Contains("line 2"), DataError);
}

TEST_CASE("env config json round-trips byte-identically") {
  const EnvConfig cfg = small_config(61);
  const std::string text = env_config_to_json(cfg);
  const EnvConfig back = env_config_from_json(text);
  CHECK(back.d == cfg.d);
  CHECK(back.action_dim == cfg.action_dim);
  CHECK(back.masks == cfg.masks);
  CHECK(back.weights_s == cfg.weights_s);
  CHECK(back.weights_a == cfg.weights_a);
  CHECK(back.reward_weights == cfg.reward_weights);
  CHECK(back.noise_sigma == cfg.noise_sigma);
  CHECK(back.episode_length == cfg.episode_length);
  CHECK(back.max_reward == cfg.max_reward);
  CHECK(back.seed == cfg.seed);
  CHECK(env_config_to_json(back) == text);
}

TEST_CASE("uniform behavior stays in the action box") {
  const BehaviorPolicy pi = uniform_behavior(3);
  Rng rng(71);
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd a = pi(s, rng);
    REQUIRE(a.size() == 3);
    CHECK(a.minCoeff() >= -1.0);
    CHECK(a.maxCoeff() <= 1.0);
  }
}
