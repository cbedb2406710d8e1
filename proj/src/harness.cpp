#include "cids/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "cids/cmi_learner.hpp"
#include "cids/env.hpp"
#include "cids/errors.hpp"
#include "cids/masks.hpp"
#include "cids/nn.hpp"
#include "cids/policy.hpp"
#include "cids/rng.hpp"

namespace cids {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return Rng(base).fork(tag).next_u64();
}

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_stamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Every command drops a manifest.json next to its outputs: what ran, with
// which flags (hashed for quick comparison), which files came out, and which
// built-in conventions applied. `stamp` stays empty unless requested, so
// identical reruns produce byte-identical manifests.
struct Manifest {
  std::string command;
  ordered_json config = ordered_json::object();
  ordered_json decisions = ordered_json::object();
  std::vector<std::pair<std::string, std::string>> outputs;  // relative path, role
  bool stamp = false;

  void write(const fs::path& dir) const {
    ordered_json j;
    j["command"] = command;
    j["version"] = "cids 1.0.0";
    j["stamp"] = stamp ? utc_stamp() : "";
    j["config"] = config;
    j["config_hash"] = hex64(fnv1a(config.dump()));
    j["decisions"] = decisions;
    ordered_json outs = ordered_json::array();
    for (const auto& [path, role] : outputs)
      outs.push_back(ordered_json{{"path", path}, {"role", role}});
    j["outputs"] = outs;
    const fs::path p = dir / "manifest.json";
    std::ofstream f(p);
    if (!f) throw DataError("cannot open for writing: " + p.string());
    f << j.dump(2) << "\n";
  }
};

fs::path ensure_out_dir(const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw UsageError("cannot create output directory: " + out);
  return dir;
}

std::FILE* open_write(const fs::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw DataError("cannot open for writing: " + path.string());
  return f;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      throw UsageError(flag + ": cannot parse '" + item + "' as a number");
    }
    while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos]))) ++pos;
    if (pos != item.size())
      throw UsageError(flag + ": cannot parse '" + item + "' as a number");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(flag + ": needs at least one value");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& flag) {
  std::vector<std::uint64_t> out;
  for (double v : parse_double_list(text, flag)) {
    if (v < 0 || v != std::floor(v))
      throw UsageError(flag + ": seeds must be non-negative integers");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EnvConfig load_env_or_die(const std::string& path, const char* cmd) {
  if (path.empty()) throw UsageError(std::string(cmd) + ": --env is required");
  if (!fs::exists(path))
    throw DataError(std::string(cmd) + ": env config not found: " + path +
                    " (produce one with gen-env)");
  return load_env_config(path);
}

TrajectoryLog load_log_or_die(const std::string& path, const char* cmd) {
  if (!fs::exists(path))
    throw DataError(std::string(cmd) + ": trajectory log not found: " + path +
                    " (produce one with collect)");
  return load_log(path);
}

StructureMasks load_masks_or_die(const std::string& dir, const char* cmd) {
  if (!fs::exists(fs::path(dir) / "mask_report.json"))
    throw DataError(std::string(cmd) + ": no mask_report.json in " + dir +
                    " (produce one with learn-masks)");
  return load_mask_report(dir).binary;
}

DenseNet load_actor_or_die(const std::string& path, const char* cmd) {
  if (!fs::exists(path))
    throw DataError(std::string(cmd) + ": policy checkpoint not found: " + path +
                    " (produce one with train)");
  auto nets = load_checkpoint(path);
  auto it = nets.find("actor");
  if (it == nets.end())
    throw DataError(std::string(cmd) + ": checkpoint has no net named 'actor': " + path);
  return std::move(it->second);
}

// Selector from an optional mask-report dir. Without --masks only FULL makes
// sense (there is no structure to select by).
StateSelector make_selector(SelectorMode mode, const std::string& masks_dir, int d,
                            const char* cmd) {
  if (masks_dir.empty()) {
    if (mode != SelectorMode::FULL)
      throw UsageError(std::string(cmd) + ": --masks is required for mode " + to_string(mode));
    return StateSelector::make(SelectorMode::FULL, StructureMasks::identity(d));
  }
  const StructureMasks masks = load_masks_or_die(masks_dir, cmd);
  if (masks.d() != d)
    throw DataError(std::string(cmd) + ": mask report is for d=" + std::to_string(masks.d()) +
                    " but the env has d=" + std::to_string(d));
  return StateSelector::make(mode, masks);
}

// An empty selector cannot feed a policy net anything useful; training falls
// back to the FULL state and the manifest records that this happened. The
// requested mode name is kept in the output rows.
StateSelector selector_or_full(StateSelector sel, int d, ordered_json& decisions,
                               const std::string& label) {
  if (!sel.degenerate()) return sel;
  std::fprintf(stderr, "warning: %s selects no dims; training on the FULL state instead\n",
               label.c_str());
  if (!decisions.contains("degenerate_mask_fallback"))
    decisions["degenerate_mask_fallback"] = ordered_json::array();
  decisions["degenerate_mask_fallback"].push_back(label);
  StateSelector full;
  full.mode = SelectorMode::FULL;
  full.mask = Eigen::VectorXi::Ones(d);
  return full;
}

// Policy runs re-seed the env noise off the base config so that the same
// --seed gives every selector mode the identical environment realization.
EnvConfig run_env_config(const EnvConfig& base, std::uint64_t seed) {
  EnvConfig cfg = base;
  cfg.seed = derive_seed(base.seed, 1000 + seed);
  return cfg;
}

void write_curves_csv(const fs::path& path, const std::vector<EpisodeRecord>& curve,
                      const std::string& mode_name, std::uint64_t seed) {
  std::FILE* f = open_write(path);
  std::fprintf(f, "episode,return,ctr,critic_loss,selector_mode,seed\n");
  for (const auto& r : curve)
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%s,%llu\n", r.episode, r.ret, r.ctr, r.critic_loss,
                 mode_name.c_str(), static_cast<unsigned long long>(seed));
  std::fclose(f);
}

// ---------------------------------------------------------------- gen-env --

struct GenEnvOpts {
  int d = 8;
  int dais = 3;
  int aia_edges = 0;
  int action_dim = 2;
  double noise = 0.1;
  int episode_length = 20;
  double max_reward = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  bool stamp = false;
};

void cmd_gen_env(const GenEnvOpts& o) {
  if (o.d < 1) throw UsageError("gen-env: --d must be >= 1");
  if (o.dais < 1) throw UsageError("gen-env: --dais must be >= 1 (the action has to reach the state somewhere)");
  if (o.dais > o.d) throw UsageError("gen-env: --dais cannot exceed --d");
  if (o.aia_edges < 0) throw UsageError("gen-env: --aia-edges must be >= 0");
  if (o.aia_edges > o.d - o.dais)
    throw UsageError("gen-env: --aia-edges needs one non-driven dim per edge; only " +
                     std::to_string(o.d - o.dais) + " available");
  if (o.action_dim < 1) throw UsageError("gen-env: --action-dim must be >= 1");
  const fs::path dir = ensure_out_dir(o.out);

  Rng rng(o.seed);
  const std::vector<int> dais_dims = rng.sample_without_replacement(o.d, o.dais);
  std::vector<char> is_dais(static_cast<std::size_t>(o.d), 0);
  for (int i : dais_dims) is_dais[static_cast<std::size_t>(i)] = 1;
  std::vector<int> rest;
  for (int i = 0; i < o.d; ++i)
    if (!is_dais[static_cast<std::size_t>(i)]) rest.push_back(i);
  std::vector<int> aia_sources;
  for (int p : rng.sample_without_replacement(static_cast<int>(rest.size()), o.aia_edges))
    aia_sources.push_back(rest[static_cast<std::size_t>(p)]);
  std::vector<char> is_source(static_cast<std::size_t>(o.d), 0);
  for (int i : aia_sources) is_source[static_cast<std::size_t>(i)] = 1;

  EnvConfig cfg;
  cfg.d = o.d;
  cfg.action_dim = o.action_dim;
  cfg.masks.s_to_s = Eigen::MatrixXi::Identity(o.d, o.d);
  cfg.masks.a_to_s = Eigen::VectorXi::Zero(o.d);
  for (int j : dais_dims) cfg.masks.a_to_s(j) = 1;
  const auto shuffle = [&rng](auto& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(rng.below(i + 1))]);
  };

  cfg.weights_s = Eigen::MatrixXd::Zero(o.d, o.d);
  // Self-persistence: action-driven dims keep moderate memory (their current
  // value matters for fine control); ancestor dims persist hard, so their
  // value is a slow-moving regime worth tracking; plain decoys persist
  // hardest, which keeps them autocorrelated but inert.
  for (int i = 0; i < o.d; ++i) {
    if (is_dais[static_cast<std::size_t>(i)])
      cfg.weights_s(i, i) = 0.85 + 0.05 * rng.uniform();
    else if (is_source[static_cast<std::size_t>(i)])
      cfg.weights_s(i, i) = 0.88 + 0.07 * rng.uniform();
    else
      cfg.weights_s(i, i) = 1.40 + 0.20 * rng.uniform();
  }
  // Ancestor edges carry strong weights onto distinct driven dims (round-robin
  // over a shuffled order): a slow ancestor decides how close its target sits
  // to tanh saturation, which is exactly what a policy must read to aim well.
  std::vector<int> targets = dais_dims;
  shuffle(targets);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t e = 0; e < aia_sources.size(); ++e) {
    const int i = aia_sources[e];
    const int target = targets[e % targets.size()];
    cfg.masks.s_to_s(i, target) = 1;
    cfg.weights_s(i, target) = 0.65 + 0.15 * rng.uniform();
    edges.emplace_back(i, target);
  }
  // Every action channel improves some reward terms and worsens others: the
  // sign of weight x reward weight is a shuffled half-and-half pattern per
  // row. A corner push is then never free, so the best action is a trade-off,
  // and the right trade-off depends on where each driven dim currently sits.
  cfg.weights_a = Eigen::MatrixXd::Zero(o.action_dim, o.d);
  for (int k = 0; k < o.action_dim; ++k) {
    std::vector<double> gain(dais_dims.size());  // sign of (d reward / d a_k) per driven dim
    for (std::size_t p = 0; p < gain.size(); ++p) gain[p] = p % 2 == 0 ? 1.0 : -1.0;
    shuffle(gain);
    for (std::size_t p = 0; p < dais_dims.size(); ++p) {
      const double reward_sign = p % 2 == 0 ? 1.0 : -1.0;
      cfg.weights_a(k, dais_dims[p]) = gain[p] * reward_sign * (0.55 + 0.25 * rng.uniform());
    }
  }
  // Alternating reward signs across the driven dims: pushing everything up is
  // never the answer, so return hinges on resolving the trade-offs well.
  cfg.reward_weights = Eigen::VectorXd::Zero(o.d);
  for (std::size_t p = 0; p < dais_dims.size(); ++p)
    cfg.reward_weights(dais_dims[p]) =
        (p % 2 == 0 ? 1.0 : -1.0) / std::sqrt(static_cast<double>(o.dais));
  cfg.noise_sigma = o.noise;
  cfg.episode_length = o.episode_length;
  cfg.max_reward = o.max_reward;
  cfg.seed = o.seed;
  cfg.validate();
  save_env_config(cfg, (dir / "env.json").string());

  std::printf("env: d=%d action_dim=%d noise=%g episode_length=%d fingerprint=%s\n", cfg.d,
              cfg.action_dim, cfg.noise_sigma, cfg.episode_length,
              hex64(env_fingerprint(cfg)).c_str());
  std::printf("action-driven dims (1-based):");
  for (int j : dais_dims) std::printf(" %d", j + 1);
  std::printf("\nancestor edges (1-based):");
  if (edges.empty()) std::printf(" none");
  for (const auto& [i, j] : edges) std::printf(" %d->%d", i + 1, j + 1);
  std::printf("\nwrote %s\n", (dir / "env.json").string().c_str());

  Manifest m;
  m.command = "gen-env";
  m.stamp = o.stamp;
  m.config = ordered_json{{"d", o.d},
                          {"dais", o.dais},
                          {"aia_edges", o.aia_edges},
                          {"action_dim", o.action_dim},
                          {"noise", o.noise},
                          {"episode_length", o.episode_length},
                          {"max_reward", o.max_reward},
                          {"seed", o.seed},
                          {"out", o.out}};
  m.outputs = {{"env.json", "env-config"}};
  m.write(dir);
}

// ---------------------------------------------------------------- collect --

struct CollectOpts {
  std::string env, actor, masks, out;
  std::string mode = "FULL";
  int episodes = 2500;
  std::uint64_t seed = 0;
  double epsilon = 0.3;
  bool stamp = false;
};

void cmd_collect(const CollectOpts& o) {
  const EnvConfig cfg = load_env_or_die(o.env, "collect");
  if (o.episodes < 1) throw UsageError("collect: --episodes must be >= 1");
  if (o.epsilon < 0.0 || o.epsilon > 1.0) throw UsageError("collect: --epsilon must be in [0,1]");
  const fs::path dir = ensure_out_dir(o.out);

  Env env = Env(cfg).clone_with_seed(derive_seed(cfg.seed, 2000 + o.seed));
  Rng action_rng(derive_seed(cfg.seed, 3000 + o.seed));

  DenseNet actor;
  StateSelector sel;
  BehaviorPolicy behavior;
  if (!o.actor.empty()) {
    actor = load_actor_or_die(o.actor, "collect");
    sel = make_selector(selector_mode_from_string(o.mode), o.masks, cfg.d, "collect");
    const double eps = o.epsilon;
    const int k = cfg.action_dim;
    // Epsilon-mixture logging policy: mostly the greedy actor, an epsilon
    // share of uniform exploration so off-policy learning sees the whole
    // action range.
    behavior = [&actor, &sel, eps, k](const Eigen::VectorXd& s, Rng& rng) {
      if (rng.uniform() < eps) {
        Eigen::VectorXd a(k);
        for (int i = 0; i < k; ++i) a(i) = rng.uniform(-1.0, 1.0);
        return a;
      }
      return act(actor, select_state(s, sel), 0.0, rng);
    };
  } else {
    behavior = uniform_behavior(cfg.action_dim);
  }

  const TrajectoryLog log = collect(env, o.episodes, behavior, action_rng);
  save_log(log, (dir / "log.txt").string());

  double reward_sum = 0.0;
  for (const auto& t : log.records) reward_sum += t.r;
  std::printf("collected %zu transitions over %d episodes (mean reward %.4f)\n",
              log.records.size(), o.episodes,
              log.records.empty() ? 0.0 : reward_sum / static_cast<double>(log.records.size()));

  Manifest m;
  m.command = "collect";
  m.stamp = o.stamp;
  m.config = ordered_json{{"env", o.env},     {"episodes", o.episodes}, {"seed", o.seed},
                          {"actor", o.actor}, {"masks", o.masks},       {"mode", o.mode},
                          {"epsilon", o.epsilon}, {"out", o.out}};
  m.outputs = {{"log.txt", "trajectory-log"}};
  m.write(dir);
}

// ------------------------------------------------------------ learn-masks --

struct LearnMasksOpts {
  std::string log, env, out;
  LearnerConfig lc;
  bool stamp = false;
};

void cmd_learn_masks(const LearnMasksOpts& o) {
  const TrajectoryLog log = load_log_or_die(o.log, "learn-masks");
  const fs::path dir = ensure_out_dir(o.out);

  StructureMasks truth_masks;
  const StructureMasks* truth = nullptr;
  if (!o.env.empty()) {
    const EnvConfig cfg = load_env_or_die(o.env, "learn-masks");
    if (env_fingerprint(cfg) != log.fingerprint)
      std::fprintf(stderr,
                   "warning: log fingerprint %s does not match env %s; metrics may be bogus\n",
                   hex64(log.fingerprint).c_str(), hex64(env_fingerprint(cfg)).c_str());
    truth_masks = cfg.masks;
    truth = &truth_masks;
  }

  const MaskReport report = train_masks(log, o.lc, truth);
  save_mask_report(dir.string(), report);

  std::printf("active action->state gates: %d of %d\n", report.binary.a_to_s.sum(), report.d);
  std::printf("active state->state cross edges: %d\n", report.binary.s_to_s.sum() - report.d);
  std::printf("validation info: action channel %.6g nats, ancestor channel %.6g nats\n",
              report.cmi_dais, report.cmi_aia);
  if (report.metrics_a_to_s)
    std::printf("a->s vs truth: precision %.3f recall %.3f f1 %.3f\n",
                report.metrics_a_to_s->precision, report.metrics_a_to_s->recall,
                report.metrics_a_to_s->f1);
  if (report.metrics_s_to_s)
    std::printf("s->s vs truth: precision %.3f recall %.3f f1 %.3f\n",
                report.metrics_s_to_s->precision, report.metrics_s_to_s->recall,
                report.metrics_s_to_s->f1);

  Manifest m;
  m.command = "learn-masks";
  m.stamp = o.stamp;
  m.config = ordered_json{{"log", o.log},
                          {"env", o.env},
                          {"lambda1", o.lc.lambda1},
                          {"lambda2", o.lc.lambda2},
                          {"lr", o.lc.lr},
                          {"batch_size", o.lc.batch_size},
                          {"epochs", o.lc.epochs},
                          {"threshold", o.lc.threshold},
                          {"seed", o.lc.seed},
                          {"hidden", o.lc.hidden},
                          {"hidden_layers", o.lc.hidden_layers},
                          {"gate_lr", o.lc.gate_lr},
                          {"gate_ema", o.lc.gate_ema},
                          {"gate_interval", o.lc.gate_interval},
                          {"gate_warmup", o.lc.gate_warmup},
                          {"gate_eval_rows", o.lc.gate_eval_rows},
                          {"val_fraction", o.lc.val_fraction},
                          {"init_logit", o.lc.init_logit},
                          {"freeze_gates", o.lc.freeze_gates},
                          {"out", o.out}};
  m.decisions["aia_batches"] = "single-transition";
  m.outputs = {{"mask_report.json", "mask-report"}, {"loss_history.csv", "loss-history"}};
  m.write(dir);
}

// ------------------------------------------------------------------ train --

ordered_json policy_config_json(const PolicyConfig& pc) {
  return ordered_json{{"actor_lr", pc.actor_lr},
                      {"critic_lr", pc.critic_lr},
                      {"gamma", pc.gamma},
                      {"tau", pc.tau},
                      {"hidden", pc.hidden},
                      {"hidden_layers", pc.hidden_layers},
                      {"buffer_capacity", pc.buffer_capacity},
                      {"batch_size", pc.batch_size},
                      {"exploration_noise_sigma", pc.exploration_noise_sigma},
                      {"warmup_steps", pc.warmup_steps},
                      {"episodes", pc.episodes}};
}

struct TrainOpts {
  std::string env, masks, out;
  std::string mode = "CIDS";
  std::uint64_t seed = 0;
  PolicyConfig pc;
  bool stamp = false;
};

void cmd_train(const TrainOpts& o) {
  const EnvConfig base = load_env_or_die(o.env, "train");
  const fs::path dir = ensure_out_dir(o.out);
  const SelectorMode mode = selector_mode_from_string(o.mode);
  ordered_json decisions;
  decisions["next_state_masking"] = "masked";

  StateSelector sel = make_selector(mode, o.masks, base.d, "train");
  sel = selector_or_full(sel, base.d, decisions,
                         "train mode " + o.mode + " seed " + std::to_string(o.seed));

  const EnvConfig run_cfg = run_env_config(base, o.seed);
  PolicyConfig pc = o.pc;
  pc.seed = o.seed;
  const TrainPolicyResult result = train_policy(run_cfg, sel, pc);
  write_curves_csv(dir / "curves.csv", result.curve, o.mode, o.seed);
  save_policy((dir / "policy.ckpt").string(), result.nets);

  Env env(run_cfg);
  const EvalStats st = evaluate(env, result.nets.actor, sel, 10);
  std::printf("trained %s seed %llu for %d episodes\n", o.mode.c_str(),
              static_cast<unsigned long long>(o.seed), pc.episodes);
  std::printf("greedy eval (10 episodes): return %.4f +- %.4f, ctr %.4f +- %.4f\n",
              st.return_mean, st.return_std, st.ctr_mean, st.ctr_std);

  Manifest m;
  m.command = "train";
  m.stamp = o.stamp;
  m.config = ordered_json{{"env", o.env}, {"masks", o.masks}, {"mode", o.mode}, {"seed", o.seed}};
  m.config.update(policy_config_json(pc));
  m.config["out"] = o.out;
  m.decisions = decisions;
  m.outputs = {{"curves.csv", "training-curve"}, {"policy.ckpt", "policy-checkpoint"}};
  m.write(dir);
}

// --------------------------------------------------------------- evaluate --

struct EvaluateOpts {
  std::string env, actor, masks, out;
  std::string mode = "FULL";
  int episodes = 20;
  bool stamp = false;
};

void cmd_evaluate(const EvaluateOpts& o) {
  const EnvConfig cfg = load_env_or_die(o.env, "evaluate");
  if (o.episodes < 1) throw UsageError("evaluate: --episodes must be >= 1");
  const fs::path dir = ensure_out_dir(o.out);
  const DenseNet actor = load_actor_or_die(o.actor, "evaluate");
  if (actor.in_dim() != cfg.d)
    throw DataError("evaluate: actor expects " + std::to_string(actor.in_dim()) +
                    " input dims but the env has d=" + std::to_string(cfg.d));
  StateSelector sel = make_selector(selector_mode_from_string(o.mode), o.masks, cfg.d, "evaluate");
  if (sel.degenerate()) throw DataError("evaluate: the selected mask keeps no dims");

  Env env(cfg);
  const EvalStats st = evaluate(env, actor, sel, o.episodes);
  std::FILE* f = open_write(dir / "eval.csv");
  std::fprintf(f, "mode,episodes,return_mean,return_std,ctr_mean,ctr_std\n");
  std::fprintf(f, "%s,%d,%.17g,%.17g,%.17g,%.17g\n", o.mode.c_str(), o.episodes, st.return_mean,
               st.return_std, st.ctr_mean, st.ctr_std);
  std::fclose(f);
  std::printf("%s over %d episodes: return %.4f +- %.4f, ctr %.4f +- %.4f\n", o.mode.c_str(),
              o.episodes, st.return_mean, st.return_std, st.ctr_mean, st.ctr_std);

  Manifest m;
  m.command = "evaluate";
  m.stamp = o.stamp;
  m.config = ordered_json{{"env", o.env},   {"actor", o.actor},       {"masks", o.masks},
                          {"mode", o.mode}, {"episodes", o.episodes}, {"out", o.out}};
  m.outputs = {{"eval.csv", "evaluation"}};
  m.write(dir);
}

// ----------------------------------------------------------------- ablate --

struct AblateOpts {
  std::string env, masks, out;
  std::string seeds = "0,1,2,3,4";
  int eval_episodes = 20;
  PolicyConfig pc;
  bool stamp = false;
};

void cmd_ablate(const AblateOpts& o) {
  const EnvConfig base = load_env_or_die(o.env, "ablate");
  if (o.masks.empty()) throw UsageError("ablate: --masks is required");
  const StructureMasks masks = load_masks_or_die(o.masks, "ablate");
  if (masks.d() != base.d)
    throw DataError("ablate: mask report is for d=" + std::to_string(masks.d()) +
                    " but the env has d=" + std::to_string(base.d));
  const std::vector<std::uint64_t> seeds = parse_seed_list(o.seeds, "ablate --seeds");
  if (o.eval_episodes < 1) throw UsageError("ablate: --eval-episodes must be >= 1");
  const fs::path dir = ensure_out_dir(o.out);
  ordered_json decisions;
  decisions["next_state_masking"] = "masked";

  const SelectorMode modes[] = {SelectorMode::FULL, SelectorMode::DAIS, SelectorMode::AIA,
                                SelectorMode::CIDS};
  std::FILE* sf = open_write(dir / "summary.csv");
  std::fprintf(sf, "mode,seed,return_mean,return_std,ctr_mean,ctr_std\n");
  std::vector<std::pair<std::string, std::string>> outputs;
  std::map<std::string, std::vector<double>> mode_returns;

  for (const SelectorMode mode : modes) {
    const std::string name = to_string(mode);
    for (const std::uint64_t seed : seeds) {
      StateSelector sel = StateSelector::make(mode, masks);
      sel = selector_or_full(sel, base.d, decisions,
                             "ablate mode " + name + " seed " + std::to_string(seed));
      const EnvConfig run_cfg = run_env_config(base, seed);
      PolicyConfig pc = o.pc;
      pc.seed = seed;
      const TrainPolicyResult result = train_policy(run_cfg, sel, pc);
      const std::string fname = "curves_" + name + "_" + std::to_string(seed) + ".csv";
      write_curves_csv(dir / fname, result.curve, name, seed);
      outputs.emplace_back(fname, "training-curve");

      Env env(run_cfg);
      const EvalStats st = evaluate(env, result.nets.actor, sel, o.eval_episodes);
      std::fprintf(sf, "%s,%llu,%.17g,%.17g,%.17g,%.17g\n", name.c_str(),
                   static_cast<unsigned long long>(seed), st.return_mean, st.return_std,
                   st.ctr_mean, st.ctr_std);
      mode_returns[name].push_back(st.return_mean);
      std::printf("ablate %s seed %llu: return %.4f, ctr %.4f\n", name.c_str(),
                  static_cast<unsigned long long>(seed), st.return_mean, st.ctr_mean);
    }
  }
  std::fclose(sf);

  for (const SelectorMode mode : modes) {
    const auto& v = mode_returns[to_string(mode)];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    std::printf("%s: return %.4f +- %.4f over %zu seeds\n", to_string(mode).c_str(), mean,
                std::sqrt(var), v.size());
  }

  outputs.emplace_back("summary.csv", "ablation-summary");
  Manifest m;
  m.command = "ablate";
  m.stamp = o.stamp;
  m.config = ordered_json{
      {"env", o.env}, {"masks", o.masks}, {"seeds", o.seeds}, {"eval_episodes", o.eval_episodes}};
  m.config.update(policy_config_json(o.pc));
  m.config["out"] = o.out;
  m.decisions = decisions;
  m.outputs = std::move(outputs);
  m.write(dir);
}

// ----------------------------------------------------------- sweep-lambda --

struct SweepOpts {
  std::string env, out;
  std::string grid = "0,1e-4,5e-4,9e-4";
  std::string seeds = "0,1,2,3,4";
  int collect_episodes = 2500;
  int epochs = 8;
  int episodes = 150;
  int checkpoints = 5;
  int eval_episodes = 10;
  bool stamp = false;
};

void cmd_sweep(const SweepOpts& o) {
  const EnvConfig base = load_env_or_die(o.env, "sweep-lambda");
  const std::vector<double> grid = parse_double_list(o.grid, "sweep-lambda --grid");
  const std::vector<std::uint64_t> seeds = parse_seed_list(o.seeds, "sweep-lambda --seeds");
  for (double lam : grid)
    if (lam < 0) throw UsageError("sweep-lambda: --grid values must be >= 0");
  if (o.collect_episodes < 1) throw UsageError("sweep-lambda: --collect-episodes must be >= 1");
  if (o.checkpoints < 1) throw UsageError("sweep-lambda: --checkpoints must be >= 1");
  if (o.episodes < o.checkpoints)
    throw UsageError("sweep-lambda: --episodes must be >= --checkpoints");
  if (o.eval_episodes < 1) throw UsageError("sweep-lambda: --eval-episodes must be >= 1");
  const fs::path dir = ensure_out_dir(o.out);
  ordered_json decisions;
  decisions["next_state_masking"] = "masked";
  decisions["aia_batches"] = "single-transition";

  // Mid-training evaluation marks: evenly spaced, the last at the final episode.
  std::vector<int> marks;
  for (int i = 1; i <= o.checkpoints; ++i)
    marks.push_back(static_cast<int>((static_cast<long>(i) * o.episodes) / o.checkpoints) - 1);

  std::FILE* f = open_write(dir / "sweep.csv");
  std::fprintf(f, "lambda1,seed,checkpoint_step,ctr_mean,ctr_std,active_gates\n");
  std::map<double, std::vector<double>> active_by_lambda;

  for (const std::uint64_t seed : seeds) {
    // One shared log per seed: the sweep varies only the sparsity penalty.
    Env env = Env(base).clone_with_seed(derive_seed(base.seed, 2000 + seed));
    Rng action_rng(derive_seed(base.seed, 3000 + seed));
    const TrajectoryLog log =
        collect(env, o.collect_episodes, uniform_behavior(base.action_dim), action_rng);

    for (const double lam : grid) {
      LearnerConfig lc;
      lc.lambda1 = lam;
      lc.epochs = o.epochs;
      lc.seed = seed;
      const MaskReport report = train_masks(log, lc, &base.masks);
      const int active = report.binary.a_to_s.sum();
      active_by_lambda[lam].push_back(static_cast<double>(active));

      StateSelector sel = StateSelector::make(SelectorMode::CIDS, report.binary);
      char lam_text[32];
      std::snprintf(lam_text, sizeof lam_text, "%g", lam);
      sel = selector_or_full(sel, base.d, decisions,
                             "sweep lambda1 " + std::string(lam_text) + " seed " +
                                 std::to_string(seed));
      const EnvConfig run_cfg = run_env_config(base, seed);
      PolicyConfig pc;
      pc.episodes = o.episodes;
      pc.seed = seed;
      const EpisodeHook hook = [&](int ep, const ActorCritic& nets) {
        if (!std::binary_search(marks.begin(), marks.end(), ep)) return;
        Env eval_env(run_cfg);
        const EvalStats st = evaluate(eval_env, nets.actor, sel, o.eval_episodes);
        std::fprintf(f, "%.17g,%llu,%d,%.17g,%.17g,%d\n", lam,
                     static_cast<unsigned long long>(seed), ep + 1, st.ctr_mean, st.ctr_std,
                     active);
      };
      train_policy(run_cfg, sel, pc, hook);
      std::printf("sweep lambda1=%g seed=%llu: %d active action gates\n", lam,
                  static_cast<unsigned long long>(seed), active);
    }
  }
  std::fclose(f);

  for (const auto& [lam, counts] : active_by_lambda)
    std::printf("lambda1=%g: median active action gates %.1f\n", lam, median_of(counts));

  Manifest m;
  m.command = "sweep-lambda";
  m.stamp = o.stamp;
  m.config = ordered_json{{"env", o.env},
                          {"grid", o.grid},
                          {"seeds", o.seeds},
                          {"collect_episodes", o.collect_episodes},
                          {"epochs", o.epochs},
                          {"episodes", o.episodes},
                          {"checkpoints", o.checkpoints},
                          {"eval_episodes", o.eval_episodes},
                          {"out", o.out}};
  m.decisions = decisions;
  m.outputs = {{"sweep.csv", "lambda-sweep"}};
  m.write(dir);
}

// ----------------------------------------------------------------- report --

struct ReportOpts {
  std::string run_dir, out, log, actor, masks;
  std::string mode = "FULL";
  double eps = 0.5;
  bool stamp = false;
};

// Mean of a column over the last `tail` data rows of a small CSV.
double csv_tail_mean(const fs::path& path, int column, int tail) {
  std::ifstream in(path);
  if (!in) throw DataError("report: cannot read " + path.string());
  std::string line;
  std::vector<double> vals;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; std::getline(ss, cell, ','); ++c)
      if (c == column) vals.push_back(std::stod(cell));
  }
  if (vals.empty()) return 0.0;
  const std::size_t n = vals.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(tail), n);
  double sum = 0.0;
  for (std::size_t i = n - k; i < n; ++i) sum += vals[i];
  return sum / static_cast<double>(k);
}

void cmd_report(const ReportOpts& o) {
  const fs::path root(o.run_dir);
  if (!fs::is_directory(root)) throw DataError("report: run dir not found: " + o.run_dir);
  std::vector<fs::path> manifests;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "manifest.json")
      manifests.push_back(e.path());
  std::sort(manifests.begin(), manifests.end());
  if (manifests.empty())
    throw DataError("report: no manifest.json under " + o.run_dir + "; nothing to report");
  const fs::path dir = ensure_out_dir(o.out);

  std::ostringstream rep;
  rep << "cids run report\n===============\n\n";
  ordered_json all_decisions = ordered_json::object();
  struct Entry {
    fs::path dir;
    ordered_json manifest;
  };
  std::vector<Entry> entries;
  for (const auto& mp : manifests) {
    std::ifstream in(mp);
    ordered_json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw DataError("report: cannot parse " + mp.string() + ": " + e.what());
    }
    entries.push_back({mp.parent_path(), j});
    rep << "- " << fs::relative(mp, root).string() << "\n";
    rep << "  command: " << j.value("command", std::string("?")) << "\n";
    rep << "  config_hash: " << j.value("config_hash", std::string("?")) << "\n";
    const std::string stamp = j.value("stamp", std::string());
    if (!stamp.empty()) rep << "  stamp: " << stamp << "\n";
    if (j.contains("outputs"))
      for (const auto& out : j["outputs"])
        rep << "  output: " << out.value("path", std::string("?")) << " ("
            << out.value("role", std::string("?")) << ")\n";
    if (j.contains("decisions"))
      for (const auto& [key, value] : j["decisions"].items()) all_decisions[key] = value;
    rep << "\n";
  }

  rep << "recorded decisions\n------------------\n";
  if (all_decisions.empty())
    rep << "(none)\n";
  else
    for (const auto& [key, value] : all_decisions.items())
      rep << key << ": " << value.dump() << "\n";

  std::ostringstream curves, tables, masks_sec;
  for (const auto& entry : entries) {
    if (!entry.manifest.contains("outputs")) continue;
    for (const auto& out : entry.manifest["outputs"]) {
      const std::string path = out.value("path", std::string());
      const std::string role = out.value("role", std::string());
      const fs::path file = entry.dir / path;
      const std::string rel = fs::relative(file, root).string();
      if (role == "training-curve" && fs::exists(file)) {
        curves << rel << ": last-10 return " << csv_tail_mean(file, 1, 10) << ", last-10 ctr "
               << csv_tail_mean(file, 2, 10) << "\n";
      } else if ((role == "evaluation" || role == "ablation-summary" || role == "lambda-sweep") &&
                 fs::exists(file)) {
        tables << rel << ":\n";
        std::ifstream in(file);
        std::string line;
        while (std::getline(in, line)) tables << "  " << line << "\n";
        tables << "\n";
      } else if (role == "mask-report" && fs::exists(file)) {
        std::ifstream in(file);
        ordered_json j;
        try {
          in >> j;
        } catch (const std::exception&) {
          continue;
        }
        int active_a = 0, cross = 0;
        if (j.contains("binary_a"))
          for (const auto& v : j["binary_a"]) active_a += v.get<int>();
        if (j.contains("binary_s")) {
          int i = 0;
          for (const auto& row : j["binary_s"]) {
            int jj = 0;
            for (const auto& v : row) {
              if (i != jj) cross += v.get<int>();
              ++jj;
            }
            ++i;
          }
        }
        masks_sec << rel << ": " << active_a << " action gates, " << cross
                  << " cross edges";
        if (j.contains("metrics_a_to_s") && !j["metrics_a_to_s"].is_null())
          masks_sec << ", a->s f1 " << j["metrics_a_to_s"].value("f1", 0.0);
        if (j.contains("metrics_s_to_s") && !j["metrics_s_to_s"].is_null())
          masks_sec << ", s->s f1 " << j["metrics_s_to_s"].value("f1", 0.0);
        masks_sec << "\n";
      }
    }
  }
  if (!masks_sec.str().empty())
    rep << "\nlearned masks\n-------------\n" << masks_sec.str();
  if (!curves.str().empty())
    rep << "\ntraining curves (means over the last 10 episodes)\n"
        << "-------------------------------------------------\n"
        << curves.str();
  if (!tables.str().empty()) rep << "\nevaluation tables\n-----------------\n" << tables.str();

  std::vector<std::pair<std::string, std::string>> outputs = {{"report.txt", "report"}};

  // Optional offline check of a policy against a logged dataset: how often the
  // greedy action agrees with the logged one, split by whether that logged
  // step actually paid off.
  if (!o.log.empty() || !o.actor.empty()) {
    if (o.log.empty() || o.actor.empty())
      throw UsageError("report: offline metrics need both --log and --actor");
    if (o.eps <= 0.0) throw UsageError("report: --eps must be > 0");
    const TrajectoryLog log = load_log_or_die(o.log, "report");
    const DenseNet actor = load_actor_or_die(o.actor, "report");
    const StateSelector sel =
        make_selector(selector_mode_from_string(o.mode), o.masks, log.d, "report");
    Rng dummy(0);
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& t : log.records) {
      const Eigen::VectorXd ahat = act(actor, select_state(t.s, sel), 0.0, dummy);
      const bool hit = (ahat - t.a).cwiseAbs().maxCoeff() <= o.eps;
      const bool positive = t.r > 0.0;
      if (hit && positive) ++tp;
      else if (hit) ++fp;
      else if (positive) ++fn;
      else ++tn;
    }
    const long n = tp + fp + fn + tn;
    const double precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    const double recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    const double accuracy = n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
    std::FILE* f = open_write(dir / "offline_metrics.csv");
    std::fprintf(f, "eps,transitions,hits,positives,precision,recall,accuracy\n");
    std::fprintf(f, "%.17g,%ld,%ld,%ld,%.17g,%.17g,%.17g\n", o.eps, n, tp + fp, tp + fn,
                 precision, recall, accuracy);
    std::fclose(f);
    rep << "\noffline policy metrics (eps=" << o.eps << ", " << n << " transitions)\n"
        << "--------------------------------------------\n";
    rep << "agreement hits: " << tp + fp << ", rewarded steps: " << tp + fn << "\n";
    rep << "precision " << precision << ", recall " << recall << ", accuracy " << accuracy
        << "\n";
    outputs.emplace_back("offline_metrics.csv", "offline-metrics");
  }

  {
    const fs::path p = dir / "report.txt";
    std::ofstream f(p);
    if (!f) throw DataError("cannot open for writing: " + p.string());
    f << rep.str();
  }
  std::printf("report over %zu manifests written to %s\n", manifests.size(),
              (dir / "report.txt").string().c_str());

  Manifest m;
  m.command = "report";
  m.stamp = o.stamp;
  m.config = ordered_json{{"run_dir", o.run_dir}, {"log", o.log},   {"actor", o.actor},
                          {"masks", o.masks},     {"mode", o.mode}, {"eps", o.eps},
                          {"out", o.out}};
  m.outputs = std::move(outputs);
  m.write(dir);
}

// ------------------------------------------------------------ CLI wiring --

void add_policy_flags(CLI::App* cmd, PolicyConfig& pc) {
  cmd->add_option("--episodes", pc.episodes, "training episodes")->capture_default_str();
  cmd->add_option("--actor-lr", pc.actor_lr, "actor learning rate")->capture_default_str();
  cmd->add_option("--critic-lr", pc.critic_lr, "critic learning rate")->capture_default_str();
  cmd->add_option("--gamma", pc.gamma, "discount factor")->capture_default_str();
  cmd->add_option("--tau", pc.tau, "soft target update rate")->capture_default_str();
  cmd->add_option("--hidden", pc.hidden, "hidden width")->capture_default_str();
  cmd->add_option("--hidden-layers", pc.hidden_layers, "hidden layer count")->capture_default_str();
  cmd->add_option("--buffer-capacity", pc.buffer_capacity, "replay capacity")->capture_default_str();
  cmd->add_option("--batch-size", pc.batch_size, "update batch size")->capture_default_str();
  cmd->add_option("--noise", pc.exploration_noise_sigma, "exploration noise sigma")
      ->capture_default_str();
  cmd->add_option("--warmup-steps", pc.warmup_steps, "random steps before updates")
      ->capture_default_str();
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"cids: indispensable-state masks and policies for recommender MDPs"};
  app.require_subcommand(1);
  const auto mode_check = CLI::IsMember({"FULL", "DAIS", "AIA", "CIDS"});

  GenEnvOpts ge;
  CLI::App* g = app.add_subcommand("gen-env", "generate a synthetic recommender environment");
  g->add_option("--d", ge.d, "state dims")->capture_default_str();
  g->add_option("--dais", ge.dais, "action-driven dims")->capture_default_str();
  g->add_option("--aia-edges", ge.aia_edges, "ancestor edges into driven dims")
      ->capture_default_str();
  g->add_option("--action-dim", ge.action_dim, "action dims")->capture_default_str();
  g->add_option("--noise", ge.noise, "transition noise sigma")->capture_default_str();
  g->add_option("--episode-length", ge.episode_length, "steps per episode")->capture_default_str();
  g->add_option("--max-reward", ge.max_reward, "reward clip bound")->capture_default_str();
  g->add_option("--seed", ge.seed, "generation seed")->capture_default_str();
  g->add_option("--out", ge.out, "output directory")->required();
  g->add_flag("--stamp", ge.stamp, "record wall-clock time in the manifest");
  g->callback([&ge] { cmd_gen_env(ge); });

  CollectOpts co;
  CLI::App* c = app.add_subcommand("collect", "log transitions from a behavior policy");
  c->add_option("--env", co.env, "env.json path")->required();
  c->add_option("--episodes", co.episodes, "episodes to log")->capture_default_str();
  c->add_option("--seed", co.seed, "collection seed")->capture_default_str();
  c->add_option("--actor", co.actor, "policy checkpoint for the greedy part (default: uniform)");
  c->add_option("--masks", co.masks, "mask-report dir the actor was trained with");
  c->add_option("--mode", co.mode, "selector mode for the actor")
      ->capture_default_str()
      ->check(mode_check);
  c->add_option("--epsilon", co.epsilon, "uniform-action share when --actor is set")
      ->capture_default_str();
  c->add_option("--out", co.out, "output directory")->required();
  c->add_flag("--stamp", co.stamp, "record wall-clock time in the manifest");
  c->callback([&co] { cmd_collect(co); });

  LearnMasksOpts lm;
  CLI::App* l = app.add_subcommand("learn-masks", "learn structure masks from a trajectory log");
  l->add_option("--log", lm.log, "trajectory log path")->required();
  l->add_option("--env", lm.env, "env.json with ground truth (adds mask metrics)");
  l->add_option("--lambda1", lm.lc.lambda1, "action-gate sparsity penalty")->capture_default_str();
  l->add_option("--lambda2", lm.lc.lambda2, "state-gate sparsity penalty")->capture_default_str();
  l->add_option("--lr", lm.lc.lr, "model learning rate")->capture_default_str();
  l->add_option("--batch-size", lm.lc.batch_size, "minibatch size")->capture_default_str();
  l->add_option("--epochs", lm.lc.epochs, "passes over the log")->capture_default_str();
  l->add_option("--threshold", lm.lc.threshold, "binary mask threshold")->capture_default_str();
  l->add_option("--seed", lm.lc.seed, "learner seed")->capture_default_str();
  l->add_option("--hidden", lm.lc.hidden, "hidden width")->capture_default_str();
  l->add_option("--hidden-layers", lm.lc.hidden_layers, "hidden layer count")
      ->capture_default_str();
  l->add_option("--gate-lr", lm.lc.gate_lr, "gate logit step size")->capture_default_str();
  l->add_option("--gate-ema", lm.lc.gate_ema, "gate statistic smoothing")->capture_default_str();
  l->add_option("--gate-interval", lm.lc.gate_interval, "optimizer steps between gate updates")
      ->capture_default_str();
  l->add_option("--gate-warmup", lm.lc.gate_warmup, "optimizer steps before gates move")
      ->capture_default_str();
  l->add_option("--gate-eval-rows", lm.lc.gate_eval_rows, "validation rows per gate update")
      ->capture_default_str();
  l->add_option("--val-fraction", lm.lc.val_fraction, "held-out episode fraction")
      ->capture_default_str();
  l->add_option("--init-logit", lm.lc.init_logit, "initial gate logit")->capture_default_str();
  l->add_flag("--freeze-gates", lm.lc.freeze_gates, "keep gates at their initial value");
  l->add_option("--out", lm.out, "output directory")->required();
  l->add_flag("--stamp", lm.stamp, "record wall-clock time in the manifest");
  l->callback([&lm] { cmd_learn_masks(lm); });

  TrainOpts tr;
  CLI::App* t = app.add_subcommand("train", "train a masked policy with the off-policy learner");
  t->add_option("--env", tr.env, "env.json path")->required();
  t->add_option("--masks", tr.masks, "mask-report dir (required unless --mode FULL)");
  t->add_option("--mode", tr.mode, "state selector: FULL, DAIS, AIA or CIDS")
      ->capture_default_str()
      ->check(mode_check);
  t->add_option("--seed", tr.seed, "run seed (shared across modes for paired runs)")
      ->capture_default_str();
  add_policy_flags(t, tr.pc);
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_flag("--stamp", tr.stamp, "record wall-clock time in the manifest");
  t->callback([&tr] { cmd_train(tr); });

  EvaluateOpts ev;
  CLI::App* e = app.add_subcommand("evaluate", "greedy rollouts of a trained policy");
  e->add_option("--env", ev.env, "env.json path")->required();
  e->add_option("--actor", ev.actor, "policy checkpoint")->required();
  e->add_option("--masks", ev.masks, "mask-report dir (required unless --mode FULL)");
  e->add_option("--mode", ev.mode, "state selector used in training")
      ->capture_default_str()
      ->check(mode_check);
  e->add_option("--episodes", ev.episodes, "evaluation episodes")->capture_default_str();
  e->add_option("--out", ev.out, "output directory")->required();
  e->add_flag("--stamp", ev.stamp, "record wall-clock time in the manifest");
  e->callback([&ev] { cmd_evaluate(ev); });

  AblateOpts ab;
  CLI::App* a = app.add_subcommand("ablate", "train FULL/DAIS/AIA/CIDS over paired seeds");
  a->add_option("--env", ab.env, "env.json path")->required();
  a->add_option("--masks", ab.masks, "mask-report dir")->required();
  a->add_option("--seeds", ab.seeds, "comma-separated seeds")->capture_default_str();
  a->add_option("--eval-episodes", ab.eval_episodes, "greedy episodes per run")
      ->capture_default_str();
  add_policy_flags(a, ab.pc);
  a->add_option("--out", ab.out, "output directory")->required();
  a->add_flag("--stamp", ab.stamp, "record wall-clock time in the manifest");
  a->callback([&ab] { cmd_ablate(ab); });

  SweepOpts sw;
  CLI::App* s = app.add_subcommand("sweep-lambda", "sparsity sweep: gates kept vs policy value");
  s->add_option("--env", sw.env, "env.json path")->required();
  s->add_option("--grid", sw.grid, "comma-separated lambda1 values")->capture_default_str();
  s->add_option("--seeds", sw.seeds, "comma-separated seeds")->capture_default_str();
  s->add_option("--collect-episodes", sw.collect_episodes, "logged episodes per seed")
      ->capture_default_str();
  s->add_option("--epochs", sw.epochs, "mask-learning epochs")->capture_default_str();
  s->add_option("--episodes", sw.episodes, "policy episodes per cell")->capture_default_str();
  s->add_option("--checkpoints", sw.checkpoints, "evaluations per training run")
      ->capture_default_str();
  s->add_option("--eval-episodes", sw.eval_episodes, "greedy episodes per evaluation")
      ->capture_default_str();
  s->add_option("--out", sw.out, "output directory")->required();
  s->add_flag("--stamp", sw.stamp, "record wall-clock time in the manifest");
  s->callback([&sw] { cmd_sweep(sw); });

  ReportOpts rp;
  CLI::App* r = app.add_subcommand("report", "summarize every manifest under a run directory");
  r->add_option("--run-dir", rp.run_dir, "directory to scan")->required();
  r->add_option("--log", rp.log, "trajectory log for offline policy metrics");
  r->add_option("--actor", rp.actor, "policy checkpoint for offline policy metrics");
  r->add_option("--masks", rp.masks, "mask-report dir for the offline actor");
  r->add_option("--mode", rp.mode, "selector mode for the offline actor")
      ->capture_default_str()
      ->check(mode_check);
  r->add_option("--eps", rp.eps, "per-dim action agreement tolerance")->capture_default_str();
  r->add_option("--out", rp.out, "output directory")->required();
  r->add_flag("--stamp", rp.stamp, "record wall-clock time in the manifest");
  r->callback([&rp] { cmd_report(rp); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const UsageError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  } catch (const DataError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}

}  // namespace cids
