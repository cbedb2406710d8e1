#include "cids/env.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cids/errors.hpp"

namespace cids {

void EnvConfig::validate() const {
  if (d < 1) throw DataError("EnvConfig: d must be >= 1");
  if (action_dim < 1) throw DataError("EnvConfig: action_dim must be >= 1");
  masks.validate();
  if (masks.d() != d) throw DataError("EnvConfig: mask size != d");
  if (weights_s.rows() != d || weights_s.cols() != d)
    throw DataError("EnvConfig: weights_s must be d x d");
  if (weights_a.rows() != action_dim || weights_a.cols() != d)
    throw DataError("EnvConfig: weights_a must be action_dim x d");
  if (!(noise_sigma > 0.0)) throw DataError("EnvConfig: noise_sigma must be > 0");
  if (reward_weights.size() != d) throw DataError("EnvConfig: reward_weights must have d entries");
  if (episode_length < 1) throw DataError("EnvConfig: episode_length must be >= 1");
  if (!(max_reward > 0.0)) throw DataError("EnvConfig: max_reward must be > 0");
}

namespace {

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& j, const char* key) {
  if (!j.is_array() || j.empty())
    throw DataError(std::string("env config: ") + key + " must be a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw DataError(std::string("env config: ragged rows in ") + key);
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace

std::string env_config_to_json(const EnvConfig& cfg) {
  nlohmann::ordered_json j;
  j["d"] = cfg.d;
  j["action_dim"] = cfg.action_dim;
  nlohmann::ordered_json ms = nlohmann::ordered_json::array();
  for (int i = 0; i < cfg.d; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int c = 0; c < cfg.d; ++c) row.push_back(cfg.masks.s_to_s(i, c));
    ms.push_back(std::move(row));
  }
  j["m_s_to_s"] = std::move(ms);
  nlohmann::ordered_json ma = nlohmann::ordered_json::array();
  for (int i = 0; i < cfg.d; ++i) ma.push_back(cfg.masks.a_to_s(i));
  j["m_a_to_s"] = std::move(ma);
  j["weights_s"] = matrix_to_json(cfg.weights_s);
  j["weights_a"] = matrix_to_json(cfg.weights_a);
  j["noise_sigma"] = cfg.noise_sigma;
  nlohmann::ordered_json rw = nlohmann::ordered_json::array();
  for (int i = 0; i < cfg.d; ++i) rw.push_back(cfg.reward_weights(i));
  j["reward_weights"] = std::move(rw);
  j["episode_length"] = cfg.episode_length;
  j["max_reward"] = cfg.max_reward;
  j["seed"] = cfg.seed;
  return j.dump(2) + "\n";
}

EnvConfig env_config_from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("env config: not valid JSON: ") + e.what());
  }
  const char* required[] = {"d",           "action_dim",     "m_s_to_s", "m_a_to_s",
                            "weights_s",   "weights_a",      "noise_sigma",
                            "reward_weights", "episode_length", "max_reward", "seed"};
  for (const char* key : required)
    if (!j.contains(key)) throw DataError(std::string("env config: missing key '") + key + "'");

  EnvConfig cfg;
  try {
    cfg.d = j["d"].get<int>();
    cfg.action_dim = j["action_dim"].get<int>();
    if (cfg.d < 1) throw DataError("env config: d must be >= 1");
    cfg.masks.s_to_s.resize(cfg.d, cfg.d);
    const auto& ms = j["m_s_to_s"];
    if (!ms.is_array() || static_cast<int>(ms.size()) != cfg.d)
      throw DataError("env config: m_s_to_s must have d rows");
    for (int i = 0; i < cfg.d; ++i)
      for (int c = 0; c < cfg.d; ++c) cfg.masks.s_to_s(i, c) = ms[i][c].get<int>();
    cfg.masks.a_to_s.resize(cfg.d);
    for (int i = 0; i < cfg.d; ++i) cfg.masks.a_to_s(i) = j["m_a_to_s"][i].get<int>();
    cfg.weights_s = matrix_from_json(j["weights_s"], "weights_s");
    cfg.weights_a = matrix_from_json(j["weights_a"], "weights_a");
    cfg.noise_sigma = j["noise_sigma"].get<double>();
    cfg.reward_weights.resize(cfg.d);
    for (int i = 0; i < cfg.d; ++i) cfg.reward_weights(i) = j["reward_weights"][i].get<double>();
    cfg.episode_length = j["episode_length"].get<int>();
    cfg.max_reward = j["max_reward"].get<double>();
    cfg.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("env config: malformed value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_env_config(const EnvConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << env_config_to_json(cfg);
}

EnvConfig load_env_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open env config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return env_config_from_json(buf.str());
}

std::uint64_t env_fingerprint(const EnvConfig& cfg) {
  // The seed picks a noise realization, not the dynamics: derived-seed clones
  // of one env must keep its fingerprint, so hash with the seed zeroed.
  EnvConfig canon = cfg;
  canon.seed = 0;
  const std::string text = env_config_to_json(canon);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)), noise_rng_(0) {
  cfg_.validate();
  noise_rng_ = Rng(cfg_.seed).fork(0xE17u);
  state_ = Eigen::VectorXd::Zero(cfg_.d);
}

Eigen::VectorXd Env::reset() {
  state_.resize(cfg_.d);
  for (int i = 0; i < cfg_.d; ++i) state_(i) = noise_rng_.uniform(-0.5, 0.5);
  steps_ = 0;
  live_ = true;
  return state_;
}

Env::StepResult Env::step(const Eigen::VectorXd& action) {
  if (!live_) throw std::logic_error("Env::step: reset() the env first");
  if (terminated()) throw std::logic_error("Env::step: episode already terminated");
  if (action.size() != cfg_.action_dim)
    throw std::invalid_argument("Env::step: action has wrong dimension");

  Eigen::VectorXd next(cfg_.d);
  for (int j = 0; j < cfg_.d; ++j) {
    double pre = 0.0;
    for (int i = 0; i < cfg_.d; ++i)
      if (cfg_.masks.s_to_s(i, j) == 1) pre += cfg_.weights_s(i, j) * state_(i);
    if (cfg_.masks.a_to_s(j) == 1)
      for (int k = 0; k < cfg_.action_dim; ++k) pre += cfg_.weights_a(k, j) * action(k);
    next(j) = std::tanh(pre) + cfg_.noise_sigma * noise_rng_.normal();
  }

  double reward = cfg_.reward_weights.dot(next);
  reward = std::clamp(reward, -cfg_.max_reward, cfg_.max_reward);

  state_ = next;
  ++steps_;
  StepResult res;
  res.next_state = next;
  res.reward = reward;
  res.done = terminated();
  return res;
}

Env Env::clone_with_seed(std::uint64_t seed) const {
  EnvConfig cfg = cfg_;
  cfg.seed = seed;
  return Env(cfg);
}

double ctr(double episode_return, int episode_length, double max_reward) {
  if (episode_length < 1) throw std::invalid_argument("ctr: episode_length must be >= 1");
  if (!(max_reward > 0.0)) throw std::invalid_argument("ctr: max_reward must be > 0");
  return episode_return / (static_cast<double>(episode_length) * max_reward);
}

BehaviorPolicy uniform_behavior(int action_dim) {
  return [action_dim](const Eigen::VectorXd&, Rng& rng) {
    Eigen::VectorXd a(action_dim);
    for (int k = 0; k < action_dim; ++k) a(k) = rng.uniform(-1.0, 1.0);
    return a;
  };
}

TrajectoryLog collect(Env& env, int episodes, const BehaviorPolicy& behavior, Rng& action_rng) {
  if (episodes < 1) throw std::invalid_argument("collect: episodes must be >= 1");
  TrajectoryLog log;
  log.d = env.config().d;
  log.action_dim = env.config().action_dim;
  log.fingerprint = env_fingerprint(env.config());
  for (int ep = 0; ep < episodes; ++ep) {
    Eigen::VectorXd s = env.reset();
    for (int t = 0; t < env.config().episode_length; ++t) {
      const Eigen::VectorXd a = behavior(s, action_rng);
      const auto res = env.step(a);
      LoggedTransition rec;
      rec.episode = ep;
      rec.step = t;
      rec.s = s;
      rec.a = a;
      rec.s1 = res.next_state;
      rec.r = res.reward;
      rec.done = res.done;
      log.records.push_back(std::move(rec));
      s = res.next_state;
    }
  }
  return log;
}

namespace {

void print_vector(std::ostream& out, const Eigen::VectorXd& v) {
  out << "[";
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v(i));
    out << (i ? " " : "") << buf;
  }
  out << "]";
}

// Parse "[x y z]" starting at text[pos]; advances pos past the closing bracket.
Eigen::VectorXd parse_vector(const std::string& text, std::size_t& pos, int expect,
                             int line_no) {
  const auto fail = [line_no](const std::string& why) {
    throw DataError("log line " + std::to_string(line_no) + ": " + why);
  };
  if (pos >= text.size() || text[pos] != '[') fail("expected '['");
  ++pos;
  std::vector<double> vals;
  while (pos < text.size() && text[pos] != ']') {
    if (text[pos] == ' ') {
      ++pos;
      continue;
    }
    char* end = nullptr;
    const double v = std::strtod(text.c_str() + pos, &end);
    if (end == text.c_str() + pos) fail("bad number in vector");
    pos = static_cast<std::size_t>(end - text.c_str());
    vals.push_back(v);
  }
  if (pos >= text.size()) fail("unterminated vector");
  ++pos;  // skip ']'
  if (expect >= 0 && static_cast<int>(vals.size()) != expect)
    fail("vector has " + std::to_string(vals.size()) + " entries, expected " +
         std::to_string(expect));
  Eigen::VectorXd v(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) v(i) = vals[i];
  return v;
}

}  // namespace

void write_log(const TrajectoryLog& log, std::ostream& out) {
  char head[128];
  std::snprintf(head, sizeof head, "# cids-log v1 d=%d adim=%d fingerprint=%016" PRIx64,
                log.d, log.action_dim, log.fingerprint);
  out << head << "\n";
  char buf[64];
  for (const auto& rec : log.records) {
    out << "ep=" << rec.episode << " t=" << rec.step << " s=";
    print_vector(out, rec.s);
    out << " a=";
    print_vector(out, rec.a);
    out << " s1=";
    print_vector(out, rec.s1);
    std::snprintf(buf, sizeof buf, "%.17g", rec.r);
    out << " r=" << buf << " done=" << (rec.done ? 1 : 0) << "\n";
  }
}

TrajectoryLog read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("log: empty input");
  TrajectoryLog log;
  {
    unsigned long long fp = 0;
    if (std::sscanf(line.c_str(), "# cids-log v1 d=%d adim=%d fingerprint=%llx", &log.d,
                    &log.action_dim, &fp) != 3)
      throw DataError("log line 1: expected '# cids-log v1 d=<d> adim=<k> fingerprint=<hex>'");
    log.fingerprint = fp;
  }
  if (log.d < 1 || log.action_dim < 1) throw DataError("log line 1: bad dimensions");

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    LoggedTransition rec;
    int consumed = 0;
    if (std::sscanf(line.c_str(), "ep=%d t=%d s=%n", &rec.episode, &rec.step, &consumed) != 2 ||
        consumed == 0)
      throw DataError("log line " + std::to_string(line_no) + ": expected 'ep=<int> t=<int> s='");
    std::size_t pos = static_cast<std::size_t>(consumed);
    rec.s = parse_vector(line, pos, log.d, line_no);
    auto expect_token = [&](const char* tok) {
      const std::size_t len = std::strlen(tok);
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (line.compare(pos, len, tok) != 0)
        throw DataError("log line " + std::to_string(line_no) + ": expected '" +
                        std::string(tok) + "'");
      pos += len;
    };
    expect_token("a=");
    rec.a = parse_vector(line, pos, log.action_dim, line_no);
    expect_token("s1=");
    rec.s1 = parse_vector(line, pos, log.d, line_no);
    expect_token("r=");
    {
      char* end = nullptr;
      rec.r = std::strtod(line.c_str() + pos, &end);
      if (end == line.c_str() + pos)
        throw DataError("log line " + std::to_string(line_no) + ": bad reward");
      pos = static_cast<std::size_t>(end - line.c_str());
    }
    expect_token("done=");
    if (pos >= line.size() || (line[pos] != '0' && line[pos] != '1'))
      throw DataError("log line " + std::to_string(line_no) + ": done must be 0 or 1");
    rec.done = line[pos] == '1';
    log.records.push_back(std::move(rec));
  }
  return log;
}

void save_log(const TrajectoryLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  write_log(log, out);
}

TrajectoryLog load_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open log: " + path);
  return read_log(in);
}

}  // namespace cids
