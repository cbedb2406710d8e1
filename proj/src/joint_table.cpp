#include "cids/joint_table.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cids/errors.hpp"

namespace cids {

std::size_t JointTable::size() const {
  std::size_t n = 1;
  for (int a : arities) n *= static_cast<std::size_t>(a);
  return n;
}

void JointTable::validate() const {
  if (arities.empty()) throw DataError("JointTable: no variables");
  std::size_t n = 1;
  for (int a : arities) {
    if (a < 1) throw DataError("JointTable: arity must be >= 1");
    n *= static_cast<std::size_t>(a);
    if (n > 1000000) throw DataError("JointTable: table larger than 1e6 entries");
  }
  if (probs.size() != n) throw DataError("JointTable: probs size does not match arities");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DataError("JointTable: negative or NaN probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw DataError("JointTable: probabilities must sum to 1");
}

namespace {

// Strides for packing a subset of variables into a flat index.
struct SubsetIndexer {
  std::vector<int> vars;
  std::vector<std::size_t> strides;
  std::size_t size = 1;

  SubsetIndexer(const std::vector<int>& v, const std::vector<int>& arities) : vars(v) {
    strides.resize(vars.size());
    for (int i = static_cast<int>(vars.size()) - 1; i >= 0; --i) {
      strides[i] = size;
      size *= static_cast<std::size_t>(arities[vars[i]]);
    }
  }

  std::size_t pack(const std::vector<int>& digits) const {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < vars.size(); ++i)
      idx += strides[i] * static_cast<std::size_t>(digits[vars[i]]);
    return idx;
  }
};

void check_vars(const std::vector<int>& v, int n_vars, std::vector<char>& used,
                const char* name) {
  for (int i : v) {
    if (i < 0 || i >= n_vars)
      throw std::invalid_argument(std::string("cmi_from_joint: ") + name +
                                  " has out-of-range variable");
    if (used[i])
      throw std::invalid_argument("cmi_from_joint: X, Y, Z must be disjoint");
    used[i] = 1;
  }
}

}  // namespace

double cmi_from_joint(const JointTable& table, const std::vector<int>& x,
                      const std::vector<int>& y, const std::vector<int>& z) {
  table.validate();
  const int n_vars = static_cast<int>(table.arities.size());
  std::vector<char> used(n_vars, 0);
  check_vars(x, n_vars, used, "X");
  check_vars(y, n_vars, used, "Y");
  check_vars(z, n_vars, used, "Z");
  if (x.empty() || y.empty())
    throw std::invalid_argument("cmi_from_joint: X and Y must be non-empty");

  std::vector<int> xz(x), yz(y), xyz(x);
  xz.insert(xz.end(), z.begin(), z.end());
  yz.insert(yz.end(), z.begin(), z.end());
  xyz.insert(xyz.end(), y.begin(), y.end());
  xyz.insert(xyz.end(), z.begin(), z.end());

  const SubsetIndexer ix_xyz(xyz, table.arities), ix_xz(xz, table.arities),
      ix_yz(yz, table.arities), ix_z(z, table.arities);

  std::vector<double> p_xyz(ix_xyz.size, 0.0), p_xz(ix_xz.size, 0.0),
      p_yz(ix_yz.size, 0.0), p_z(ix_z.size, 0.0);

  // One sweep over the joint fills all four marginals.
  std::vector<int> digits(n_vars, 0);
  for (std::size_t flat = 0; flat < table.probs.size(); ++flat) {
    const double p = table.probs[flat];
    if (p > 0.0) {
      p_xyz[ix_xyz.pack(digits)] += p;
      p_xz[ix_xz.pack(digits)] += p;
      p_yz[ix_yz.pack(digits)] += p;
      p_z[ix_z.pack(digits)] += p;
    }
    for (int v = n_vars - 1; v >= 0; --v) {  // mixed-radix increment, last fastest
      if (++digits[v] < table.arities[v]) break;
      digits[v] = 0;
    }
  }

  // I(X;Y|Z) = sum p(x,y,z) * ln[ p(x,y,z) p(z) / (p(x,z) p(y,z)) ].
  double cmi = 0.0;
  std::fill(digits.begin(), digits.end(), 0);
  std::vector<char> relevant(n_vars, 0);
  for (int v : xyz) relevant[v] = 1;
  // Enumerate only over the XYZ variables by sweeping the joint and visiting
  // each xyz cell once: simpler to iterate the packed xyz table directly.
  // Reconstruct digits for xyz cells via mixed radix over xyz's arities.
  std::vector<int> xyz_digits(xyz.size(), 0);
  for (std::size_t cell = 0; cell < p_xyz.size(); ++cell) {
    const double pxyz = p_xyz[cell];
    if (pxyz > 0.0) {
      // Scatter xyz digits into a full digit vector to pack sub-marginals.
      for (std::size_t i = 0; i < xyz.size(); ++i) digits[xyz[i]] = xyz_digits[i];
      const double pxz = p_xz[ix_xz.pack(digits)];
      const double pyz = p_yz[ix_yz.pack(digits)];
      const double pz = z.empty() ? 1.0 : p_z[ix_z.pack(digits)];
      if (pxz > 0.0 && pyz > 0.0 && pz > 0.0)
        cmi += pxyz * std::log(pxyz * pz / (pxz * pyz));
    }
    for (int i = static_cast<int>(xyz.size()) - 1; i >= 0; --i) {
      if (++xyz_digits[i] < table.arities[xyz[i]]) break;
      xyz_digits[i] = 0;
    }
  }
  return cmi < 0.0 ? 0.0 : cmi;  // clamp float dust; CMI is non-negative
}

std::vector<int> sample_assignment(const JointTable& table, Rng& rng) {
  table.validate();
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t cell = table.probs.size() - 1;  // fallback absorbs rounding slack
  for (std::size_t i = 0; i < table.probs.size(); ++i) {
    acc += table.probs[i];
    if (u < acc) {
      cell = i;
      break;
    }
  }
  std::vector<int> assignment(table.arities.size());
  for (int v = static_cast<int>(table.arities.size()) - 1; v >= 0; --v) {
    const auto arity = static_cast<std::size_t>(table.arities[static_cast<std::size_t>(v)]);
    assignment[static_cast<std::size_t>(v)] = static_cast<int>(cell % arity);
    cell /= arity;
  }
  return assignment;
}

int TabularScm::var_of(NodeRef n) const {
  if (n.kind == NodeKind::Action) {
    if (n.time != 0) throw std::invalid_argument("TabularScm: only a_0 exists");
    return d;
  }
  if (n.dim < 0 || n.dim >= d || n.time < 0 || n.time > 1)
    throw std::invalid_argument("TabularScm: node outside the one-step model");
  return n.time == 0 ? n.dim : d + 1 + n.dim;
}

NodeRef TabularScm::node_of(int var) const {
  if (var < 0 || var > 2 * d) throw std::invalid_argument("TabularScm: bad variable index");
  if (var < d) return NodeRef::state(var, 0);
  if (var == d) return NodeRef::action(0);
  return NodeRef::state(var - d - 1, 1);
}

namespace {

// Peaked random distribution over `arity` outcomes: normalized gamma draws
// with shape < 1 concentrate mass, which keeps dependencies strong and makes
// faithfulness rejections rare.
std::vector<double> random_dist(int arity, Rng& rng) {
  std::vector<double> p(arity);
  double sum = 0.0;
  for (int i = 0; i < arity; ++i) {
    // Gamma(0.35) via Kundu-Gupta style transform would pull in more machinery
    // than needed; squaring-and-cubing a uniform gives an equally peaked draw.
    const double u = rng.uniform();
    p[i] = 1e-4 + u * u * u;
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

TabularScm tabular_scm(int d, const StructureMasks& masks, int arity, std::uint64_t seed) {
  if (d < 1 || d > 3) throw std::invalid_argument("tabular_scm: need 1 <= d <= 3");
  if (arity < 2 || arity > 3) throw std::invalid_argument("tabular_scm: need 2 <= arity <= 3");
  masks.validate();
  if (masks.d() != d) throw std::invalid_argument("tabular_scm: mask size != d");

  const TemporalDag graph = build_temporal_dag(masks, 2);
  TabularScm scm;
  scm.masks = masks;
  scm.d = d;
  scm.arity = arity;
  const int n_vars = 2 * d + 1;
  scm.joint.arities.assign(n_vars, arity);

  // Precompute parent variable lists for the s_1 dims.
  std::vector<std::vector<int>> parent_vars(d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i)
      if (masks.s_to_s(i, j) == 1) parent_vars[j].push_back(i);
    if (masks.a_to_s(j) == 1) parent_vars[j].push_back(d);
  }

  // All (pair, conditioning subset) combinations with their d-separation
  // verdicts, fixed across redraws.
  struct Combo {
    int u, v;
    std::vector<int> cond;
    bool separated;
  };
  std::vector<Combo> combos;
  for (int u = 0; u < n_vars; ++u)
    for (int v = u + 1; v < n_vars; ++v) {
      std::vector<int> rest;
      for (int w = 0; w < n_vars; ++w)
        if (w != u && w != v) rest.push_back(w);
      const int m = static_cast<int>(rest.size());
      for (int bits = 0; bits < (1 << m); ++bits) {
        Combo c;
        c.u = u;
        c.v = v;
        for (int k = 0; k < m; ++k)
          if (bits & (1 << k)) c.cond.push_back(rest[k]);
        std::vector<NodeRef> cond_nodes;
        for (int w : c.cond) cond_nodes.push_back(scm.node_of(w));
        c.separated = d_separated(graph, {scm.node_of(u)}, {scm.node_of(v)}, cond_nodes);
        combos.push_back(std::move(c));
      }
    }

  Rng rng = Rng(seed).fork(0x5C3Bu);
  const int max_tries = 500;
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    // Draw root marginals and conditional tables.
    std::vector<std::vector<double>> root(d);
    for (int i = 0; i < d; ++i) root[i] = random_dist(arity, rng);
    std::vector<double> action_dist = random_dist(arity, rng);
    // cpt[j] indexed by packed parent assignment, each a distribution.
    std::vector<std::vector<std::vector<double>>> cpt(d);
    for (int j = 0; j < d; ++j) {
      std::size_t n_conf = 1;
      for (std::size_t k = 0; k < parent_vars[j].size(); ++k)
        n_conf *= static_cast<std::size_t>(arity);
      cpt[j].resize(n_conf);
      for (auto& dist : cpt[j]) dist = random_dist(arity, rng);
    }

    // Assemble the factorized joint.
    scm.joint.probs.assign(scm.joint.size(), 0.0);
    std::vector<int> digits(n_vars, 0);
    for (std::size_t flat = 0; flat < scm.joint.probs.size(); ++flat) {
      double p = action_dist[digits[d]];
      for (int i = 0; i < d; ++i) p *= root[i][digits[i]];
      for (int j = 0; j < d; ++j) {
        std::size_t conf = 0;
        for (int pv : parent_vars[j]) conf = conf * arity + static_cast<std::size_t>(digits[pv]);
        p *= cpt[j][conf][digits[d + 1 + j]];
      }
      scm.joint.probs[flat] = p;
      for (int v = n_vars - 1; v >= 0; --v) {
        if (++digits[v] < arity) break;
        digits[v] = 0;
      }
    }

    // Faithfulness: every d-connected combination must show real dependence.
    bool faithful = true;
    for (const Combo& c : combos) {
      if (c.separated) continue;
      if (cmi_from_joint(scm.joint, {c.u}, {c.v}, c.cond) < kFaithfulnessMargin) {
        faithful = false;
        break;
      }
    }
    if (faithful) return scm;
  }
  throw DataError("tabular_scm: no faithful parameterization found (seed exhausted)");
}

}  // namespace cids
