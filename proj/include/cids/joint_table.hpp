#ifndef CIDS_JOINT_TABLE_HPP
#define CIDS_JOINT_TABLE_HPP

#include <cstddef>
#include <vector>

#include "cids/causal_graph.hpp"
#include "cids/masks.hpp"
#include "cids/rng.hpp"

namespace cids {

// Dense joint distribution over discrete variables. probs is row-major with
// the LAST variable's index moving fastest; size is the product of arities.
struct JointTable {
  std::vector<int> arities;
  std::vector<double> probs;

  std::size_t size() const;
  void validate() const;  // throws DataError: bad arity, size, negativity, sum != 1
};

// One draw from the joint: an assignment (one value per variable), found by
// walking the cumulative distribution at a uniform variate.
std::vector<int> sample_assignment(const JointTable& table, Rng& rng);

// Exact conditional mutual information I(X; Y | Z) in nats by full enumeration
// of the joint. X, Y, Z are disjoint variable index sets; Z may be empty.
// Terms with vanishing marginals contribute zero. Throws std::invalid_argument
// on overlapping/out-of-range sets, DataError on an invalid table.
double cmi_from_joint(const JointTable& table, const std::vector<int>& x,
                      const std::vector<int>& y, const std::vector<int>& z);

// One-step structural causal model over (s_0 dims, a_0, s_1 dims), all with
// the given arity, whose joint factorizes along build_temporal_dag(masks, 2).
// Conditional tables are drawn from peaked Dirichlet draws and rejection
// sampled until every d-connected pair (under every conditioning subset) shows
// CMI above a faithfulness margin, so d-connection <=> measurable dependence.
struct TabularScm {
  JointTable joint;
  StructureMasks masks;
  int d = 0;
  int arity = 0;

  // Variable layout: [0, d) are s_0 dims, d is the action, [d+1, 2d+1) are s_1 dims.
  int var_of(NodeRef n) const;
  NodeRef node_of(int var) const;
};

TabularScm tabular_scm(int d, const StructureMasks& masks, int arity, std::uint64_t seed);

// The faithfulness margin used by the rejection sampler. Anything d-connected
// is redrawn unless its CMI exceeds this; well above the 1e-9 independence
// threshold used by tests.
inline constexpr double kFaithfulnessMargin = 1e-7;

}  // namespace cids

#endif
