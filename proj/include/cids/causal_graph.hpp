#ifndef CIDS_CAUSAL_GRAPH_HPP
#define CIDS_CAUSAL_GRAPH_HPP

#include <compare>
#include <iosfwd>
#include <string>
#include <vector>

#include "cids/masks.hpp"

namespace cids {

enum class NodeKind { Action, StateDim };

// One node of the time-unrolled MDP graph: the action at time t, or state
// dimension `dim` at time t. dim is -1 for action nodes.
struct NodeRef {
  NodeKind kind = NodeKind::StateDim;
  int dim = -1;
  int time = 0;

  static NodeRef action(int t) { return NodeRef{NodeKind::Action, -1, t}; }
  static NodeRef state(int dim, int t) { return NodeRef{NodeKind::StateDim, dim, t}; }

  auto operator<=>(const NodeRef&) const = default;
};

// Sorted set of state-dimension indices in [0, d).
struct DimSet {
  std::vector<int> dims;  // ascending, unique

  static DimSet of(std::vector<int> v);
  bool contains(int i) const;
  bool operator==(const DimSet&) const = default;
};

// Directed acyclic graph over `horizon` state frames (times 0..horizon-1) and
// the horizon-1 actions between them. Edges only run from frame t to t+1:
// a_t -> s^j_{t+1} or s^i_t -> s^j_{t+1}. Nothing points into an action.
class TemporalDag {
public:
  TemporalDag(int d, int horizon);

  int d() const { return d_; }
  int horizon() const { return horizon_; }
  int node_count() const { return d_ * horizon_ + (horizon_ - 1); }

  int index_of(NodeRef n) const;       // throws std::invalid_argument if absent
  NodeRef node_at(int index) const;
  bool has_node(NodeRef n) const;

  void add_edge(NodeRef from, NodeRef to);
  bool has_edge(NodeRef from, NodeRef to) const;
  std::size_t edge_count() const { return edge_count_; }

  const std::vector<int>& parents(int node_index) const { return parents_[node_index]; }
  const std::vector<int>& children(int node_index) const { return children_[node_index]; }

  // All edges, ordered by (time, kind, dims) for deterministic serialization.
  std::vector<std::pair<NodeRef, NodeRef>> edges() const;

private:
  int d_ = 0;
  int horizon_ = 0;
  std::size_t edge_count_ = 0;
  std::vector<std::vector<int>> parents_, children_;
};

// Unroll one-step structure masks over `horizon` frames (horizon >= 2).
// Every frame gets the same a->s and s->s edges; the s_to_s diagonal must be 1.
TemporalDag build_temporal_dag(const StructureMasks& masks, int horizon);

// True iff every undirected path between A and B is blocked given S:
// a chain/fork middle node in S blocks, a collider blocks unless it or one of
// its descendants is in S. A, B, S must be pairwise disjoint and non-empty for
// A and B. Implemented as active-trail reachability (linear in edges).
bool d_separated(const TemporalDag& g, const std::vector<NodeRef>& a,
                 const std::vector<NodeRef>& b, const std::vector<NodeRef>& s);

// Dims of frame t whose node has an incoming edge from a_{t-1}. Pre: 1 <= t < horizon.
DimSet dais_exact(const TemporalDag& g, int t);

// Dims of frame t that feed some DAIS dim of frame t+1 but have no direct edge
// from a_{t-1} themselves. Pre: 0 <= t < horizon - 1.
DimSet aia_exact(const TemporalDag& g, int t);

// DAIS set with the t = 0 boundary case (no preceding action -> empty set).
DimSet dais_at(const TemporalDag& g, int t);

// Exhaustive check of the d-separation characterization of DAIS membership:
// for every valid t and dim i, i is in DAIS_{t+1} iff a_t and s^i_{t+1} are
// d-connected given the DAIS_t frame nodes.
bool verify_dais_characterization(const TemporalDag& g);

// Same for AIA: restricted to dims without a direct action edge, i is in
// AIA_{t-1} iff a_{t-1} and s^i_{t-1} are d-connected given the DAIS_t nodes
// plus the remaining frame t-1 dims (conditioning on DAIS_t opens the
// collider through the driven dims; holding the sibling dims fixed blocks
// confounding through frame t-2 common ancestors, which would otherwise
// connect the action to non-ancestor dims once that collider is open).
bool verify_aia_characterization(const TemporalDag& g);

// Text round trip. Header "d=<d> horizon=<h>", then one edge per line,
// "a:<t> -> s<j>:<t+1>" or "s<i>:<t> -> s<j>:<t+1>" with 1-based dims.
void write_graph(const TemporalDag& g, std::ostream& out);
TemporalDag read_graph(std::istream& in);  // throws DataError with line number

std::string to_string(NodeRef n);

}  // namespace cids

#endif
