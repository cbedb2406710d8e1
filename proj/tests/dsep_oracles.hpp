#ifndef CIDS_TESTS_DSEP_ORACLES_HPP
#define CIDS_TESTS_DSEP_ORACLES_HPP

// Reference implementations shared by the unit tests and the acceptance
// gauntlet: a brute-force d-separation oracle that enumerates undirected
// simple trails, a second opinion via the moralized ancestral graph, and
// random mask/query generators.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "cids/causal_graph.hpp"
#include "cids/masks.hpp"
#include "cids/rng.hpp"

namespace testutil {

// Nodes from which some root is reachable along directed edges (the roots'
// ancestral closure, roots included).
inline std::vector<char> ancestral_closure(const cids::TemporalDag& g,
                                           const std::vector<int>& roots) {
  std::vector<char> mark(static_cast<std::size_t>(g.node_count()), 0);
  std::vector<int> stack;
  for (int r : roots)
    if (!mark[static_cast<std::size_t>(r)]) {
      mark[static_cast<std::size_t>(r)] = 1;
      stack.push_back(r);
    }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int p : g.parents(v))
      if (!mark[static_cast<std::size_t>(p)]) {
        mark[static_cast<std::size_t>(p)] = 1;
        stack.push_back(p);
      }
  }
  return mark;
}

struct TrailSearch {
  const cids::TemporalDag* g = nullptr;
  std::vector<char> in_s, opens_collider, allowed, in_b, on_path;
  std::vector<int> path;
  bool found = false;
  long budget = 0;

  bool directed(int u, int v) const {  // u -> v edge present
    const auto& ps = g->parents(v);
    return std::find(ps.begin(), ps.end(), u) != ps.end();
  }

  void dfs(int v) {
    if (found) return;
    if (--budget < 0) throw std::runtime_error("trail enumeration budget exhausted");
    if (in_b[static_cast<std::size_t>(v)] && path.size() >= 1) {
      // Interior nodes were vetted as the path grew; v is an endpoint.
      found = true;
      return;
    }
    on_path[static_cast<std::size_t>(v)] = 1;
    path.push_back(v);
    std::vector<int> neighbors = g->parents(v);
    neighbors.insert(neighbors.end(), g->children(v).begin(), g->children(v).end());
    for (int w : neighbors) {
      if (found) break;
      if (on_path[static_cast<std::size_t>(w)] || !allowed[static_cast<std::size_t>(w)]) continue;
      if (path.size() >= 2) {
        // Extending to w makes v interior between u and w: check blocking.
        const int u = path[path.size() - 2];
        const bool collider = directed(u, v) && directed(w, v);
        if (collider ? !opens_collider[static_cast<std::size_t>(v)]
                     : in_s[static_cast<std::size_t>(v)] != 0)
          continue;
      }
      dfs(w);
    }
    path.pop_back();
    on_path[static_cast<std::size_t>(v)] = 0;
  }
};

// Oracle: d-separated iff no active simple trail from A to B exists. Active
// trails live inside the ancestral closure of A∪B∪S, which keeps enumeration
// small; a collider passes iff it or one of its descendants is conditioned on.
// Throws std::runtime_error if the enumeration exceeds `budget` steps.
inline bool oracle_d_separated(const cids::TemporalDag& g, const std::vector<cids::NodeRef>& a,
                               const std::vector<cids::NodeRef>& b,
                               const std::vector<cids::NodeRef>& s, long budget = 50'000'000) {
  const std::size_t n = static_cast<std::size_t>(g.node_count());
  TrailSearch t;
  t.g = &g;
  t.in_s.assign(n, 0);
  t.in_b.assign(n, 0);
  t.on_path.assign(n, 0);
  t.budget = budget;
  std::vector<int> s_idx, roots;
  for (const cids::NodeRef& v : s) {
    t.in_s[static_cast<std::size_t>(g.index_of(v))] = 1;
    s_idx.push_back(g.index_of(v));
    roots.push_back(g.index_of(v));
  }
  t.opens_collider = ancestral_closure(g, s_idx);  // v or a descendant of v in S
  for (const cids::NodeRef& v : b) {
    t.in_b[static_cast<std::size_t>(g.index_of(v))] = 1;
    roots.push_back(g.index_of(v));
  }
  for (const cids::NodeRef& v : a) roots.push_back(g.index_of(v));
  t.allowed = ancestral_closure(g, roots);
  for (const cids::NodeRef& v : a) {
    if (t.found) break;
    t.path.clear();
    t.dfs(g.index_of(v));
  }
  return !t.found;
}

// --- Third opinion: separation in the moralized ancestral graph. ---

inline bool moral_separated(const cids::TemporalDag& g, const std::vector<cids::NodeRef>& a,
                            const std::vector<cids::NodeRef>& b,
                            const std::vector<cids::NodeRef>& s) {
  const int n = g.node_count();
  std::vector<int> roots;
  for (const cids::NodeRef& v : a) roots.push_back(g.index_of(v));
  for (const cids::NodeRef& v : b) roots.push_back(g.index_of(v));
  for (const cids::NodeRef& v : s) roots.push_back(g.index_of(v));
  const std::vector<char> keep = ancestral_closure(g, roots);

  std::vector<std::vector<char>> adj(static_cast<std::size_t>(n),
                                     std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int v = 0; v < n; ++v) {
    if (!keep[static_cast<std::size_t>(v)]) continue;
    const auto& ps = g.parents(v);
    for (int p : ps) {
      if (!keep[static_cast<std::size_t>(p)]) continue;
      adj[static_cast<std::size_t>(p)][static_cast<std::size_t>(v)] = 1;
      adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(p)] = 1;
      for (int q : ps)  // marry co-parents
        if (q != p && keep[static_cast<std::size_t>(q)]) {
          adj[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)] = 1;
          adj[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)] = 1;
        }
    }
  }
  std::vector<char> blocked(static_cast<std::size_t>(n), 0), seen(static_cast<std::size_t>(n), 0);
  for (const cids::NodeRef& v : s) blocked[static_cast<std::size_t>(g.index_of(v))] = 1;
  std::vector<int> stack;
  for (const cids::NodeRef& v : a) {
    const int i = g.index_of(v);
    if (!blocked[static_cast<std::size_t>(i)]) {
      seen[static_cast<std::size_t>(i)] = 1;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w = 0; w < n; ++w)
      if (adj[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] &&
          keep[static_cast<std::size_t>(w)] && !blocked[static_cast<std::size_t>(w)] &&
          !seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        stack.push_back(w);
      }
  }
  for (const cids::NodeRef& v : b)
    if (seen[static_cast<std::size_t>(g.index_of(v))]) return false;
  return true;
}

inline cids::StructureMasks random_masks(int d, cids::Rng& rng, double p_s = 0.25,
                                         double p_a = 0.5) {
  cids::StructureMasks m = cids::StructureMasks::identity(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      if (i != j && rng.uniform() < p_s) m.s_to_s(i, j) = 1;
    if (rng.uniform() < p_a) m.a_to_s(i) = 1;
  }
  return m;
}

// Random disjoint (A, B, S) over the dag's nodes.
struct Query {
  std::vector<cids::NodeRef> a, b, s;
};

inline Query random_query(const cids::TemporalDag& g, cids::Rng& rng) {
  const int n = g.node_count();
  const int na = 1 + rng.below(std::min(2, n - 1));
  const int nb = 1 + rng.below(std::min(2, n - na));
  const int ns = rng.below(std::min(5, n - na - nb + 1));
  const std::vector<int> picks = rng.sample_without_replacement(n, na + nb + ns);
  // sample_without_replacement is ascending; shuffle the role assignment.
  std::vector<int> order(picks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(static_cast<int>(i)))]);
  Query q;
  for (int i = 0; i < na; ++i)
    q.a.push_back(g.node_at(picks[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]));
  for (int i = 0; i < nb; ++i)
    q.b.push_back(
        g.node_at(picks[static_cast<std::size_t>(order[static_cast<std::size_t>(na + i)])]));
  for (int i = 0; i < ns; ++i)
    q.s.push_back(
        g.node_at(picks[static_cast<std::size_t>(order[static_cast<std::size_t>(na + nb + i)])]));
  return q;
}

}  // namespace testutil

#endif
