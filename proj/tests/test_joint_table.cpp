#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "cids/joint_table.hpp"
#include "cids/rng.hpp"

using namespace cids;

namespace {

const double kLn2 = std::log(2.0);

// XOR triple (X, Y, Z=X^Y) with fair independent X, Y; last index fastest.
JointTable xor_table() {
  JointTable t;
  t.arities = {2, 2, 2};
  t.probs.assign(8, 0.0);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) t.probs[static_cast<std::size_t>((x * 2 + y) * 2 + (x ^ y))] = 0.25;
  return t;
}

}  // namespace

TEST_CASE("validate rejects malformed tables") {
  JointTable t;
  t.arities = {2, 2};
  t.probs = {0.25, 0.25, 0.25, 0.25};
  CHECK_NOTHROW(t.validate());
  CHECK(t.size() == 4);

  JointTable wrong_size = t;
  wrong_size.probs.pop_back();
  CHECK_THROWS_AS(wrong_size.validate(), DataError);

  JointTable negative = t;
  negative.probs[0] = -0.1;
  negative.probs[1] = 0.6;
  CHECK_THROWS_AS(negative.validate(), DataError);

  JointTable bad_sum = t;
  bad_sum.probs[0] = 0.5;
  CHECK_THROWS_AS(bad_sum.validate(), DataError);

  JointTable bad_arity;
  bad_arity.arities = {0, 2};
  bad_arity.probs = {};
  CHECK_THROWS_AS(bad_arity.validate(), DataError);
}

TEST_CASE("xor triple: marginally independent, conditionally dependent") {
  const JointTable t = xor_table();
  CHECK(std::abs(cmi_from_joint(t, {0}, {1}, {})) < 1e-12);
  CHECK(std::abs(cmi_from_joint(t, {0}, {2}, {})) < 1e-12);
  CHECK(cmi_from_joint(t, {0}, {1}, {2}) == doctest::Approx(kLn2));
  CHECK(cmi_from_joint(t, {0}, {2}, {1}) == doctest::Approx(kLn2));
  // Joint sets: X carries one full bit about (Y,Z).
  CHECK(cmi_from_joint(t, {0}, {1, 2}, {}) == doctest::Approx(kLn2));
  // Symmetry in the first two arguments.
  CHECK(cmi_from_joint(t, {1}, {0}, {2}) == doctest::Approx(cmi_from_joint(t, {0}, {1}, {2})));
}

TEST_CASE("copied fair bit carries ln 2 nats") {
  JointTable t;
  t.arities = {2, 2};
  t.probs = {0.5, 0.0, 0.0, 0.5};
  CHECK(cmi_from_joint(t, {0}, {1}, {}) == doctest::Approx(kLn2));
}

TEST_CASE("independent variables have zero information") {
  JointTable t;
  t.arities = {2, 3};
  t.probs.assign(6, 1.0 / 6.0);
  CHECK(std::abs(cmi_from_joint(t, {0}, {1}, {})) < 1e-12);
}

TEST_CASE("cmi_from_joint rejects overlapping or out-of-range sets") {
  const JointTable t = xor_table();
  CHECK_THROWS_AS(cmi_from_joint(t, {0}, {0}, {}), std::invalid_argument);
  CHECK_THROWS_AS(cmi_from_joint(t, {0}, {1}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(cmi_from_joint(t, {0}, {3}, {}), std::invalid_argument);
  CHECK_THROWS_AS(cmi_from_joint(t, {}, {1}, {}), std::invalid_argument);
}

TEST_CASE("sample_assignment follows the table") {
  JointTable t;
  t.arities = {2, 3};
  t.probs = {0.1, 0.2, 0.05, 0.3, 0.05, 0.3};
  Rng rng(31);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const std::vector<int> a = sample_assignment(t, rng);
    REQUIRE(a.size() == 2);
    REQUIRE(a[0] >= 0);
    REQUIRE(a[0] < 2);
    REQUIRE(a[1] >= 0);
    REQUIRE(a[1] < 3);
    ++counts[static_cast<std::size_t>(a[0] * 3 + a[1])];
  }
  for (int cell = 0; cell < 6; ++cell)
    CHECK(static_cast<double>(counts[static_cast<std::size_t>(cell)]) / n ==
          doctest::Approx(t.probs[static_cast<std::size_t>(cell)]).epsilon(0.08));
  // Deterministic under a fixed stream.
  Rng r1(5), r2(5);
  for (int i = 0; i < 100; ++i) CHECK(sample_assignment(t, r1) == sample_assignment(t, r2));
}

TEST_CASE("tabular scm separates exogenous action from the past") {
  StructureMasks m = StructureMasks::identity(1);
  m.a_to_s(0) = 1;
  const TabularScm scm = tabular_scm(1, m, 2, 77);
  // Layout: var 0 = s0 dim, var 1 = action, var 2 = s1 dim.
  CHECK(scm.var_of(NodeRef::state(0, 0)) == 0);
  CHECK(scm.var_of(NodeRef::action(0)) == 1);
  CHECK(scm.var_of(NodeRef::state(0, 1)) == 2);
  CHECK(scm.node_of(2) == NodeRef::state(0, 1));
  CHECK(std::abs(cmi_from_joint(scm.joint, {0}, {1}, {})) < 1e-12);
  CHECK(cmi_from_joint(scm.joint, {1}, {2}, {}) > kFaithfulnessMargin);
  CHECK(cmi_from_joint(scm.joint, {1}, {2}, {0}) > kFaithfulnessMargin);

  StructureMasks inert = StructureMasks::identity(1);
  const TabularScm scm0 = tabular_scm(1, inert, 2, 78);
  CHECK(std::abs(cmi_from_joint(scm0.joint, {1}, {2}, {})) < 1e-12);
  CHECK(std::abs(cmi_from_joint(scm0.joint, {1}, {2}, {0})) < 1e-12);
}

TEST_CASE("scm independence pattern matches d-separation everywhere") {
  Rng rng(99);
  for (int trial = 0; trial < 8; ++trial) {
    const int d = 1 + rng.below(2);
    StructureMasks m = StructureMasks::identity(d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j)
        if (i != j && rng.uniform() < 0.4) m.s_to_s(i, j) = 1;
      if (rng.uniform() < 0.6) m.a_to_s(i) = 1;
    }
    const int arity = 2 + rng.below(2);
    const TabularScm scm = tabular_scm(d, m, arity, 1000 + static_cast<std::uint64_t>(trial));
    const TemporalDag g = build_temporal_dag(m, 2);
    const int vars = 2 * d + 1;
    for (int u = 0; u < vars; ++u)
      for (int v = u + 1; v < vars; ++v) {
        std::vector<int> others;
        for (int w = 0; w < vars; ++w)
          if (w != u && w != v) others.push_back(w);
        for (int subset = 0; subset < (1 << others.size()); ++subset) {
          std::vector<int> z;
          std::vector<NodeRef> zn;
          for (std::size_t k = 0; k < others.size(); ++k)
            if (subset & (1 << k)) {
              z.push_back(others[k]);
              zn.push_back(scm.node_of(others[k]));
            }
          const double info = cmi_from_joint(scm.joint, {u}, {v}, z);
          const bool sep = d_separated(g, {scm.node_of(u)}, {scm.node_of(v)}, zn);
          if (sep)
            REQUIRE(info < 1e-9);
          else
            REQUIRE(info > 1e-9);
        }
      }
  }
}
