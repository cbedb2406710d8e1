#ifndef CIDS_MASKS_HPP
#define CIDS_MASKS_HPP

#include <Eigen/Core>

#include "cids/errors.hpp"

namespace cids {

// Binary structure of one transition step: s_to_s(i,j) = 1 means state dim i
// at time t feeds dim j at time t+1; a_to_s(j) = 1 means the action feeds dim j.
// The diagonal of s_to_s is always 1: every dim carries its own past forward.
struct StructureMasks {
  Eigen::MatrixXi s_to_s;  // d x d, row = source dim, col = destination dim
  Eigen::VectorXi a_to_s;  // d

  int d() const { return static_cast<int>(a_to_s.size()); }

  void validate() const {
    const int n = d();
    if (s_to_s.rows() != n || s_to_s.cols() != n)
      throw DataError("StructureMasks: s_to_s must be d x d");
    for (int i = 0; i < n; ++i) {
      if (s_to_s(i, i) != 1)
        throw DataError("StructureMasks: diagonal of s_to_s must be 1 (self influence)");
      if (a_to_s(i) != 0 && a_to_s(i) != 1)
        throw DataError("StructureMasks: a_to_s entries must be 0/1");
      for (int j = 0; j < n; ++j)
        if (s_to_s(i, j) != 0 && s_to_s(i, j) != 1)
          throw DataError("StructureMasks: s_to_s entries must be 0/1");
    }
  }

  static StructureMasks identity(int d) {
    StructureMasks m;
    m.s_to_s = Eigen::MatrixXi::Identity(d, d);
    m.a_to_s = Eigen::VectorXi::Zero(d);
    return m;
  }

  bool operator==(const StructureMasks& o) const {
    return s_to_s == o.s_to_s && a_to_s == o.a_to_s;
  }
};

}  // namespace cids

#endif
