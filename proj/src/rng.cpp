#include "cids/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace cids {

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: need 0 <= k <= n");
  std::vector<int> out;
  out.reserve(k);
  // Floyd: for j in [n-k, n), pick t in [0, j]; insert t unless taken, else j.
  for (int j = n - k; j < n; ++j) {
    int t = below(j + 1);
    if (std::find(out.begin(), out.end(), t) != out.end()) t = j;
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cids
