#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

namespace mtpr {

/// A subset of a small ground set {0, ..., 31} stored as a bitmask.
using Subset = std::uint32_t;

inline int subset_size(Subset s) { return std::popcount(s); }

inline int intersection_size(Subset a, Subset b) { return std::popcount(a & b); }

inline bool contains(Subset s, int element) { return ((s >> element) & 1U) != 0; }

/// Subset containing the elements [first, last).
inline Subset range_subset(int first, int last) {
  Subset s = 0;
  for (int e = first; e < last; ++e) s |= Subset{1} << e;
  return s;
}

std::uint64_t binomial(int n, int r);

/// All r-subsets of {0, ..., n-1} in colexicographic (increasing bitmask) order.
std::vector<Subset> all_subsets(int n, int r);

/// Elements of the subset in increasing order.
std::vector<int> elements(Subset s);

/// Human-facing form with one-based elements, e.g. "{1,3}".
std::string format_subset(Subset s);

}  // namespace mtpr
