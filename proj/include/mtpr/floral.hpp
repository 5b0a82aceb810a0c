#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mtpr/gram.hpp"
#include "mtpr/subsets.hpp"

namespace mtpr {

// Locating all k-subsets of some (k+2)-set among the rows of an overlap
// matrix. Labels are subsets of {0, ..., k+1} (printed one-based).

/// Rows at overlap k-1 and k-2 with each row, ascending.
class NeighborIndex {
 public:
  NeighborIndex(const Eigen::MatrixXi& m, int k);

  int k() const { return k_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(upper_.size()); }

  /// Level t must be k-1 or k-2.
  const std::vector<int>& level(int row, int t) const;

 private:
  int k_;
  std::vector<std::vector<int>> upper_;  // t = k-1
  std::vector<std::vector<int>> lower_;  // t = k-2
};

NeighborIndex build_neighbor_index(const OverlapMatrix& m, int k);

struct HouseWitness {
  int apex = 0;
  std::array<int, 4> cycle{};
};

/// Apex at overlap k-1 with all four cycle rows; cycle edges (1,2), (2,3),
/// (3,4), (4,1) at k-1 and diagonals (1,3), (2,4) at k-2; cycle[0] < cycle[3].
/// Repeated indices make the tuple not a house.
bool is_house(const Eigen::MatrixXi& m, int k, const HouseWitness& house);

/// Number of house tuples, enumerated apex-first through (k-1)-neighborhoods.
std::uint64_t count_houses(const Eigen::MatrixXi& m, int k);

/// Labels the rows of an L x L intersection-size matrix, L = C(k+2, k), by
/// the k-subsets of {0, ..., k+1} so that P_ij = |F(i) & F(j)|. The labeling
/// is unique up to a permutation of the ground set. Throws kStructure naming
/// the first counting step that fails.
std::vector<Subset> identify_family(const Eigen::MatrixXi& p, int k);

/// Labels for the principal submatrix on `rows` if it is floral.
std::optional<std::vector<Subset>> verify_floral(const Eigen::MatrixXi& m, std::span<const int> rows, int k);

struct FloralAssignment {
  int k = 0;
  std::vector<int> indices;    // rows of the overlap matrix
  std::vector<Subset> labels;  // labels[i] belongs to indices[i]
};

/// For k = 2 the complemented labeling S -> {0..3} \ S fits the same
/// intersection pattern but is not a relabeling of the ground set, and the
/// per-pixel systems solve under both. A row outside the assignment that
/// meets exactly three of its rows holds one ground element, so those three
/// labels must share an element; such rows vote and the labels are
/// complemented when the triangle reading wins. Other k are left unchanged.
struct OrientationVotes {
  std::int64_t keep = 0;
  std::int64_t flip = 0;
};
OrientationVotes orient_by_outside_rows(const Eigen::MatrixXi& m, FloralAssignment& assignment);

struct FloralSearchOptions {
  /// Abort after this many houses. Unset means no limit.
  std::optional<std::uint64_t> house_budget;
};

struct FloralSearchStats {
  std::uint64_t houses = 0;
  std::uint64_t anchors = 0;  // (house, opposite row) pairs expanded
  std::uint64_t found = 0;    // verified assignments handed to the visitor
  std::uint64_t flipped = 0;  // k = 2 assignments complemented by orient_by_outside_rows
  bool budget_exceeded = false;
};

/// Budget of constant * k^(5k) * m^5 * n^(2-4k) houses, saturating.
std::uint64_t house_budget_formula(int k, std::int64_t m, std::int64_t n, double constant = 100.0);

/// Floral search seeded from houses. For each house (apex ascending) and each
/// opposite row, the remaining rows are grown with the same counting steps
/// as identify_family, using only neighbor lists of the anchor rows. Every
/// assignment passes verify_floral and, for k = 2, orient_by_outside_rows
/// before it reaches the visitor; the search stops when the visitor returns
/// false.
class FloralSearch {
 public:
  FloralSearch(const OverlapMatrix& m, int k, FloralSearchOptions options = {});

  FloralSearchStats run(const std::function<bool(const FloralAssignment&)>& visit) const;

  const NeighborIndex& neighbors() const { return index_; }

 private:
  const OverlapMatrix& m_;
  int k_;
  FloralSearchOptions options_;
  NeighborIndex index_;
  std::vector<char> canonical_;  // first row among identical copies
};

std::optional<FloralAssignment> find_floral_submatrix(const OverlapMatrix& m, int k,
                                                      const FloralSearchOptions& options = {});

}  // namespace mtpr
