#include "mtpr/floral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

namespace mtpr {
namespace {

// Fixed labels for the seed rows. With core = {2, ..., k-1}:
//   apex     = {0, ..., k-1}        opposite = {2, ..., k+1}
//   cycle[0] = core + {0, k}        cycle[1] = core + {0, k+1}
//   cycle[2] = core + {1, k+1}      cycle[3] = core + {1, k}
struct Anchor {
  int apex = 0;
  int opposite = 0;
  std::array<int, 4> cycle{};
};

// One of the four families of rows that differ from the seed by swapping a
// single core element out. `near` rows sit at k-1, `far` rows at k-2.
struct Side {
  bool from_apex;
  std::array<int, 2> near;
  std::array<int, 2> far;
  std::array<int, 3> base;  // elements besides core minus one (k-relative offsets resolved below)
};

using Labeled = std::vector<std::pair<int, Subset>>;

class Extender {
 public:
  Extender(const Eigen::MatrixXi& m, int k) : m_(m), k_(k), core_(range_subset(2, k)) {}

  std::optional<Labeled> extend(const Anchor& a, std::span<const int> pool_apex, std::span<const int> pool_opposite,
                                std::span<const int> pool_tail, std::string& reason) const {
    const int k = k_;
    const Subset bit_k = Subset{1} << k;
    const Subset bit_k1 = Subset{1} << (k + 1);
    Labeled out;
    out.reserve(binomial(k + 2, k));
    out.emplace_back(a.apex, range_subset(0, k));
    out.emplace_back(a.opposite, range_subset(2, k + 2));
    out.emplace_back(a.cycle[0], core_ | 0b01U | bit_k);
    out.emplace_back(a.cycle[1], core_ | 0b01U | bit_k1);
    out.emplace_back(a.cycle[2], core_ | 0b10U | bit_k1);
    out.emplace_back(a.cycle[3], core_ | 0b10U | bit_k);

    auto chosen = [&](int r) {
      return std::any_of(out.begin(), out.end(), [r](const auto& p) { return p.first == r; });
    };

    if (k >= 3) {
      const std::vector<int> core_elems = elements(core_);
      // A_k, A_{k+1} contain {0, 1}; B_0, B_1 contain {k, k+1}.
      const std::array<Side, 4> sides = {{
          {true, {0, 3}, {1, 2}, {0, 1, k}},
          {true, {1, 2}, {0, 3}, {0, 1, k + 1}},
          {false, {0, 1}, {2, 3}, {0, k, k + 1}},
          {false, {2, 3}, {0, 1}, {1, k, k + 1}},
      }};
      std::array<std::vector<int>, 4> members;
      for (std::size_t s = 0; s < sides.size(); ++s) {
        const Side& side = sides[s];
        const int near_seed = side.from_apex ? a.apex : a.opposite;
        const int far_seed = side.from_apex ? a.opposite : a.apex;
        for (int r : side.from_apex ? pool_apex : pool_opposite) {
          if (m_(r, near_seed) != k - 1 || m_(r, far_seed) != k - 2) continue;
          if (m_(r, a.cycle[side.near[0]]) != k - 1 || m_(r, a.cycle[side.near[1]]) != k - 1) continue;
          if (m_(r, a.cycle[side.far[0]]) != k - 2 || m_(r, a.cycle[side.far[1]]) != k - 2) continue;
          if (chosen(r)) continue;
          auto& list = members[s];
          if (std::any_of(list.begin(), list.end(), [&](int q) { return m_(r, q) == k; })) continue;
          list.push_back(r);
        }
        std::sort(members[s].begin(), members[s].end());
        if (static_cast<int>(members[s].size()) != k - 2) {
          reason = "expected exactly " + std::to_string(k - 2) + " sets on side " + std::to_string(s) + ", found " +
                   std::to_string(members[s].size());
          return std::nullopt;
        }
      }

      // Members of the first side name the core elements in index order; the
      // other sides inherit the name of their unique (k-1)-neighbor there.
      const auto& reference = members[0];
      for (std::size_t s = 0; s < sides.size(); ++s) {
        Subset base = 0;
        for (int e : sides[s].base) base |= Subset{1} << e;
        std::vector<char> used(core_elems.size(), 0);
        for (std::size_t idx = 0; idx < members[s].size(); ++idx) {
          const int r = members[s][idx];
          int slot = -1;
          if (s == 0) {
            slot = static_cast<int>(idx);
          } else {
            for (std::size_t t = 0; t < reference.size(); ++t) {
              if (m_(r, reference[t]) != k - 1) continue;
              if (slot >= 0) {
                reason = "side " + std::to_string(s) + " row matches two core elements";
                return std::nullopt;
              }
              slot = static_cast<int>(t);
            }
          }
          if (slot < 0 || used[static_cast<std::size_t>(slot)]) {
            reason = "side " + std::to_string(s) + " rows do not match the core elements one-to-one";
            return std::nullopt;
          }
          used[static_cast<std::size_t>(slot)] = 1;
          const Subset label = base | (core_ & ~(Subset{1} << core_elems[static_cast<std::size_t>(slot)]));
          out.emplace_back(r, label);
        }
      }

      if (k >= 4) {
        const std::size_t side_end = out.size();
        const Subset outer = 0b11U | bit_k | bit_k1;
        std::map<Subset, int> tail;
        for (int r : pool_tail) {
          if (chosen(r)) continue;
          if (m_(r, a.apex) != k - 2 || m_(r, a.opposite) != k - 2) continue;
          if (std::any_of(a.cycle.begin(), a.cycle.end(), [&](int c) { return m_(r, c) != k - 2; })) continue;
          bool touches_side = false;
          for (std::size_t i = 6; i < side_end; ++i) touches_side |= m_(r, out[i].first) == k - 1;
          if (!touches_side) continue;
          Subset missing = 0;
          int count = 0;
          for (std::size_t t = 0; t < reference.size(); ++t) {
            if (m_(r, reference[t]) == k - 1) {
              missing |= Subset{1} << core_elems[t];
              ++count;
            }
          }
          if (count != 2) continue;
          const Subset label = outer | (core_ & ~missing);
          if (tail.count(label) != 0) continue;
          bool consistent = true;
          for (const auto& [row, l] : out) {
            if (m_(r, row) != intersection_size(label, l)) {
              consistent = false;
              break;
            }
          }
          if (consistent) tail.emplace(label, r);
        }
        const auto needed = binomial(k - 2, 2);
        if (tail.size() != needed) {
          reason = "expected " + std::to_string(needed) + " sets meeting every seed row at k-2, found " +
                   std::to_string(tail.size());
          return std::nullopt;
        }
        for (const auto& [label, r] : tail) out.emplace_back(r, label);
      }
    }

    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t j = i; j < out.size(); ++j) {
        if (m_(out[i].first, out[j].first) != intersection_size(out[i].second, out[j].second)) {
          reason = "entry (" + std::to_string(out[i].first) + "," + std::to_string(out[j].first) +
                   ") disagrees with the labels";
          return std::nullopt;
        }
      }
    }
    return out;
  }

 private:
  const Eigen::MatrixXi& m_;
  int k_;
  Subset core_;
};

void check_k(int k) {
  if (k < 2 || k > 29) throw Error(ErrorCode::kParameter, "floral search needs 2 <= k <= 29");
}

// Calls on_house(j1, j2, j3, j4) for every house with the given apex whose
// rows pass `allowed`. `marked` must be all zero on entry and is restored.
template <typename Allowed, typename OnHouse>
bool for_each_house(const Eigen::MatrixXi& m, const NeighborIndex& index, int apex, std::vector<char>& marked,
                    Allowed allowed, OnHouse on_house) {
  const int k = index.k();
  const auto& around = index.level(apex, k - 1);
  for (int j : around) marked[static_cast<std::size_t>(j)] = allowed(j) ? 1 : 0;
  bool keep_going = true;
  for (int j1 : around) {
    if (!keep_going) break;
    if (!marked[static_cast<std::size_t>(j1)]) continue;
    for (int j2 : index.level(j1, k - 1)) {
      if (!keep_going) break;
      if (!marked[static_cast<std::size_t>(j2)]) continue;
      for (int j3 : index.level(j2, k - 1)) {
        if (!keep_going) break;
        if (!marked[static_cast<std::size_t>(j3)] || m(j1, j3) != k - 2) continue;
        for (int j4 : index.level(j3, k - 1)) {
          if (j4 <= j1 || !marked[static_cast<std::size_t>(j4)]) continue;
          if (m(j4, j1) != k - 1 || m(j2, j4) != k - 2) continue;
          if (!on_house(j1, j2, j3, j4)) {
            keep_going = false;
            break;
          }
        }
      }
    }
  }
  for (int j : around) marked[static_cast<std::size_t>(j)] = 0;
  return keep_going;
}

}  // namespace

NeighborIndex::NeighborIndex(const Eigen::MatrixXi& m, int k) : k_(k) {
  check_k(k);
  const auto n = m.rows();
  upper_.resize(static_cast<std::size_t>(n));
  lower_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      const int v = m(i, j);
      if (v == k - 1) {
        upper_[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
      } else if (v == k - 2) {
        lower_[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
      }
    }
  }
}

const std::vector<int>& NeighborIndex::level(int row, int t) const {
  if (t == k_ - 1) return upper_[static_cast<std::size_t>(row)];
  if (t == k_ - 2) return lower_[static_cast<std::size_t>(row)];
  throw Error(ErrorCode::kParameter, "neighbor levels are k-1 and k-2 only");
}

NeighborIndex build_neighbor_index(const OverlapMatrix& m, int k) { return NeighborIndex(m.entries, k); }

bool is_house(const Eigen::MatrixXi& m, int k, const HouseWitness& h) {
  const std::array<int, 5> all = {h.apex, h.cycle[0], h.cycle[1], h.cycle[2], h.cycle[3]};
  for (std::size_t a = 0; a < all.size(); ++a) {
    if (all[a] < 0 || all[a] >= m.rows()) return false;
    for (std::size_t b = a + 1; b < all.size(); ++b) {
      if (all[a] == all[b]) return false;
    }
  }
  if (h.cycle[0] >= h.cycle[3]) return false;
  for (int j : h.cycle) {
    if (m(h.apex, j) != k - 1) return false;
  }
  const auto& c = h.cycle;
  return m(c[0], c[1]) == k - 1 && m(c[1], c[2]) == k - 1 && m(c[2], c[3]) == k - 1 && m(c[0], c[3]) == k - 1 &&
         m(c[0], c[2]) == k - 2 && m(c[1], c[3]) == k - 2;
}

std::uint64_t count_houses(const Eigen::MatrixXi& m, int k) {
  const NeighborIndex index(m, k);
  std::vector<char> marked(static_cast<std::size_t>(m.rows()), 0);
  std::uint64_t count = 0;
  for (int apex = 0; apex < m.rows(); ++apex) {
    for_each_house(
        m, index, apex, marked, [](int) { return true; },
        [&](int, int, int, int) {
          ++count;
          return true;
        });
  }
  return count;
}

std::vector<Subset> identify_family(const Eigen::MatrixXi& p, int k) {
  check_k(k);
  const auto size = static_cast<Eigen::Index>(binomial(k + 2, k));
  if (p.rows() != size || p.cols() != size) {
    throw Error(ErrorCode::kStructure, "expected a " + std::to_string(size) + "x" + std::to_string(size) + " matrix");
  }
  for (Eigen::Index i = 0; i < size; ++i) {
    if (p(i, i) != k) throw Error(ErrorCode::kStructure, "diagonal entry " + std::to_string(i) + " is not k");
    for (Eigen::Index j = i + 1; j < size; ++j) {
      if (p(i, j) != p(j, i)) throw Error(ErrorCode::kStructure, "matrix is not symmetric");
    }
  }

  Anchor anchor;
  anchor.apex = 0;
  anchor.opposite = -1;
  for (int j = 1; j < size; ++j) {
    if (p(0, j) == k - 2) {
      anchor.opposite = j;
      break;
    }
  }
  if (anchor.opposite < 0) throw Error(ErrorCode::kStructure, "expected a set at level k-2 from the first set");

  std::vector<int> four;
  for (int j = 0; j < size; ++j) {
    if (p(j, anchor.apex) == k - 1 && p(j, anchor.opposite) == k - 1) four.push_back(j);
  }
  if (four.size() != 4) {
    throw Error(ErrorCode::kStructure,
                "expected exactly 4 sets at level (k-1,k-1), found " + std::to_string(four.size()));
  }
  std::vector<int> adjacent;
  int diagonal = -1;
  for (std::size_t t = 1; t < 4; ++t) {
    const int v = p(four[0], four[t]);
    if (v == k - 1) {
      adjacent.push_back(four[t]);
    } else if (v == k - 2) {
      diagonal = four[t];
    }
  }
  if (adjacent.size() != 2 || diagonal < 0) {
    throw Error(ErrorCode::kStructure, "the 4 sets at level (k-1,k-1) do not form a 4-cycle");
  }

  std::vector<int> all(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) all[static_cast<std::size_t>(i)] = i;
  const Extender extender(p, k);
  std::string first_reason;
  for (int orientation = 0; orientation < 2; ++orientation) {
    anchor.cycle = {four[0], adjacent[orientation], diagonal, adjacent[1 - orientation]};
    std::string reason;
    auto labeled = extender.extend(anchor, all, all, all, reason);
    if (labeled && static_cast<Eigen::Index>(labeled->size()) == size) {
      std::vector<Subset> labels(static_cast<std::size_t>(size), 0);
      for (const auto& [row, label] : *labeled) labels[static_cast<std::size_t>(row)] = label;
      return labels;
    }
    if (first_reason.empty()) first_reason = reason.empty() ? "not every row was labeled" : reason;
  }
  throw Error(ErrorCode::kStructure, first_reason);
}

std::optional<std::vector<Subset>> verify_floral(const Eigen::MatrixXi& m, std::span<const int> rows, int k) {
  if (k < 2 || k > 29 || rows.size() != binomial(k + 2, k)) return std::nullopt;
  const auto size = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXi p(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) p(i, j) = m(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
  }
  try {
    return identify_family(p, k);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kStructure) return std::nullopt;
    throw;
  }
}

OrientationVotes orient_by_outside_rows(const Eigen::MatrixXi& m, FloralAssignment& assignment) {
  OrientationVotes votes;
  if (assignment.k != 2) return votes;
  std::vector<char> inside(static_cast<std::size_t>(m.rows()), 0);
  for (int r : assignment.indices) inside[static_cast<std::size_t>(r)] = 1;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (inside[static_cast<std::size_t>(r)]) continue;
    Subset common = ~Subset{0};
    int met = 0;
    bool clean = true;
    for (std::size_t t = 0; t < assignment.indices.size() && clean; ++t) {
      const int v = m(r, assignment.indices[t]);
      if (v == 1) {
        common &= assignment.labels[t];
        ++met;
      } else if (v != 0) {
        clean = false;
      }
    }
    if (!clean || met != 3) continue;
    if (common != 0) {
      ++votes.keep;
    } else {
      ++votes.flip;
    }
  }
  if (votes.flip > votes.keep) {
    for (Subset& s : assignment.labels) s = range_subset(0, 4) & ~s;
  }
  return votes;
}

std::uint64_t house_budget_formula(int k, std::int64_t m, std::int64_t n, double constant) {
  const double log_value = std::log(constant) + 5.0 * k * std::log(static_cast<double>(k)) +
                           5.0 * std::log(static_cast<double>(std::max<std::int64_t>(m, 1))) +
                           (2.0 - 4.0 * k) * std::log(static_cast<double>(std::max<std::int64_t>(n, 1)));
  if (log_value >= std::log(static_cast<double>(std::numeric_limits<std::uint64_t>::max()))) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(std::exp(log_value))));
}

FloralSearch::FloralSearch(const OverlapMatrix& m, int k, FloralSearchOptions options)
    : m_(m), k_(k), options_(options), index_(m.entries, k) {
  if (m.entries.rows() != m.entries.cols()) throw Error(ErrorCode::kDimensionMismatch, "overlap matrix must be square");
  if (m.grid != k) throw Error(ErrorCode::kParameter, "floral search needs the overlap matrix on grid k");
  const auto n = m.entries.rows();
  canonical_.assign(static_cast<std::size_t>(n), 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (canonical_[static_cast<std::size_t>(j)] && m.entries(i, j) == k && m.entries.row(i) == m.entries.row(j)) {
        canonical_[static_cast<std::size_t>(i)] = 0;
        break;
      }
    }
  }
}

FloralSearchStats FloralSearch::run(const std::function<bool(const FloralAssignment&)>& visit) const {
  const Eigen::MatrixXi& m = m_.entries;
  const int k = k_;
  const Extender extender(m, k);
  FloralSearchStats stats;
  std::vector<char> marked(static_cast<std::size_t>(m.rows()), 0);
  auto allowed = [this](int j) { return canonical_[static_cast<std::size_t>(j)] != 0; };

  for (int apex = 0; apex < m.rows(); ++apex) {
    if (!allowed(apex)) continue;
    const bool keep_going = for_each_house(m, index_, apex, marked, allowed, [&](int j1, int j2, int j3, int j4) {
      ++stats.houses;
      if (options_.house_budget && stats.houses > *options_.house_budget) {
        stats.budget_exceeded = true;
        return false;
      }
      for (int opposite : index_.level(j1, k - 1)) {
        if (opposite == apex || !allowed(opposite) || m(opposite, apex) != k - 2) continue;
        if (m(opposite, j2) != k - 1 || m(opposite, j3) != k - 1 || m(opposite, j4) != k - 1) continue;
        ++stats.anchors;
        const Anchor anchor{apex, opposite, {j1, j2, j3, j4}};
        std::string reason;
        const auto labeled = extender.extend(anchor, index_.level(apex, k - 1), index_.level(opposite, k - 1),
                                             index_.level(apex, k - 2), reason);
        if (!labeled) continue;
        FloralAssignment assignment;
        assignment.k = k;
        for (const auto& [row, label] : *labeled) {
          assignment.indices.push_back(row);
          assignment.labels.push_back(label);
        }
        if (!verify_floral(m, assignment.indices, k)) continue;
        const OrientationVotes votes = orient_by_outside_rows(m, assignment);
        if (votes.flip > votes.keep) ++stats.flipped;
        ++stats.found;
        if (!visit(assignment)) return false;
      }
      return true;
    });
    if (!keep_going) break;
  }
  return stats;
}

std::optional<FloralAssignment> find_floral_submatrix(const OverlapMatrix& m, int k, const FloralSearchOptions& options) {
  std::optional<FloralAssignment> result;
  FloralSearch(m, k, options).run([&](const FloralAssignment& a) {
    result = a;
    return false;
  });
  return result;
}

}  // namespace mtpr
