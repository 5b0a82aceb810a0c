#pragma once

// Independent reference implementations used only by tests. None of them
// calls into the library code they check.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

namespace oracle {

/// The k = 2 floral example, rows/columns labeled
/// {1,3}, {2,4}, {1,4}, {1,2}, {3,4}, {2,3}.
inline Eigen::MatrixXi example_floral() {
  Eigen::MatrixXi m(6, 6);
  m << 2, 0, 1, 1, 1, 1,  //
      0, 2, 1, 1, 1, 1,   //
      1, 1, 2, 1, 1, 0,   //
      1, 1, 1, 2, 0, 1,   //
      1, 1, 1, 0, 2, 1,   //
      1, 1, 0, 1, 1, 2;
  return m;
}

/// Zero-based bitmask labels of the example rows.
inline std::vector<std::uint32_t> example_labels() { return {0b0101, 0b1010, 0b1001, 0b0011, 0b1100, 0b0110}; }

/// Psi straight from its defining formula in long double.
inline double psi(double z) {
  const long double x = z;
  const long double pi = 3.141592653589793238462643383279502884L;
  return static_cast<double>((2.0L / pi) * (x * std::asin(x) + std::sqrt(1.0L - x * x) - 1.0L));
}

/// k-subsets of {0..n-1} as bitmasks, by scanning every mask.
inline std::vector<std::uint32_t> k_subsets(int n, int k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t s = 0; s < (1U << n); ++s) {
    if (std::popcount(s) == k) out.push_back(s);
  }
  return out;
}

/// Whether the matrix equals the intersection pattern of the k-subsets of
/// {0..k+1} under some assignment of rows to subsets (tries all orderings).
inline bool floral_by_permutation(const Eigen::MatrixXi& p, int k) {
  std::vector<std::uint32_t> family = k_subsets(k + 2, k);
  if (p.rows() != static_cast<Eigen::Index>(family.size()) || p.cols() != p.rows()) return false;
  std::sort(family.begin(), family.end());
  do {
    bool ok = true;
    for (Eigen::Index i = 0; i < p.rows() && ok; ++i) {
      for (Eigen::Index j = 0; j < p.cols() && ok; ++j) {
        ok = p(i, j) == std::popcount(family[i] & family[j]);
      }
    }
    if (ok) return true;
  } while (std::next_permutation(family.begin(), family.end()));
  return false;
}

/// Exhaustive search for six rows forming a k = 2 floral submatrix; rows
/// must pairwise meet in 0 or 1 and each row has one disjoint partner.
inline std::optional<std::vector<int>> exhaustive_floral_k2(const Eigen::MatrixXi& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<int> chosen;
  std::optional<std::vector<int>> found;
  auto zero_count = [&](int r) {
    int z = 0;
    for (int c : chosen) z += m(r, c) == 0 ? 1 : 0;
    return z;
  };
  auto rec = [&](auto&& self, int start) -> void {
    if (found) return;
    if (chosen.size() == 6) {
      Eigen::MatrixXi p(6, 6);
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) p(a, b) = m(chosen[a], chosen[b]);
      }
      if (floral_by_permutation(p, 2)) found = chosen;
      return;
    }
    for (int r = start; r < n && !found; ++r) {
      if (m(r, r) != 2) continue;
      bool ok = zero_count(r) <= 1;
      for (int c : chosen) {
        if (!ok) break;
        ok = (m(r, c) == 0 || m(r, c) == 1) && (m(r, c) != 0 || zero_count(c) == 0);
      }
      if (!ok) continue;
      chosen.push_back(r);
      self(self, r + 1);
      chosen.pop_back();
    }
  };
  rec(rec, 0);
  return found;
}

/// Counts ordered tuples (i; j1..j4) of distinct rows with j1 < j4 that fit
/// the house pattern, by direct nested loops.
inline std::uint64_t house_count(const Eigen::MatrixXi& m, int k) {
  const int n = static_cast<int>(m.rows());
  std::uint64_t count = 0;
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < n; ++a) {
      if (a == i || m(i, a) != k - 1) continue;
      for (int b = 0; b < n; ++b) {
        if (b == i || b == a || m(i, b) != k - 1 || m(a, b) != k - 1) continue;
        for (int c = 0; c < n; ++c) {
          if (c == i || c == a || c == b || m(i, c) != k - 1 || m(b, c) != k - 1 || m(a, c) != k - 2) continue;
          for (int e = a + 1; e < n; ++e) {
            if (e == i || e == b || e == c) continue;
            if (m(i, e) == k - 1 && m(c, e) == k - 1 && m(a, e) == k - 1 && m(b, e) == k - 2) ++count;
          }
        }
      }
    }
  }
  return count;
}

/// True when `labels` and `truth` differ by a permutation of the ground set.
inline bool related_by_ground_permutation(const std::vector<std::uint32_t>& labels,
                                          const std::vector<std::uint32_t>& truth, int ground) {
  std::vector<int> perm(static_cast<std::size_t>(ground));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t r = 0; r < labels.size() && ok; ++r) {
      std::uint32_t mapped = 0;
      for (int e = 0; e < ground; ++e) {
        if ((truth[r] >> e) & 1U) mapped |= 1U << perm[static_cast<std::size_t>(e)];
      }
      ok = mapped == labels[r];
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

/// Solutions of |sum_{i in S_j} a_i| = v_j up to global sign: least squares on
/// every one of the 2^L constraint sign patterns, kept when all constraints
/// hold within tol, deduplicated up to sign.
inline std::vector<Eigen::VectorXd> signed_solution_classes(const std::vector<std::uint32_t>& subsets, int width,
                                                            const std::vector<double>& values, double tol) {
  const auto l = static_cast<Eigen::Index>(subsets.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(l, width);
  for (Eigen::Index j = 0; j < l; ++j) {
    for (int e = 0; e < width; ++e) {
      if ((subsets[static_cast<std::size_t>(j)] >> e) & 1U) b(j, e) = 1.0;
    }
  }
  const Eigen::MatrixXd normal = (b.transpose() * b).inverse() * b.transpose();
  std::vector<Eigen::VectorXd> classes;
  Eigen::VectorXd rhs(l);
  for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << l); ++pattern) {
    for (Eigen::Index j = 0; j < l; ++j) {
      const double v = values[static_cast<std::size_t>(j)];
      rhs(j) = ((pattern >> j) & 1U) ? -v : v;
    }
    const Eigen::VectorXd a = normal * rhs;
    bool ok = true;
    for (Eigen::Index j = 0; j < l && ok; ++j) {
      ok = std::abs(std::abs(b.row(j).dot(a)) - values[static_cast<std::size_t>(j)]) <= tol;
    }
    if (!ok) continue;
    bool seen = false;
    for (const auto& c : classes) {
      seen = seen || (c - a).cwiseAbs().maxCoeff() <= 10 * tol || (c + a).cwiseAbs().maxCoeff() <= 10 * tol;
    }
    if (!seen) classes.push_back(a);
  }
  return classes;
}

}  // namespace oracle
