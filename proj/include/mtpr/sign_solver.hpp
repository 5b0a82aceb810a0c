#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mtpr/floral.hpp"
#include "mtpr/subsets.hpp"

namespace mtpr {

// Per-pixel systems |u_j + sum_{i in F_j} a_i| = v_j over the full family of
// k-subsets F_j of {0, ..., k+1}. The offsets u_j are zero unless a known
// contribution (the public part of a mixed image) is folded in; with zero
// offsets a solution is only determined up to a global sign.

struct SignedSystem {
  int k = 0;
  std::vector<Subset> subsets;
  std::vector<double> values;
  std::vector<double> offsets;       // empty means all zero
  std::optional<double> tolerance;   // default_tolerance(values) if unset
};

struct SignedSolution {
  Eigen::VectorXd values;  // k + 2 entries
  double residual = 0.0;   // max_j | |u_j + sum a| - v_j |
  bool ambiguous = false;  // two admissible candidates that are not +- equal
};

/// 1e-6 * max(1, max_j v_j).
double default_tolerance(std::span<const double> values);

/// Largest constraint violation of `a` on the system.
double signed_residual(const SignedSystem& sys, const Eigen::VectorXd& a);

/// Precomputes a basis of k+2 independent subset indicators (greedy, in
/// family order) and its inverse so that many right-hand sides can share it.
class SignSystemSolver {
 public:
  /// Throws kStructure unless `subsets` is exactly the k-subsets of {0..k+1}.
  SignSystemSolver(int k, std::vector<Subset> subsets);

  int k() const { return k_; }
  const std::vector<Subset>& subsets() const { return subsets_; }
  const std::vector<int>& basis() const { return basis_; }

  /// Throws kInconsistentSystem when no sign pattern fits within tolerance.
  SignedSolution solve(std::span<const double> values, std::span<const double> offsets = {},
                       std::optional<double> tolerance = std::nullopt) const;

 private:
  int k_;
  std::vector<Subset> subsets_;
  Eigen::MatrixXd incidence_;  // L x (k+2)
  std::vector<int> basis_;     // k+2 rows of incidence_
  Eigen::MatrixXd inverse_;    // inverse of the basis rows
};

/// Without offsets the representative has its first entry above tolerance positive.
SignedSolution solve_signed_system(const SignedSystem& sys);

/// Every solution class of a system with at most 16 constraints, found by
/// least squares on each of the 2^L constraint sign patterns. Classes are
/// taken up to global sign when there are no offsets.
std::vector<Eigen::VectorXd> enumerate_all_solutions(const SignedSystem& sys);

struct PixelBatchResult {
  Eigen::MatrixXd images;  // (k+2) x d; row e is the image labeled e
  std::int64_t ambiguous_count = 0;
  std::int64_t inconsistent_count = 0;
};

/// Solves every pixel with the labels of `floral`. Row t of `values` (and of
/// `offsets`, if given) belongs to floral.indices[t]. Ambiguous pixels keep
/// their lowest-residual candidate, inconsistent pixels are left at zero.
/// Throws kRecoveryQuality when either kind exceeds `max_bad_fraction` of d.
PixelBatchResult solve_pixel_batch(const FloralAssignment& floral, const Eigen::Ref<const Eigen::MatrixXd>& values,
                                   const Eigen::MatrixXd* offsets = nullptr, double max_bad_fraction = 1e-3);

}  // namespace mtpr
