#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "mtpr/error.hpp"

namespace mtpr {

/// Integer-scaled Gram matrix of the selection vectors: entry = grid * <w_i, w_j>.
struct OverlapMatrix {
  Eigen::MatrixXi entries;
  int grid = 1;

  Eigen::Index size() const { return entries.rows(); }
  int operator()(Eigen::Index i, Eigen::Index j) const { return entries(i, j); }
};

/// Checks symmetry, diagonal == grid and off-diagonals in [0, grid].
void check_overlap_invariants(const OverlapMatrix& m);

/// Covariance of (|g1|, |g2|) for a unit-variance Gaussian pair with correlation z:
/// (2/pi) * (z * asin(z) + sqrt(1 - z^2) - 1). Inputs are clamped to [0, 1].
double psi(double z);

/// psi(1) = 1 - 2/pi, the variance of a folded standard normal.
inline constexpr double kPsiMax = 1.0 - 2.0 / 3.14159265358979323846;

/// Inverse of psi on [0, 1] by bisection. Inputs are clamped to [0, kPsiMax].
double psi_inv(double v, double tol = 1e-15);

struct FoldedCovariance {
  Eigen::VectorXd mean;  // m
  Eigen::MatrixXd cov;   // m x m, population (1/d) normalization
};

/// Treats the d pixel columns of the m x d image matrix as i.i.d. draws.
FoldedCovariance empirical_folded_covariance(const Eigen::Ref<const Eigen::MatrixXd>& images);

struct GramExtraction {
  OverlapMatrix overlap;
  Eigen::MatrixXd correlation;  // psi_inv of the clipped covariance, before rounding
};

/// Clips the folded covariance to [eta^2 / 4, 1 - 2/pi], inverts psi
/// entrywise, rounds to the nearest multiple of 1/grid and scales to integers.
/// The diagonal is set to grid.
GramExtraction gram_extract_detailed(const Eigen::Ref<const Eigen::MatrixXd>& images, double eta, int grid);

OverlapMatrix gram_extract(const Eigen::Ref<const Eigen::MatrixXd>& images, double eta, int grid);

/// Smallest integer scale that makes every <w_i, w_j> integral: k when only
/// one part is present, 2 * lcm(k_pub, k_priv) when both are.
int gram_grid(std::int64_t k_pub, std::int64_t k_priv);

/// 1 / (2 * grid): the rounding half-width that keeps every grid value distinct.
inline double default_eta(int grid) { return 1.0 / (2.0 * grid); }

}  // namespace mtpr
