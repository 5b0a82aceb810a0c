#include "mtpr/gram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mtpr {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr Eigen::Index kPixelBlock = 2048;

}  // namespace

void check_overlap_invariants(const OverlapMatrix& m) {
  const auto n = m.entries.rows();
  if (m.entries.cols() != n) throw Error(ErrorCode::kConsistency, "overlap matrix is not square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m(i, i) != m.grid) {
      throw Error(ErrorCode::kConsistency, "overlap diagonal entry " + std::to_string(i) + " is " +
                                               std::to_string(m(i, i)) + ", expected " + std::to_string(m.grid));
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (m(i, j) != m(j, i)) {
        throw Error(ErrorCode::kConsistency, "overlap matrix asymmetric at (" + std::to_string(i) + "," +
                                                 std::to_string(j) + ")");
      }
      if (m(i, j) < 0 || m(i, j) > m.grid) {
        throw Error(ErrorCode::kConsistency, "overlap entry (" + std::to_string(i) + "," + std::to_string(j) +
                                                 ") = " + std::to_string(m(i, j)) + " outside [0, grid]");
      }
    }
  }
}

double psi(double z) {
  z = std::clamp(z, 0.0, 1.0);
  // sqrt(1 - z^2) - 1 rewritten without cancellation for small z.
  const double root = std::sqrt((1.0 - z) * (1.0 + z));
  return (2.0 / kPi) * (z * std::asin(z) - z * z / (1.0 + root));
}

double psi_inv(double v, double tol) {
  if (!(v > 0.0)) return 0.0;
  if (v >= kPsiMax) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  // psi is strictly increasing; stop on the value tolerance or when the
  // bracket can no longer shrink.
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double value = psi(mid);
    if (std::abs(value - v) <= tol && hi - lo < 1e-12) return mid;
    if (value < v) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

FoldedCovariance empirical_folded_covariance(const Eigen::Ref<const Eigen::MatrixXd>& images) {
  const auto m = images.rows();
  const auto d = images.cols();
  if (d < 2) throw Error(ErrorCode::kSizing, "folded covariance needs at least two pixels");

  FoldedCovariance out;
  out.mean = images.rowwise().mean();
  out.cov = Eigen::MatrixXd::Zero(m, m);
  // Rank updates over fixed pixel blocks: fixed reduction order, bounded scratch.
  Eigen::MatrixXd centered;
  for (Eigen::Index start = 0; start < d; start += kPixelBlock) {
    const Eigen::Index width = std::min(kPixelBlock, d - start);
    centered = images.middleCols(start, width).colwise() - out.mean;
    out.cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  }
  out.cov = out.cov.selfadjointView<Eigen::Lower>();
  out.cov /= static_cast<double>(d);
  return out;
}

GramExtraction gram_extract_detailed(const Eigen::Ref<const Eigen::MatrixXd>& images, double eta, int grid) {
  if (grid < 1) throw Error(ErrorCode::kParameter, "grid must be a positive integer");
  if (!(eta > 0.0)) throw Error(ErrorCode::kParameter, "eta must be positive");

  const FoldedCovariance folded = empirical_folded_covariance(images);
  const auto m = folded.cov.rows();
  if (m > 0 && (folded.cov - folded.cov.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw Error(ErrorCode::kInternal, "folded covariance lost symmetry");
  }
  const double floor = eta * eta / 4.0;

  GramExtraction out;
  out.correlation.resize(m, m);
  out.overlap.grid = grid;
  out.overlap.entries.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j; i < m; ++i) {
      const double clipped = std::clamp(folded.cov(i, j), floor, kPsiMax);
      const double rho = psi_inv(clipped);
      out.correlation(i, j) = rho;
      out.correlation(j, i) = rho;
      const long rounded = std::lround(rho * grid);
      if (rounded < 0 || rounded > grid) {
        throw Error(ErrorCode::kConsistency, "rounded Gram entry outside [0, grid]; d is too small");
      }
      out.overlap.entries(i, j) = static_cast<int>(rounded);
      out.overlap.entries(j, i) = static_cast<int>(rounded);
    }
    out.overlap.entries(j, j) = grid;
  }
  return out;
}

OverlapMatrix gram_extract(const Eigen::Ref<const Eigen::MatrixXd>& images, double eta, int grid) {
  return gram_extract_detailed(images, eta, grid).overlap;
}

int gram_grid(std::int64_t k_pub, std::int64_t k_priv) {
  if (k_pub < 0 || k_priv < 0 || k_pub + k_priv == 0) {
    throw Error(ErrorCode::kParameter, "gram grid needs a nonempty support");
  }
  if (k_pub == 0) return static_cast<int>(k_priv);
  if (k_priv == 0) return static_cast<int>(k_pub);
  return static_cast<int>(2 * std::lcm(k_pub, k_priv));
}

}  // namespace mtpr
