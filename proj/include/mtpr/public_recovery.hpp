#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtpr/error.hpp"

namespace mtpr {

// Sparse phase retrieval with missing coordinates: each synthetic image is a
// set of magnitudes y_j = |<p_j, w>| of which only the public coordinates of
// p_j are observed. The rows of `public_rows` below are those [p_j]_S.

/// (1/d) * sum_j (y_j^2 - 1) * ([p_j]_S [p_j]_S^T - I).
///
/// Its expectation over Gaussian pixel rows is 2 [w]_S [w]_S^T.
Eigen::MatrixXd spectral_matrix(const Eigen::Ref<const Eigen::MatrixXd>& public_rows,
                                const Eigen::Ref<const Eigen::VectorXd>& responses);

struct SdpOptions {
  double tol = 1e-5;
  int max_iterations = 20000;
};

struct SdpResult {
  Eigen::MatrixXd z;  // feasible: PSD, unit trace, entrywise L1 <= k
  double objective = 0.0;
  double dual_bound = 0.0;  // certified upper bound on the optimum
  int iterations = 0;
};

/// Thrown when the iteration budget runs out; carries the best feasible iterate.
class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& what, SdpResult best)
      : Error(ErrorCode::kOptimization, what), best_(std::move(best)) {}
  const SdpResult& best() const { return best_; }

 private:
  SdpResult best_;
};

/// max <Z, M> over {Z PSD, tr Z = 1, sum |Z_ij| <= k}.
///
/// ADMM on the split Z = W, with Z projected onto the unit-trace PSD cone and
/// W onto the entrywise L1 ball. The returned Z is made exactly feasible by
/// mixing in a rank-one vertex, and convergence is declared once the duality
/// gap against lambda_max(M - Y) + k * max|Y| (Y the scaled ADMM multiplier)
/// drops below tol * (1 + k * max|M|).
SdpResult sparse_pca_sdp(const Eigen::MatrixXd& m, std::int64_t k, const SdpOptions& options = {});

struct ThresholdedSpectral {
  Eigen::MatrixXd matrix;           // n_pub x n_pub, zero outside the kept block
  std::vector<std::int64_t> kept;   // ascending
  Eigen::VectorXd scores;           // (1/d) sum_j y_j^2 (p_j)_i^2
};

inline std::int64_t default_window(std::int64_t k_pub) { return std::max<std::int64_t>(25, 4 * k_pub); }

/// Diagonal thresholding: keeps the `window` coordinates with the largest
/// scores (ties to the lower index) and builds the spectral matrix on that
/// principal block only. A window above n_pub is clamped.
ThresholdedSpectral diagonal_threshold_support(const Eigen::Ref<const Eigen::MatrixXd>& public_rows,
                                               const Eigen::Ref<const Eigen::VectorXd>& responses,
                                               std::int64_t k_pub, std::int64_t window);

enum class PublicMethod { kThreshold, kSdp };

struct LearnPublicOptions {
  PublicMethod method = PublicMethod::kThreshold;
  std::optional<std::int64_t> window;  // threshold method; default_window(k) if unset
  SdpOptions sdp;
};

struct SupportEstimate {
  std::vector<std::int64_t> indices;  // ascending public column indices
  double confidence = 0.0;            // top eigenvalue behind the estimate
  bool low_confidence = false;        // confidence < 0.1 / k_pub
};

inline double low_confidence_threshold(std::int64_t k_pub) { return 0.1 / static_cast<double>(k_pub); }

/// Public support of one selection vector from its synthetic image.
SupportEstimate learn_public(const Eigen::Ref<const Eigen::MatrixXd>& public_rows,
                             const Eigen::Ref<const Eigen::VectorXd>& responses, std::int64_t k_pub,
                             const LearnPublicOptions& options = {});

/// Indices of the k largest |v_i|, lowest index first among ties, returned ascending.
std::vector<std::int64_t> top_k_magnitude(const Eigen::Ref<const Eigen::VectorXd>& v, std::int64_t k);

}  // namespace mtpr
