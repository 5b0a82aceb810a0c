#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtpr/floral.hpp"
#include "mtpr/gram.hpp"
#include "mtpr/model.hpp"
#include "mtpr/public_recovery.hpp"
#include "mtpr/sign_solver.hpp"

namespace mtpr {

/// Everything the attack may look at: the synthetic images, the public
/// columns of X and the sizes. Ground truth is not reachable from here.
class AttackInput {
 public:
  virtual ~AttackInput() = default;
  virtual const ModelParams& params() const = 0;
  virtual const Eigen::MatrixXd& images() const = 0;       // m x d
  virtual const Eigen::MatrixXd& public_view() const = 0;  // d x n_pub
};

class DatasetView : public AttackInput {
 public:
  explicit DatasetView(const SyntheticDataset& data) : data_(data) {}
  const ModelParams& params() const override { return data_.params; }
  const Eigen::MatrixXd& images() const override { return data_.images; }
  const Eigen::MatrixXd& public_view() const override { return data_.public_view; }

 private:
  const SyntheticDataset& data_;
};

/// Overlap entry that cannot come from any pair of public supports.
class PairConsistencyError : public Error {
 public:
  PairConsistencyError(const std::string& what, Eigen::Index i, Eigen::Index j)
      : Error(ErrorCode::kConsistency, what), pair_(i, j) {}
  std::pair<Eigen::Index, Eigen::Index> pair() const { return pair_; }

 private:
  std::pair<Eigen::Index, Eigen::Index> pair_;
};

/// Private overlap counts b_ij = 2 k_priv (M_ij / grid - |S_i & S_j| / (2 k_pub))
/// on grid k_priv. Returns M unchanged when k_pub = 0. Throws
/// PairConsistencyError for the first pair whose count is fractional or
/// outside [0, k_priv].
OverlapMatrix subtract_public_contribution(const OverlapMatrix& m, const std::vector<SupportEstimate>& supports,
                                           const ModelParams& params);

struct AttackOptions {
  LearnPublicOptions public_options;
  std::optional<double> eta;  // min(1/(2k_pub + 2k_priv), 1/(2 grid)) if unset
  FloralSearchOptions floral;
  int probe_pixels = 32;      // pixels solved to screen each floral candidate
  double max_bad_fraction = 1e-3;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct AttackReport {
  Eigen::MatrixXd recovered;  // (k_priv + 2) x d; row e is the image labeled e
  FloralAssignment floral;
  std::vector<SupportEstimate> public_supports;  // empty without public images
  std::vector<StageTiming> timing;
  std::int64_t ambiguity_count = 0;
  std::int64_t inconsistent_count = 0;
  FloralSearchStats floral_stats;
  std::int64_t rejected_candidates = 0;  // floral sets whose probe pixels did not solve
  std::int64_t support_retries = 0;      // images re-estimated with the SDP
  std::vector<std::string> warnings;
};

/// Eta used by the attack for the given sizes.
double attack_eta(const ModelParams& params);

/// Smallest d for which six noise standard deviations of a folded covariance
/// entry fit inside the rounding margin psi(eta).
std::int64_t recommended_pixels(double eta);

/// Expected number of (k+2)-sets of private images whose k-subsets all occur
/// among m uniform draws.
double expected_floral_count(const ModelParams& params);

/// Gram extraction, public supports, subtraction, floral search and per-pixel
/// solving. Throws kInsufficientSamples when no floral submatrix solves; other
/// failures carry the stage name in their message.
AttackReport learn_private_images(const AttackInput& input, const AttackOptions& options = {});

struct EvaluationResult {
  std::vector<std::pair<int, std::int64_t>> matching;  // recovered row -> column of X
  std::vector<double> errors;                          // per matching entry, max abs difference
  double max_abs_error = 0.0;
  int exact_count = 0;  // relative error <= 1e-6 of the column's max magnitude
};

/// Greedy injective matching of recovered rows to private columns by the
/// smallest L-infinity distance between absolute values.
EvaluationResult evaluate_recovery(const Eigen::MatrixXd& recovered, const ImageMatrix& truth, std::int64_t n_pub);

inline EvaluationResult evaluate_recovery(const AttackReport& report, const ImageMatrix& truth, std::int64_t n_pub) {
  return evaluate_recovery(report.recovered, truth, n_pub);
}

}  // namespace mtpr
