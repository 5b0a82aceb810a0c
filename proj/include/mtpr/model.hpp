#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "mtpr/error.hpp"

namespace mtpr {

using Rng = std::mt19937_64;

/// Sizes of one synthetic-data instance.
///
/// Columns of the image matrix are laid out public-first: columns
/// [0, n_pub) are public and [n_pub, n_pub + n_priv) are private.
struct ModelParams {
  std::int64_t d = 0;
  std::int64_t n_pub = 0;
  std::int64_t n_priv = 0;
  std::int64_t k_pub = 0;
  std::int64_t k_priv = 0;
  std::int64_t m = 0;
  std::uint64_t seed = 0;

  std::int64_t n() const { return n_pub + n_priv; }
  bool mixed() const { return k_pub > 0 && k_priv > 0; }

  bool operator==(const ModelParams&) const = default;
};

/// Largest d*n (and m*d) the generator will allocate.
inline constexpr std::int64_t kDefaultEntryBudget = std::int64_t{1} << 28;

/// Throws kSizing / kParameter when the parameters cannot describe an instance.
void validate(const ModelParams& params, std::int64_t entry_budget = kDefaultEntryBudget);

struct ImageMatrix {
  Eigen::MatrixXd entries;  // d x n, column s is image x_s
  std::vector<std::int64_t> public_index;

  Eigen::Index pixels() const { return entries.rows(); }
  Eigen::Index images() const { return entries.cols(); }
};

/// Sparse nonnegative mixing vector. Supports hold global column indices.
struct SelectionVector {
  std::vector<std::int64_t> support_pub;
  std::vector<std::int64_t> support_priv;
  double weight_pub = 0.0;
  double weight_priv = 0.0;

  double squared_norm() const;
  /// Dense n-vector form.
  Eigen::VectorXd dense(std::int64_t n) const;
};

double inner_product(const SelectionVector& a, const SelectionVector& b);

/// Per-entry weights for the public and private parts. When both parts are
/// present each gets half the squared norm, so the vector stays unit length.
struct MixingWeights {
  double pub = 0.0;
  double priv = 0.0;
};
MixingWeights mixing_weights(const ModelParams& params);

struct SyntheticDataset {
  Eigen::MatrixXd images;       // m x d, row i = |X w_i|
  Eigen::MatrixXd public_view;  // d x n_pub
  ModelParams params;
};

struct Instance {
  ImageMatrix truth;
  SyntheticDataset dataset;
  std::vector<SelectionVector> selections;
};

ImageMatrix sample_image_matrix(const ModelParams& params,
                                std::int64_t entry_budget = kDefaultEntryBudget);

std::vector<SelectionVector> sample_selection_vectors(const ModelParams& params, Rng& rng);

/// Entrywise |X w|.
Eigen::VectorXd synthesize(const ImageMatrix& x, const SelectionVector& w);

/// Samples X, the m selection vectors and the synthetic images from
/// params.seed. Two calls with equal params give identical instances.
Instance generate_instance(const ModelParams& params,
                           std::int64_t entry_budget = kDefaultEntryBudget);

/// scale * <w_i, w_j>, rounded. With scale equal to the Gram grid this is the
/// exact integer overlap matrix.
Eigen::MatrixXi overlap_oracle(const std::vector<SelectionVector>& ws, int scale);

/// Draws |g| for g ~ N(0, cov). The covariance is factored once on
/// construction; eigenvalues down to -1e-8 are clipped to zero.
class FoldedSampler {
 public:
  explicit FoldedSampler(const Eigen::MatrixXd& cov);

  Eigen::VectorXd operator()(Rng& rng) const;

 private:
  Eigen::MatrixXd factor_;
};

Eigen::VectorXd sample_folded(const Eigen::MatrixXd& cov, Rng& rng);

}  // namespace mtpr
