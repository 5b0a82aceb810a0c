#include "mtpr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mtpr/parallel.hpp"

namespace mtpr {
namespace {

// Stream tags keep the substreams for different purposes apart.
constexpr std::uint32_t kImageStream = 0x1A6E5;
constexpr std::uint32_t kSelectionStream = 0x5E1EC;

Rng substream(std::uint64_t seed, std::uint32_t tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

void check_budget(std::int64_t rows, std::int64_t cols, std::int64_t budget, const char* what) {
  if (rows > 0 && cols > budget / rows) {
    throw Error(ErrorCode::kSizing, std::string(what) + " would need " + std::to_string(rows) +
                                        "x" + std::to_string(cols) +
                                        " entries, above the configured budget of " +
                                        std::to_string(budget));
  }
}

std::string param_message(const char* text, std::int64_t a, std::int64_t b) {
  return std::string(text) + " (" + std::to_string(a) + " vs " + std::to_string(b) + ")";
}

}  // namespace

void validate(const ModelParams& p, std::int64_t entry_budget) {
  if (p.d <= 0) throw Error(ErrorCode::kSizing, "pixel count d must be positive");
  if (p.n_pub < 0 || p.n_priv < 0 || p.k_pub < 0 || p.k_priv < 0 || p.m < 0) {
    throw Error(ErrorCode::kParameter, "counts must be nonnegative");
  }
  if (p.n() <= 0) throw Error(ErrorCode::kSizing, "at least one image column is required");
  if (p.k_pub > p.n_pub) throw Error(ErrorCode::kParameter, param_message("k_pub exceeds n_pub", p.k_pub, p.n_pub));
  if (p.k_priv > p.n_priv) {
    throw Error(ErrorCode::kParameter, param_message("k_priv exceeds n_priv", p.k_priv, p.n_priv));
  }
  if (p.k_pub + p.k_priv == 0) throw Error(ErrorCode::kParameter, "selection vectors need a nonempty support");
  if (p.k_priv == 1) throw Error(ErrorCode::kParameter, "k_priv must be 0 or at least 2");
  check_budget(p.d, p.n(), entry_budget, "image matrix");
  check_budget(p.m, p.d, entry_budget, "synthetic dataset");
}

double SelectionVector::squared_norm() const {
  return static_cast<double>(support_pub.size()) * weight_pub * weight_pub +
         static_cast<double>(support_priv.size()) * weight_priv * weight_priv;
}

Eigen::VectorXd SelectionVector::dense(std::int64_t n) const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (auto s : support_pub) w(s) = weight_pub;
  for (auto s : support_priv) w(s) = weight_priv;
  return w;
}

double inner_product(const SelectionVector& a, const SelectionVector& b) {
  auto overlap = [](const std::vector<std::int64_t>& x, const std::vector<std::int64_t>& y) {
    std::int64_t count = 0;
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() && j != y.end()) {
      if (*i < *j) {
        ++i;
      } else if (*j < *i) {
        ++j;
      } else {
        ++count;
        ++i;
        ++j;
      }
    }
    return static_cast<double>(count);
  };
  return overlap(a.support_pub, b.support_pub) * a.weight_pub * b.weight_pub +
         overlap(a.support_priv, b.support_priv) * a.weight_priv * b.weight_priv;
}

MixingWeights mixing_weights(const ModelParams& p) {
  MixingWeights w;
  const double parts = p.mixed() ? 2.0 : 1.0;
  if (p.k_pub > 0) w.pub = 1.0 / std::sqrt(parts * static_cast<double>(p.k_pub));
  if (p.k_priv > 0) w.priv = 1.0 / std::sqrt(parts * static_cast<double>(p.k_priv));
  return w;
}

ImageMatrix sample_image_matrix(const ModelParams& params, std::int64_t entry_budget) {
  validate(params, entry_budget);
  ImageMatrix x;
  x.entries.resize(params.d, params.n());
  // One substream per column, so columns can be filled in any order.
  parallel_for(0, static_cast<std::size_t>(params.n()), [&](std::size_t col) {
    Rng rng = substream(params.seed, kImageStream, col);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index row = 0; row < params.d; ++row) {
      x.entries(row, static_cast<Eigen::Index>(col)) = normal(rng);
    }
  });
  x.public_index.resize(static_cast<std::size_t>(params.n_pub));
  std::iota(x.public_index.begin(), x.public_index.end(), std::int64_t{0});
  return x;
}

std::vector<SelectionVector> sample_selection_vectors(const ModelParams& params, Rng& rng) {
  if (params.k_pub > params.n_pub || params.k_priv > params.n_priv || params.k_pub < 0 ||
      params.k_priv < 0) {
    throw Error(ErrorCode::kParameter, "sparsity exceeds the number of available images");
  }
  const MixingWeights weights = mixing_weights(params);
  std::vector<std::int64_t> pub(static_cast<std::size_t>(params.n_pub));
  std::vector<std::int64_t> priv(static_cast<std::size_t>(params.n_priv));
  std::iota(pub.begin(), pub.end(), std::int64_t{0});
  std::iota(priv.begin(), priv.end(), params.n_pub);

  std::vector<SelectionVector> out(static_cast<std::size_t>(std::max<std::int64_t>(params.m, 0)));
  for (auto& w : out) {
    w.support_pub.reserve(static_cast<std::size_t>(params.k_pub));
    w.support_priv.reserve(static_cast<std::size_t>(params.k_priv));
    std::sample(pub.begin(), pub.end(), std::back_inserter(w.support_pub), params.k_pub, rng);
    std::sample(priv.begin(), priv.end(), std::back_inserter(w.support_priv), params.k_priv, rng);
    w.weight_pub = weights.pub;
    w.weight_priv = weights.priv;
  }
  return out;
}

Eigen::VectorXd synthesize(const ImageMatrix& x, const SelectionVector& w) {
  const auto n = static_cast<std::int64_t>(x.entries.cols());
  auto accumulate = [&](const std::vector<std::int64_t>& support) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.entries.rows());
    for (auto s : support) {
      if (s < 0 || s >= n) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "selection support index " + std::to_string(s) + " outside image matrix with " +
                        std::to_string(n) + " columns");
      }
      sum += x.entries.col(s);
    }
    return sum;
  };
  Eigen::VectorXd mixed = w.weight_priv * accumulate(w.support_priv);
  if (!w.support_pub.empty()) mixed += w.weight_pub * accumulate(w.support_pub);
  return mixed.cwiseAbs();
}

Instance generate_instance(const ModelParams& params, std::int64_t entry_budget) {
  validate(params, entry_budget);
  Instance inst;
  inst.truth = sample_image_matrix(params, entry_budget);
  Rng rng = substream(params.seed, kSelectionStream, 0);
  inst.selections = sample_selection_vectors(params, rng);

  SyntheticDataset& ds = inst.dataset;
  ds.params = params;
  ds.public_view = inst.truth.entries.leftCols(params.n_pub);
  ds.images.resize(params.m, params.d);
  parallel_for(0, static_cast<std::size_t>(params.m), [&](std::size_t i) {
    ds.images.row(static_cast<Eigen::Index>(i)) = synthesize(inst.truth, inst.selections[i]).transpose();
  });
  return inst;
}

Eigen::MatrixXi overlap_oracle(const std::vector<SelectionVector>& ws, int scale) {
  const auto m = static_cast<Eigen::Index>(ws.size());
  Eigen::MatrixXi out(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const auto value = static_cast<int>(std::lround(scale * inner_product(ws[i], ws[j])));
      out(i, j) = value;
      out(j, i) = value;
    }
  }
  return out;
}

FoldedSampler::FoldedSampler(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::kMatrix, "covariance must be square");
  if (cov.size() > 0 && (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error(ErrorCode::kMatrix, "covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorCode::kMatrix, "eigendecomposition failed");
  Eigen::VectorXd values = eig.eigenvalues();
  if (values.size() > 0 && values.minCoeff() < -1e-8) {
    throw Error(ErrorCode::kMatrix, "covariance is not positive semidefinite (min eigenvalue " +
                                        std::to_string(values.minCoeff()) + ")");
  }
  values = values.cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * values.asDiagonal();
}

Eigen::VectorXd FoldedSampler::operator()(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(factor_.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return (factor_ * z).cwiseAbs();
}

Eigen::VectorXd sample_folded(const Eigen::MatrixXd& cov, Rng& rng) { return FoldedSampler(cov)(rng); }

}  // namespace mtpr
