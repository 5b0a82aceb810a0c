#include "mtpr/public_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtpr {
namespace {

void check_pairs(const Eigen::Ref<const Eigen::MatrixXd>& rows, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (rows.rows() == 0) throw Error(ErrorCode::kDimensionMismatch, "at least one pixel is required");
  if (rows.rows() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pixel rows (" + std::to_string(rows.rows()) + ") and responses (" +
                    std::to_string(y.size()) + ") disagree");
  }
}

// Euclidean projection onto {x >= 0, sum x = 1}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).cwiseMax(0.0);
}

Eigen::MatrixXd project_unit_trace_psd(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  const Eigen::VectorXd lambda = project_simplex(eig.eigenvalues());
  Eigen::MatrixXd out = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

// Euclidean projection of the entries onto the L1 ball of the given radius.
Eigen::MatrixXd project_l1_ball(const Eigen::MatrixXd& a, double radius) {
  const double norm = a.cwiseAbs().sum();
  if (norm <= radius) return a;
  std::vector<double> mags(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(a.data()[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumulative += mags[j];
    const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
    if (mags[j] - candidate > 0.0) theta = candidate;
  }
  return a.unaryExpr([theta](double x) { return std::copysign(std::max(std::abs(x) - theta, 0.0), x); });
}

double top_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(eig.eigenvalues().size() - 1);
}

Eigen::Index best_diagonal(const Eigen::MatrixXd& m) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m.rows(); ++i) {
    if (m(i, i) > m(best, best)) best = i;
  }
  return best;
}

// Z is PSD with unit trace; pulls it toward the vertex e e^T until the L1
// constraint holds. Both endpoints lie in the PSD/trace set, so the mix does too.
Eigen::MatrixXd make_feasible(const Eigen::MatrixXd& z, double k, Eigen::Index vertex) {
  const double l1 = z.cwiseAbs().sum();
  if (l1 <= k) return z;
  const double theta = (l1 - k) / (l1 - 1.0);
  Eigen::MatrixXd out = (1.0 - theta) * z;
  out(vertex, vertex) += theta;
  return out;
}

}  // namespace

Eigen::MatrixXd spectral_matrix(const Eigen::Ref<const Eigen::MatrixXd>& public_rows,
                                const Eigen::Ref<const Eigen::VectorXd>& responses) {
  check_pairs(public_rows, responses);
  const auto d = static_cast<double>(public_rows.rows());
  const Eigen::VectorXd weight = responses.array().square() - 1.0;
  const Eigen::MatrixXd weighted = public_rows.array().colwise() * weight.array();
  Eigen::MatrixXd out = weighted.transpose() * public_rows;
  out /= d;
  out.diagonal().array() -= weight.sum() / d;
  return 0.5 * (out + out.transpose());
}

SdpResult sparse_pca_sdp(const Eigen::MatrixXd& m, std::int64_t k, const SdpOptions& options) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "sparse_pca_sdp needs a nonempty square matrix");
  }
  if (k < 1) throw Error(ErrorCode::kParameter, "sparse_pca_sdp needs k >= 1");
  if (!(options.tol > 0.0)) throw Error(ErrorCode::kParameter, "sparse_pca_sdp needs tol > 0");

  const auto n = m.rows();
  const double radius = static_cast<double>(k);
  const double max_abs = m.cwiseAbs().maxCoeff();
  const double target_gap = options.tol * (1.0 + radius * max_abs);
  const Eigen::Index vertex = best_diagonal(m);

  double rho = std::max(m.norm(), 1e-8);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd z;

  SdpResult best;
  best.z = Eigen::MatrixXd::Zero(n, n);
  best.z(vertex, vertex) = 1.0;
  best.objective = m(vertex, vertex);
  best.dual_bound = top_eigenvalue(m);  // Y = 0 is always a valid multiplier

  for (int it = 1; it <= options.max_iterations; ++it) {
    z = project_unit_trace_psd(w - u + m / rho);
    const Eigen::MatrixXd w_prev = w;
    w = project_l1_ball(z + u, radius);
    u += z - w;

    const double primal_res = (z - w).norm();
    const double dual_res = rho * (w - w_prev).norm();

    if (it % 10 == 0 || it == 1 || primal_res + dual_res < 1e-14) {
      Eigen::MatrixXd feasible = make_feasible(z, radius, vertex);
      const double objective = (feasible.array() * m.array()).sum();
      if (objective > best.objective) {
        best.objective = objective;
        best.z = std::move(feasible);
      }
      const Eigen::MatrixXd y = rho * u;
      const double bound = top_eigenvalue(m - y) + radius * y.cwiseAbs().maxCoeff();
      best.dual_bound = std::min(best.dual_bound, bound);
      best.iterations = it;
      if (best.dual_bound - best.objective <= target_gap) return best;
    }

    if (primal_res > 10.0 * dual_res) {
      rho *= 2.0;
      u /= 2.0;
    } else if (dual_res > 10.0 * primal_res) {
      rho /= 2.0;
      u *= 2.0;
    }
  }
  best.iterations = options.max_iterations;
  throw OptimizationError("sparse PCA SDP did not reach duality gap " + std::to_string(target_gap) +
                              " (gap " + std::to_string(best.dual_bound - best.objective) + ")",
                          std::move(best));
}

std::vector<std::int64_t> top_k_magnitude(const Eigen::Ref<const Eigen::VectorXd>& v, std::int64_t k) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  k = std::clamp<std::int64_t>(k, 0, v.size());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t b) { return std::abs(v(a)) > std::abs(v(b)); });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

ThresholdedSpectral diagonal_threshold_support(const Eigen::Ref<const Eigen::MatrixXd>& public_rows,
                                               const Eigen::Ref<const Eigen::VectorXd>& responses,
                                               std::int64_t k_pub, std::int64_t window) {
  check_pairs(public_rows, responses);
  if (window < k_pub) throw Error(ErrorCode::kParameter, "threshold window must be at least k_pub");
  const auto n_pub = public_rows.cols();
  window = std::min<std::int64_t>(window, n_pub);

  ThresholdedSpectral out;
  const Eigen::VectorXd y2 = responses.array().square();
  out.scores = (public_rows.array().square().colwise() * y2.array()).colwise().sum().transpose() /
               static_cast<double>(public_rows.rows());

  std::vector<std::int64_t> order(static_cast<std::size_t>(n_pub));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t a, std::int64_t b) { return out.scores(a) > out.scores(b); });
  order.resize(static_cast<std::size_t>(window));
  std::sort(order.begin(), order.end());
  out.kept = order;

  Eigen::MatrixXd block_rows(public_rows.rows(), window);
  for (std::int64_t c = 0; c < window; ++c) block_rows.col(c) = public_rows.col(out.kept[static_cast<std::size_t>(c)]);
  const Eigen::MatrixXd block = spectral_matrix(block_rows, responses);

  out.matrix = Eigen::MatrixXd::Zero(n_pub, n_pub);
  for (std::int64_t a = 0; a < window; ++a) {
    for (std::int64_t b = 0; b < window; ++b) {
      out.matrix(out.kept[static_cast<std::size_t>(a)], out.kept[static_cast<std::size_t>(b)]) = block(a, b);
    }
  }
  return out;
}

SupportEstimate learn_public(const Eigen::Ref<const Eigen::MatrixXd>& public_rows,
                             const Eigen::Ref<const Eigen::VectorXd>& responses, std::int64_t k_pub,
                             const LearnPublicOptions& options) {
  if (k_pub < 1) throw Error(ErrorCode::kParameter, "learn_public needs k_pub >= 1");
  if (k_pub > public_rows.cols()) throw Error(ErrorCode::kParameter, "k_pub exceeds the public image count");

  SupportEstimate est;
  if (options.method == PublicMethod::kThreshold) {
    const ThresholdedSpectral t = diagonal_threshold_support(public_rows, responses, k_pub,
                                                             options.window.value_or(default_window(k_pub)));
    const auto w = static_cast<Eigen::Index>(t.kept.size());
    Eigen::MatrixXd block(w, w);
    for (Eigen::Index a = 0; a < w; ++a) {
      for (Eigen::Index b = 0; b < w; ++b) {
        block(a, b) = t.matrix(t.kept[static_cast<std::size_t>(a)], t.kept[static_cast<std::size_t>(b)]);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
    if (eig.info() != Eigen::Success) throw Error(ErrorCode::kMatrix, "eigensolver failed in learn_public");
    const Eigen::VectorXd top = eig.eigenvectors().col(w - 1);
    est.confidence = eig.eigenvalues()(w - 1);
    for (auto local : top_k_magnitude(top, k_pub)) est.indices.push_back(t.kept[static_cast<std::size_t>(local)]);
    std::sort(est.indices.begin(), est.indices.end());
  } else {
    const Eigen::MatrixXd m = spectral_matrix(public_rows, responses);
    const SdpResult sdp = sparse_pca_sdp(m, k_pub, options.sdp);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sdp.z);
    if (eig.info() != Eigen::Success) throw Error(ErrorCode::kMatrix, "eigensolver failed in learn_public");
    const Eigen::VectorXd top = eig.eigenvectors().col(m.rows() - 1);
    est.confidence = top.dot(m * top);
    est.indices = top_k_magnitude(top, k_pub);
  }
  est.low_confidence = est.confidence < low_confidence_threshold(k_pub);
  return est;
}

}  // namespace mtpr
