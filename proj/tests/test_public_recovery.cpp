#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mtpr/model.hpp"
#include "mtpr/public_recovery.hpp"

using namespace mtpr;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = normal(rng);
  }
  return out;
}

// Responses |P w| for a public-only unit vector with equal weights on `support`.
Eigen::VectorXd responses(const Eigen::MatrixXd& p, const std::vector<std::int64_t>& support) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.rows());
  for (auto s : support) sum += p.col(s);
  return (sum / std::sqrt(static_cast<double>(support.size()))).cwiseAbs();
}

void check_feasible(const SdpResult& r, double k, double tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.z);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
  CHECK(std::abs(r.z.trace() - 1.0) <= tol);
  CHECK(r.z.cwiseAbs().sum() <= k + tol);
  CHECK((r.z - r.z.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(r.objective <= r.dual_bound + 1e-9);
}

}  // namespace

TEST_CASE("spectral matrix vanishes for unit responses") {
  Rng rng(1);
  const Eigen::MatrixXd p = gaussian(50, 6, rng);
  CHECK(spectral_matrix(p, Eigen::VectorXd::Ones(50)) == Eigen::MatrixXd::Zero(6, 6));
}

TEST_CASE("spectral matrix of a single pair") {
  Eigen::MatrixXd p(1, 2);
  p << 2.0, -1.0;
  Eigen::VectorXd y(1);
  y << 3.0;
  Eigen::MatrixXd expect(2, 2);
  // (9 - 1) * ([[4, -2], [-2, 1]] - I)
  expect << 24, -16, -16, 0;
  CHECK((spectral_matrix(p, y) - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(spectral_matrix(p, Eigen::VectorXd::Ones(2)), Error);
}

TEST_CASE("spectral matrix averages to twice the outer product") {
  Rng rng(2);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(20, 20);
  const int instances = 200;
  for (int t = 0; t < instances; ++t) {
    const Eigen::MatrixXd p = gaussian(2000, 20, rng);
    mean += spectral_matrix(p, p.col(0).cwiseAbs());
  }
  mean /= instances;
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(20, 20);
  expect(0, 0) = 2.0;
  CHECK((mean - expect).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("sdp: rank-one diagonal optimum") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(5, 5);
  m(0, 0) = 1.0;
  const SdpResult r = sparse_pca_sdp(m, 1);
  CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-6));
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(5, 5);
  e(0, 0) = 1.0;
  CHECK((r.z - e).cwiseAbs().maxCoeff() < 1e-4);
  check_feasible(r, 1, 1e-5);
}

TEST_CASE("sdp: zero matrix") {
  const SdpResult r = sparse_pca_sdp(Eigen::MatrixXd::Zero(4, 4), 2);
  CHECK(r.objective == 0.0);
  check_feasible(r, 2, 1e-5);
}

TEST_CASE("sdp: planted sparse direction") {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(12);
  v(2) = 1.0 / std::sqrt(2.0);
  v(9) = 1.0 / std::sqrt(2.0);
  const SdpResult r = sparse_pca_sdp(0.5 * v * v.transpose(), 2);
  check_feasible(r, 2, 1e-5);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.z);
  const Eigen::VectorXd top = eig.eigenvectors().col(11);
  CHECK(std::min((top - v).norm(), (top + v).norm()) < 0.05);
}

TEST_CASE("sdp: noisy spectral input stays feasible and certified") {
  Rng rng(3);
  const Eigen::MatrixXd p = gaussian(3000, 30, rng);
  const Eigen::MatrixXd m = spectral_matrix(p, responses(p, {4, 17}));
  const SdpResult r = sparse_pca_sdp(m, 2);
  check_feasible(r, 2, 1e-5);
  CHECK(r.dual_bound - r.objective <= 1e-5 * (1 + 2 * m.cwiseAbs().maxCoeff()));
  const auto top = top_k_magnitude(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.z).eigenvectors().col(29), 2);
  CHECK(top == std::vector<std::int64_t>{4, 17});
}

TEST_CASE("sdp: iteration budget exhaustion carries a feasible iterate") {
  Rng rng(4);
  const Eigen::MatrixXd p = gaussian(500, 25, rng);
  const Eigen::MatrixXd m = spectral_matrix(p, responses(p, {1, 2, 3}));
  SdpOptions options;
  options.max_iterations = 2;
  options.tol = 1e-12;
  try {
    sparse_pca_sdp(m, 3, options);
    FAIL("expected an optimization error");
  } catch (const OptimizationError& e) {
    CHECK(e.code() == ErrorCode::kOptimization);
    check_feasible(e.best(), 3, 1e-9);
  }
  CHECK_THROWS_AS(sparse_pca_sdp(Eigen::MatrixXd::Zero(2, 3), 1), Error);
  CHECK_THROWS_AS(sparse_pca_sdp(m, 0), Error);
}

TEST_CASE("diagonal threshold keeps the planted coordinate") {
  int kept = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(100 + seed);
    const Eigen::MatrixXd p = gaussian(5000, 500, rng);
    const ThresholdedSpectral t = diagonal_threshold_support(p, p.col(0).cwiseAbs(), 1, 25);
    CHECK(t.kept.size() == 25);
    kept += std::binary_search(t.kept.begin(), t.kept.end(), 0) ? 1 : 0;
  }
  CHECK(kept >= 99);
}

TEST_CASE("diagonal threshold: ties, full window and bad window") {
  Rng rng(5);
  const Eigen::MatrixXd p = gaussian(200, 40, rng);
  const ThresholdedSpectral zero = diagonal_threshold_support(p, Eigen::VectorXd::Zero(200), 2, 10);
  CHECK(zero.scores == Eigen::VectorXd::Zero(40));
  std::vector<std::int64_t> first(10);
  std::iota(first.begin(), first.end(), std::int64_t{0});
  CHECK(zero.kept == first);

  const Eigen::VectorXd y = responses(p, {3});
  const ThresholdedSpectral full = diagonal_threshold_support(p, y, 1, 40);
  CHECK((full.matrix - spectral_matrix(p, y)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(diagonal_threshold_support(p, y, 1, 400).kept.size() == 40);
  CHECK_THROWS_AS(diagonal_threshold_support(p, y, 3, 2), Error);
}

TEST_CASE("learn_public: single public image") {
  int hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(300 + seed);
    const Eigen::MatrixXd p = gaussian(2000, 100, rng);
    hits += learn_public(p, p.col(2).cwiseAbs(), 1).indices == std::vector<std::int64_t>{2} ? 1 : 0;
  }
  CHECK(hits >= 99);
}

TEST_CASE("learn_public: two public images among 500") {
  int hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(500 + seed);
    const Eigen::MatrixXd p = gaussian(2000, 500, rng);
    hits += learn_public(p, responses(p, {2, 6}), 2).indices == std::vector<std::int64_t>{2, 6} ? 1 : 0;
  }
  CHECK(hits >= 95);
}

TEST_CASE("learn_public: sdp method agrees on an easy instance") {
  Rng rng(6);
  const Eigen::MatrixXd p = gaussian(3000, 40, rng);
  LearnPublicOptions options;
  options.method = PublicMethod::kSdp;
  const SupportEstimate est = learn_public(p, responses(p, {5, 30}), 2, options);
  CHECK(est.indices == std::vector<std::int64_t>{5, 30});
  CHECK_FALSE(est.low_confidence);
}

TEST_CASE("learn_public: purely private response is low confidence") {
  Rng rng(7);
  const Eigen::MatrixXd p = gaussian(100000, 50, rng);
  const Eigen::MatrixXd hidden = gaussian(100000, 1, rng);
  const SupportEstimate est = learn_public(p, hidden.col(0).cwiseAbs(), 1);
  CHECK(est.low_confidence);
  CHECK(est.confidence < low_confidence_threshold(1));
  CHECK_THROWS_AS(learn_public(p, hidden.col(0).cwiseAbs(), 0), Error);
}

TEST_CASE("learn_public is equivariant under column permutations") {
  Rng rng(8);
  const Eigen::MatrixXd p = gaussian(3000, 60, rng);
  const Eigen::VectorXd y = responses(p, {7, 41});
  std::vector<int> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd q(3000, 60);
  for (int c = 0; c < 60; ++c) q.col(perm[c]) = p.col(c);
  const auto original = learn_public(p, y, 2).indices;
  std::vector<std::int64_t> mapped;
  for (auto i : original) mapped.push_back(perm[static_cast<std::size_t>(i)]);
  std::sort(mapped.begin(), mapped.end());
  CHECK(learn_public(q, y, 2).indices == mapped);
}

TEST_CASE("top_k_magnitude breaks ties toward lower indices") {
  Eigen::VectorXd v(5);
  v << 1.0, -3.0, 3.0, 0.5, -1.0;
  CHECK(top_k_magnitude(v, 2) == std::vector<std::int64_t>{1, 2});
  CHECK(top_k_magnitude(v, 3) == std::vector<std::int64_t>{0, 1, 2});
}
