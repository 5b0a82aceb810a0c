#include <cmath>
#include <map>

#include "doctest.h"
#include "mtpr/gram.hpp"
#include "mtpr/model.hpp"
#include "oracles.hpp"

using namespace mtpr;

namespace {

ModelParams private_params(std::int64_t d, std::int64_t n_priv, std::int64_t k, std::int64_t m, std::uint64_t seed) {
  ModelParams p;
  p.d = d;
  p.n_priv = n_priv;
  p.k_priv = k;
  p.m = m;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("image matrix is deterministic per seed") {
  ModelParams p{2, 1, 1, 1, 0, 1, 42};
  const ImageMatrix a = sample_image_matrix(p);
  const ImageMatrix b = sample_image_matrix(p);
  CHECK(a.entries.rows() == 2);
  CHECK(a.entries.cols() == 2);
  CHECK(a.entries == b.entries);
  CHECK(a.public_index == std::vector<std::int64_t>{0});
  p.seed = 43;
  CHECK(sample_image_matrix(p).entries != a.entries);
}

TEST_CASE("image matrix entries are standard normal") {
  const ModelParams p{100000, 0, 10, 0, 2, 1, 5};
  const ImageMatrix x = sample_image_matrix(p);
  const double mean = x.entries.mean();
  const double var = (x.entries.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(sample_image_matrix(ModelParams{0, 0, 4, 0, 2, 1, 0}), Error);
  try {
    validate(ModelParams{0, 0, 4, 0, 2, 1, 0});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSizing);
  }
  auto code_of = [](const ModelParams& p) {
    try {
      validate(p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternal;
  };
  CHECK(code_of(ModelParams{10, 1, 4, 2, 2, 1, 0}) == ErrorCode::kParameter);
  CHECK(code_of(ModelParams{10, 0, 4, 0, 5, 1, 0}) == ErrorCode::kParameter);
  CHECK(code_of(ModelParams{10, 0, 4, 0, 1, 1, 0}) == ErrorCode::kParameter);
  CHECK(code_of(ModelParams{1 << 20, 0, 1 << 10, 0, 2, 1, 0}) == ErrorCode::kSizing);
  CHECK_NOTHROW(validate(ModelParams{10, 0, 4, 0, 2, 0, 0}));
}

TEST_CASE("selection vectors: forced single draw") {
  const ModelParams p = private_params(1, 4, 2, 1, 0);
  Rng rng(1);
  const auto ws = sample_selection_vectors(p, rng);
  REQUIRE(ws.size() == 1);
  CHECK(ws[0].support_pub.empty());
  REQUIRE(ws[0].support_priv.size() == 2);
  CHECK(ws[0].support_priv[0] < ws[0].support_priv[1]);
  CHECK(ws[0].support_priv[1] < 4);
  CHECK(ws[0].weight_priv == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("selection vectors: supports are uniform") {
  const ModelParams p = private_params(1, 4, 2, 60000, 0);
  Rng rng(2);
  std::map<std::pair<std::int64_t, std::int64_t>, int> counts;
  for (const auto& w : sample_selection_vectors(p, rng)) ++counts[{w.support_priv[0], w.support_priv[1]}];
  CHECK(counts.size() == 6);
  for (const auto& [pair, c] : counts) CHECK(std::abs(c - 10000) <= 500);
}

TEST_CASE("selection vectors have unit norm and disjoint parts") {
  const ModelParams p{1, 10, 10, 2, 2, 200, 0};
  Rng rng(3);
  for (const auto& w : sample_selection_vectors(p, rng)) {
    CHECK(std::abs(w.squared_norm() - 1.0) <= 1e-12);
    CHECK(std::abs(w.dense(p.n()).squaredNorm() - 1.0) <= 1e-12);
    for (auto s : w.support_pub) CHECK(s < p.n_pub);
    for (auto s : w.support_priv) CHECK(s >= p.n_pub);
  }
  Rng bad(4);
  CHECK_THROWS_AS(sample_selection_vectors(ModelParams{1, 1, 10, 2, 2, 1, 0}, bad), Error);
}

TEST_CASE("synthesize") {
  ImageMatrix x;
  x.entries.resize(2, 2);
  x.entries << 3, -1, -4, 2;
  SelectionVector one;
  one.support_priv = {1};
  one.weight_priv = 1.0;
  CHECK(synthesize(x, one) == x.entries.col(1).cwiseAbs());

  SelectionVector pair;
  pair.support_priv = {0, 1};
  pair.weight_priv = 1.0 / std::sqrt(2.0);
  const Eigen::VectorXd y = synthesize(x, pair);
  CHECK(y(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(y(1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  SelectionVector out_of_range;
  out_of_range.support_priv = {5};
  out_of_range.weight_priv = 1.0;
  CHECK_THROWS_AS(synthesize(x, out_of_range), Error);
}

TEST_CASE("synthesize is invariant to flipping all private columns") {
  const ModelParams p{50, 3, 6, 1, 2, 20, 8};
  const Instance inst = generate_instance(p);
  ImageMatrix flipped = inst.truth;
  flipped.entries.rightCols(p.n_priv) *= -1.0;
  SelectionVector priv_only;
  priv_only.support_priv = {3, 7};
  priv_only.weight_priv = 1.0 / std::sqrt(2.0);
  CHECK(synthesize(inst.truth, priv_only) == synthesize(flipped, priv_only));
}

TEST_CASE("generate_instance") {
  const ModelParams p = private_params(100, 5, 2, 10, 11);
  const Instance a = generate_instance(p);
  const Instance b = generate_instance(p);
  CHECK(a.truth.entries == b.truth.entries);
  CHECK(a.dataset.images == b.dataset.images);
  REQUIRE(a.selections.size() == 10);
  CHECK(a.dataset.images.rows() == 10);
  CHECK(a.dataset.images.minCoeff() >= 0.0);
  for (Eigen::Index i = 0; i < 10; ++i) {
    const Eigen::VectorXd expect = (a.truth.entries * a.selections[i].dense(p.n())).cwiseAbs();
    CHECK((a.dataset.images.row(i).transpose() - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }

  const Instance empty = generate_instance(private_params(100, 5, 2, 0, 1));
  CHECK(empty.dataset.images.rows() == 0);
  CHECK(empty.selections.empty());

  const ModelParams mixed{30, 4, 5, 2, 2, 3, 2};
  const Instance m = generate_instance(mixed);
  CHECK(m.dataset.public_view == m.truth.entries.leftCols(4));
}

TEST_CASE("overlap oracle") {
  SelectionVector a;
  a.support_priv = {1, 2};
  a.weight_priv = 1.0 / std::sqrt(2.0);
  SelectionVector b = a;
  b.support_priv = {2, 3};
  SelectionVector c = a;
  c.support_priv = {4, 5};
  const Eigen::MatrixXi m = overlap_oracle({a, b, c, a}, 2);
  CHECK(m(0, 1) == 1);
  CHECK(m(0, 3) == 2);
  CHECK(m(0, 2) == 0);
  CHECK(m.diagonal() == Eigen::Vector4i::Constant(2));
}

TEST_CASE("folded sampler") {
  Rng rng(21);
  const FoldedSampler unit(Eigen::MatrixXd::Identity(1, 1));
  double sum = 0.0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) sum += unit(rng)(0);
  CHECK(std::abs(sum / draws - std::sqrt(2.0 / M_PI)) < 0.01);

  CHECK(sample_folded(Eigen::MatrixXd::Zero(3, 3), rng) == Eigen::Vector3d::Zero());

  Eigen::MatrixXd cov(2, 2);
  cov << 1, 0.5, 0.5, 1;
  const FoldedSampler pair(cov);
  const int n = 200000;
  Eigen::MatrixXd g(2, n);
  for (int i = 0; i < n; ++i) g.col(i) = pair(rng);
  const Eigen::Vector2d mean = g.rowwise().mean();
  const double c = ((g.row(0).array() - mean(0)) * (g.row(1).array() - mean(1))).mean();
  CHECK(std::abs(c - 0.0813758) < 0.005);

  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  try {
    FoldedSampler s(bad);
    FAIL("expected a matrix error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMatrix);
  }
}
