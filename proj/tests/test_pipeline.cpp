#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "mtpr/pipeline.hpp"

using namespace mtpr;

namespace {

SupportEstimate support(std::vector<std::int64_t> indices) {
  SupportEstimate s;
  s.indices = std::move(indices);
  return s;
}

// Counts every read the attack makes; there is no way to reach the truth.
class TrackingInput : public AttackInput {
 public:
  explicit TrackingInput(const SyntheticDataset& data) : data_(data) {}
  const ModelParams& params() const override {
    ++params_reads;
    return data_.params;
  }
  const Eigen::MatrixXd& images() const override {
    ++image_reads;
    return data_.images;
  }
  const Eigen::MatrixXd& public_view() const override {
    ++public_reads;
    return data_.public_view;
  }
  mutable int params_reads = 0;
  mutable int image_reads = 0;
  mutable int public_reads = 0;

 private:
  const SyntheticDataset& data_;
};

ImageMatrix random_truth(std::int64_t d, std::int64_t n, std::uint64_t seed) {
  return sample_image_matrix(ModelParams{d, 0, n, 0, 2, 1, seed});
}

}  // namespace

TEST_CASE("subtract: all-private pass-through") {
  const OverlapMatrix m{Eigen::MatrixXi::Identity(3, 3) * 2, 2};
  const OverlapMatrix out = subtract_public_contribution(m, {}, ModelParams{10, 0, 5, 0, 2, 3, 0});
  CHECK(out.entries == m.entries);
  CHECK(out.grid == 2);
}

TEST_CASE("subtract: shared public image, disjoint private parts") {
  // k_pub = 1, k_priv = 2: grid 4, shared public image gives <w_i, w_j> = 1/2.
  OverlapMatrix m{Eigen::MatrixXi::Identity(2, 2) * 4, 4};
  m.entries(0, 1) = m.entries(1, 0) = 2;
  const ModelParams p{10, 3, 5, 1, 2, 2, 0};
  const OverlapMatrix out = subtract_public_contribution(m, {support({0}), support({0})}, p);
  CHECK(out.grid == 2);
  CHECK(out(0, 1) == 0);
  CHECK(out(1, 0) == 0);
  CHECK(out(0, 0) == 2);
  CHECK_NOTHROW(check_overlap_invariants(out));
}

TEST_CASE("subtract: wrong support is detected") {
  // k_pub = 2, k_priv = 3: grid 12. One shared public image, no private overlap.
  OverlapMatrix m{Eigen::MatrixXi::Identity(3, 3) * 12, 12};
  m.entries(0, 1) = m.entries(1, 0) = 3;
  const ModelParams p{10, 6, 8, 2, 3, 3, 0};
  const OverlapMatrix ok = subtract_public_contribution(m, {support({0, 1}), support({1, 2}), support({4, 5})}, p);
  CHECK(ok(0, 1) == 0);
  CHECK_NOTHROW(check_overlap_invariants(ok));
  try {
    subtract_public_contribution(m, {support({0, 1}), support({2, 3}), support({4, 5})}, p);
    FAIL("expected a pair consistency error");
  } catch (const PairConsistencyError& e) {
    CHECK(e.code() == ErrorCode::kConsistency);
    CHECK(e.pair() == std::pair<Eigen::Index, Eigen::Index>(0, 1));
  }
  CHECK_THROWS_AS(subtract_public_contribution(OverlapMatrix{m.entries, 4}, {support({0, 1}), support({1, 2}),
                                                                            support({4, 5})}, p),
                  Error);
  CHECK_THROWS_AS(subtract_public_contribution(m, {support({0, 1})}, p), Error);
}

TEST_CASE("subtract: exact on sampled supports") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::int64_t kp = 1 + static_cast<std::int64_t>(seed % 4);
    const std::int64_t kq = 2 + static_cast<std::int64_t>(seed % 3);
    const ModelParams p{1, 10, 12, kp, kq, 60, seed};
    Rng rng(seed);
    const auto ws = sample_selection_vectors(p, rng);
    const int grid = gram_grid(kp, kq);
    const OverlapMatrix mixed{overlap_oracle(ws, grid), grid};
    std::vector<SupportEstimate> supports;
    std::vector<SelectionVector> priv;
    for (const auto& w : ws) {
      supports.push_back(support(w.support_pub));
      SelectionVector q = w;
      q.support_pub.clear();
      q.weight_pub = 0.0;
      q.weight_priv = 1.0 / std::sqrt(static_cast<double>(kq));
      priv.push_back(q);
    }
    const OverlapMatrix out = subtract_public_contribution(mixed, supports, p);
    CHECK(out.entries == overlap_oracle(priv, static_cast<int>(kq)));
    CHECK_NOTHROW(check_overlap_invariants(out));
  }
}

TEST_CASE("attack parameters") {
  CHECK(attack_eta(ModelParams{1, 0, 30, 0, 2, 1, 0}) == 0.25);
  CHECK(attack_eta(ModelParams{1, 10, 30, 2, 2, 1, 0}) == 0.125);
  CHECK(attack_eta(ModelParams{1, 10, 30, 2, 3, 1, 0}) == doctest::Approx(1.0 / 24.0));
  CHECK(recommended_pixels(0.25) > recommended_pixels(0.5));
  CHECK(recommended_pixels(0.25) <= 20000);
  const double few = expected_floral_count(ModelParams{1, 0, 30, 0, 2, 30, 0});
  const double many = expected_floral_count(ModelParams{1, 0, 30, 0, 2, 1500, 0});
  CHECK(few < 1.0);
  CHECK(many > few);
  CHECK(many > 1.0);
  CHECK(expected_floral_count(ModelParams{1, 0, 3, 0, 2, 100, 0}) == 0.0);
}

TEST_CASE("attack input validation") {
  SyntheticDataset data;
  data.params = ModelParams{100, 0, 10, 0, 1, 5, 0};
  data.images = Eigen::MatrixXd::Ones(5, 100);
  CHECK_THROWS_AS(learn_private_images(DatasetView(data)), Error);
  data.params.k_priv = 2;
  data.images = Eigen::MatrixXd::Ones(4, 100);
  CHECK_THROWS_AS(learn_private_images(DatasetView(data)), Error);
}

TEST_CASE("far too few samples") {
  const Instance inst = generate_instance(ModelParams{4000, 0, 30, 0, 2, 10, 3});
  try {
    learn_private_images(DatasetView(inst.dataset));
    FAIL("expected insufficient samples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientSamples);
    CHECK(std::string(e.what()).find("insufficient m") != std::string::npos);
  }
}

TEST_CASE("evaluate: sign flips, zeros and a perturbation") {
  const ImageMatrix truth = random_truth(500, 6, 21);
  std::mt19937_64 rng(22);
  std::bernoulli_distribution flip(0.5);
  const std::vector<std::int64_t> cols{4, 1, 5, 2};
  Eigen::MatrixXd recovered(4, 500);
  for (int r = 0; r < 4; ++r) {
    for (int p = 0; p < 500; ++p) recovered(r, p) = (flip(rng) ? -1.0 : 1.0) * truth.entries(p, cols[r]);
  }
  const EvaluationResult exact = evaluate_recovery(recovered, truth, 0);
  CHECK(exact.exact_count == 4);
  CHECK(exact.max_abs_error <= 1e-12);
  REQUIRE(exact.matching.size() == 4);
  for (int r = 0; r < 4; ++r) CHECK(exact.matching[r] == std::pair<int, std::int64_t>(r, cols[r]));

  CHECK(evaluate_recovery(Eigen::MatrixXd::Zero(4, 500), truth, 0).exact_count == 0);

  Eigen::MatrixXd bumped = recovered;
  bumped(2, 17) += 1e-3 * (bumped(2, 17) >= 0 ? 1.0 : -1.0);
  const EvaluationResult one_off = evaluate_recovery(bumped, truth, 0);
  CHECK(one_off.exact_count == 3);
  CHECK(one_off.errors[2] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(one_off.max_abs_error == doctest::Approx(1e-3).epsilon(1e-6));

  // Public columns are never matched.
  const EvaluationResult shifted = evaluate_recovery(recovered, truth, 2);
  for (const auto& [row, col] : shifted.matching) CHECK(col >= 2);
  CHECK(shifted.exact_count == 3);
  CHECK_THROWS_AS(evaluate_recovery(Eigen::MatrixXd::Zero(4, 10), truth, 0), Error);
}

TEST_CASE("end to end, all private, through the access-tracking input") {
  const Instance inst = generate_instance(ModelParams{20000, 0, 8, 0, 2, 120, 14});
  const TrackingInput input(inst.dataset);
  const AttackReport report = learn_private_images(input);
  CHECK(input.params_reads > 0);
  CHECK(input.image_reads > 0);
  CHECK(report.recovered.rows() == 4);
  CHECK(report.public_supports.empty());
  CHECK(report.floral.indices.size() == 6);
  const EvaluationResult ev = evaluate_recovery(report, inst.truth, 0);
  CHECK(ev.exact_count == 4);
  std::vector<std::int64_t> matched;
  for (const auto& [row, col] : ev.matching) matched.push_back(col);
  std::sort(matched.begin(), matched.end());
  CHECK(std::adjacent_find(matched.begin(), matched.end()) == matched.end());
  std::vector<std::string> stages;
  for (const auto& t : report.timing) stages.push_back(t.stage);
  CHECK(stages == std::vector<std::string>{"gram", "floral", "solve"});
}

TEST_CASE("end to end, mixed") {
  const Instance inst = generate_instance(ModelParams{20000, 40, 8, 2, 2, 150, 2});
  const TrackingInput input(inst.dataset);
  const AttackReport report = learn_private_images(input);
  CHECK(input.public_reads > 0);
  CHECK(report.public_supports.size() == 150);
  int correct = 0;
  for (std::size_t i = 0; i < inst.selections.size(); ++i) {
    correct += report.public_supports[i].indices == inst.selections[i].support_pub ? 1 : 0;
  }
  CHECK(correct >= 140);
  CHECK(evaluate_recovery(report, inst.truth, 40).exact_count == 4);
  std::vector<std::string> stages;
  for (const auto& t : report.timing) stages.push_back(t.stage);
  CHECK(stages == std::vector<std::string>{"gram", "public", "subtract", "floral", "solve"});
}

TEST_CASE("more samples never make floral families rarer") {
  // Overlap-level trend over a seed battery, no pixels involved.
  int previous = -1;
  for (std::int64_t m : {15, 30, 60, 120}) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const ModelParams p{1, 0, 12, 0, 2, m, seed};
      Rng rng(seed);
      const OverlapMatrix o{overlap_oracle(sample_selection_vectors(p, rng), 2), 2};
      hits += find_floral_submatrix(o, 2).has_value() ? 1 : 0;
    }
    CHECK(hits >= previous);
    previous = hits;
  }
  CHECK(previous == 20);
}
