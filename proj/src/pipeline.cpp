#include "mtpr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "mtpr/parallel.hpp"

namespace mtpr {
namespace {

// Standard deviation of the product of two independent centered folded normals.
constexpr double kFoldedNoise = kPsiMax;
constexpr double kExactRelative = 1e-6;

class Stopwatch {
 public:
  explicit Stopwatch(std::vector<StageTiming>& out, std::string stage)
      : out_(out), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    out_.push_back({stage_, elapsed.count()});
  }
  Stopwatch(const Stopwatch&) = delete;
  Stopwatch& operator=(const Stopwatch&) = delete;

 private:
  std::vector<StageTiming>& out_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const PairConsistencyError& e) {
    throw PairConsistencyError(std::string(stage) + ": " + e.what(), e.pair().first, e.pair().second);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what());
  }
}

std::int64_t support_overlap(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::int64_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
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
  return count;
}

void check_input(const AttackInput& input) {
  const ModelParams& p = input.params();
  if (p.k_priv < 2) throw Error(ErrorCode::kParameter, "the attack needs k_priv >= 2");
  if (p.k_pub < 0 || p.k_pub > p.n_pub) throw Error(ErrorCode::kParameter, "k_pub must lie in [0, n_pub]");
  if (p.k_priv + 2 > 29) throw Error(ErrorCode::kParameter, "k_priv is too large for the floral search");
  if (input.images().rows() != p.m || input.images().cols() != p.d) {
    throw Error(ErrorCode::kDimensionMismatch, "image matrix must be m x d");
  }
  if (p.k_pub > 0 && (input.public_view().rows() != p.d || input.public_view().cols() != p.n_pub)) {
    throw Error(ErrorCode::kDimensionMismatch, "public view must be d x n_pub");
  }
}

// Per-equation values and public offsets for the floral rows, scaled so the
// unknowns are the raw private pixel values.
struct FloralSystem {
  Eigen::MatrixXd values;
  Eigen::MatrixXd offsets;  // empty without public images
};

FloralSystem floral_system(const AttackInput& input, const std::vector<SupportEstimate>& supports,
                           const std::vector<int>& rows, Eigen::Index first, Eigen::Index count) {
  const ModelParams& p = input.params();
  const MixingWeights w = mixing_weights(p);
  FloralSystem out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), count);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out.values.row(static_cast<Eigen::Index>(t)) = input.images().row(rows[t]).segment(first, count) / w.priv;
  }
  if (p.k_pub > 0) {
    out.offsets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), count);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      for (auto s : supports[static_cast<std::size_t>(rows[t])].indices) {
        out.offsets.row(static_cast<Eigen::Index>(t)) += input.public_view().col(s).segment(first, count).transpose();
      }
    }
    out.offsets *= w.pub / w.priv;
  }
  return out;
}

std::vector<SupportEstimate> learn_supports(const AttackInput& input, const LearnPublicOptions& options) {
  const ModelParams& p = input.params();
  std::vector<SupportEstimate> out(static_cast<std::size_t>(p.m));
  parallel_for(0, out.size(), [&](std::size_t i) {
    out[i] = learn_public(input.public_view(), input.images().row(static_cast<Eigen::Index>(i)).transpose(), p.k_pub,
                          options);
  });
  return out;
}

}  // namespace

OverlapMatrix subtract_public_contribution(const OverlapMatrix& m, const std::vector<SupportEstimate>& supports,
                                           const ModelParams& params) {
  if (params.k_pub == 0) return m;
  const auto size = m.size();
  if (m.grid != gram_grid(params.k_pub, params.k_priv)) {
    throw Error(ErrorCode::kParameter, "overlap matrix is not on the mixed grid");
  }
  if (static_cast<Eigen::Index>(supports.size()) != size) {
    throw Error(ErrorCode::kDimensionMismatch, "one support estimate per image is required");
  }
  // b = (2 k_priv k_pub M - k_priv grid a) / (grid k_pub), exactly in integers.
  const std::int64_t kp = params.k_pub;
  const std::int64_t kq = params.k_priv;
  const std::int64_t g = m.grid;
  OverlapMatrix out;
  out.grid = static_cast<int>(kq);
  out.entries.resize(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    out.entries(i, i) = static_cast<int>(kq);
    for (Eigen::Index j = i + 1; j < size; ++j) {
      const std::int64_t a = support_overlap(supports[static_cast<std::size_t>(i)].indices,
                                             supports[static_cast<std::size_t>(j)].indices);
      const std::int64_t numerator = 2 * kq * kp * m(i, j) - kq * g * a;
      const std::int64_t denominator = g * kp;
      if (numerator % denominator != 0 || numerator < 0 || numerator > kq * denominator) {
        throw PairConsistencyError("private overlap of images " + std::to_string(i) + " and " + std::to_string(j) +
                                       " is " + std::to_string(static_cast<double>(numerator) / denominator) +
                                       "; a public support estimate is wrong",
                                   i, j);
      }
      const auto b = static_cast<int>(numerator / denominator);
      out.entries(i, j) = b;
      out.entries(j, i) = b;
    }
  }
  return out;
}

double attack_eta(const ModelParams& params) {
  const int grid = gram_grid(params.k_pub, params.k_priv);
  return std::min(1.0 / static_cast<double>(2 * params.k_pub + 2 * params.k_priv), default_eta(grid));
}

std::int64_t recommended_pixels(double eta) {
  const double margin = psi(eta);
  return static_cast<std::int64_t>(std::ceil(std::pow(6.0 * kFoldedNoise / margin, 2.0)));
}

double expected_floral_count(const ModelParams& p) {
  const auto n = static_cast<double>(p.n_priv);
  const auto k = static_cast<double>(p.k_priv);
  if (p.k_priv + 2 > p.n_priv) return 0.0;
  auto log_choose = [](double a, double b) { return std::lgamma(a + 1) - std::lgamma(b + 1) - std::lgamma(a - b + 1); };
  const double present = -std::expm1(-static_cast<double>(p.m) * std::exp(-log_choose(n, k)));
  return std::exp(log_choose(n, k + 2)) * std::pow(present, (k + 2) * (k + 1) / 2);
}

AttackReport learn_private_images(const AttackInput& input, const AttackOptions& options) {
  in_stage("input", [&] {
    check_input(input);
    return 0;
  });
  const ModelParams& p = input.params();
  const int k = static_cast<int>(p.k_priv);
  AttackReport report;

  const double eta = options.eta.value_or(attack_eta(p));
  if (p.d < recommended_pixels(eta)) {
    report.warnings.push_back("d = " + std::to_string(p.d) + " is below " + std::to_string(recommended_pixels(eta)) +
                              "; rounded overlaps may be wrong");
  }
  if (expected_floral_count(p) < 1.0) {
    report.warnings.push_back("m = " + std::to_string(p.m) + " makes a complete floral family unlikely");
  }

  OverlapMatrix mixed;
  {
    Stopwatch watch(report.timing, "gram");
    mixed = in_stage("gram", [&] { return gram_extract(input.images(), eta, gram_grid(p.k_pub, p.k_priv)); });
  }

  OverlapMatrix priv;
  if (p.k_pub > 0) {
    {
      Stopwatch watch(report.timing, "public");
      report.public_supports = in_stage("public", [&] { return learn_supports(input, options.public_options); });
    }
    Stopwatch watch(report.timing, "subtract");
    LearnPublicOptions retry = options.public_options;
    retry.method = PublicMethod::kSdp;
    std::vector<char> retried(static_cast<std::size_t>(p.m), 0);
    for (;;) {
      try {
        priv = subtract_public_contribution(mixed, report.public_supports, p);
        break;
      } catch (const PairConsistencyError& e) {
        bool progressed = false;
        for (Eigen::Index i : {e.pair().first, e.pair().second}) {
          auto& done = retried[static_cast<std::size_t>(i)];
          if (done) continue;
          done = 1;
          progressed = true;
          ++report.support_retries;
          report.public_supports[static_cast<std::size_t>(i)] = in_stage("public retry", [&] {
            return learn_public(input.public_view(), input.images().row(i).transpose(), p.k_pub, retry);
          });
        }
        if (!progressed) throw PairConsistencyError(std::string("subtract: ") + e.what(), e.pair().first, e.pair().second);
      }
    }
  } else {
    priv = mixed;
  }

  std::optional<FloralAssignment> chosen;
  {
    Stopwatch watch(report.timing, "floral");
    const Eigen::Index probe = std::min<Eigen::Index>(std::max(options.probe_pixels, 1), p.d);
    std::set<std::vector<int>> rejected;
    const FloralSearch search(priv, k, options.floral);
    report.floral_stats = in_stage("floral", [&] {
      return search.run([&](const FloralAssignment& candidate) {
        std::vector<int> key = candidate.indices;
        std::sort(key.begin(), key.end());
        if (rejected.count(key) != 0) return true;
        const FloralSystem sys = floral_system(input, report.public_supports, candidate.indices, 0, probe);
        try {
          const PixelBatchResult r = solve_pixel_batch(candidate, sys.values,
                                                       sys.offsets.size() ? &sys.offsets : nullptr, 0.0);
          (void)r;
          chosen = candidate;
          return false;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kRecoveryQuality) throw;
          rejected.insert(std::move(key));
          ++report.rejected_candidates;
          return true;
        }
      });
    });
  }
  if (!chosen) {
    throw Error(ErrorCode::kInsufficientSamples,
                "floral: insufficient m: no floral submatrix solves (m = " + std::to_string(p.m) +
                    ", houses = " + std::to_string(report.floral_stats.houses) +
                    ", candidates = " + std::to_string(report.floral_stats.found) +
                    ", rejected = " + std::to_string(report.rejected_candidates) +
                    (report.floral_stats.budget_exceeded ? ", house budget exceeded" : "") + ")");
  }
  report.floral = std::move(*chosen);

  {
    Stopwatch watch(report.timing, "solve");
    const FloralSystem sys = floral_system(input, report.public_supports, report.floral.indices, 0, p.d);
    const PixelBatchResult r = in_stage("solve", [&] {
      return solve_pixel_batch(report.floral, sys.values, sys.offsets.size() ? &sys.offsets : nullptr,
                               options.max_bad_fraction);
    });
    report.recovered = r.images;
    report.ambiguity_count = r.ambiguous_count;
    report.inconsistent_count = r.inconsistent_count;
  }

  for (Eigen::Index a = 0; a < report.recovered.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < report.recovered.rows(); ++b) {
      if ((report.recovered.row(a).cwiseAbs() - report.recovered.row(b).cwiseAbs()).cwiseAbs().maxCoeff() == 0.0) {
        throw Error(ErrorCode::kRecoveryQuality, "solve: recovered images " + std::to_string(a) + " and " +
                                                     std::to_string(b) + " coincide");
      }
    }
  }
  return report;
}

EvaluationResult evaluate_recovery(const Eigen::MatrixXd& recovered, const ImageMatrix& truth, std::int64_t n_pub) {
  const auto rows = recovered.rows();
  const auto cols = truth.entries.cols() - n_pub;
  EvaluationResult out;
  if (rows == 0 || cols <= 0) return out;
  if (recovered.cols() != truth.entries.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "recovered images and truth have different pixel counts");
  }

  struct Pair {
    double distance;
    Eigen::Index row;
    Eigen::Index col;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(rows * cols));
  const Eigen::MatrixXd rec_abs = recovered.cwiseAbs();
  for (Eigen::Index c = 0; c < cols; ++c) {
    const Eigen::VectorXd col = truth.entries.col(n_pub + c).cwiseAbs();
    for (Eigen::Index r = 0; r < rows; ++r) {
      pairs.push_back({(rec_abs.row(r).transpose() - col).cwiseAbs().maxCoeff(), r, c});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.distance < b.distance; });
  std::vector<char> row_used(static_cast<std::size_t>(rows), 0);
  std::vector<char> col_used(static_cast<std::size_t>(cols), 0);
  for (const Pair& pr : pairs) {
    if (row_used[static_cast<std::size_t>(pr.row)] || col_used[static_cast<std::size_t>(pr.col)]) continue;
    row_used[static_cast<std::size_t>(pr.row)] = 1;
    col_used[static_cast<std::size_t>(pr.col)] = 1;
    out.matching.emplace_back(static_cast<int>(pr.row), n_pub + pr.col);
    out.errors.push_back(pr.distance);
    out.max_abs_error = std::max(out.max_abs_error, pr.distance);
    const double scale = truth.entries.col(n_pub + pr.col).cwiseAbs().maxCoeff();
    if (pr.distance <= kExactRelative * std::max(scale, std::numeric_limits<double>::min())) ++out.exact_count;
    if (static_cast<Eigen::Index>(out.matching.size()) == std::min(rows, cols)) break;
  }
  std::vector<std::size_t> order(out.matching.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out.matching[a] < out.matching[b]; });
  EvaluationResult sorted;
  sorted.max_abs_error = out.max_abs_error;
  sorted.exact_count = out.exact_count;
  for (auto i : order) {
    sorted.matching.push_back(out.matching[i]);
    sorted.errors.push_back(out.errors[i]);
  }
  return sorted;
}

}  // namespace mtpr
