#include "mtpr/sign_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtpr/parallel.hpp"

namespace mtpr {
namespace {

void check_family(int k, const std::vector<Subset>& subsets) {
  if (k < 1 || k > 29) throw Error(ErrorCode::kParameter, "sign systems need 1 <= k <= 29");
  std::vector<Subset> sorted = subsets;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != all_subsets(k + 2, k)) {
    throw Error(ErrorCode::kStructure, "subsets must be exactly the k-subsets of {1..k+2}");
  }
}

Eigen::MatrixXd incidence(int k, const std::vector<Subset>& subsets) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(subsets.size()), k + 2);
  for (std::size_t j = 0; j < subsets.size(); ++j) {
    for (int e : elements(subsets[j])) out(static_cast<Eigen::Index>(j), e) = 1.0;
  }
  return out;
}

double residual_of(const Eigen::MatrixXd& inc, std::span<const double> v, std::span<const double> u,
                   const Eigen::VectorXd& a) {
  const Eigen::VectorXd sums = inc * a;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < sums.size(); ++j) {
    const double shift = u.empty() ? 0.0 : u[static_cast<std::size_t>(j)];
    worst = std::max(worst, std::abs(std::abs(shift + sums(j)) - v[static_cast<std::size_t>(j)]));
  }
  return worst;
}

double max_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

bool has_offsets(std::span<const double> u) {
  return std::any_of(u.begin(), u.end(), [](double x) { return x != 0.0; });
}

void canonicalize(Eigen::VectorXd& a, double tol) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(a(i)) > tol) {
      if (a(i) < 0.0) a = -a;
      return;
    }
  }
}

struct Candidate {
  Eigen::VectorXd a;
  double residual;
};

// Groups admissible candidates into classes (up to sign when `symmetric`).
std::vector<Candidate> classes_of(std::vector<Candidate> accepted, bool symmetric, double tol) {
  std::stable_sort(accepted.begin(), accepted.end(),
                   [](const Candidate& x, const Candidate& y) { return x.residual < y.residual; });
  std::vector<Candidate> out;
  for (auto& c : accepted) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Candidate& r) {
      return max_distance(r.a, c.a) <= tol || (symmetric && max_distance(r.a, -c.a) <= tol);
    });
    if (!seen) out.push_back(std::move(c));
  }
  return out;
}

void check_sizes(const SignedSystem& sys) {
  if (sys.values.size() != sys.subsets.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one value per subset is required");
  }
  if (!sys.offsets.empty() && sys.offsets.size() != sys.subsets.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one offset per subset is required");
  }
}

}  // namespace

double default_tolerance(std::span<const double> values) {
  double top = 1.0;
  for (double v : values) top = std::max(top, v);
  return 1e-6 * top;
}

double signed_residual(const SignedSystem& sys, const Eigen::VectorXd& a) {
  check_sizes(sys);
  return residual_of(incidence(sys.k, sys.subsets), sys.values, sys.offsets, a);
}

SignSystemSolver::SignSystemSolver(int k, std::vector<Subset> subsets) : k_(k), subsets_(std::move(subsets)) {
  check_family(k_, subsets_);
  incidence_ = incidence(k_, subsets_);
  const int width = k_ + 2;
  Eigen::MatrixXd chosen(0, width);
  for (Eigen::Index j = 0; j < incidence_.rows() && static_cast<int>(basis_.size()) < width; ++j) {
    Eigen::MatrixXd trial(chosen.rows() + 1, width);
    trial << chosen, incidence_.row(j);
    if (Eigen::FullPivLU<Eigen::MatrixXd>(trial).rank() == trial.rows()) {
      chosen = std::move(trial);
      basis_.push_back(static_cast<int>(j));
    }
  }
  if (static_cast<int>(basis_.size()) != width) throw Error(ErrorCode::kStructure, "subset indicators do not span");
  inverse_ = chosen.inverse();
}

SignedSolution SignSystemSolver::solve(std::span<const double> values, std::span<const double> offsets,
                                       std::optional<double> tolerance) const {
  const auto count = subsets_.size();
  if (values.size() != count || (!offsets.empty() && offsets.size() != count)) {
    throw Error(ErrorCode::kDimensionMismatch, "values and offsets must have one entry per subset");
  }
  const double tol = tolerance.value_or(default_tolerance(values));
  const bool symmetric = !has_offsets(offsets);
  const int width = k_ + 2;

  Eigen::VectorXd vb(width);
  Eigen::VectorXd ub = Eigen::VectorXd::Zero(width);
  for (int t = 0; t < width; ++t) {
    vb(t) = values[static_cast<std::size_t>(basis_[static_cast<std::size_t>(t)])];
    if (!offsets.empty()) ub(t) = offsets[static_cast<std::size_t>(basis_[static_cast<std::size_t>(t)])];
  }
  // Sign bits on zero values are redundant, and without offsets the first
  // nonzero basis value can be taken positive.
  int fixed = -1;
  if (symmetric) {
    for (int t = 0; t < width; ++t) {
      if (vb(t) != 0.0) {
        fixed = t;
        break;
      }
    }
  }

  std::vector<Candidate> accepted;
  Eigen::VectorXd rhs(width);
  for (std::uint32_t pattern = 0; pattern < (std::uint32_t{1} << width); ++pattern) {
    bool redundant = false;
    for (int t = 0; t < width && !redundant; ++t) {
      const bool negative = ((pattern >> t) & 1U) != 0;
      redundant = negative && (vb(t) == 0.0 || t == fixed);
      rhs(t) = (negative ? -vb(t) : vb(t)) - ub(t);
    }
    if (redundant) continue;
    Eigen::VectorXd a = inverse_ * rhs;
    const double r = residual_of(incidence_, values, offsets, a);
    if (r <= tol) accepted.push_back({std::move(a), r});
  }
  if (accepted.empty()) throw Error(ErrorCode::kInconsistentSystem, "no sign pattern satisfies the system");

  auto classes = classes_of(std::move(accepted), symmetric, tol);
  SignedSolution out;
  out.values = std::move(classes.front().a);
  out.residual = classes.front().residual;
  out.ambiguous = classes.size() > 1;
  if (symmetric) canonicalize(out.values, tol);
  return out;
}

SignedSolution solve_signed_system(const SignedSystem& sys) {
  check_sizes(sys);
  if (sys.tolerance && !(*sys.tolerance > 0.0)) throw Error(ErrorCode::kParameter, "tolerance must be positive");
  if (std::any_of(sys.values.begin(), sys.values.end(), [](double v) { return !(v >= 0.0); })) {
    throw Error(ErrorCode::kParameter, "values must be nonnegative");
  }
  return SignSystemSolver(sys.k, sys.subsets).solve(sys.values, sys.offsets, sys.tolerance);
}

std::vector<Eigen::VectorXd> enumerate_all_solutions(const SignedSystem& sys) {
  check_sizes(sys);
  check_family(sys.k, sys.subsets);
  const auto count = sys.subsets.size();
  if (count > 16) throw Error(ErrorCode::kSizing, "exhaustive enumeration is limited to 16 constraints");
  const double tol = sys.tolerance.value_or(default_tolerance(sys.values));
  const bool symmetric = !has_offsets(sys.offsets);

  const Eigen::MatrixXd inc = incidence(sys.k, sys.subsets);
  const Eigen::MatrixXd pinv = inc.completeOrthogonalDecomposition().pseudoInverse();
  std::vector<Candidate> accepted;
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(count));
  for (std::uint32_t pattern = 0; pattern < (std::uint32_t{1} << count); ++pattern) {
    for (std::size_t j = 0; j < count; ++j) {
      const double v = ((pattern >> j) & 1U) != 0 ? -sys.values[j] : sys.values[j];
      rhs(static_cast<Eigen::Index>(j)) = v - (sys.offsets.empty() ? 0.0 : sys.offsets[j]);
    }
    Eigen::VectorXd a = pinv * rhs;
    const double r = residual_of(inc, sys.values, sys.offsets, a);
    if (r <= tol) accepted.push_back({std::move(a), r});
  }
  std::vector<Eigen::VectorXd> out;
  for (auto& c : classes_of(std::move(accepted), symmetric, tol)) {
    if (symmetric) canonicalize(c.a, tol);
    out.push_back(std::move(c.a));
  }
  return out;
}

PixelBatchResult solve_pixel_batch(const FloralAssignment& floral, const Eigen::Ref<const Eigen::MatrixXd>& values,
                                   const Eigen::MatrixXd* offsets, double max_bad_fraction) {
  const SignSystemSolver solver(floral.k, floral.labels);
  const auto rows = static_cast<Eigen::Index>(floral.labels.size());
  if (values.rows() != rows) throw Error(ErrorCode::kDimensionMismatch, "one value row per floral index is required");
  if (offsets && (offsets->rows() != rows || offsets->cols() != values.cols())) {
    throw Error(ErrorCode::kDimensionMismatch, "offsets must match the value matrix");
  }
  const auto d = values.cols();
  PixelBatchResult out;
  out.images = Eigen::MatrixXd::Zero(floral.k + 2, d);
  // 0 = solved, 1 = ambiguous, 2 = inconsistent; one slot per pixel.
  std::vector<char> status(static_cast<std::size_t>(d), 0);
  parallel_for(0, static_cast<std::size_t>(d), [&](std::size_t p) {
    const auto col = static_cast<Eigen::Index>(p);
    const Eigen::VectorXd v = values.col(col);
    Eigen::VectorXd u;
    if (offsets) u = offsets->col(col);
    try {
      const SignedSolution s =
          solver.solve({v.data(), static_cast<std::size_t>(v.size())}, {u.data(), static_cast<std::size_t>(u.size())});
      out.images.col(col) = s.values;
      status[p] = s.ambiguous ? 1 : 0;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInconsistentSystem) throw;
      status[p] = 2;
    }
  });
  out.ambiguous_count = std::count(status.begin(), status.end(), 1);
  out.inconsistent_count = std::count(status.begin(), status.end(), 2);
  const double limit = max_bad_fraction * static_cast<double>(d);
  if (static_cast<double>(out.ambiguous_count) > limit || static_cast<double>(out.inconsistent_count) > limit) {
    throw Error(ErrorCode::kRecoveryQuality, std::to_string(out.ambiguous_count) + " ambiguous and " +
                                                 std::to_string(out.inconsistent_count) + " inconsistent pixels out of " +
                                                 std::to_string(d));
  }
  return out;
}

}  // namespace mtpr
