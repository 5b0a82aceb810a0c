#include "mtpr/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mtpr/floral.hpp"
#include "mtpr/gram.hpp"
#include "mtpr/io.hpp"
#include "mtpr/model.hpp"
#include "mtpr/pipeline.hpp"
#include "mtpr/sign_solver.hpp"

namespace mtpr {
namespace {

bool psi_round_trip() {
  for (int i = 0; i <= 1000; ++i) {
    const double z = i / 1000.0;
    if (std::abs(psi_inv(psi(z)) - z) > 1e-9) return false;
  }
  return std::abs(psi(1.0) - kPsiMax) < 1e-12 && psi(0.0) == 0.0;
}

bool family_relabeling() {
  Rng rng(11);
  for (int k = 2; k <= 5; ++k) {
    const std::vector<Subset> family = all_subsets(k + 2, k);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Subset> rows = family;
      std::shuffle(rows.begin(), rows.end(), rng);
      const auto size = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXi p(size, size);
      for (Eigen::Index i = 0; i < size; ++i) {
        for (Eigen::Index j = 0; j < size; ++j) p(i, j) = intersection_size(rows[i], rows[j]);
      }
      const std::vector<Subset> labels = identify_family(p, k);
      for (Eigen::Index i = 0; i < size; ++i) {
        for (Eigen::Index j = 0; j < size; ++j) {
          if (intersection_size(labels[i], labels[j]) != p(i, j)) return false;
        }
      }
    }
  }
  return true;
}

bool sign_systems() {
  Rng rng(12);
  std::normal_distribution<double> normal;
  for (int k = 2; k <= 4; ++k) {
    const SignSystemSolver solver(k, all_subsets(k + 2, k));
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd a(k + 2);
      for (auto& x : a) x = normal(rng);
      std::vector<double> v;
      for (Subset s : solver.subsets()) {
        double sum = 0.0;
        for (int e : elements(s)) sum += a(e);
        v.push_back(std::abs(sum));
      }
      const SignedSolution sol = solver.solve(v);
      if (sol.ambiguous) return false;
      if (std::min((sol.values - a).cwiseAbs().maxCoeff(), (sol.values + a).cwiseAbs().maxCoeff()) > 1e-8) return false;
    }
  }
  return true;
}

bool checksum_vector() { return fnv1a64(reinterpret_cast<const unsigned char*>("a"), 1) == 0xaf63dc4c8601ec8cULL; }

bool floral_on_oracle() {
  ModelParams p;
  p.d = 1;
  p.n_priv = 12;
  p.k_priv = 3;
  p.m = 400;
  Rng rng(13);
  const auto ws = sample_selection_vectors(p, rng);
  OverlapMatrix m{overlap_oracle(ws, 3), 3};
  const auto found = find_floral_submatrix(m, 3);
  return found && verify_floral(m.entries, found->indices, 3).has_value();
}

bool end_to_end() {
  ModelParams p;
  p.d = 20000;
  p.n_priv = 8;
  p.k_priv = 2;
  p.m = 120;
  p.seed = 14;
  const Instance inst = generate_instance(p);
  const AttackReport report = learn_private_images(DatasetView(inst.dataset));
  return evaluate_recovery(report, inst.truth, 0).exact_count == 4;
}

}  // namespace

bool run_selftest(std::ostream& out) {
  const std::vector<std::pair<std::string, std::function<bool()>>> checks = {
      {"psi identities and inverse", psi_round_trip},
      {"set-family identification, k = 2..5", family_relabeling},
      {"sign systems recover Gaussian pixels", sign_systems},
      {"checksum test vector", checksum_vector},
      {"floral search on exact overlaps", floral_on_oracle},
      {"end-to-end recovery, small instance", end_to_end},
  };
  bool all = true;
  for (const auto& [name, check] : checks) {
    bool ok = false;
    std::string note;
    try {
      ok = check();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    out << (ok ? "PASS  " : "FAIL  ") << name << note << '\n';
    all = all && ok;
  }
  return all;
}

}  // namespace mtpr
