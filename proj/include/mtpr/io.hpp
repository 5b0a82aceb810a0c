#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtpr/floral.hpp"
#include "mtpr/gram.hpp"
#include "mtpr/model.hpp"
#include "mtpr/pipeline.hpp"

namespace mtpr {

// Binary files share one layout: 4-byte magic, u32 version, six u64 sizes
// (d, n_pub, n_priv, k_pub, k_priv, m), payload, u64 FNV-1a checksum of the
// payload. All integers and doubles are little-endian; matrices are row-major.
//
//   dataset  "MTPR": public_view (d x n_pub), then images (m x d)
//   truth    "MTPT": X (d x n), then per selection vector k_pub + k_priv
//                    u64 column indices and the two f64 weights
//   images   "MTPI": recovered images (rows x d); the six sizes are
//                    (d, rows, 0, 0, 0, 0)

inline constexpr std::uint32_t kFormatVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const unsigned char* data, std::size_t size, std::uint64_t state = 0xcbf29ce484222325ULL);

void write_dataset(const std::filesystem::path& path, const SyntheticDataset& data);

/// Validates magic, version, sizes against the file length and the checksum
/// before returning; the seed is not stored and reads back as 0.
SyntheticDataset read_dataset(const std::filesystem::path& path);

struct TruthFile {
  ModelParams params;
  ImageMatrix images;
  std::vector<SelectionVector> selections;
};

void write_truth(const std::filesystem::path& path, const Instance& instance);
TruthFile read_truth(const std::filesystem::path& path);

void write_images(const std::filesystem::path& path, const Eigen::MatrixXd& images);
Eigen::MatrixXd read_images(const std::filesystem::path& path);

/// Text dump: "MTPR-OVERLAP v1 <m> <grid>" then m rows of integers.
void write_overlap(const std::filesystem::path& path, const OverlapMatrix& m);
OverlapMatrix read_overlap(const std::filesystem::path& path);

nlohmann::json params_json(const ModelParams& params);
nlohmann::json floral_json(const FloralAssignment& floral);
FloralAssignment floral_from_json(const nlohmann::json& j);
nlohmann::json report_json(const AttackReport& report, const ModelParams& params);
nlohmann::json evaluation_json(const EvaluationResult& result);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace mtpr
