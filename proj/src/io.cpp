#include "mtpr/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace mtpr {
namespace {

constexpr std::size_t kHeaderBytes = 4 + 4 + 6 * 8;
constexpr std::size_t kChunk = std::size_t{1} << 20;

using Sizes = std::array<std::uint64_t, 6>;

class Writer {
 public:
  Writer(const std::filesystem::path& path, const char* magic, const Sizes& sizes)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
    buffer_.reserve(kChunk);
    buffer_.insert(buffer_.end(), magic, magic + 4);
    raw_u32(kFormatVersion);
    for (auto s : sizes) raw_u64(s);
    flush();
  }

  void u64(std::uint64_t v) {
    raw_u64(v);
    if (buffer_.size() >= kChunk) flush();
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void finish() {
    flush();
    hashing_ = false;
    raw_u64(hash_);
    flush();
    out_.close();
    if (!out_) throw Error(ErrorCode::kIo, "failed writing " + path_.string());
  }

 private:
  void raw_u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buffer_.push_back(static_cast<unsigned char>(v >> (8 * b)));
  }
  void raw_u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) buffer_.push_back(static_cast<unsigned char>(v >> (8 * b)));
  }
  void flush() {
    if (hashing_ && header_written_) hash_ = fnv1a64(buffer_.data(), buffer_.size(), hash_);
    header_written_ = true;
    out_.write(reinterpret_cast<const char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
    if (!out_) throw Error(ErrorCode::kIo, "failed writing " + path_.string());
    buffer_.clear();
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::vector<unsigned char> buffer_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  bool hashing_ = true;
  bool header_written_ = false;
};

std::uint64_t decode_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

class Reader {
 public:
  Reader(const std::filesystem::path& path, const char* magic) : path_(path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot read " + path.string() + ": " + ec.message());
    file_size_ = size;
    in_.open(path, std::ios::binary);
    if (!in_) throw Error(ErrorCode::kIo, "cannot open " + path.string());
    if (size < kHeaderBytes) throw Error(ErrorCode::kTruncated, path.string() + ": file shorter than its header");
    std::array<unsigned char, kHeaderBytes> header{};
    in_.read(reinterpret_cast<char*>(header.data()), header.size());
    if (!in_) throw Error(ErrorCode::kTruncated, path.string() + ": file shorter than its header");
    if (std::memcmp(header.data(), magic, 4) != 0) {
      throw Error(ErrorCode::kBadMagic, path.string() + ": expected magic " + std::string(magic, 4));
    }
    const std::uint32_t version = static_cast<std::uint32_t>(header[4]) | static_cast<std::uint32_t>(header[5]) << 8 |
                                  static_cast<std::uint32_t>(header[6]) << 16 |
                                  static_cast<std::uint32_t>(header[7]) << 24;
    if (version != kFormatVersion) {
      throw Error(ErrorCode::kUnsupportedVersion,
                  path.string() + ": format version " + std::to_string(version) + " is not supported");
    }
    for (std::size_t i = 0; i < 6; ++i) sizes_[i] = decode_u64(header.data() + 8 + 8 * i);
  }

  const Sizes& sizes() const { return sizes_; }

  /// Checks that the payload holds exactly `words` 8-byte values.
  void expect_words(std::uint64_t words) const {
    const std::uint64_t available = file_size_ - kHeaderBytes;
    if (words > (std::numeric_limits<std::uint64_t>::max() - 8) / 8 || words * 8 + 8 > available) {
      throw Error(ErrorCode::kTruncated, path_.string() + ": header describes more data than the file holds");
    }
    if (words * 8 + 8 != available) {
      throw Error(ErrorCode::kIo, path_.string() + ": file has trailing bytes after the checksum");
    }
  }

  std::uint64_t u64() {
    if (pos_ == end_) refill();
    const std::uint64_t v = decode_u64(buffer_.data() + pos_);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  void finish() {
    hash_ = fnv1a64(buffer_.data(), pos_, hash_);
    std::array<unsigned char, 8> footer{};
    // Bytes buffered beyond pos_ belong to the footer.
    const std::size_t spare = end_ - pos_;
    std::memcpy(footer.data(), buffer_.data() + pos_, std::min<std::size_t>(spare, 8));
    if (spare < 8) {
      in_.read(reinterpret_cast<char*>(footer.data() + spare), static_cast<std::streamsize>(8 - spare));
      if (!in_) throw Error(ErrorCode::kTruncated, path_.string() + ": missing checksum");
    }
    if (decode_u64(footer.data()) != hash_) throw Error(ErrorCode::kChecksum, path_.string() + ": checksum mismatch");
  }

 private:
  void refill() {
    hash_ = fnv1a64(buffer_.data(), pos_, hash_);
    buffer_.resize(kChunk);
    in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(kChunk));
    end_ = static_cast<std::size_t>(in_.gcount()) / 8 * 8;
    if (in_.gcount() % 8 != 0) {
      // Keep stream position aligned with the consumed words.
      in_.clear();
      in_.seekg(-(in_.gcount() % 8), std::ios::cur);
    }
    in_.clear();
    pos_ = 0;
    if (end_ == 0) throw Error(ErrorCode::kTruncated, path_.string() + ": payload ends early");
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::uintmax_t file_size_ = 0;
  Sizes sizes_{};
  std::vector<unsigned char> buffer_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

Sizes params_sizes(const ModelParams& p) {
  return {static_cast<std::uint64_t>(p.d),     static_cast<std::uint64_t>(p.n_pub),
          static_cast<std::uint64_t>(p.n_priv), static_cast<std::uint64_t>(p.k_pub),
          static_cast<std::uint64_t>(p.k_priv), static_cast<std::uint64_t>(p.m)};
}

ModelParams sizes_params(const Sizes& s, const std::filesystem::path& path) {
  constexpr auto limit = static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max());
  for (auto v : s) {
    if (v > limit) throw Error(ErrorCode::kParameter, path.string() + ": header size out of range");
  }
  ModelParams p;
  p.d = static_cast<std::int64_t>(s[0]);
  p.n_pub = static_cast<std::int64_t>(s[1]);
  p.n_priv = static_cast<std::int64_t>(s[2]);
  p.k_pub = static_cast<std::int64_t>(s[3]);
  p.k_priv = static_cast<std::int64_t>(s[4]);
  p.m = static_cast<std::int64_t>(s[5]);
  try {
    validate(p, std::numeric_limits<std::int64_t>::max());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  return p;
}

void write_matrix(Writer& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
}

void read_matrix(Reader& r, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  }
}

void check_parent(const std::filesystem::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw Error(ErrorCode::kIo, "directory " + parent.string() + " does not exist");
  }
}

}  // namespace

std::uint64_t fnv1a64(const unsigned char* data, std::size_t size, std::uint64_t state) {
  for (std::size_t i = 0; i < size; ++i) {
    state ^= data[i];
    state *= 0x100000001b3ULL;
  }
  return state;
}

void write_dataset(const std::filesystem::path& path, const SyntheticDataset& data) {
  const ModelParams& p = data.params;
  if (data.images.rows() != p.m || data.images.cols() != p.d || data.public_view.cols() != p.n_pub ||
      (p.n_pub > 0 && data.public_view.rows() != p.d)) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset matrices do not match its parameters");
  }
  check_parent(path);
  Writer w(path, "MTPR", params_sizes(p));
  write_matrix(w, data.public_view);
  write_matrix(w, data.images);
  w.finish();
}

SyntheticDataset read_dataset(const std::filesystem::path& path) {
  Reader r(path, "MTPR");
  SyntheticDataset out;
  out.params = sizes_params(r.sizes(), path);
  const auto& p = out.params;
  r.expect_words(static_cast<std::uint64_t>(p.d) * static_cast<std::uint64_t>(p.n_pub) +
                 static_cast<std::uint64_t>(p.m) * static_cast<std::uint64_t>(p.d));
  out.public_view.resize(p.d, p.n_pub);
  out.images.resize(p.m, p.d);
  read_matrix(r, out.public_view);
  read_matrix(r, out.images);
  r.finish();
  return out;
}

void write_truth(const std::filesystem::path& path, const Instance& instance) {
  const ModelParams& p = instance.dataset.params;
  if (instance.truth.entries.rows() != p.d || instance.truth.entries.cols() != p.n() ||
      static_cast<std::int64_t>(instance.selections.size()) != p.m) {
    throw Error(ErrorCode::kDimensionMismatch, "truth does not match its parameters");
  }
  check_parent(path);
  Writer w(path, "MTPT", params_sizes(p));
  write_matrix(w, instance.truth.entries);
  for (const auto& s : instance.selections) {
    if (static_cast<std::int64_t>(s.support_pub.size()) != p.k_pub ||
        static_cast<std::int64_t>(s.support_priv.size()) != p.k_priv) {
      throw Error(ErrorCode::kDimensionMismatch, "selection vector support sizes differ from k_pub, k_priv");
    }
    for (auto i : s.support_pub) w.u64(static_cast<std::uint64_t>(i));
    for (auto i : s.support_priv) w.u64(static_cast<std::uint64_t>(i));
    w.f64(s.weight_pub);
    w.f64(s.weight_priv);
  }
  w.finish();
}

TruthFile read_truth(const std::filesystem::path& path) {
  Reader r(path, "MTPT");
  TruthFile out;
  out.params = sizes_params(r.sizes(), path);
  const auto& p = out.params;
  const auto record = static_cast<std::uint64_t>(p.k_pub + p.k_priv + 2);
  r.expect_words(static_cast<std::uint64_t>(p.d) * static_cast<std::uint64_t>(p.n()) +
                 static_cast<std::uint64_t>(p.m) * record);
  out.images.entries.resize(p.d, p.n());
  read_matrix(r, out.images.entries);
  for (std::int64_t i = 0; i < p.n_pub; ++i) out.images.public_index.push_back(i);
  out.selections.resize(static_cast<std::size_t>(p.m));
  for (auto& s : out.selections) {
    for (std::int64_t t = 0; t < p.k_pub; ++t) s.support_pub.push_back(static_cast<std::int64_t>(r.u64()));
    for (std::int64_t t = 0; t < p.k_priv; ++t) s.support_priv.push_back(static_cast<std::int64_t>(r.u64()));
    s.weight_pub = r.f64();
    s.weight_priv = r.f64();
  }
  r.finish();
  for (const auto& s : out.selections) {
    for (auto i : s.support_pub) {
      if (i < 0 || i >= p.n_pub) throw Error(ErrorCode::kParameter, path.string() + ": public index out of range");
    }
    for (auto i : s.support_priv) {
      if (i < p.n_pub || i >= p.n()) throw Error(ErrorCode::kParameter, path.string() + ": private index out of range");
    }
  }
  return out;
}

void write_images(const std::filesystem::path& path, const Eigen::MatrixXd& images) {
  check_parent(path);
  Writer w(path, "MTPI",
           {static_cast<std::uint64_t>(images.cols()), static_cast<std::uint64_t>(images.rows()), 0, 0, 0, 0});
  write_matrix(w, images);
  w.finish();
}

Eigen::MatrixXd read_images(const std::filesystem::path& path) {
  Reader r(path, "MTPI");
  const Sizes& s = r.sizes();
  constexpr auto limit = static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max());
  if (s[0] > limit || s[1] > limit) throw Error(ErrorCode::kParameter, path.string() + ": header size out of range");
  r.expect_words(s[0] * s[1]);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(s[1]), static_cast<Eigen::Index>(s[0]));
  read_matrix(r, out);
  r.finish();
  return out;
}

void write_overlap(const std::filesystem::path& path, const OverlapMatrix& m) {
  check_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << "MTPR-OVERLAP v1 " << m.size() << ' ' << m.grid << '\n';
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    for (Eigen::Index j = 0; j < m.size(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

OverlapMatrix read_overlap(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string magic;
  std::string version;
  long long size = -1;
  long long grid = -1;
  in >> magic >> version;
  if (magic != "MTPR-OVERLAP") throw Error(ErrorCode::kBadMagic, path.string() + ": not an overlap dump");
  if (version != "v1") throw Error(ErrorCode::kUnsupportedVersion, path.string() + ": unsupported dump " + version);
  in >> size >> grid;
  if (!in || size < 0 || grid < 1 || size > (1 << 20) || grid > (1 << 20)) {
    throw Error(ErrorCode::kParameter, path.string() + ": bad overlap dump header");
  }
  OverlapMatrix m;
  m.grid = static_cast<int>(grid);
  m.entries.resize(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) {
      if (!(in >> m.entries(i, j))) throw Error(ErrorCode::kTruncated, path.string() + ": overlap dump ends early");
    }
  }
  try {
    check_overlap_invariants(m);
  } catch (const Error& e) {
    throw Error(ErrorCode::kParameter, path.string() + ": " + e.what());
  }
  return m;
}

nlohmann::json params_json(const ModelParams& p) {
  return {{"d", p.d}, {"n_pub", p.n_pub}, {"n_priv", p.n_priv}, {"k_pub", p.k_pub}, {"k_priv", p.k_priv}, {"m", p.m}};
}

nlohmann::json floral_json(const FloralAssignment& floral) {
  nlohmann::json labels = nlohmann::json::array();
  for (Subset s : floral.labels) {
    nlohmann::json set = nlohmann::json::array();
    for (int e : elements(s)) set.push_back(e + 1);
    labels.push_back(set);
  }
  return {{"k", floral.k}, {"indices", floral.indices}, {"labels", labels}};
}

FloralAssignment floral_from_json(const nlohmann::json& j) {
  try {
    FloralAssignment out;
    out.k = j.at("k").get<int>();
    out.indices = j.at("indices").get<std::vector<int>>();
    for (const auto& set : j.at("labels")) {
      Subset s = 0;
      for (int e : set.get<std::vector<int>>()) {
        if (e < 1 || e > 31) throw Error(ErrorCode::kParameter, "floral label element out of range");
        s |= Subset{1} << (e - 1);
      }
      out.labels.push_back(s);
    }
    if (out.labels.size() != out.indices.size()) throw Error(ErrorCode::kParameter, "floral labels and indices differ");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParameter, std::string("malformed floral assignment: ") + e.what());
  }
}

nlohmann::json report_json(const AttackReport& report, const ModelParams& params) {
  nlohmann::json supports = nlohmann::json::array();
  std::int64_t low = 0;
  for (const auto& s : report.public_supports) {
    supports.push_back(s.indices);
    low += s.low_confidence ? 1 : 0;
  }
  nlohmann::json timing = nlohmann::json::object();
  for (const auto& t : report.timing) timing[t.stage] = t.seconds;
  return {
      {"params", params_json(params)},
      {"eta", attack_eta(params)},
      {"grid", gram_grid(params.k_pub, params.k_priv)},
      {"recovered_images", report.recovered.rows()},
      {"floral", floral_json(report.floral)},
      {"public_supports", supports},
      {"low_confidence_supports", low},
      {"support_retries", report.support_retries},
      {"ambiguity_count", report.ambiguity_count},
      {"inconsistent_count", report.inconsistent_count},
      {"floral_search",
       {{"houses", report.floral_stats.houses},
        {"anchors", report.floral_stats.anchors},
        {"candidates", report.floral_stats.found},
        {"rejected", report.rejected_candidates},
        {"budget_exceeded", report.floral_stats.budget_exceeded}}},
      {"timing_seconds", timing},
      {"warnings", report.warnings},
  };
}

nlohmann::json evaluation_json(const EvaluationResult& result) {
  nlohmann::json matching = nlohmann::json::array();
  for (std::size_t i = 0; i < result.matching.size(); ++i) {
    matching.push_back({{"recovered", result.matching[i].first},
                        {"column", result.matching[i].second},
                        {"max_abs_error", result.errors[i]}});
  }
  return {{"matching", matching}, {"max_abs_error", result.max_abs_error}, {"exact_count", result.exact_count}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  check_parent(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParameter, path.string() + ": " + e.what());
  }
}

}  // namespace mtpr
