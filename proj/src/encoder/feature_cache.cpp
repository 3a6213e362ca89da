#include "discprobe/encoder/feature_cache.hpp"

#include <algorithm>
#include <cstring>
#include <regex>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"

namespace discprobe::encoder {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const FeatureMeta& m) {
  return {{"model", m.model}, {"layer", m.layer},     {"pooling", m.pooling},
          {"dim", m.dim},     {"count", m.count},     {"content_hash", m.content_hash}};
}

FeatureMeta feature_meta_from_json(const json& j) {
  try {
    return {j.at("model").get<std::string>(), j.at("layer").get<int>(),        j.at("pooling").get<std::string>(),
            j.at("dim").get<std::size_t>(),   j.at("count").get<std::size_t>(), j.at("content_hash").get<std::string>()};
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("feature sidecar: {}", e.what()));
  }
}

void write_npy(const fs::path& path, const FeatureMatrix& m) {
  std::string header = fmt::format("{{'descr': '<f4', 'fortran_order': False, 'shape': ({}, {}), }}", m.rows(), m.cols());
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  std::string blob("\x93NUMPY\x01\x00", 8);
  const auto hlen = static_cast<std::uint16_t>(header.size());
  blob.push_back(static_cast<char>(hlen & 0xFF));
  blob.push_back(static_cast<char>(hlen >> 8));
  blob += header;
  const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(float);
  const std::size_t at = blob.size();
  blob.resize(at + bytes);
  if (bytes > 0) std::memcpy(blob.data() + at, m.data(), bytes);
  if (!fs::exists(path.parent_path()) && !path.parent_path().empty()) fs::create_directories(path.parent_path());
  io::write_file_atomic(path, blob);
}

FeatureMatrix read_npy(const fs::path& path) {
  const std::string blob = io::read_file(path);
  if (blob.size() < 10 || blob.compare(0, 6, "\x93NUMPY") != 0) {
    throw ParseError(fmt::format("{}: not an .npy file", path.string()));
  }
  const auto major = static_cast<unsigned char>(blob[6]);
  std::size_t hlen = 0, start = 0;
  if (major == 1) {
    hlen = static_cast<unsigned char>(blob[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(blob[9])) << 8);
    start = 10;
  } else {
    if (blob.size() < 12) throw ParseError(fmt::format("{}: truncated header", path.string()));
    for (int i = 0; i < 4; ++i) hlen |= static_cast<std::size_t>(static_cast<unsigned char>(blob[8 + i])) << (8 * i);
    start = 12;
  }
  if (start + hlen > blob.size()) throw ParseError(fmt::format("{}: truncated header", path.string()));
  const std::string header = blob.substr(start, hlen);
  std::smatch m;
  if (header.find("'<f4'") == std::string::npos || header.find("'fortran_order': False") == std::string::npos ||
      !std::regex_search(header, m, std::regex(R"('shape':\s*\((\d+),\s*(\d+)\))"))) {
    throw ParseError(fmt::format("{}: expected a C-order float32 matrix", path.string()));
  }
  const auto rows = std::stoll(m[1].str()), cols = std::stoll(m[2].str());
  const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(float);
  if (start + hlen + bytes != blob.size()) throw ParseError(fmt::format("{}: payload size mismatch", path.string()));
  FeatureMatrix out(rows, cols);
  if (bytes > 0) std::memcpy(out.data(), blob.data() + start + hlen, bytes);
  return out;
}

fs::path FeatureCache::path_for(const FeatureMeta& key) const {
  std::string model = key.model;
  std::replace(model.begin(), model.end(), '/', '_');
  return root_ / model / key.content_hash.substr(0, 16) / fmt::format("L{:02d}_{}.npy", key.layer, key.pooling);
}

std::optional<FeatureMatrix> FeatureCache::load(const FeatureMeta& key) const {
  const fs::path npy = path_for(key);
  const fs::path side = fs::path(npy.string() + ".json");
  if (!fs::exists(side) || !fs::exists(npy)) return std::nullopt;
  const FeatureMeta meta = feature_meta_from_json(io::read_json(side));
  if (meta.model != key.model || meta.layer != key.layer || meta.pooling != key.pooling ||
      meta.content_hash != key.content_hash) {
    return std::nullopt;
  }
  FeatureMatrix m = read_npy(npy);
  if (static_cast<std::size_t>(m.rows()) != meta.count || static_cast<std::size_t>(m.cols()) != meta.dim) {
    return std::nullopt;
  }
  return m;
}

void FeatureCache::store(FeatureMeta key, const FeatureMatrix& m) const {
  key.count = static_cast<std::size_t>(m.rows());
  key.dim = static_cast<std::size_t>(m.cols());
  const fs::path npy = path_for(key);
  write_npy(npy, m);
  io::write_file_atomic(npy.string() + ".json", to_json(key).dump(2) + "\n");
}

std::string FeatureCache::checksum() const {
  std::vector<fs::path> files;
  if (fs::exists(root_)) {
    for (const auto& e : fs::recursive_directory_iterator(root_)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  io::Sha256 h;
  for (const auto& f : files) {
    h.update(fs::relative(f, root_).string());
    h.update(io::read_file(f));
  }
  return h.hex_digest();
}

}  // namespace discprobe::encoder

namespace discprobe::encoder {

namespace {

constexpr std::size_t kStreamHeaderBytes = 128;

std::string stream_header(std::size_t rows, std::size_t cols) {
  std::string dict =
      fmt::format("{{'descr': '<f4', 'fortran_order': False, 'shape': ({}, {}), }}", rows, cols);
  const std::size_t body = kStreamHeaderBytes - 10;
  if (dict.size() + 1 > body) throw ValidationError("feature matrix shape too large for the npy header");
  dict.append(body - dict.size() - 1, ' ');
  dict.push_back('\n');
  std::string out("\x93NUMPY\x01\x00", 8);
  out.push_back(static_cast<char>(body & 0xFF));
  out.push_back(static_cast<char>(body >> 8));
  return out + dict;
}

}  // namespace

NpyRowWriter::NpyRowWriter(fs::path path) : path_(std::move(path)) {
  if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
  tmp_ = path_;
  tmp_ += fmt::format(".tmp{}", reinterpret_cast<std::uintptr_t>(this));
  file_ = std::fopen(tmp_.c_str(), "wb");
  if (file_ == nullptr) throw IoError(fmt::format("cannot open '{}' for writing", tmp_.string()));
  const std::string h = stream_header(0, 0);
  std::fwrite(h.data(), 1, h.size(), file_);
}

NpyRowWriter::NpyRowWriter(NpyRowWriter&& o) noexcept
    : path_(std::move(o.path_)), tmp_(std::move(o.tmp_)), file_(o.file_), rows_(o.rows_), cols_(o.cols_) {
  o.file_ = nullptr;
}

NpyRowWriter::~NpyRowWriter() {
  if (file_ != nullptr) {
    std::fclose(file_);
    std::error_code ec;
    fs::remove(tmp_, ec);
  }
}

void NpyRowWriter::append(const Eigen::Ref<const Eigen::VectorXf>& row) {
  if (file_ == nullptr) throw ValidationError("append after commit");
  if (rows_ == 0 && cols_ == 0) cols_ = static_cast<std::size_t>(row.size());
  if (static_cast<std::size_t>(row.size()) != cols_) {
    throw ValidationError(fmt::format("feature row width {} differs from {}", row.size(), cols_));
  }
  const Eigen::VectorXf copy = row;
  if (std::fwrite(copy.data(), sizeof(float), cols_, file_) != cols_) {
    throw IoError(fmt::format("short write to '{}'", tmp_.string()));
  }
  ++rows_;
}

void NpyRowWriter::commit() {
  if (file_ == nullptr) throw ValidationError("commit called twice");
  const std::string h = stream_header(rows_, cols_);
  std::fseek(file_, 0, SEEK_SET);
  std::fwrite(h.data(), 1, h.size(), file_);
  const bool ok = std::fflush(file_) == 0;
  std::fclose(file_);
  file_ = nullptr;
  if (!ok) throw IoError(fmt::format("cannot flush '{}'", tmp_.string()));
  fs::rename(tmp_, path_);
}

FeatureCache::Writer::Writer(FeatureMeta key, fs::path npy) : key_(std::move(key)), npy_(npy), rows_(std::move(npy)) {}

void FeatureCache::Writer::commit() {
  key_.count = rows_.rows();
  key_.dim = rows_.cols();
  rows_.commit();
  io::write_file_atomic(npy_.string() + ".json", to_json(key_).dump(2) + "\n");
}

}  // namespace discprobe::encoder
