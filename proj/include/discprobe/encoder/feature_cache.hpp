#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace discprobe::encoder {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// JSON sidecar stored next to every cached feature array.
struct FeatureMeta {
  std::string model;
  int layer = 0;
  std::string pooling;
  std::size_t dim = 0;
  std::size_t count = 0;
  std::string content_hash;

  friend bool operator==(const FeatureMeta&, const FeatureMeta&) = default;
};

nlohmann::json to_json(const FeatureMeta& m);
FeatureMeta feature_meta_from_json(const nlohmann::json& j);

// float32 .npy (format 1.0, C order) plus `<path>.json`. Both files are
// written atomically; the sidecar last, so a present sidecar implies a
// complete array.
void write_npy(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_npy(const std::filesystem::path& path);

// Streams rows into an .npy file whose row count is only known at the end.
// Nothing appears at `path` until commit(); an abandoned writer leaves no file.
class NpyRowWriter {
 public:
  explicit NpyRowWriter(std::filesystem::path path);
  ~NpyRowWriter();
  NpyRowWriter(NpyRowWriter&&) noexcept;
  NpyRowWriter& operator=(NpyRowWriter&&) = delete;
  NpyRowWriter(const NpyRowWriter&) = delete;
  NpyRowWriter& operator=(const NpyRowWriter&) = delete;

  // Every row must have the width of the first one.
  void append(const Eigen::Ref<const Eigen::VectorXf>& row);
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::FILE* file_ = nullptr;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

// On-disk cache of pooled features keyed by (model, layer, pooling, content
// hash). Layout: <root>/<model>/<hash prefix>/L<layer>_<pooling>.npy
class FeatureCache {
 public:
  explicit FeatureCache(std::filesystem::path root) : root_(std::move(root)) {}

  std::filesystem::path path_for(const FeatureMeta& key) const;

  // Returns the cached matrix when the sidecar matches `key` in every field
  // except count/dim, which are checked against the array itself.
  std::optional<FeatureMatrix> load(const FeatureMeta& key) const;
  void store(FeatureMeta key, const FeatureMatrix& m) const;

  // Streaming variant of store(): append rows, then commit() to publish the
  // array and its sidecar together.
  class Writer {
   public:
    Writer(FeatureMeta key, std::filesystem::path npy);
    void append(const Eigen::Ref<const Eigen::VectorXf>& row) { rows_.append(row); }
    void commit();

   private:
    FeatureMeta key_;
    std::filesystem::path npy_;
    NpyRowWriter rows_;
  };
  Writer writer(const FeatureMeta& key) const { return Writer(key, path_for(key)); }

  // SHA-256 over every cached array and sidecar under the root, in path order.
  std::string checksum() const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace discprobe::encoder
