#include "discprobe/probe/mlp.hpp"

#include <cmath>
#include <cstring>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "discprobe/common/error.hpp"
#include "discprobe/common/io.hpp"
#include "discprobe/common/rng.hpp"

namespace discprobe::probe {

std::string_view to_string(HeadKind k) {
  switch (k) {
    case HeadKind::kPairMlp:
      return "pair_mlp";
    case HeadKind::kRankLabeler:
      return "rank_labeler";
    case HeadKind::kTokenTagger:
      return "token_tagger";
  }
  return "?";
}

HeadKind head_kind_from_string(std::string_view s) {
  if (s == "pair_mlp") return HeadKind::kPairMlp;
  if (s == "rank_labeler") return HeadKind::kRankLabeler;
  if (s == "token_tagger") return HeadKind::kTokenTagger;
  throw ValidationError(fmt::format("unknown head kind '{}'", s));
}

void ProbeConfig::validate() const {
  if (input_dim < 1) throw ValidationError("probe input_dim must be positive");
  if (hidden_dim < 0) throw ValidationError("probe hidden_dim must be non-negative");
  if (num_classes < 2) throw ValidationError("probe needs at least two classes");
  if (kind == HeadKind::kRankLabeler && num_classes != kMaxRank) {
    throw ValidationError(fmt::format("rank labeler needs {} classes", kMaxRank));
  }
  if (kind == HeadKind::kTokenTagger && num_classes != 2) {
    throw ValidationError("token tagger needs 2 classes");
  }
}

namespace {

void xavier(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<float>(rng.uniform(-limit, limit));
  }
}

Matrix log_softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const float m = z.row(i).maxCoeff();
    const float lse = m + std::log((z.row(i).array() - m).exp().sum());
    out.row(i) = z.row(i).array() - lse;
  }
  return out;
}

}  // namespace

Mlp::Mlp(const ProbeConfig& config) : config_(config) {
  config_.validate();
  const int in = config_.input_dim, hid = config_.effective_hidden(), c = config_.num_classes;
  params_ = {Matrix(hid, in), Matrix::Zero(hid, 1), Matrix(c, hid), Matrix::Zero(c, 1)};
  Rng rng(config_.seed);
  xavier(params_[0], rng);
  xavier(params_[2], rng);
}

void Mlp::set_zero() {
  for (auto& p : params_) p.setZero();
}

void Mlp::check_width(Eigen::Index cols) const {
  if (cols != config_.input_dim) {
    throw ValidationError(
        fmt::format("feature width {} does not match probe input_dim {}", cols, config_.input_dim));
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  check_width(x.cols());
  Matrix h = ((x * params_[0].transpose()).rowwise() + params_[1].col(0).transpose()).array().tanh();
  Matrix z = (h * params_[2].transpose()).rowwise() + params_[3].col(0).transpose();
  return log_softmax_rows(z);
}

Vector Mlp::forward(const Vector& x) const {
  Matrix row = x.transpose();
  return forward(row).row(0).transpose();
}

double Mlp::loss_and_gradient(const Matrix& x, const std::vector<int>& labels,
                              std::vector<Matrix>& grads) const {
  check_width(x.cols());
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw ValidationError(
        fmt::format("{} feature rows but {} labels", x.rows(), labels.size()));
  }
  const auto n = x.rows();
  Matrix h = ((x * params_[0].transpose()).rowwise() + params_[1].col(0).transpose()).array().tanh();
  Matrix z = (h * params_[2].transpose()).rowwise() + params_[3].col(0).transpose();
  Matrix logp = log_softmax_rows(z);

  double loss = 0.0;
  Matrix dz = logp.array().exp();
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= config_.num_classes) {
      throw ValidationError(fmt::format("label {} outside 0..{}", y, config_.num_classes - 1));
    }
    loss -= logp(i, y);
    dz(i, y) -= 1.0f;
  }
  const float inv_n = 1.0f / static_cast<float>(n);
  dz *= inv_n;

  grads.resize(4);
  grads[2] = dz.transpose() * h;
  grads[3] = dz.colwise().sum().transpose();
  Matrix dh = (dz * params_[2]).array() * (1.0f - h.array().square());
  grads[0] = dh.transpose() * x;
  grads[1] = dh.colwise().sum().transpose();
  return loss / static_cast<double>(n);
}

void Mlp::save(const std::filesystem::path& path) const {
  std::string blob;
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& p : params_) {
    const auto bytes = static_cast<std::size_t>(p.size()) * sizeof(float);
    const auto at = blob.size();
    blob.resize(at + bytes);
    std::memcpy(blob.data() + at, p.data(), bytes);
    shapes.push_back({p.rows(), p.cols()});
  }
  nlohmann::json sidecar{{"input_dim", config_.input_dim},
                         {"hidden_dim", config_.effective_hidden()},
                         {"num_classes", config_.num_classes},
                         {"head_kind", to_string(config_.kind)},
                         {"seed", config_.seed},
                         {"dtype", "float32"},
                         {"layout", "column-major"},
                         {"shapes", shapes},
                         {"sha256", io::sha256_hex(blob)}};
  io::write_file_atomic(path, blob);
  io::write_file_atomic(path.string() + ".json", sidecar.dump(2));
}

Mlp Mlp::load(const std::filesystem::path& path) {
  const auto sidecar = io::read_json(path.string() + ".json");
  ProbeConfig cfg;
  try {
    cfg.input_dim = sidecar.at("input_dim").get<int>();
    cfg.hidden_dim = sidecar.at("hidden_dim").get<int>();
    cfg.num_classes = sidecar.at("num_classes").get<int>();
    cfg.kind = head_kind_from_string(sidecar.at("head_kind").get<std::string>());
    cfg.seed = sidecar.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("probe checkpoint sidecar: {}", e.what()));
  }
  Mlp mlp(cfg);
  const std::string blob = io::read_file(path);
  if (sidecar.contains("sha256") && sidecar["sha256"].get<std::string>() != io::sha256_hex(blob)) {
    throw ValidationError(fmt::format("probe checkpoint '{}' fails its checksum", path.string()));
  }
  std::size_t at = 0;
  for (auto& p : mlp.params_) {
    const auto bytes = static_cast<std::size_t>(p.size()) * sizeof(float);
    if (at + bytes > blob.size()) throw ParseError("probe checkpoint blob is truncated");
    std::memcpy(p.data(), blob.data() + at, bytes);
    at += bytes;
  }
  if (at != blob.size()) throw ParseError("probe checkpoint blob has trailing bytes");
  return mlp;
}

}  // namespace discprobe::probe
