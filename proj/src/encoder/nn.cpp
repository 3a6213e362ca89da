#include "nn.hpp"

#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "discprobe/common/error.hpp"

namespace discprobe::encoder::nn {

using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const Tensor* Weights::find(const std::string& name) const {
  auto it = t_->find(prefix_ + name);
  if (it != t_->end()) return &it->second;
  auto swap_suffix = [&](const std::string& from, const std::string& to) -> const Tensor* {
    if (!name.ends_with(from)) return nullptr;
    auto alt = t_->find(prefix_ + name.substr(0, name.size() - from.size()) + to);
    return alt == t_->end() ? nullptr : &alt->second;
  };
  if (const Tensor* t = swap_suffix(".weight", ".gamma")) return t;
  return swap_suffix(".bias", ".beta");
}

bool Weights::has(const std::string& name) const { return find(name) != nullptr; }

const Tensor& Weights::get(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw ParseError(fmt::format("checkpoint is missing tensor '{}{}'", prefix_, name));
}

Mat Weights::matrix(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.shape.size() != 2) throw ParseError(fmt::format("tensor '{}{}' is not 2-D", prefix_, name));
  return Eigen::Map<const RowMajor>(t.data.data(), t.shape[0], t.shape[1]);
}

RowVec Weights::vector(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.shape.size() != 1) throw ParseError(fmt::format("tensor '{}{}' is not 1-D", prefix_, name));
  return Eigen::Map<const RowVec>(t.data.data(), t.shape[0]);
}

Mat Linear::operator()(const Mat& x) const {
  Mat y = x * wt;
  if (b.size() > 0) y.rowwise() += b;
  return y;
}

Linear Linear::torch(const Weights& w, const std::string& name, bool bias) {
  Linear l;
  l.wt = w.matrix(name + ".weight").transpose();
  if (bias && w.has(name + ".bias")) l.b = w.vector(name + ".bias");
  return l;
}

Linear Linear::conv1d(const Weights& w, const std::string& name) {
  Linear l;
  l.wt = w.matrix(name + ".weight");
  l.b = w.vector(name + ".bias");
  return l;
}

Mat LayerNorm::operator()(const Mat& x) const {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const float mean = x.row(i).mean();
    const RowVec c = x.row(i).array() - mean;
    const float var = c.squaredNorm() / static_cast<float>(x.cols());
    y.row(i) = (c / std::sqrt(var + eps)).cwiseProduct(g) + b;
  }
  return y;
}

LayerNorm LayerNorm::load(const Weights& w, const std::string& name, float eps) {
  return LayerNorm{w.vector(name + ".weight"), w.vector(name + ".bias"), eps};
}

Mat RmsNorm::operator()(const Mat& x) const {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const float var = x.row(i).squaredNorm() / static_cast<float>(x.cols());
    y.row(i) = (x.row(i) / std::sqrt(var + eps)).cwiseProduct(g);
  }
  return y;
}

Act act_from_string(const std::string& name) {
  if (name == "gelu") return Act::kGelu;
  if (name == "gelu_new" || name == "gelu_pytorch_tanh" || name == "gelu_fast") return Act::kGeluTanh;
  if (name == "relu") return Act::kRelu;
  if (name == "silu" || name == "swish") return Act::kSilu;
  throw ParseError(fmt::format("unsupported activation '{}'", name));
}

void activate(Mat& x, Act a) {
  switch (a) {
    case Act::kGelu:
      x = x.unaryExpr([](float v) { return 0.5f * v * (1.0f + std::erf(v / std::sqrt(2.0f))); });
      break;
    case Act::kGeluTanh: {
      const float k = std::sqrt(2.0f / static_cast<float>(M_PI));
      x = x.unaryExpr([k](float v) { return 0.5f * v * (1.0f + std::tanh(k * (v + 0.044715f * v * v * v))); });
      break;
    }
    case Act::kRelu:
      x = x.cwiseMax(0.0f);
      break;
    case Act::kSilu:
      x = x.unaryExpr([](float v) { return v / (1.0f + std::exp(-v)); });
      break;
  }
}

Mat attention(const Mat& q, const Mat& k, const Mat& v, int heads, float scale, bool causal,
              const std::vector<Mat>& bias) {
  const Eigen::Index dh = q.cols() / heads;
  Mat out(q.rows(), v.cols());
  const Eigen::Index dv = v.cols() / heads;
  for (int h = 0; h < heads; ++h) {
    Mat s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
    if (!bias.empty()) s += bias[static_cast<std::size_t>(h)];
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      if (causal) {
        for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(i, j) = -std::numeric_limits<float>::infinity();
      }
      const float m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp();
      s.row(i) /= s.row(i).sum();
    }
    out.middleCols(h * dv, dv) = s * v.middleCols(h * dv, dv);
  }
  return out;
}

Mat gather_rows(const Mat& table, const std::vector<int>& ids, const char* what) {
  Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw ValidationError(fmt::format("{} index {} outside table of {} rows", what, ids[i], table.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

int cfg_int(const nlohmann::json& c, const char* key, int fallback) {
  return c.contains(key) && c[key].is_number() ? c[key].get<int>() : fallback;
}

float cfg_float(const nlohmann::json& c, const char* key, float fallback) {
  return c.contains(key) && c[key].is_number() ? c[key].get<float>() : fallback;
}

std::string detect_prefix(const TensorMap& t, const std::string& probe, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes) {
    if (t.count(p + probe)) return p;
  }
  throw ParseError(fmt::format("checkpoint has no tensor '{}' under any known prefix", probe));
}

}  // namespace discprobe::encoder::nn
