#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hyperco/cones.hpp"
#include "hyperco/manifold.hpp"
#include "hyperco/rng.hpp"

// Trainable encoders from font feature vectors and impression tag sets to
// hyperboloid points: a feedforward net per modality, mean pooling over a
// learnable tag embedding table for sets, learnable output scales, and a
// learnable softmax temperature. Encoder outputs are treated as tangent
// vectors at the origin and pushed through the exponential map.

namespace hyperco {

class Vocabulary {
 public:
  Vocabulary() = default;

  // `tags` arrive already ordered (see data.hpp for the frequency ordering).
  static Vocabulary from_tags(std::vector<std::string> tags) {
    Vocabulary v;
    v.tags_ = std::move(tags);
    for (std::size_t i = 0; i < v.tags_.size(); ++i) {
      auto [it, inserted] = v.index_.emplace(v.tags_[i], static_cast<int>(i));
      if (!inserted) throw std::invalid_argument("Vocabulary: duplicate tag " + v.tags_[i]);
    }
    return v;
  }

  int size() const { return static_cast<int>(tags_.size()); }
  const std::string& tag(int id) const { return tags_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tags() const { return tags_; }

  std::optional<int> find(std::string_view tag) const {
    auto it = index_.find(std::string(tag));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

// Sorted, duplicate-free, non-empty set of vocabulary ids.
class TagSet {
 public:
  TagSet() = default;

  static TagSet from_ids(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) throw std::invalid_argument("TagSet: must not be empty");
    for (int id : ids)
      if (id < 0) throw std::invalid_argument("TagSet: negative id");
    TagSet t;
    t.ids_ = std::move(ids);
    return t;
  }

  const std::vector<int>& ids() const { return ids_; }
  int size() const { return static_cast<int>(ids_.size()); }
  bool empty() const { return ids_.empty(); }

  bool contains(int id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
  }

  bool contains_all(const TagSet& other) const {
    return std::includes(ids_.begin(), ids_.end(), other.ids_.begin(), other.ids_.end());
  }

  void require_within(int vocab_size) const {
    if (ids_.empty()) throw std::invalid_argument("TagSet: empty");
    if (ids_.back() >= vocab_size)
      throw std::out_of_range("TagSet: id exceeds vocabulary size");
  }

  bool operator==(const TagSet&) const = default;
  auto operator<=>(const TagSet&) const = default;

 private:
  std::vector<int> ids_;
};

struct FontRecord {
  std::string font_id;
  std::vector<double> features;
  TagSet tags;
};

struct ModelDims {
  int vocab = 0;            // V: tag vocabulary size
  int feature_dim = 0;      // m: font feature length
  int tag_feature_dim = 0;  // m_t: learnable tag embedding width
  int embed_dim = 0;        // d: hyperbolic embedding dimension
  int hidden_font = 0;      // 0 -> 2 * embed_dim
  int hidden_set = 0;       // 0 -> 2 * embed_dim

  void resolve_defaults() {
    if (hidden_font == 0) hidden_font = 2 * embed_dim;
    if (hidden_set == 0) hidden_set = 2 * embed_dim;
  }

  void validate() const {
    if (vocab <= 0 || feature_dim <= 0 || tag_feature_dim <= 0 || embed_dim <= 0 ||
        hidden_font <= 0 || hidden_set <= 0)
      throw std::invalid_argument("ModelDims: all dimensions must be positive");
  }

  bool operator==(const ModelDims&) const = default;
};

struct Linear {
  int in = 0, out = 0;
  std::vector<double> weight;  // row-major [out][in]
  std::vector<double> bias;    // [out]
};

// All trainable state plus the fixed geometry constants. Parameters are held
// in 64-bit; checkpoints store them as little-endian float32 blocks.
struct ModelParams {
  ModelDims dims;
  double curvature_c = 1.0;  // fixed, not trained
  double cone_k = 0.1;       // fixed, not trained

  std::vector<double> tag_table;  // [vocab][tag_feature_dim]
  Linear set_hidden, set_out;     // tag_feature_dim -> hidden_set -> embed_dim
  Linear font_hidden, font_out;   // feature_dim -> hidden_font -> embed_dim
  double log_scale_font = 0.0;
  double log_scale_imp = 0.0;
  double log_temperature = 0.0;

  Curvature curvature() const { return Curvature(curvature_c); }
  ConeConfig cone() const { return ConeConfig(cone_k, curvature()); }
  double temperature() const { return std::exp(log_temperature); }
  double scale_font() const { return std::exp(log_scale_font); }
  double scale_imp() const { return std::exp(log_scale_imp); }
};

// --- flat parameter layout -------------------------------------------------
//
// One fixed ordering of every trainable block. It defines (a) checkpoint
// serialization, (b) gradient vector layout, (c) the order autodiff leaves are
// created in is congruent with flatten_params.

struct BlockInfo {
  const char* name;
  std::size_t offset, size;
  bool weight_decay;  // decoupled decay applies to encoder weights + tag table
};

inline std::vector<BlockInfo> block_layout(const ModelDims& d) {
  std::vector<BlockInfo> blocks;
  std::size_t off = 0;
  auto add = [&](const char* name, std::size_t size, bool decay) {
    blocks.push_back(BlockInfo{name, off, size, decay});
    off += size;
  };
  const auto V = static_cast<std::size_t>(d.vocab);
  const auto m = static_cast<std::size_t>(d.feature_dim);
  const auto mt = static_cast<std::size_t>(d.tag_feature_dim);
  const auto e = static_cast<std::size_t>(d.embed_dim);
  const auto hf = static_cast<std::size_t>(d.hidden_font);
  const auto hs = static_cast<std::size_t>(d.hidden_set);
  add("tag_table", V * mt, true);
  add("set_hidden.weight", hs * mt, true);
  add("set_hidden.bias", hs, true);
  add("set_out.weight", e * hs, true);
  add("set_out.bias", e, true);
  add("font_hidden.weight", hf * m, true);
  add("font_hidden.bias", hf, true);
  add("font_out.weight", e * hf, true);
  add("font_out.bias", e, true);
  add("log_scale_font", 1, false);
  add("log_scale_imp", 1, false);
  add("log_temperature", 1, false);
  return blocks;
}

inline std::size_t parameter_count(const ModelDims& d) {
  const auto blocks = block_layout(d);
  return blocks.back().offset + blocks.back().size;
}

namespace detail {

template <typename Fn>
void for_each_block(ModelParams& p, Fn&& fn) {
  fn(std::span<double>(p.tag_table));
  fn(std::span<double>(p.set_hidden.weight));
  fn(std::span<double>(p.set_hidden.bias));
  fn(std::span<double>(p.set_out.weight));
  fn(std::span<double>(p.set_out.bias));
  fn(std::span<double>(p.font_hidden.weight));
  fn(std::span<double>(p.font_hidden.bias));
  fn(std::span<double>(p.font_out.weight));
  fn(std::span<double>(p.font_out.bias));
  fn(std::span<double>(&p.log_scale_font, 1));
  fn(std::span<double>(&p.log_scale_imp, 1));
  fn(std::span<double>(&p.log_temperature, 1));
}

template <typename Fn>
void for_each_block(const ModelParams& p, Fn&& fn) {
  fn(std::span<const double>(p.tag_table));
  fn(std::span<const double>(p.set_hidden.weight));
  fn(std::span<const double>(p.set_hidden.bias));
  fn(std::span<const double>(p.set_out.weight));
  fn(std::span<const double>(p.set_out.bias));
  fn(std::span<const double>(p.font_hidden.weight));
  fn(std::span<const double>(p.font_hidden.bias));
  fn(std::span<const double>(p.font_out.weight));
  fn(std::span<const double>(p.font_out.bias));
  fn(std::span<const double>(&p.log_scale_font, 1));
  fn(std::span<const double>(&p.log_scale_imp, 1));
  fn(std::span<const double>(&p.log_temperature, 1));
}

}  // namespace detail

inline std::vector<double> flatten_params(const ModelParams& p) {
  std::vector<double> flat;
  flat.reserve(parameter_count(p.dims));
  detail::for_each_block(p, [&](std::span<const double> block) {
    flat.insert(flat.end(), block.begin(), block.end());
  });
  return flat;
}

inline void unflatten_params(std::span<const double> flat, ModelParams& p) {
  if (flat.size() != parameter_count(p.dims))
    throw std::invalid_argument("unflatten_params: size mismatch");
  std::size_t off = 0;
  detail::for_each_block(p, [&](std::span<double> block) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), block.size(), block.begin());
    off += block.size();
  });
}

// Gradient of every trainable parameter, congruent with the flat layout.
// Fixed fields (curvature, cone constant) have no block here.
class GradientSet {
 public:
  explicit GradientSet(const ModelDims& dims)
      : dims_(dims), values_(parameter_count(dims), 0.0) {}

  const ModelDims& dims() const { return dims_; }
  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  std::span<const double> block(std::string_view name) const {
    for (const BlockInfo& b : block_layout(dims_))
      if (name == b.name) return std::span<const double>(values_).subspan(b.offset, b.size);
    throw std::invalid_argument("GradientSet: unknown block " + std::string(name));
  }

 private:
  ModelDims dims_;
  std::vector<double> values_;
};

// Scalar-generic view of the parameters; the training path instantiates it
// with autodiff variables, everything else with plain doubles.
template <typename Scalar>
struct ParamsView {
  ModelDims dims;
  Curvature curvature{};
  double cone_k = 0.1;

  std::vector<Scalar> tag_table;
  std::vector<Scalar> set_hidden_w, set_hidden_b, set_out_w, set_out_b;
  std::vector<Scalar> font_hidden_w, font_hidden_b, font_out_w, font_out_b;
  Scalar log_scale_font{}, log_scale_imp{}, log_temperature{};
};

inline ParamsView<double> make_params_view(const ModelParams& p) {
  ParamsView<double> v;
  v.dims = p.dims;
  v.curvature = p.curvature();
  v.cone_k = p.cone_k;
  v.tag_table = p.tag_table;
  v.set_hidden_w = p.set_hidden.weight;
  v.set_hidden_b = p.set_hidden.bias;
  v.set_out_w = p.set_out.weight;
  v.set_out_b = p.set_out.bias;
  v.font_hidden_w = p.font_hidden.weight;
  v.font_hidden_b = p.font_hidden.bias;
  v.font_out_w = p.font_out.weight;
  v.font_out_b = p.font_out.bias;
  v.log_scale_font = p.log_scale_font;
  v.log_scale_imp = p.log_scale_imp;
  v.log_temperature = p.log_temperature;
  return v;
}

namespace detail {

// tanh(W x + b); the input may be raw double features or Scalars.
template <typename Scalar, typename Input>
std::vector<Scalar> hidden_layer(std::span<const Scalar> w, std::span<const Scalar> b,
                                 int out, int in, std::span<const Input> x) {
  using std::tanh;
  std::vector<Scalar> h;
  h.reserve(static_cast<std::size_t>(out));
  for (int j = 0; j < out; ++j) {
    Scalar acc = b[static_cast<std::size_t>(j)];
    const std::size_t row = static_cast<std::size_t>(j) * static_cast<std::size_t>(in);
    for (int i = 0; i < in; ++i) acc += w[row + static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    h.push_back(tanh(acc));
  }
  return h;
}

template <typename Scalar, typename Input>
std::vector<Scalar> output_layer(std::span<const Scalar> w, std::span<const Scalar> b,
                                 int out, int in, std::span<const Input> x) {
  std::vector<Scalar> y;
  y.reserve(static_cast<std::size_t>(out));
  for (int j = 0; j < out; ++j) {
    Scalar acc = b[static_cast<std::size_t>(j)];
    const std::size_t row = static_cast<std::size_t>(j) * static_cast<std::size_t>(in);
    for (int i = 0; i < in; ++i) acc += w[row + static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    y.push_back(acc);
  }
  return y;
}

}  // namespace detail

// Font encoder: scale * MLP(features) as a tangent at o, then the exp map.
template <typename Scalar>
LorentzPoint<Scalar> encode_font(const ParamsView<Scalar>& p, std::span<const double> features) {
  using std::exp;
  if (static_cast<int>(features.size()) != p.dims.feature_dim)
    throw std::invalid_argument("encode_font: feature length mismatch");
  for (double f : features)
    if (!std::isfinite(f)) throw std::invalid_argument("encode_font: non-finite feature");

  auto h = detail::hidden_layer<Scalar>(p.font_hidden_w, p.font_hidden_b,
                                        p.dims.hidden_font, p.dims.feature_dim, features);
  auto u = detail::output_layer<Scalar>(p.font_out_w, p.font_out_b, p.dims.embed_dim,
                                        p.dims.hidden_font, std::span<const Scalar>(h));
  Scalar scale = exp(p.log_scale_font);
  TangentAtOrigin<Scalar> tangent;
  tangent.space.reserve(u.size());
  for (Scalar& s : u) tangent.space.push_back(s * scale);
  return exp_map_origin(tangent, p.curvature);
}

// Tag-set encoder: mean-pool the tag embedding rows (order/duplicate free by
// TagSet construction), one hidden layer, scale, exp map.
template <typename Scalar>
LorentzPoint<Scalar> encode_tagset(const ParamsView<Scalar>& p, const TagSet& tags) {
  using std::exp;
  tags.require_within(p.dims.vocab);
  const int mt = p.dims.tag_feature_dim;
  std::vector<Scalar> pooled;
  pooled.reserve(static_cast<std::size_t>(mt));
  const double inv_k = 1.0 / static_cast<double>(tags.size());
  for (int i = 0; i < mt; ++i) {
    const std::size_t col = static_cast<std::size_t>(i);
    auto it = tags.ids().begin();
    Scalar acc = p.tag_table[static_cast<std::size_t>(*it) * static_cast<std::size_t>(mt) + col];
    for (++it; it != tags.ids().end(); ++it)
      acc += p.tag_table[static_cast<std::size_t>(*it) * static_cast<std::size_t>(mt) + col];
    pooled.push_back(acc * inv_k);
  }

  auto h = detail::hidden_layer<Scalar>(p.set_hidden_w, p.set_hidden_b, p.dims.hidden_set,
                                        mt, std::span<const Scalar>(pooled));
  auto u = detail::output_layer<Scalar>(p.set_out_w, p.set_out_b, p.dims.embed_dim,
                                        p.dims.hidden_set, std::span<const Scalar>(h));
  Scalar scale = exp(p.log_scale_imp);
  TangentAtOrigin<Scalar> tangent;
  tangent.space.reserve(u.size());
  for (Scalar& s : u) tangent.space.push_back(s * scale);
  return exp_map_origin(tangent, p.curvature);
}

inline LorentzPointD encode_font(const ModelParams& p, std::span<const double> features) {
  return encode_font(make_params_view(p), features);
}

inline LorentzPointD encode_tagset(const ModelParams& p, const TagSet& tags) {
  return encode_tagset(make_params_view(p), tags);
}

// Deterministic initialization: uniform Xavier fan-in/fan-out limits for the
// encoder layers, +-1/sqrt(m_t) for the tag table, zero biases,
// scales 1/sqrt(d), temperature 0.07.
inline ModelParams init_params(ModelDims dims, double curvature_c, double cone_k,
                               std::uint64_t seed) {
  dims.resolve_defaults();
  dims.validate();
  ModelParams p;
  p.dims = dims;
  p.curvature_c = Curvature(curvature_c).c;
  if (!(std::isfinite(cone_k) && cone_k > 0.0))
    throw std::invalid_argument("init_params: cone K must be positive");
  p.cone_k = cone_k;

  Rng rng = derive_stream(seed, "init");
  auto fill_uniform = [&rng](std::vector<double>& v, std::size_t n, double limit) {
    v.resize(n);
    for (double& x : v) x = rng.uniform(-limit, limit);
  };
  auto init_linear = [&](Linear& l, int in, int out) {
    l.in = in;
    l.out = out;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    fill_uniform(l.weight, static_cast<std::size_t>(in) * static_cast<std::size_t>(out), limit);
    l.bias.assign(static_cast<std::size_t>(out), 0.0);
  };

  // Tag embeddings share a positive mean component (uniform in [0, 2a] rather
  // than [-a, a]): mean-pooled set representations then keep a
  // cardinality-independent norm instead of cancelling toward zero, matching
  // the anisotropy of the pretrained text features this table stands in for.
  {
    const double a = 1.0 / std::sqrt(static_cast<double>(dims.tag_feature_dim));
    p.tag_table.resize(static_cast<std::size_t>(dims.vocab) *
                       static_cast<std::size_t>(dims.tag_feature_dim));
    for (double& x : p.tag_table) x = rng.uniform(0.0, 2.0 * a);
  }
  init_linear(p.set_hidden, dims.tag_feature_dim, dims.hidden_set);
  init_linear(p.set_out, dims.hidden_set, dims.embed_dim);
  init_linear(p.font_hidden, dims.feature_dim, dims.hidden_font);
  init_linear(p.font_out, dims.hidden_font, dims.embed_dim);

  p.log_scale_font = std::log(1.0 / std::sqrt(static_cast<double>(dims.embed_dim)));
  p.log_scale_imp = p.log_scale_font;
  p.log_temperature = std::log(0.07);
  return p;
}

}  // namespace hyperco
