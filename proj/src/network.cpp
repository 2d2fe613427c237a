#include "secci/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include "io_bytes.hpp"
#include "secci/kernels.hpp"

namespace secci {
namespace {

constexpr char kModelMagic[8] = {'S', 'E', 'C', 'C', 'I', 'M', 'D', 'L'};
constexpr std::uint16_t kModelVersion = 1;

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::se: return "se";
    case LayerKind::dropout: return "dropout";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

[[noreturn]] void bad_field(const std::string& what) {
  throw FormatError(FormatError::Kind::field_invalid, what);
}

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    bad_field(std::string("missing field '") + key + "'");
  return j.at(key);
}

int int_field(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer())
    bad_field(std::string("field '") + key + "' is not an integer");
  return v.get<int>();
}

double num_field(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number())
    bad_field(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

}  // namespace

LayerSpec LayerSpec::conv(int in_ch, int out_ch, int kernel, int stride,
                          int pad) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_ch = in_ch;
  s.out_ch = out_ch;
  s.kernel_h = s.kernel_w = kernel;
  s.stride = stride;
  s.pad = pad;
  return s;
}
LayerSpec LayerSpec::batch_norm(int channels) {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  s.channels = channels;
  return s;
}
LayerSpec LayerSpec::relu_layer() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}
LayerSpec LayerSpec::max_pool(int window) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.window_h = s.window_w = window;
  return s;
}
LayerSpec LayerSpec::squeeze_excite(int channels, int reduction) {
  LayerSpec s;
  s.kind = LayerKind::se;
  s.channels = channels;
  s.reduction = reduction;
  return s;
}
LayerSpec LayerSpec::dropout_layer(double p) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.p = p;
  return s;
}
LayerSpec LayerSpec::dense(std::int64_t in_features, int out_features) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_features = in_features;
  s.out_features = out_features;
  return s;
}
LayerSpec LayerSpec::softmax_layer() {
  LayerSpec s;
  s.kind = LayerKind::softmax;
  return s;
}

nlohmann::json LayerSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_name(kind);
  switch (kind) {
    case LayerKind::conv2d:
      j["in_ch"] = in_ch;
      j["out_ch"] = out_ch;
      j["kernel"] = {kernel_h, kernel_w};
      j["stride"] = stride;
      j["pad"] = pad;
      break;
    case LayerKind::batchnorm:
      j["channels"] = channels;
      j["eps"] = eps;
      j["momentum"] = momentum;
      break;
    case LayerKind::maxpool:
      j["window"] = {window_h, window_w};
      break;
    case LayerKind::se:
      j["channels"] = channels;
      j["reduction"] = reduction;
      break;
    case LayerKind::dropout:
      j["p"] = p;
      break;
    case LayerKind::dense:
      j["in"] = in_features;
      j["out"] = out_features;
      break;
    default:
      break;
  }
  return j;
}

LayerSpec LayerSpec::from_json(const nlohmann::json& j) {
  const auto& kindv = field(j, "kind");
  if (!kindv.is_string()) bad_field("layer kind is not a string");
  const std::string kind = kindv.get<std::string>();
  if (kind == "conv2d") {
    const auto& k = field(j, "kernel");
    if (!k.is_array() || k.size() != 2) bad_field("conv kernel shape");
    LayerSpec s = conv(int_field(j, "in_ch"), int_field(j, "out_ch"),
                       k[0].get<int>(), int_field(j, "stride"),
                       int_field(j, "pad"));
    s.kernel_h = k[0].get<int>();
    s.kernel_w = k[1].get<int>();
    return s;
  }
  if (kind == "batchnorm") {
    LayerSpec s = batch_norm(int_field(j, "channels"));
    s.eps = num_field(j, "eps");
    s.momentum = num_field(j, "momentum");
    return s;
  }
  if (kind == "relu") return relu_layer();
  if (kind == "maxpool") {
    const auto& w = field(j, "window");
    if (!w.is_array() || w.size() != 2) bad_field("pool window shape");
    LayerSpec s = max_pool(w[0].get<int>());
    s.window_h = w[0].get<int>();
    s.window_w = w[1].get<int>();
    return s;
  }
  if (kind == "se")
    return squeeze_excite(int_field(j, "channels"), int_field(j, "reduction"));
  if (kind == "dropout") return dropout_layer(num_field(j, "p"));
  if (kind == "dense")
    return dense(field(j, "in").get<std::int64_t>(), int_field(j, "out"));
  if (kind == "softmax") return softmax_layer();
  bad_field("unknown layer kind '" + kind + "'");
}

std::vector<LayerSpec> NetworkConfig::layers() const {
  if (num_classes < 1)
    throw ConfigError("network needs at least one output class");
  if (input_rows < 1 || input_cols < 1 || input_channels < 1)
    throw ConfigError("network input shape must be positive");
  if (dense_units < 1) throw ConfigError("dense_units must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout probability must lie in [0, 1)");
  if (num_composite < 0)
    throw ConfigError("composite block count cannot be negative");

  std::vector<LayerSpec> out;
  int h = input_rows, w = input_cols, c = input_channels;
  for (int ch : block_channels) {
    if (ch < 1) throw ConfigError("block channel width must be positive");
    if (se_reduction < 1 || ch % se_reduction != 0)
      throw ConfigError("SE reduction must divide the channel width");
    out.push_back(LayerSpec::conv(c, ch, 3, 1, 1));
    out.push_back(LayerSpec::batch_norm(ch));
    out.push_back(LayerSpec::relu_layer());
    out.push_back(LayerSpec::squeeze_excite(ch, se_reduction));
    out.push_back(LayerSpec::max_pool(2));
    h /= 2;
    w /= 2;
    if (h < 1 || w < 1)
      throw ConfigError("input too small for the pooling chain");
    c = ch;
  }
  for (int i = 0; i < num_composite; ++i) {
    if (composite_channels < 1)
      throw ConfigError("composite channel width must be positive");
    out.push_back(LayerSpec::conv(c, composite_channels, 3, 1, 1));
    out.push_back(LayerSpec::batch_norm(composite_channels));
    out.push_back(LayerSpec::relu_layer());
    c = composite_channels;
  }
  const std::int64_t flat = static_cast<std::int64_t>(h) * w * c;
  out.push_back(LayerSpec::dense(flat, dense_units));
  out.push_back(LayerSpec::relu_layer());
  out.push_back(LayerSpec::dropout_layer(dropout));
  out.push_back(LayerSpec::dense(dense_units, num_classes));
  out.push_back(LayerSpec::softmax_layer());
  return out;
}

nlohmann::json NetworkConfig::to_json() const {
  nlohmann::json j;
  j["input_rows"] = input_rows;
  j["input_cols"] = input_cols;
  j["input_channels"] = input_channels;
  j["block_channels"] = block_channels;
  j["composite_channels"] = composite_channels;
  j["num_composite"] = num_composite;
  j["se_reduction"] = se_reduction;
  j["dense_units"] = dense_units;
  j["dropout"] = dropout;
  j["num_classes"] = num_classes;
  return j;
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.input_rows = int_field(j, "input_rows");
  c.input_cols = int_field(j, "input_cols");
  c.input_channels = int_field(j, "input_channels");
  const auto& blocks = field(j, "block_channels");
  if (!blocks.is_array()) bad_field("block_channels is not an array");
  c.block_channels.clear();
  for (const auto& b : blocks) c.block_channels.push_back(b.get<int>());
  c.composite_channels = int_field(j, "composite_channels");
  c.num_composite = int_field(j, "num_composite");
  c.se_reduction = int_field(j, "se_reduction");
  c.dense_units = int_field(j, "dense_units");
  c.dropout = num_field(j, "dropout");
  c.num_classes = int_field(j, "num_classes");
  return c;
}

// ---------------------------------------------------------------------------
// Network

struct Network::LayerRt {
  LayerSpec spec;
  int h_in = 0, w_in = 0, c_in = 0;
  int h_out = 0, w_out = 0, c_out = 0;
  // Parameter slots (indices into params_); meaning depends on kind:
  // conv/dense/se: pa = weight(/w1), pb = bias(/w2);
  // batchnorm: pa = gamma, pb = beta, pc/pd = running mean/var.
  int pa = -1, pb = -1, pc = -1, pd = -1;
  // Training-forward caches consumed by backward.
  std::vector<float> mean, var;      // batchnorm batch statistics
  std::vector<std::int32_t> argmax;  // maxpool
  std::vector<float> z, h1, s;       // squeeze-excite
  std::vector<float> mask;           // dropout
};

Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;
Network::~Network() = default;

Network::Network(const NetworkConfig& cfg, Rng& init_rng) {
  build(cfg);
  // He (fan-in) Gaussian initialization for weights; biases zero,
  // normalization at identity. Parameter order is fixed, so a seed
  // pins every initial weight.
  for (auto& l : layers_) {
    switch (l.spec.kind) {
      case LayerKind::conv2d: {
        const double fan_in =
            static_cast<double>(l.spec.kernel_h) * l.spec.kernel_w * l.spec.in_ch;
        const double std = std::sqrt(2.0 / fan_in);
        for (auto& v : params_[l.pa].value)
          v = static_cast<float>(init_rng.normal(0.0, std));
        break;
      }
      case LayerKind::batchnorm:
        std::fill(params_[l.pa].value.begin(), params_[l.pa].value.end(), 1.f);
        std::fill(params_[l.pd].value.begin(), params_[l.pd].value.end(), 1.f);
        break;
      case LayerKind::se: {
        const int r_dim = l.spec.channels / l.spec.reduction;
        const double std1 = std::sqrt(2.0 / l.spec.channels);
        for (auto& v : params_[l.pa].value)
          v = static_cast<float>(init_rng.normal(0.0, std1));
        const double std2 = std::sqrt(2.0 / r_dim);
        for (auto& v : params_[l.pb].value)
          v = static_cast<float>(init_rng.normal(0.0, std2));
        break;
      }
      case LayerKind::dense: {
        const double std = std::sqrt(2.0 / static_cast<double>(l.spec.in_features));
        for (auto& v : params_[l.pa].value)
          v = static_cast<float>(init_rng.normal(0.0, std));
        break;
      }
      default:
        break;
    }
  }
}

Network::Network(const ModelCheckpoint& ckpt) {
  build(ckpt.config);
  if (ckpt.architecture != specs_)
    throw FormatError(FormatError::Kind::field_invalid,
                      "checkpoint architecture does not match its configuration");
  if (ckpt.tensors.size() != params_.size())
    throw FormatError(FormatError::Kind::shape_mismatch,
                      "checkpoint carries " + std::to_string(ckpt.tensors.size()) +
                          " tensors, network expects " +
                          std::to_string(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& e = ckpt.tensors[i];
    if (e.name != params_[i].name)
      throw FormatError(FormatError::Kind::field_invalid,
                        "unexpected tensor '" + e.name + "', expected '" +
                            params_[i].name + "'");
    if (e.tensor.shape != params_[i].shape ||
        e.tensor.data.size() != params_[i].value.size())
      throw FormatError(FormatError::Kind::shape_mismatch,
                        "tensor '" + e.name + "' has the wrong shape");
    params_[i].value = e.tensor.data;
  }
}

void Network::build(const NetworkConfig& cfg) {
  cfg_ = cfg;
  specs_ = cfg.layers();
  layers_.clear();
  params_.clear();

  auto add_param = [&](const std::string& name, std::vector<int> shape,
                       bool decay, bool trainable) {
    ParamTensor p;
    p.name = name;
    p.shape = std::move(shape);
    std::size_t n = 1;
    for (int d : p.shape) n *= static_cast<std::size_t>(d);
    p.value.assign(n, 0.f);
    if (trainable) p.grad.assign(n, 0.f);
    p.decay = decay;
    p.trainable = trainable;
    params_.push_back(std::move(p));
    return static_cast<int>(params_.size() - 1);
  };

  int h = cfg.input_rows, w = cfg.input_cols, c = cfg.input_channels;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    LayerRt l;
    l.spec = specs_[i];
    l.h_in = h;
    l.w_in = w;
    l.c_in = c;
    const std::string base = "layer" + std::to_string(i);
    switch (l.spec.kind) {
      case LayerKind::conv2d:
        if (l.spec.in_ch != c)
          throw ConfigError("conv input channels do not match the data");
        l.pa = add_param(base + ".weight",
                         {l.spec.kernel_h, l.spec.kernel_w, l.spec.in_ch,
                          l.spec.out_ch},
                         true, true);
        l.pb = add_param(base + ".bias", {l.spec.out_ch}, false, true);
        h = kernels::conv_out_dim(h, l.spec.kernel_h, l.spec.stride, l.spec.pad);
        w = kernels::conv_out_dim(w, l.spec.kernel_w, l.spec.stride, l.spec.pad);
        c = l.spec.out_ch;
        break;
      case LayerKind::batchnorm:
        if (l.spec.channels != c)
          throw ConfigError("batchnorm width does not match the data");
        l.pa = add_param(base + ".gamma", {c}, false, true);
        l.pb = add_param(base + ".beta", {c}, false, true);
        l.pc = add_param(base + ".running_mean", {c}, false, false);
        l.pd = add_param(base + ".running_var", {c}, false, false);
        break;
      case LayerKind::relu:
        break;
      case LayerKind::maxpool:
        h /= l.spec.window_h;
        w /= l.spec.window_w;
        if (h < 1 || w < 1) throw ConfigError("pooled activation vanished");
        break;
      case LayerKind::se: {
        if (l.spec.channels != c)
          throw ConfigError("SE width does not match the data");
        if (l.spec.reduction < 1 || c % l.spec.reduction != 0)
          throw ConfigError("SE reduction must divide the channel width");
        const int r_dim = c / l.spec.reduction;
        l.pa = add_param(base + ".w1", {r_dim, c}, true, true);
        l.pb = add_param(base + ".w2", {c, r_dim}, true, true);
        break;
      }
      case LayerKind::dropout:
        if (!(l.spec.p >= 0.0 && l.spec.p < 1.0))
          throw ConfigError("dropout probability must lie in [0, 1)");
        break;
      case LayerKind::dense: {
        const std::int64_t flat = static_cast<std::int64_t>(h) * w * c;
        if (l.spec.in_features != flat)
          throw ConfigError("dense input width does not match the data");
        l.pa = add_param(base + ".weight",
                         {static_cast<int>(l.spec.in_features),
                          l.spec.out_features},
                         true, true);
        l.pb = add_param(base + ".bias", {l.spec.out_features}, false, true);
        h = 1;
        w = 1;
        c = l.spec.out_features;
        break;
      }
      case LayerKind::softmax:
        break;
    }
    l.h_out = h;
    l.w_out = w;
    l.c_out = c;
    layers_.push_back(std::move(l));
  }
  acts_.resize(layers_.size() + 1);
}

std::vector<float> Network::forward(const float* x, int batch, bool training,
                                    Rng* rng) {
  if (batch < 1) throw StructuralError("forward needs at least one sample");
  namespace k = kernels;
  const std::size_t in_size = static_cast<std::size_t>(cfg_.input_rows) *
                              cfg_.input_cols * cfg_.input_channels;
  acts_[0].assign(x, x + static_cast<std::size_t>(batch) * in_size);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    const float* in = acts_[i].data();
    auto& out = acts_[i + 1];
    out.resize(static_cast<std::size_t>(batch) * l.h_out * l.w_out * l.c_out);
    switch (l.spec.kind) {
      case LayerKind::conv2d:
        k::conv2d_forward(in, batch, l.h_in, l.w_in, l.c_in,
                          params_[l.pa].value.data(),
                          params_[l.pb].value.data(), l.spec.kernel_h,
                          l.spec.kernel_w, l.spec.out_ch, l.spec.stride,
                          l.spec.pad, out.data());
        break;
      case LayerKind::batchnorm: {
        const std::int64_t m =
            static_cast<std::int64_t>(batch) * l.h_in * l.w_in;
        const float eps = static_cast<float>(l.spec.eps);
        if (training) {
          l.mean.resize(l.c_in);
          l.var.resize(l.c_in);
          k::bn_forward_train(in, m, l.c_in, params_[l.pa].value.data(),
                              params_[l.pb].value.data(), eps, out.data(),
                              l.mean.data(), l.var.data());
          auto& rm = params_[l.pc].value;
          auto& rv = params_[l.pd].value;
          const float mom = static_cast<float>(l.spec.momentum);
          const float unbias =
              m > 1 ? static_cast<float>(m) / static_cast<float>(m - 1) : 1.f;
          for (int ch = 0; ch < l.c_in; ++ch) {
            rm[ch] = (1.f - mom) * rm[ch] + mom * l.mean[ch];
            rv[ch] = (1.f - mom) * rv[ch] + mom * l.var[ch] * unbias;
          }
        } else {
          k::bn_forward_infer(in, m, l.c_in, params_[l.pa].value.data(),
                              params_[l.pb].value.data(),
                              params_[l.pc].value.data(),
                              params_[l.pd].value.data(), eps, out.data());
        }
        break;
      }
      case LayerKind::relu:
        k::relu_forward(in, out.size(), out.data());
        break;
      case LayerKind::maxpool:
        l.argmax.resize(out.size());
        k::maxpool_forward(in, batch, l.h_in, l.w_in, l.c_in, l.spec.window_h,
                           l.spec.window_w, out.data(), l.argmax.data());
        break;
      case LayerKind::se: {
        const int r_dim = l.spec.channels / l.spec.reduction;
        l.z.resize(static_cast<std::size_t>(batch) * l.c_in);
        l.h1.resize(static_cast<std::size_t>(batch) * r_dim);
        l.s.resize(static_cast<std::size_t>(batch) * l.c_in);
        k::se_forward(in, batch, l.h_in, l.w_in, l.c_in,
                      params_[l.pa].value.data(), params_[l.pb].value.data(),
                      r_dim, out.data(), l.z.data(), l.h1.data(), l.s.data());
        break;
      }
      case LayerKind::dropout:
        if (training && l.spec.p > 0.0) {
          if (!rng)
            throw StructuralError("dropout needs an rng in training mode");
          l.mask.resize(out.size());
          const float scale = static_cast<float>(1.0 / (1.0 - l.spec.p));
          for (auto& mv : l.mask)
            mv = rng->uniform() < l.spec.p ? 0.f : scale;  // inverted dropout
          k::multiply_mask(in, l.mask.data(), out.size(), out.data());
        } else {
          l.mask.clear();
          std::copy(in, in + out.size(), out.begin());
        }
        break;
      case LayerKind::dense:
        k::dense_forward(in, batch, l.spec.in_features, l.spec.out_features,
                         params_[l.pa].value.data(),
                         params_[l.pb].value.data(), out.data());
        break;
      case LayerKind::softmax:
        k::softmax_forward(in, batch, l.c_in * l.h_in * l.w_in, out.data());
        break;
    }
  }
  last_batch_ = batch;
  last_training_ = training;
  return acts_.back();
}

void Network::backward(const float* gprobs) {
  if (last_batch_ == 0 || !last_training_)
    throw StructuralError("backward requires a training-mode forward first");
  namespace k = kernels;
  const int batch = last_batch_;
  std::vector<float> g_cur(acts_.back().size());
  std::copy(gprobs, gprobs + g_cur.size(), g_cur.begin());
  std::vector<float> g_prev;
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    auto& l = layers_[idx];
    const float* in = acts_[idx].data();
    g_prev.resize(static_cast<std::size_t>(batch) * l.h_in * l.w_in * l.c_in);
    switch (l.spec.kind) {
      case LayerKind::conv2d: {
        const int oh = l.h_out, ow = l.w_out;
        k::conv2d_backward_weights(in, batch, l.h_in, l.w_in, l.c_in,
                                   g_cur.data(), oh, ow, l.spec.out_ch,
                                   l.spec.kernel_h, l.spec.kernel_w,
                                   l.spec.stride, l.spec.pad,
                                   params_[l.pa].grad.data(),
                                   params_[l.pb].grad.data());
        // The first layer has no upstream layer to feed, so its input
        // gradient is never consumed.
        if (idx > 0)
          k::conv2d_backward_input(g_cur.data(), batch, oh, ow, l.spec.out_ch,
                                   params_[l.pa].value.data(), l.spec.kernel_h,
                                   l.spec.kernel_w, l.c_in, l.spec.stride,
                                   l.spec.pad, g_prev.data(), l.h_in, l.w_in);
        break;
      }
      case LayerKind::batchnorm: {
        const std::int64_t m =
            static_cast<std::int64_t>(batch) * l.h_in * l.w_in;
        k::bn_backward(in, g_cur.data(), m, l.c_in,
                       params_[l.pa].value.data(), l.mean.data(),
                       l.var.data(), static_cast<float>(l.spec.eps),
                       g_prev.data(), params_[l.pa].grad.data(),
                       params_[l.pb].grad.data());
        break;
      }
      case LayerKind::relu:
        k::relu_backward(in, g_cur.data(), g_prev.size(), g_prev.data());
        break;
      case LayerKind::maxpool:
        k::maxpool_backward(g_cur.data(), l.argmax.data(), batch, l.h_out,
                            l.w_out, l.c_in, l.spec.window_h, l.spec.window_w,
                            g_prev.data(), l.h_in, l.w_in);
        break;
      case LayerKind::se: {
        const int r_dim = l.spec.channels / l.spec.reduction;
        k::se_backward(in, g_cur.data(), batch, l.h_in, l.w_in, l.c_in,
                       params_[l.pa].value.data(), params_[l.pb].value.data(),
                       r_dim, l.z.data(), l.h1.data(), l.s.data(),
                       g_prev.data(), params_[l.pa].grad.data(),
                       params_[l.pb].grad.data());
        break;
      }
      case LayerKind::dropout:
        if (!l.mask.empty()) {
          k::multiply_mask(g_cur.data(), l.mask.data(), g_prev.size(),
                           g_prev.data());
        } else {
          std::copy(g_cur.begin(), g_cur.end(), g_prev.begin());
        }
        break;
      case LayerKind::dense:
        k::dense_backward_weights(in, g_cur.data(), batch, l.spec.in_features,
                                  l.spec.out_features,
                                  params_[l.pa].grad.data(),
                                  params_[l.pb].grad.data());
        k::dense_backward_input(g_cur.data(), batch, l.spec.in_features,
                                l.spec.out_features,
                                params_[l.pa].value.data(), g_prev.data());
        break;
      case LayerKind::softmax:
        k::softmax_backward(acts_[idx + 1].data(), g_cur.data(), batch,
                            l.c_in * l.h_in * l.w_in, g_prev.data());
        break;
    }
    std::swap(g_cur, g_prev);
  }
}

std::vector<double> Network::predict_probs(const CsiImage& img) {
  if (img.rows != cfg_.input_rows || CsiImage::kCols != cfg_.input_cols ||
      CsiImage::kChannels != cfg_.input_channels)
    throw StructuralError("image shape does not match the network input");
  std::vector<float> x(static_cast<std::size_t>(cfg_.input_rows) *
                       cfg_.input_cols * cfg_.input_channels);
  image_to_nhwc(img, x.data());
  const auto probs = forward(x.data(), 1, false, nullptr);
  return std::vector<double>(probs.begin(), probs.end());
}

ModelCheckpoint Network::to_checkpoint() const {
  ModelCheckpoint c;
  c.config = cfg_;
  c.architecture = specs_;
  c.class_count = cfg_.num_classes;
  for (const auto& p : params_) {
    ModelCheckpoint::Entry e;
    e.name = p.name;
    e.tensor = Tensor(p.shape, p.value);
    c.tensors.push_back(std::move(e));
  }
  return c;
}

double cross_entropy_loss(const float* probs, const int* labels, int batch,
                          int num_classes) {
  for (int n = 0; n < batch; ++n) {
    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      const float v = probs[static_cast<std::size_t>(n) * num_classes + c];
      if (!(v >= -1e-9f))
        throw StructuralError("probabilities must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw StructuralError("probabilities do not sum to 1");
  }
  return kernels::cross_entropy(probs, labels, batch, num_classes);
}

void image_to_nhwc(const CsiImage& img, float* dst) {
  for (int r = 0; r < img.rows; ++r)
    for (int col = 0; col < CsiImage::kCols; ++col)
      for (int c = 0; c < CsiImage::kChannels; ++c)
        dst[(static_cast<std::size_t>(r) * CsiImage::kCols + col) *
                CsiImage::kChannels +
            c] = img.at(c, r, col);
}

void flip_horizontal(float* img, int h, int w, int c) {
  for (int r = 0; r < h; ++r)
    for (int col = 0; col < w / 2; ++col)
      for (int ch = 0; ch < c; ++ch)
        std::swap(img[(static_cast<std::size_t>(r) * w + col) * c + ch],
                  img[(static_cast<std::size_t>(r) * w + (w - 1 - col)) * c +
                      ch]);
}

void flip_vertical(float* img, int h, int w, int c) {
  for (int r = 0; r < h / 2; ++r)
    for (int col = 0; col < w; ++col)
      for (int ch = 0; ch < c; ++ch)
        std::swap(img[(static_cast<std::size_t>(r) * w + col) * c + ch],
                  img[(static_cast<std::size_t>(h - 1 - r) * w + col) * c +
                      ch]);
}

// ---------------------------------------------------------------------------
// Checkpoint persistence

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
  nlohmann::json header;
  nlohmann::json arch = nlohmann::json::array();
  for (const auto& s : ckpt.architecture) arch.push_back(s.to_json());
  header["architecture"] = std::move(arch);
  header["config"] = ckpt.config.to_json();
  header["class_count"] = ckpt.class_count;
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : ckpt.class_sites)
    sites.push_back({s.id, s.coords[0], s.coords[1]});
  header["class_sites"] = std::move(sites);
  header["best_epoch"] = ckpt.best_epoch;
  header["validation_accuracy"] = ckpt.validation_accuracy;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : ckpt.tensors) {
    nlohmann::json t;
    t["name"] = e.name;
    t["shape"] = e.tensor.shape;
    tensors.push_back(std::move(t));
  }
  header["tensors"] = std::move(tensors);
  const std::string header_str = header.dump();

  detail::ByteWriter w;
  w.bytes(kModelMagic, sizeof(kModelMagic));
  w.u16(kModelVersion);
  w.u32(static_cast<std::uint32_t>(header_str.size()));
  w.bytes(header_str.data(), header_str.size());
  for (const auto& e : ckpt.tensors)
    for (float v : e.tensor.data) w.f32(v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(w.data().data()),
            static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  detail::ByteReader r(bytes);
  const auto magic = r.raw(sizeof(kModelMagic), "magic");
  if (std::memcmp(magic.data(), kModelMagic, sizeof(kModelMagic)) != 0)
    throw FormatError(FormatError::Kind::bad_magic,
                      "not a model checkpoint file");
  const std::uint16_t version = r.u16("version");
  if (version != kModelVersion)
    throw FormatError(FormatError::Kind::version_mismatch,
                      "unsupported checkpoint version " +
                          std::to_string(version));
  const std::uint32_t header_len = r.u32("header length");
  const auto header_bytes = r.raw(header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::field_invalid,
                      std::string("header is not valid JSON: ") + e.what());
  }

  ModelCheckpoint ckpt;
  try {
    ckpt.config = NetworkConfig::from_json(field(header, "config"));
    const auto& arch = field(header, "architecture");
    if (!arch.is_array()) bad_field("architecture is not an array");
    for (const auto& a : arch)
      ckpt.architecture.push_back(LayerSpec::from_json(a));
    ckpt.class_count = int_field(header, "class_count");
    const auto& sites = field(header, "class_sites");
    if (!sites.is_array()) bad_field("class_sites is not an array");
    for (const auto& s : sites) {
      if (!s.is_array() || s.size() != 3) bad_field("class site entry shape");
      SiteInfo info;
      info.id = s[0].get<std::uint32_t>();
      info.coords = {s[1].get<double>(), s[2].get<double>()};
      ckpt.class_sites.push_back(info);
    }
    ckpt.best_epoch = int_field(header, "best_epoch");
    ckpt.validation_accuracy = num_field(header, "validation_accuracy");
    const auto& tensors = field(header, "tensors");
    if (!tensors.is_array()) bad_field("tensors is not an array");
    for (const auto& t : tensors) {
      ModelCheckpoint::Entry e;
      const auto& name = field(t, "name");
      if (!name.is_string()) bad_field("tensor name is not a string");
      e.name = name.get<std::string>();
      const auto& shape = field(t, "shape");
      if (!shape.is_array()) bad_field("tensor shape is not an array");
      for (const auto& d : shape) {
        if (!d.is_number_integer() || d.get<int>() < 0)
          bad_field("tensor dimension must be a non-negative integer");
        e.tensor.shape.push_back(d.get<int>());
      }
      ckpt.tensors.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::field_invalid,
                      std::string("malformed header field: ") + e.what());
  }

  for (auto& e : ckpt.tensors) {
    const std::size_t n = Tensor::element_count(e.tensor.shape);
    e.tensor.data.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      e.tensor.data[i] = r.f32("tensor data");
  }
  if (r.remaining() != 0)
    throw FormatError(FormatError::Kind::field_invalid,
                      "trailing bytes after the last tensor");
  return ckpt;
}

}  // namespace secci
