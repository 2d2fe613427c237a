#pragma once

// The SE-attention convolutional classifier: layer specifications, the
// network with forward/backward passes, and checkpoint persistence.
//
// The default architecture stacks three attention blocks
// (conv 3x3 -> BN -> ReLU -> squeeze-excite -> maxpool 2x2) with
// channel widths 32/64/128, two composite convolutions
// (conv 3x3 -> BN -> ReLU at 128 channels), then a 256-unit dense
// layer with dropout and a softmax over the site classes. Every width
// is configurable through NetworkConfig.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "secci/imaging.hpp"
#include "secci/rng.hpp"
#include "secci/tensor.hpp"
#include "secci/types.hpp"

namespace secci {

enum class LayerKind {
  conv2d,
  batchnorm,
  relu,
  maxpool,
  se,
  dropout,
  dense,
  softmax,
};

// Tagged layer description; only the fields of the active kind are
// meaningful. Serialized verbatim into checkpoints.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;

  int in_ch = 0, out_ch = 0;            // conv2d
  int kernel_h = 0, kernel_w = 0;       // conv2d
  int stride = 1, pad = 0;              // conv2d
  int channels = 0;                     // batchnorm, se
  double eps = 1e-5, momentum = 0.1;    // batchnorm
  int window_h = 0, window_w = 0;       // maxpool
  int reduction = 16;                   // se
  double p = 0.0;                       // dropout
  std::int64_t in_features = 0;         // dense
  int out_features = 0;                 // dense

  static LayerSpec conv(int in_ch, int out_ch, int kernel, int stride,
                        int pad);
  static LayerSpec batch_norm(int channels);
  static LayerSpec relu_layer();
  static LayerSpec max_pool(int window);
  static LayerSpec squeeze_excite(int channels, int reduction);
  static LayerSpec dropout_layer(double p);
  static LayerSpec dense(std::int64_t in_features, int out_features);
  static LayerSpec softmax_layer();

  nlohmann::json to_json() const;
  static LayerSpec from_json(const nlohmann::json& j);

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkConfig {
  int input_rows = 90;
  int input_cols = 90;
  int input_channels = 3;
  std::vector<int> block_channels = {32, 64, 128};
  int composite_channels = 128;
  int num_composite = 2;
  int se_reduction = 16;
  int dense_units = 256;
  double dropout = 0.5;
  int num_classes = 0;  // must be set before building a network

  // Expands the configuration into the concrete layer list; throws
  // ConfigError when widths, reductions, or spatial sizes do not fit.
  std::vector<LayerSpec> layers() const;

  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);

  bool operator==(const NetworkConfig&) const = default;
};

// One learnable (or tracked) tensor of a network; the optimizer steps
// tensors with trainable set, applying decoupled weight decay only to
// those flagged decay (weight matrices, not biases or normalization
// parameters).
struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool decay = false;
  bool trainable = true;
};

struct ModelCheckpoint {
  struct Entry {
    std::string name;
    Tensor tensor;
    bool operator==(const Entry&) const = default;
  };

  NetworkConfig config;
  std::vector<LayerSpec> architecture;
  int class_count = 0;
  std::vector<SiteInfo> class_sites;  // class index -> site id and coords
  int best_epoch = 0;
  double validation_accuracy = 0.0;
  std::vector<Entry> tensors;

  bool operator==(const ModelCheckpoint&) const = default;
};

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

// Runtime network. Owns parameters and per-layer activation caches;
// one forward&backward pair per optimizer step, single logical writer.
// Inference (training = false) touches no mutable state besides the
// activation scratch, which predict_probs keeps internal.
class Network {
 public:
  Network(const NetworkConfig& cfg, Rng& init_rng);
  explicit Network(const ModelCheckpoint& ckpt);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;
  ~Network();

  const NetworkConfig& config() const { return cfg_; }
  const std::vector<LayerSpec>& architecture() const { return specs_; }
  std::vector<ParamTensor>& params() { return params_; }

  // x: [batch][rows][cols][channels] interleaved. Returns class
  // probabilities [batch][num_classes]. In training mode BatchNorm
  // uses batch statistics (and updates running ones) and dropout draws
  // masks from rng; inference needs no rng.
  std::vector<float> forward(const float* x, int batch, bool training,
                             Rng* rng);

  // gprobs: d(loss)/d(probabilities) from the last training forward.
  // Overwrites every parameter gradient.
  void backward(const float* gprobs);

  std::vector<double> predict_probs(const CsiImage& img);

  ModelCheckpoint to_checkpoint() const;

 private:
  struct LayerRt;
  void build(const NetworkConfig& cfg);

  NetworkConfig cfg_;
  std::vector<LayerSpec> specs_;
  std::vector<LayerRt> layers_;
  std::vector<ParamTensor> params_;
  std::vector<std::vector<float>> acts_;  // acts_[i] = input of layer i
  int last_batch_ = 0;
  bool last_training_ = false;
};

// Mean natural-log cross-entropy with the probability floor, after
// validating that every row is a distribution (sum within 1e-6 of 1).
double cross_entropy_loss(const float* probs, const int* labels, int batch,
                          int num_classes);

// Copies an image into the interleaved [row][col][channel] layout the
// network consumes.
void image_to_nhwc(const CsiImage& img, float* dst);

// In-place flips of an interleaved [h][w][c] image; each is an
// involution and the augmentation pair used during training.
void flip_horizontal(float* img, int h, int w, int c);
void flip_vertical(float* img, int h, int w, int c);

}  // namespace secci
