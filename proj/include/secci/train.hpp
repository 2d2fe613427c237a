#pragma once

// Mini-batch training of the classifier with decoupled-weight-decay
// Adam, flip augmentation, and best-validation checkpointing.

#include <cstdint>
#include <vector>

#include "secci/imaging.hpp"
#include "secci/network.hpp"

namespace secci {

struct TrainConfig {
  double learning_rate = 3e-4;
  int epochs = 40;
  int batch_size = 50;
  double weight_decay = 1e-4;
  std::uint64_t seed = 1;
  double flip_horizontal_p = 0.5;
  double flip_vertical_p = 0.5;
  // Fraction of the training images held out (stratified per site)
  // when the caller passes no validation set.
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Decoupled-weight-decay Adam. Decay touches only parameters flagged
// decay (weight matrices); first/second moment buffers are keyed by
// parameter index.
class AdamW {
 public:
  AdamW(double learning_rate, double beta1, double beta2, double epsilon,
        double weight_decay);
  void step(std::vector<ParamTensor>& params);

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  int t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Classes are the dataset's sites ordered by ascending id; the label
// of an image is the index of its site in that order.
std::vector<SiteInfo> class_list(const Dataset& data);
int class_index(const std::vector<SiteInfo>& classes, std::uint32_t site_id);

// Fraction of images whose argmax probability lands on the true site.
double evaluate_accuracy(Network& net, const Dataset& data,
                         const std::vector<SiteInfo>& classes, int batch_size);

// Trains on train_data and returns the checkpoint with the highest
// validation accuracy across epochs (the initialization counts as
// epoch 0). When val_data is empty, a stratified validation_fraction
// of the training images is held out. Throws TrainingError when the
// loss diverges to NaN.
ModelCheckpoint train(const Dataset& train_data, const Dataset& val_data,
                      const NetworkConfig& net_cfg, const TrainConfig& cfg);

// Loads the checkpoint into a fresh network and runs one inference
// forward pass. For repeated predictions construct the Network once
// and call its predict_probs instead.
std::vector<double> predict_probs(const ModelCheckpoint& ckpt,
                                  const CsiImage& img);

}  // namespace secci
