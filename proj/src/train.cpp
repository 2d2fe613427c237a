#include "secci/train.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "secci/kernels.hpp"

namespace secci {

AdamW::AdamW(double learning_rate, double beta1, double beta2, double epsilon,
             double weight_decay)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      weight_decay_(weight_decay) {}

void AdamW::step(std::vector<ParamTensor>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].trainable) continue;
      m_[i].assign(params[i].value.size(), 0.f);
      v_[i].assign(params[i].value.size(), 0.f);
    }
  }
  ++t_;
  const float c1 = static_cast<float>(1.0 - std::pow(beta1_, t_));
  const float c2 = static_cast<float>(1.0 - std::pow(beta2_, t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    kernels::adamw_step(p.value.data(), p.grad.data(), m_[i].data(),
                        v_[i].data(), p.value.size(),
                        static_cast<float>(lr_), static_cast<float>(beta1_),
                        static_cast<float>(beta2_), static_cast<float>(eps_),
                        p.decay ? static_cast<float>(weight_decay_) : 0.f, c1,
                        c2);
  }
}

std::vector<SiteInfo> class_list(const Dataset& data) {
  std::vector<SiteInfo> classes = data.sites;
  std::sort(classes.begin(), classes.end(),
            [](const SiteInfo& a, const SiteInfo& b) { return a.id < b.id; });
  return classes;
}

int class_index(const std::vector<SiteInfo>& classes, std::uint32_t site_id) {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i].id == site_id) return static_cast<int>(i);
  throw StructuralError("image references site " + std::to_string(site_id) +
                        " which is not a class");
}

namespace {

std::size_t image_size(const NetworkConfig& cfg) {
  return static_cast<std::size_t>(cfg.input_rows) * cfg.input_cols *
         cfg.input_channels;
}

// All images of a dataset in interleaved layout, one contiguous block.
std::vector<float> pack_images(const Dataset& data, const NetworkConfig& cfg) {
  const std::size_t stride = image_size(cfg);
  std::vector<float> out(stride * data.images.size());
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    if (data.images[i].image.rows != cfg.input_rows)
      throw StructuralError("image rows do not match the network input");
    image_to_nhwc(data.images[i].image, out.data() + i * stride);
  }
  return out;
}

std::vector<int> pack_labels(const Dataset& data,
                             const std::vector<SiteInfo>& classes) {
  std::vector<int> labels(data.images.size());
  for (std::size_t i = 0; i < data.images.size(); ++i)
    labels[i] = class_index(classes, data.images[i].site_id);
  return labels;
}

}  // namespace

double evaluate_accuracy(Network& net, const Dataset& data,
                         const std::vector<SiteInfo>& classes,
                         int batch_size) {
  if (data.images.empty()) return 0.0;
  const auto& cfg = net.config();
  const std::size_t stride = image_size(cfg);
  const auto x = pack_images(data, cfg);
  const auto labels = pack_labels(data, classes);
  const int total = static_cast<int>(data.images.size());
  int correct = 0;
  for (int at = 0; at < total; at += batch_size) {
    const int b = std::min(batch_size, total - at);
    const auto probs = net.forward(x.data() + static_cast<std::size_t>(at) * stride,
                                   b, false, nullptr);
    for (int n = 0; n < b; ++n) {
      const float* row = probs.data() +
                         static_cast<std::size_t>(n) * cfg.num_classes;
      int arg = 0;
      for (int c = 1; c < cfg.num_classes; ++c)
        if (row[c] > row[arg]) arg = c;
      if (arg == labels[at + n]) ++correct;
    }
  }
  return static_cast<double>(correct) / total;
}

ModelCheckpoint train(const Dataset& train_data, const Dataset& val_data,
                      const NetworkConfig& net_cfg, const TrainConfig& cfg) {
  if (train_data.images.empty())
    throw ConfigError("training dataset is empty");
  if (!(cfg.learning_rate > 0))
    throw ConfigError("learning rate must be positive");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (cfg.epochs < 0) throw ConfigError("epoch count cannot be negative");
  if (!(cfg.weight_decay >= 0))
    throw ConfigError("weight decay cannot be negative");
  if (!(cfg.flip_horizontal_p >= 0 && cfg.flip_horizontal_p <= 1) ||
      !(cfg.flip_vertical_p >= 0 && cfg.flip_vertical_p <= 1))
    throw ConfigError("flip probabilities must lie in [0, 1]");
  if (!(cfg.validation_fraction >= 0 && cfg.validation_fraction < 1))
    throw ConfigError("validation fraction must lie in [0, 1)");

  Dataset tr = train_data;
  Dataset va = val_data;
  if (va.images.empty() && cfg.validation_fraction > 0)
    std::tie(tr, va) = split_train_test(train_data,
                                        1.0 - cfg.validation_fraction,
                                        cfg.seed, SplitMode::images);

  const auto classes = class_list(tr);
  const int num_classes = static_cast<int>(classes.size());
  NetworkConfig nc = net_cfg;
  if (nc.num_classes == 0) {
    nc.num_classes = num_classes;
  } else if (nc.num_classes != num_classes) {
    throw ConfigError("network num_classes does not match the dataset sites");
  }
  if (tr.images.front().image.rows != nc.input_rows)
    throw ConfigError("image rows do not match the network input");

  Rng root(cfg.seed);
  Rng init_rng = root.child(0);
  Network net(nc, init_rng);
  AdamW opt(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon,
            cfg.weight_decay);

  const std::size_t stride = image_size(nc);
  const auto base_x = pack_images(tr, nc);
  const auto labels = pack_labels(tr, classes);
  // Validation images must label-map through the same classes.
  (void)pack_labels(va, classes);

  const Dataset& selection = va.images.empty() ? tr : va;
  auto snapshot = [&](int epoch, double acc) {
    ModelCheckpoint c = net.to_checkpoint();
    c.class_sites = classes;
    c.class_count = num_classes;
    c.best_epoch = epoch;
    c.validation_accuracy = acc;
    return c;
  };

  double best_acc = evaluate_accuracy(net, selection, classes, cfg.batch_size);
  ModelCheckpoint best = snapshot(0, best_acc);

  const int total = static_cast<int>(tr.images.size());
  std::vector<int> order(total);
  std::vector<float> xb;
  std::vector<int> lb;
  std::vector<float> gp;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng = root.child(static_cast<std::uint64_t>(epoch));
    for (int i = 0; i < total; ++i) order[i] = i;
    for (int i = total - 1; i > 0; --i)
      std::swap(order[i], order[epoch_rng.uniform_int(0, i)]);

    int batch_index = 0;
    for (int at = 0; at < total; at += cfg.batch_size, ++batch_index) {
      const int b = std::min(cfg.batch_size, total - at);
      xb.resize(static_cast<std::size_t>(b) * stride);
      lb.resize(b);
      for (int n = 0; n < b; ++n) {
        const int src = order[at + n];
        std::copy(base_x.begin() + static_cast<std::ptrdiff_t>(src) * stride,
                  base_x.begin() + static_cast<std::ptrdiff_t>(src + 1) * stride,
                  xb.begin() + static_cast<std::ptrdiff_t>(n) * stride);
        float* img = xb.data() + static_cast<std::size_t>(n) * stride;
        if (epoch_rng.uniform() < cfg.flip_horizontal_p)
          flip_horizontal(img, nc.input_rows, nc.input_cols,
                          nc.input_channels);
        if (epoch_rng.uniform() < cfg.flip_vertical_p)
          flip_vertical(img, nc.input_rows, nc.input_cols, nc.input_channels);
        lb[n] = labels[src];
      }
      const auto probs = net.forward(xb.data(), b, true, &epoch_rng);
      const double loss =
          cross_entropy_loss(probs.data(), lb.data(), b, num_classes);
      if (!std::isfinite(loss))
        throw TrainingError("loss diverged to a non-finite value", epoch,
                            batch_index);
      gp.resize(probs.size());
      kernels::cross_entropy_backward(probs.data(), lb.data(), b, num_classes,
                                      gp.data());
      net.backward(gp.data());
      opt.step(net.params());
    }

    const double acc =
        evaluate_accuracy(net, selection, classes, cfg.batch_size);
    if (acc > best_acc) {
      best_acc = acc;
      best = snapshot(epoch, acc);
    }
  }
  return best;
}

std::vector<double> predict_probs(const ModelCheckpoint& ckpt,
                                  const CsiImage& img) {
  Network net(ckpt);
  return net.predict_probs(img);
}

}  // namespace secci
