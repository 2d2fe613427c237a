#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "secci/types.hpp"

namespace secci {

// Per-channel pixel mapping. Amplitude uses a configured dataset-wide
// range; the angle channels have fixed physical ranges (aoa [0, pi],
// phase difference (-pi, pi]).
struct NormalizationSpec {
  double amp_lo = 0.0;
  double amp_hi = 1.0;

  bool operator==(const NormalizationSpec&) const = default;
};

// One fingerprint image: channel 0 = average amplitude, channel 1 = AoA,
// channel 2 = phase difference. Row = packet index within the window,
// column = feature index. Stored channel-major.
struct CsiImage {
  static constexpr int kChannels = 3;
  static constexpr int kCols = kFeaturesPerChannel;

  int rows = 0;
  std::vector<float> pixels;  // kChannels * rows * kCols

  float& at(int channel, int row, int col) {
    return pixels[(channel * rows + row) * kCols + col];
  }
  float at(int channel, int row, int col) const {
    return pixels[(channel * rows + row) * kCols + col];
  }

  bool operator==(const CsiImage&) const = default;
};

struct LabeledImage {
  CsiImage image;
  std::uint32_t site_id = 0;
  std::array<double, 2> coords{};

  bool operator==(const LabeledImage&) const = default;
};

struct SiteInfo {
  std::uint32_t id = 0;
  std::array<double, 2> coords{};

  bool operator==(const SiteInfo&) const = default;
};

struct DatasetProvenance {
  std::string source = "simulator";  // "simulator" or "capture"
  std::uint64_t seed = 0;

  bool operator==(const DatasetProvenance&) const = default;
};

struct Dataset {
  std::vector<LabeledImage> images;
  std::vector<SiteInfo> sites;
  NormalizationSpec normalization;
  AntennaGeometry geometry;
  DatasetProvenance provenance;

  bool operator==(const Dataset& o) const {
    return images == o.images && sites == o.sites &&
           normalization == o.normalization &&
           geometry.spacing_m == o.geometry.spacing_m &&
           geometry.carrier_hz == o.geometry.carrier_hz &&
           provenance == o.provenance;
  }
};

// Dataset-wide amplitude range over every amp_avg feature; degenerate
// (constant) input widens the range by 1 so the map stays well defined.
NormalizationSpec compute_amp_range(std::span<const FeatureVector> features);

// Consecutive non-overlapping windows of `window` packets become one
// image each; remainder packets are dropped. Each channel is affinely
// mapped onto [0, 1] and clipped.
std::vector<CsiImage> build_images(std::span<const FeatureVector> features,
                                   int window,
                                   const NormalizationSpec& norm);

// Container format documented in docs/dataset-format.md.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

enum class SplitMode {
  images,  // stratified per site: both sides keep every site
  sites,   // disjoint site sets: test coordinates absent from training
};

// Deterministic seeded split; the first element holds `fraction` of the
// data. Throws ConfigError when fraction is outside (0, 1) or a side
// would come out empty.
std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double fraction,
                                             std::uint64_t seed,
                                             SplitMode mode = SplitMode::images);

}  // namespace secci
