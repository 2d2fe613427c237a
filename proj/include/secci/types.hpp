#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace secci {

constexpr int kNumAntennas = 3;
constexpr int kNumSubcarriers = 30;
// Antenna pairs used for all pairwise features, in serialization order.
constexpr std::array<std::pair<int, int>, 3> kAntennaPairs = {
    {{0, 1}, {0, 2}, {1, 2}}};
constexpr int kFeaturesPerChannel = 90;  // 3 pairs x 30 subcarriers

struct ComplexSample {
  double re = 0.0;
  double im = 0.0;
};

// One received frame's channel matrix plus radio metadata.
struct CsiPacket {
  // Antenna-major, subcarrier-minor: csi[antenna * kNumSubcarriers + sc].
  std::vector<ComplexSample> csi;
  std::array<int, kNumSubcarriers> subcarrier_indices{};
  std::array<int, kNumAntennas> rssi{};  // dBm-scale integers
  int noise_floor = 0;                   // dBm
  int agc = 0;
  std::uint64_t timestamp_us = 0;
  unsigned rate = 0;

  ComplexSample& at(int antenna, int subcarrier) {
    return csi[antenna * kNumSubcarriers + subcarrier];
  }
  const ComplexSample& at(int antenna, int subcarrier) const {
    return csi[antenna * kNumSubcarriers + subcarrier];
  }
};

// Receiver array geometry. The default matches a half-wavelength spacing
// at 5.58 GHz (d = 2.68 cm).
struct AntennaGeometry {
  double spacing_m = 0.0268;
  double carrier_hz = 5.58e9;

  double wavelength_m() const { return 299792458.0 / carrier_hz; }
};

// Concrete per-packet phase-error terms. The pbd delay, CFO and sampling
// offset are shared by all antennas of one packet; the PLL offsets are
// per-antenna constants.
struct PhaseErrorParams {
  double pbd_delay_samples = 0.0;  // packet boundary detection delay
  double cfo_hz = 0.0;             // center-frequency offset
  double sample_offset = 0.0;      // sampling time offset for this packet
  double tx_period_s = 50e-9;      // 20 MHz sampling
  double rx_period_s = 50e-9;
  double symbol_len_s = 3.2e-6;
  double symbol_guard_len_s = 4.0e-6;  // symbol plus guard interval
  int fft_size = 64;
  std::array<double, kNumAntennas> pll_offset_rad{};
  double noise_std_rad = 0.0;
};

// 270 diversified values per packet, pair-major then subcarrier-ascending.
struct FeatureVector {
  std::array<double, kFeaturesPerChannel> amp_avg{};
  std::array<double, kFeaturesPerChannel> aoa{};         // radians in [0, pi]
  std::array<double, kFeaturesPerChannel> phase_diff{};  // radians in (-pi, pi]
};

// Error taxonomy shared across modules.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension contract violations on in-memory values.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Byte-level file and stream format violations.
class FormatError : public Error {
 public:
  enum class Kind {
    bad_magic,
    version_mismatch,
    truncated,
    shape_mismatch,
    field_invalid,
    unsupported_shape,
  };
  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch, int batch)
      : Error(what), epoch(epoch), batch(batch) {}
  int epoch;
  int batch;
};

}  // namespace secci
