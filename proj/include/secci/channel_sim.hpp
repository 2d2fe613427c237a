#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "secci/bfee.hpp"
#include "secci/imaging.hpp"
#include "secci/rng.hpp"
#include "secci/types.hpp"

namespace secci {

// One propagation path reaching the receive array.
struct Ray {
  std::complex<double> gain;  // dimensionless, includes path phase
  double aoa_rad = 0.0;       // [0, pi], measured from the array axis
  double delay_s = 0.0;
};

struct SiteLayout {
  std::vector<std::array<double, 2>> site_positions;  // meters
  std::array<double, 2> tx_position{0.0, 0.0};
  double spacing_m = 1.5;  // grid pitch between adjacent sites
};

// Sampling ranges for the per-packet phase-error terms. The receiver
// clock skew (T' - T)/T is a fixed property of the radio, not redrawn
// per packet.
struct PhaseErrorDist {
  std::array<double, 2> pbd_delay_range{0.0, 64.0};       // samples
  std::array<double, 2> cfo_range_hz{-15.0e3, 15.0e3};
  std::array<std::int64_t, 2> sample_offset_range{0, 1023};
  double clock_skew_ppm = 20.0;
  double phase_noise_std_rad = 0.02;
};

struct SimConfig {
  // LOS amplitude at the 1 m reference distance; free-space 1/d decay.
  double los_amplitude = 1.0;
  // Additive complex noise, standard deviation per real component.
  double noise_std = 0.0397779;  // SNR 25 dB for unit LOS amplitude
  double k_factor_db = 6.0;      // LOS power over total NLOS power
  int n_nlos_rays = 6;
  double max_excess_delay_s = 200e-9;
  PhaseErrorDist phase_error_dist;
  std::array<double, kNumAntennas> pll_offset_rad{0.4, 1.7, -2.3};
  int packets_per_site = 2970;
  std::uint64_t seed = 1;
  AntennaGeometry geometry;
};

// Noise std per complex component for a target SNR against a given LOS
// amplitude: |CSI0|^2 / (2 sigma^2) = 10^(snr_db/10).
double noise_std_for_snr_db(double los_amplitude, double snr_db);

struct CsiChannel {
  std::array<std::complex<double>, kNumAntennas * kNumSubcarriers> h{};

  std::complex<double>& at(int antenna, int subcarrier) {
    return h[antenna * kNumSubcarriers + subcarrier];
  }
  const std::complex<double>& at(int antenna, int subcarrier) const {
    return h[antenna * kNumSubcarriers + subcarrier];
  }
};

// LOS ray from the geometry plus n_nlos_rays random scatterers whose
// total power sits k_factor_db below the LOS power. Draw once per site:
// the environment is quasi-static and the rays are the fingerprint.
std::vector<Ray> draw_site_rays(const std::array<double, 2>& site,
                                const SiteLayout& layout, const SimConfig& cfg,
                                Rng& rng);

// Deterministic multipath sum: antenna k advances a ray's phase by
// k*2*pi*d*cos(theta)/lambda, and each subcarrier m rotates by
// -2*pi*delay*m*312.5 kHz.
CsiChannel synthesize_channel(const std::vector<Ray>& rays,
                              const AntennaGeometry& geometry);

// Convenience form that draws a fresh ray set, for one-off channels.
CsiChannel synthesize_channel(const std::array<double, 2>& site,
                              const SiteLayout& layout, const SimConfig& cfg,
                              Rng& rng);

// Draws the per-packet error terms (delta t, delta f, n) from the
// configured ranges; the PLL offsets and clock skew come from cfg.
PhaseErrorParams draw_phase_errors(const PhaseErrorDist& dist,
                                   const std::array<double, kNumAntennas>& pll_offset_rad,
                                   Rng& rng);

// Rotates every sample by (lambda_p + lambda_s)*m_i + lambda_c + beta_k + Z.
void apply_phase_errors(CsiChannel& ch, const PhaseErrorParams& p,
                        const std::array<int, kNumSubcarriers>& subcarrier_indices,
                        Rng& rng);

// Full per-packet pipeline over a frozen ray set: synthesize, rotate by
// phase errors, add complex Gaussian noise, attach metadata.
CsiPacket simulate_packet(const std::vector<Ray>& rays, const SimConfig& cfg,
                          std::uint64_t packet_index, Rng& packet_rng);

// Spec-shaped form: draws its own ray set from rng, then one packet.
CsiPacket simulate_packet(const std::array<double, 2>& site,
                          const SiteLayout& layout, const SimConfig& cfg,
                          Rng& rng);

// `count` packets with indices first_index.. using per-packet child
// generators site_rng.child(1 + index); child(0) is reserved for the ray
// draw, so one site_rng reproduces the same stream serially or in
// parallel and heldout packets can extend it.
std::vector<CsiPacket> simulate_site_packets(const std::vector<Ray>& rays,
                                             const SimConfig& cfg, int count,
                                             std::uint64_t first_index,
                                             const Rng& site_rng);

// Per site: frozen rays, packets_per_site packets, features, images.
// Amplitude normalization is computed dataset-wide and recorded.
Dataset simulate_dataset(const SiteLayout& layout, const SimConfig& cfg,
                         int window = kFeaturesPerChannel);

// Quantizes a packet to a bfee record (8-bit components, per-packet
// scaling) for parser-integration testing.
BfeeEntry packet_to_bfee(const CsiPacket& packet, std::uint16_t bfee_count);

}  // namespace secci
