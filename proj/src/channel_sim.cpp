#include "secci/channel_sim.hpp"

#include <algorithm>
#include <cmath>

#include "secci/csi_model.hpp"

namespace secci {
namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kSubcarrierSpacingHz = 312500.0;  // 20 MHz / 64
// Below this range the 1/d free-space decay would blow up.
constexpr double kMinDistanceM = 0.05;

void check_sim_config(const SimConfig& cfg) {
  if (cfg.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  if (cfg.packets_per_site < 1)
    throw ConfigError("packets_per_site must be >= 1");
  if (cfg.n_nlos_rays < 0) throw ConfigError("n_nlos_rays must be >= 0");
  if (cfg.los_amplitude <= 0.0) throw ConfigError("los_amplitude must be > 0");
}

void check_layout(const SiteLayout& layout) {
  if (layout.site_positions.empty())
    throw ConfigError("layout needs at least one site");
  for (std::size_t i = 0; i < layout.site_positions.size(); ++i)
    for (std::size_t j = i + 1; j < layout.site_positions.size(); ++j)
      if (layout.site_positions[i] == layout.site_positions[j])
        throw ConfigError("site positions must be distinct");
}

}  // namespace

double noise_std_for_snr_db(double los_amplitude, double snr_db) {
  return los_amplitude / std::sqrt(2.0 * std::pow(10.0, snr_db / 10.0));
}

std::vector<Ray> draw_site_rays(const std::array<double, 2>& site,
                                const SiteLayout& layout, const SimConfig& cfg,
                                Rng& rng) {
  const double dx = layout.tx_position[0] - site[0];
  const double dy = layout.tx_position[1] - site[1];
  const double dist = std::max(std::hypot(dx, dy), kMinDistanceM);
  const double lambda = cfg.geometry.wavelength_m();

  std::vector<Ray> rays;
  rays.reserve(1 + cfg.n_nlos_rays);

  Ray los;
  los.aoa_rad = std::acos(std::clamp(dx / dist, -1.0, 1.0));
  los.delay_s = dist / kSpeedOfLight;
  const double los_mag = cfg.los_amplitude / dist;  // 1/d, reference at 1 m
  los.gain = std::polar(los_mag, -2.0 * M_PI * dist / lambda);
  rays.push_back(los);

  if (cfg.n_nlos_rays > 0) {
    const double p_nlos =
        los_mag * los_mag / std::pow(10.0, cfg.k_factor_db / 10.0);
    const double comp_std = std::sqrt(p_nlos / (2.0 * cfg.n_nlos_rays));
    for (int i = 0; i < cfg.n_nlos_rays; ++i) {
      Ray ray;
      ray.aoa_rad = rng.uniform(0.0, M_PI);
      ray.delay_s = los.delay_s + rng.uniform(0.0, cfg.max_excess_delay_s);
      ray.gain = {rng.normal(0.0, comp_std), rng.normal(0.0, comp_std)};
      rays.push_back(ray);
    }
  }
  return rays;
}

CsiChannel synthesize_channel(const std::vector<Ray>& rays,
                              const AntennaGeometry& geometry) {
  const auto& indices = subcarrier_indices_20mhz();
  const double lambda = geometry.wavelength_m();
  CsiChannel ch;
  for (const Ray& ray : rays) {
    const double antenna_step =
        2.0 * M_PI * geometry.spacing_m * std::cos(ray.aoa_rad) / lambda;
    for (int ant = 0; ant < kNumAntennas; ++ant) {
      for (int sc = 0; sc < kNumSubcarriers; ++sc) {
        const double phase =
            ant * antenna_step -
            2.0 * M_PI * ray.delay_s * indices[sc] * kSubcarrierSpacingHz;
        ch.at(ant, sc) += ray.gain * std::polar(1.0, phase);
      }
    }
  }
  return ch;
}

CsiChannel synthesize_channel(const std::array<double, 2>& site,
                              const SiteLayout& layout, const SimConfig& cfg,
                              Rng& rng) {
  check_sim_config(cfg);
  return synthesize_channel(draw_site_rays(site, layout, cfg, rng),
                            cfg.geometry);
}

PhaseErrorParams draw_phase_errors(
    const PhaseErrorDist& dist,
    const std::array<double, kNumAntennas>& pll_offset_rad, Rng& rng) {
  PhaseErrorParams p;
  p.pbd_delay_samples = rng.uniform(dist.pbd_delay_range[0], dist.pbd_delay_range[1]);
  p.cfo_hz = rng.uniform(dist.cfo_range_hz[0], dist.cfo_range_hz[1]);
  p.sample_offset = static_cast<double>(
      rng.uniform_int(dist.sample_offset_range[0], dist.sample_offset_range[1]));
  p.rx_period_s = p.tx_period_s * (1.0 + dist.clock_skew_ppm * 1e-6);
  p.pll_offset_rad = pll_offset_rad;
  p.noise_std_rad = dist.phase_noise_std_rad;
  return p;
}

void apply_phase_errors(CsiChannel& ch, const PhaseErrorParams& p,
                        const std::array<int, kNumSubcarriers>& subcarrier_indices,
                        Rng& rng) {
  const double lambda_p = 2.0 * M_PI * p.pbd_delay_samples / p.fft_size;
  const double skew = (p.rx_period_s - p.tx_period_s) / p.tx_period_s;
  const double lambda_s =
      2.0 * M_PI * p.sample_offset * p.symbol_guard_len_s / p.symbol_len_s * skew;
  const double lambda_c =
      2.0 * M_PI * p.sample_offset * p.cfo_hz * p.symbol_guard_len_s;
  for (int ant = 0; ant < kNumAntennas; ++ant) {
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      double phi = (lambda_p + lambda_s) * subcarrier_indices[sc] + lambda_c +
                   p.pll_offset_rad[ant];
      if (p.noise_std_rad > 0.0) phi += rng.normal(0.0, p.noise_std_rad);
      ch.at(ant, sc) *= std::polar(1.0, phi);
    }
  }
}

CsiPacket simulate_packet(const std::vector<Ray>& rays, const SimConfig& cfg,
                          std::uint64_t packet_index, Rng& packet_rng) {
  CsiChannel ch = synthesize_channel(rays, cfg.geometry);
  const PhaseErrorParams pe =
      draw_phase_errors(cfg.phase_error_dist, cfg.pll_offset_rad, packet_rng);
  apply_phase_errors(ch, pe, subcarrier_indices_20mhz(), packet_rng);
  if (cfg.noise_std > 0.0) {
    for (auto& h : ch.h)
      h += std::complex<double>(packet_rng.normal(0.0, cfg.noise_std),
                                packet_rng.normal(0.0, cfg.noise_std));
  }

  CsiPacket packet;
  packet.csi.resize(kNumAntennas * kNumSubcarriers);
  packet.subcarrier_indices = subcarrier_indices_20mhz();
  for (int ant = 0; ant < kNumAntennas; ++ant) {
    double power = 0.0;
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      const auto& h = ch.at(ant, sc);
      packet.at(ant, sc) = {h.real(), h.imag()};
      power += std::norm(h);
    }
    // Plausible receiver-style reading: total antenna power in dB, offset
    // into the usual positive RSSI range.
    const double db = power > 0.0 ? 10.0 * std::log10(power) : -90.0;
    packet.rssi[ant] = static_cast<int>(std::clamp(std::lround(45.0 + db),
                                                   long{1}, long{90}));
  }
  packet.noise_floor = -92;
  packet.agc = 30;
  packet.rate = 0x4101;
  packet.timestamp_us = packet_index * 1000;  // 1000 packets/s
  return packet;
}

CsiPacket simulate_packet(const std::array<double, 2>& site,
                          const SiteLayout& layout, const SimConfig& cfg,
                          Rng& rng) {
  check_sim_config(cfg);
  const auto rays = draw_site_rays(site, layout, cfg, rng);
  return simulate_packet(rays, cfg, 0, rng);
}

std::vector<CsiPacket> simulate_site_packets(const std::vector<Ray>& rays,
                                             const SimConfig& cfg, int count,
                                             std::uint64_t first_index,
                                             const Rng& site_rng) {
  std::vector<CsiPacket> out;
  out.reserve(count);
  for (int p = 0; p < count; ++p) {
    const std::uint64_t index = first_index + p;
    Rng packet_rng = site_rng.child(1 + index);
    out.push_back(simulate_packet(rays, cfg, index, packet_rng));
  }
  return out;
}

Dataset simulate_dataset(const SiteLayout& layout, const SimConfig& cfg,
                         int window) {
  check_sim_config(cfg);
  check_layout(layout);
  const int n_sites = static_cast<int>(layout.site_positions.size());

  std::vector<std::vector<FeatureVector>> features(n_sites);
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < n_sites; ++s) {
    Rng site_rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(s)));
    Rng ray_rng = site_rng.child(0);
    const auto rays = draw_site_rays(layout.site_positions[s], layout, cfg, ray_rng);
    const auto packets =
        simulate_site_packets(rays, cfg, cfg.packets_per_site, 0, site_rng);
    features[s].reserve(packets.size());
    for (const auto& packet : packets)
      features[s].push_back(extract_features(packet, cfg.geometry));
  }

  std::vector<FeatureVector> all;
  for (const auto& f : features) all.insert(all.end(), f.begin(), f.end());
  const NormalizationSpec norm = compute_amp_range(all);

  Dataset d;
  d.normalization = norm;
  d.geometry = cfg.geometry;
  d.provenance = {"simulator", cfg.seed};
  for (int s = 0; s < n_sites; ++s) {
    d.sites.push_back({static_cast<std::uint32_t>(s), layout.site_positions[s]});
    for (auto& img : build_images(features[s], window, norm)) {
      LabeledImage li;
      li.image = std::move(img);
      li.site_id = static_cast<std::uint32_t>(s);
      li.coords = layout.site_positions[s];
      d.images.push_back(std::move(li));
    }
  }
  return d;
}

BfeeEntry packet_to_bfee(const CsiPacket& packet, std::uint16_t bfee_count) {
  if (packet.csi.size() != kNumAntennas * kNumSubcarriers)
    throw StructuralError("packet channel matrix has the wrong shape");

  double max_abs = 0.0;
  for (const auto& s : packet.csi) {
    max_abs = std::max(max_abs, std::abs(s.re));
    max_abs = std::max(max_abs, std::abs(s.im));
  }
  const double scale = max_abs > 0.0 ? 126.0 / max_abs : 0.0;

  BfeeEntry e;
  e.timestamp_low = static_cast<std::uint32_t>(packet.timestamp_us & 0xFFFFFFFFu);
  e.bfee_count = bfee_count;
  e.n_rx = 3;
  e.n_tx = 1;
  e.rssi_a = static_cast<std::uint8_t>(std::clamp(packet.rssi[0], 0, 255));
  e.rssi_b = static_cast<std::uint8_t>(std::clamp(packet.rssi[1], 0, 255));
  e.rssi_c = static_cast<std::uint8_t>(std::clamp(packet.rssi[2], 0, 255));
  e.noise = static_cast<std::int8_t>(std::clamp(packet.noise_floor, -128, 127));
  e.agc = static_cast<std::uint8_t>(std::clamp(packet.agc, 0, 255));
  e.antenna_sel = 0x24;  // identity permutation (0, 1, 2)
  e.rate = static_cast<std::uint16_t>(packet.rate);
  e.csi_raw.resize(static_cast<std::size_t>(3) * kNumSubcarriers);
  for (int rx = 0; rx < 3; ++rx) {
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      const auto& s = packet.at(rx, sc);
      e.raw_at(0, rx, sc) = {
          static_cast<std::int8_t>(std::lround(s.re * scale)),
          static_cast<std::int8_t>(std::lround(s.im * scale))};
    }
  }
  return e;
}

}  // namespace secci
