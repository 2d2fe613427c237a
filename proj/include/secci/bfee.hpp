#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "secci/types.hpp"

namespace secci {

// One beamforming-entry record from an Intel 5300 capture stream.
// csi_raw holds the quantized channel in wire order: transmit-stream
// major, receive antenna next, subcarrier minor.
struct BfeeEntry {
  std::uint32_t timestamp_low = 0;  // microseconds
  std::uint16_t bfee_count = 0;
  std::uint8_t n_rx = 0;
  std::uint8_t n_tx = 0;
  std::uint8_t rssi_a = 0;
  std::uint8_t rssi_b = 0;
  std::uint8_t rssi_c = 0;
  std::int8_t noise = 0;
  std::uint8_t agc = 0;
  std::uint8_t antenna_sel = 0;
  std::uint16_t rate = 0;
  // n_tx * n_rx * 30 (re, im) pairs.
  std::vector<std::pair<std::int8_t, std::int8_t>> csi_raw;

  std::array<int, 3> perm() const {
    return {antenna_sel & 0x3, (antenna_sel >> 2) & 0x3,
            (antenna_sel >> 4) & 0x3};
  }
  std::pair<std::int8_t, std::int8_t>& raw_at(int tx, int rx, int sc) {
    return csi_raw[(tx * n_rx + rx) * kNumSubcarriers + sc];
  }
  const std::pair<std::int8_t, std::int8_t>& raw_at(int tx, int rx,
                                                    int sc) const {
    return csi_raw[(tx * n_rx + rx) * kNumSubcarriers + sc];
  }

  // Payload byte count implied by the antenna configuration.
  static std::uint16_t computed_len(int n_rx, int n_tx) {
    return static_cast<std::uint16_t>(
        (kNumSubcarriers * (n_rx * n_tx * 8 * 2 + 3) + 7) / 8);
  }

  bool operator==(const BfeeEntry&) const = default;
};

struct ParseResult {
  std::vector<BfeeEntry> entries;
  std::size_t skipped_frames = 0;
  // True when the stream ended inside a frame header or body; the
  // entries parsed before the cut are still returned.
  bool truncated_tail = false;
};

constexpr std::uint8_t kBfeeFrameCode = 0xBB;

// Decodes one 0xBB frame body (20-byte header + bit-packed payload).
BfeeEntry parse_entry(std::span<const std::uint8_t> body);

// Exact inverse of parse_entry; the 3 skipped bits per subcarrier are
// written as zeros.
std::vector<std::uint8_t> encode_entry(const BfeeEntry& e);

// Wraps one entry in the capture framing (u16 big-endian length, code byte).
std::vector<std::uint8_t> encode_frame(const BfeeEntry& e);

ParseResult parse_stream(std::span<const std::uint8_t> bytes);

// Converts an entry to a linear-scale packet: antenna rows reordered by
// perm (output row i = raw row perm[i] of the first TX stream), one
// positive per-packet scale derived from combined RSSI, AGC and noise
// floor. Requires n_rx == 3.
CsiPacket to_csi_packet(const BfeeEntry& e);

// Standard 20 MHz grouping: the 30 subcarrier indices reported per antenna.
const std::array<int, kNumSubcarriers>& subcarrier_indices_20mhz();

ParseResult read_capture_file(const std::string& path);
void write_capture_file(const std::string& path,
                        const std::vector<BfeeEntry>& entries);

}  // namespace secci
