#include "secci/bfee.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace secci {
namespace {

std::uint16_t read_u16le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

// The payload is a bit stream packed least-significant-bit first within
// each byte: stream bit k lives at byte k/8, bit position k%8.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip(std::size_t bits) { bit_ += bits; }

  std::uint8_t take8() {
    const std::size_t byte = bit_ >> 3;
    const unsigned rem = static_cast<unsigned>(bit_ & 7);
    unsigned v = bytes_[byte] >> rem;
    if (rem != 0) v |= static_cast<unsigned>(bytes_[byte + 1]) << (8 - rem);
    bit_ += 8;
    return static_cast<std::uint8_t>(v & 0xFF);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t bit_ = 0;
};

class BitWriter {
 public:
  explicit BitWriter(std::size_t n_bytes) : buf_(n_bytes, 0) {}

  void skip(std::size_t bits) { bit_ += bits; }

  void put8(std::uint8_t v) {
    const std::size_t byte = bit_ >> 3;
    const unsigned rem = static_cast<unsigned>(bit_ & 7);
    buf_[byte] |= static_cast<std::uint8_t>((v << rem) & 0xFF);
    if (rem != 0) buf_[byte + 1] |= static_cast<std::uint8_t>(v >> (8 - rem));
    bit_ += 8;
  }

  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t bit_ = 0;
};

void check_antenna_counts(int n_rx, int n_tx) {
  if (n_rx < 1 || n_rx > 3)
    throw FormatError(FormatError::Kind::field_invalid,
                      "n_rx out of range: " + std::to_string(n_rx));
  if (n_tx < 1 || n_tx > 3)
    throw FormatError(FormatError::Kind::field_invalid,
                      "n_tx out of range: " + std::to_string(n_tx));
}

void check_perm(const BfeeEntry& e) {
  const auto perm = e.perm();
  std::array<bool, 3> seen{false, false, false};
  for (int i = 0; i < e.n_rx; ++i) {
    if (perm[i] >= e.n_rx || seen[perm[i]])
      throw FormatError(FormatError::Kind::field_invalid,
                        "antenna_sel is not a valid permutation");
    seen[perm[i]] = true;
  }
}

}  // namespace

const std::array<int, kNumSubcarriers>& subcarrier_indices_20mhz() {
  static const std::array<int, kNumSubcarriers> k = {
      -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1,
      1,   3,   5,   7,   9,   11,  13,  15,  17,  19,  21, 23, 25, 27, 28};
  return k;
}

BfeeEntry parse_entry(std::span<const std::uint8_t> body) {
  if (body.size() < 20)
    throw FormatError(FormatError::Kind::truncated,
                      "frame body shorter than the 20-byte header");
  BfeeEntry e;
  e.timestamp_low = read_u32le(body.data());
  e.bfee_count = read_u16le(body.data() + 4);
  // bytes 6..7 reserved
  e.n_rx = body[8];
  e.n_tx = body[9];
  e.rssi_a = body[10];
  e.rssi_b = body[11];
  e.rssi_c = body[12];
  e.noise = static_cast<std::int8_t>(body[13]);
  e.agc = body[14];
  e.antenna_sel = body[15];
  const std::uint16_t len = read_u16le(body.data() + 16);
  e.rate = read_u16le(body.data() + 18);

  check_antenna_counts(e.n_rx, e.n_tx);
  const std::uint16_t expected = BfeeEntry::computed_len(e.n_rx, e.n_tx);
  if (len != expected)
    throw FormatError(FormatError::Kind::field_invalid,
                      "payload length " + std::to_string(len) +
                          " does not match the antenna configuration (" +
                          std::to_string(expected) + ")");
  if (body.size() < 20u + len)
    throw FormatError(FormatError::Kind::truncated,
                      "frame body ends inside the payload");
  if (body.size() > 20u + len)
    throw FormatError(FormatError::Kind::field_invalid,
                      "trailing bytes after the payload");
  check_perm(e);

  BitReader reader(body.subspan(20, len));
  const int streams = e.n_rx * e.n_tx;
  e.csi_raw.resize(static_cast<std::size_t>(streams) * kNumSubcarriers);
  for (int sc = 0; sc < kNumSubcarriers; ++sc) {
    reader.skip(3);
    for (int k = 0; k < streams; ++k) {
      const auto re = static_cast<std::int8_t>(reader.take8());
      const auto im = static_cast<std::int8_t>(reader.take8());
      // k = tx * n_rx + rx: receive antennas are adjacent in the stream.
      e.csi_raw[static_cast<std::size_t>(k) * kNumSubcarriers + sc] = {re, im};
    }
  }
  return e;
}

std::vector<std::uint8_t> encode_entry(const BfeeEntry& e) {
  if (e.n_rx < 1 || e.n_rx > 3 || e.n_tx < 1 || e.n_tx > 3)
    throw StructuralError("encode_entry: antenna counts out of range");
  const int streams = e.n_rx * e.n_tx;
  if (e.csi_raw.size() != static_cast<std::size_t>(streams) * kNumSubcarriers)
    throw StructuralError("encode_entry: csi_raw size does not match n_rx*n_tx*30");
  {
    const auto perm = e.perm();
    std::array<bool, 3> seen{false, false, false};
    for (int i = 0; i < e.n_rx; ++i) {
      if (perm[i] >= e.n_rx || seen[perm[i]])
        throw StructuralError("encode_entry: antenna_sel is not a valid permutation");
      seen[perm[i]] = true;
    }
  }

  const std::uint16_t len = BfeeEntry::computed_len(e.n_rx, e.n_tx);
  std::vector<std::uint8_t> out(20u + len, 0);
  out[0] = static_cast<std::uint8_t>(e.timestamp_low & 0xFF);
  out[1] = static_cast<std::uint8_t>((e.timestamp_low >> 8) & 0xFF);
  out[2] = static_cast<std::uint8_t>((e.timestamp_low >> 16) & 0xFF);
  out[3] = static_cast<std::uint8_t>((e.timestamp_low >> 24) & 0xFF);
  out[4] = static_cast<std::uint8_t>(e.bfee_count & 0xFF);
  out[5] = static_cast<std::uint8_t>(e.bfee_count >> 8);
  out[8] = e.n_rx;
  out[9] = e.n_tx;
  out[10] = e.rssi_a;
  out[11] = e.rssi_b;
  out[12] = e.rssi_c;
  out[13] = static_cast<std::uint8_t>(e.noise);
  out[14] = e.agc;
  out[15] = e.antenna_sel;
  out[16] = static_cast<std::uint8_t>(len & 0xFF);
  out[17] = static_cast<std::uint8_t>(len >> 8);
  out[18] = static_cast<std::uint8_t>(e.rate & 0xFF);
  out[19] = static_cast<std::uint8_t>(e.rate >> 8);

  BitWriter writer(len);
  for (int sc = 0; sc < kNumSubcarriers; ++sc) {
    writer.skip(3);
    for (int k = 0; k < streams; ++k) {
      const auto& [re, im] =
          e.csi_raw[static_cast<std::size_t>(k) * kNumSubcarriers + sc];
      writer.put8(static_cast<std::uint8_t>(re));
      writer.put8(static_cast<std::uint8_t>(im));
    }
  }
  const auto payload = writer.take();
  std::memcpy(out.data() + 20, payload.data(), payload.size());
  return out;
}

std::vector<std::uint8_t> encode_frame(const BfeeEntry& e) {
  const auto body = encode_entry(e);
  const std::size_t frame_len = body.size() + 1;  // code byte + body
  std::vector<std::uint8_t> out;
  out.reserve(2 + frame_len);
  out.push_back(static_cast<std::uint8_t>(frame_len >> 8));  // big endian
  out.push_back(static_cast<std::uint8_t>(frame_len & 0xFF));
  out.push_back(kBfeeFrameCode);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

ParseResult parse_stream(std::span<const std::uint8_t> bytes) {
  ParseResult result;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 2) {
      result.truncated_tail = true;
      break;
    }
    const std::size_t frame_len =
        (static_cast<std::size_t>(bytes[pos]) << 8) | bytes[pos + 1];
    pos += 2;
    if (frame_len == 0) {
      // Malformed empty frame: nothing to decode, keep scanning.
      ++result.skipped_frames;
      continue;
    }
    if (bytes.size() - pos < frame_len) {
      result.truncated_tail = true;
      break;
    }
    const std::uint8_t code = bytes[pos];
    if (code == kBfeeFrameCode) {
      result.entries.push_back(
          parse_entry(bytes.subspan(pos + 1, frame_len - 1)));
    } else {
      ++result.skipped_frames;
    }
    pos += frame_len;
  }
  return result;
}

CsiPacket to_csi_packet(const BfeeEntry& e) {
  if (e.n_rx != 3)
    throw FormatError(FormatError::Kind::unsupported_shape,
                      "packet conversion requires 3 receive antennas, got " +
                          std::to_string(e.n_rx));

  // Combine the per-antenna RSSI readings in linear power; a zero reading
  // means the antenna was absent from the measurement.
  double total_mw = 0.0;
  for (const std::uint8_t rssi : {e.rssi_a, e.rssi_b, e.rssi_c})
    if (rssi != 0) total_mw += std::pow(10.0, rssi / 10.0);
  const double total_rssi_db = total_mw > 0.0 ? 10.0 * std::log10(total_mw) : 0.0;
  const double signal_db = total_rssi_db - static_cast<double>(e.agc) -
                           static_cast<double>(e.noise);
  const double target_power = std::pow(10.0, signal_db / 10.0);

  double sum_sq = 0.0;
  for (int rx = 0; rx < 3; ++rx) {
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      const auto& [re, im] = e.raw_at(0, rx, sc);
      sum_sq += static_cast<double>(re) * re + static_cast<double>(im) * im;
    }
  }
  const double mean_sq = sum_sq / (3.0 * kNumSubcarriers);
  const double scale = mean_sq > 0.0 ? std::sqrt(target_power / mean_sq) : 0.0;

  CsiPacket packet;
  packet.csi.resize(kNumAntennas * kNumSubcarriers);
  packet.subcarrier_indices = subcarrier_indices_20mhz();
  packet.timestamp_us = e.timestamp_low;
  packet.rssi = {static_cast<int>(e.rssi_a), static_cast<int>(e.rssi_b),
                 static_cast<int>(e.rssi_c)};
  packet.noise_floor = e.noise;
  packet.agc = e.agc;
  packet.rate = e.rate;
  const auto perm = e.perm();
  for (int ant = 0; ant < kNumAntennas; ++ant) {
    for (int sc = 0; sc < kNumSubcarriers; ++sc) {
      const auto& [re, im] = e.raw_at(0, perm[ant], sc);
      packet.at(ant, sc) = {scale * re, scale * im};
    }
  }
  return packet;
}

ParseResult read_capture_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open capture file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_stream(bytes);
}

void write_capture_file(const std::string& path,
                        const std::vector<BfeeEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open capture file for writing: " + path);
  for (const auto& e : entries) {
    const auto frame = encode_frame(e);
    out.write(reinterpret_cast<const char*>(frame.data()),
              static_cast<std::streamsize>(frame.size()));
  }
  if (!out) throw Error("write failed: " + path);
}

}  // namespace secci
