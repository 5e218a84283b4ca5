#include "spitgate/rtp_media.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "spitgate/error.h"

namespace spitgate::rtp {
namespace {

constexpr std::uint16_t kWrapHigh = 65400;
constexpr std::uint16_t kWrapLow = 135;

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t offset) {
  return static_cast<std::uint16_t>(b[offset] << 8 | b[offset + 1]);
}
std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t offset) {
  return std::uint32_t{b[offset]} << 24 | std::uint32_t{b[offset + 1]} << 16 |
         std::uint32_t{b[offset + 2]} << 8 | b[offset + 3];
}
void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Upper bounds of the eight companding segments (sign-magnitude, biased for
// mu-law).
constexpr std::array<int, 8> kUlawSegmentEnd{0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF, 0x1FFF};
constexpr std::array<int, 8> kAlawSegmentEnd{0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF};
constexpr int kUlawBias = 0x84;
constexpr int kUlawClip = 8159;

int segment_of(int magnitude, const std::array<int, 8>& ends) {
  for (int seg = 0; seg < 8; ++seg) {
    if (magnitude <= ends[seg]) return seg;
  }
  return 8;
}

}  // namespace

Packet parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeaderSize) {
    throw FormatError(fmt::format("RTP: {} bytes is shorter than the fixed header", bytes.size()));
  }
  Packet p;
  p.version = bytes[0] >> 6;
  if (p.version != 2) throw FormatError(fmt::format("RTP: version {} != 2", p.version));
  p.padding = (bytes[0] & 0x20) != 0;
  p.extension = (bytes[0] & 0x10) != 0;
  const std::size_t csrc_count = bytes[0] & 0x0F;
  p.marker = (bytes[1] & 0x80) != 0;
  p.payload_type = bytes[1] & 0x7F;
  p.sequence = be16(bytes, 2);
  p.timestamp = be32(bytes, 4);
  p.ssrc = be32(bytes, 8);

  std::size_t offset = kFixedHeaderSize + 4 * csrc_count;
  if (offset > bytes.size()) {
    throw FormatError(fmt::format("RTP: {} CSRCs exceed a {}-byte packet", csrc_count, bytes.size()));
  }
  for (std::size_t i = 0; i < csrc_count; ++i) {
    p.csrcs.push_back(be32(bytes, kFixedHeaderSize + 4 * i));
  }
  if (p.extension) {
    if (offset + 4 > bytes.size()) throw FormatError("RTP: truncated extension header");
    offset += 4 + 4 * std::size_t{be16(bytes, offset + 2)};
    if (offset > bytes.size()) throw FormatError("RTP: extension exceeds packet");
  }
  std::size_t end = bytes.size();
  if (p.padding) {
    const std::size_t pad = bytes.back();
    if (pad == 0 || pad > end - offset) {
      throw FormatError(fmt::format("RTP: padding of {} bytes exceeds payload", pad));
    }
    end -= pad;
  }
  p.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                   bytes.begin() + static_cast<std::ptrdiff_t>(end));
  return p;
}

std::vector<std::uint8_t> serialize(const Packet& packet) {
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeaderSize + 4 * packet.csrcs.size() + packet.payload.size());
  out.push_back(static_cast<std::uint8_t>(0x80 | (packet.csrcs.size() & 0x0F)));
  out.push_back(static_cast<std::uint8_t>((packet.marker ? 0x80 : 0) | (packet.payload_type & 0x7F)));
  out.push_back(static_cast<std::uint8_t>(packet.sequence >> 8));
  out.push_back(static_cast<std::uint8_t>(packet.sequence));
  put_be32(out, packet.timestamp);
  put_be32(out, packet.ssrc);
  for (std::size_t i = 0; i < std::min<std::size_t>(packet.csrcs.size(), 15); ++i) {
    put_be32(out, packet.csrcs[i]);
  }
  out.insert(out.end(), packet.payload.begin(), packet.payload.end());
  return out;
}

std::size_t OrderedStream::missing_packets() const {
  std::size_t total = 0;
  for (const auto& gap : gaps) total += gap.count;
  return total;
}

std::vector<OrderedStream> reassemble(std::vector<Packet> packets) {
  std::map<std::uint32_t, std::vector<Packet>> groups;
  for (auto& p : packets) groups[p.ssrc].push_back(std::move(p));

  std::vector<OrderedStream> streams;
  for (auto& [ssrc, group] : groups) {
    const bool has_high = std::ranges::any_of(group, [](const Packet& p) { return p.sequence >= kWrapHigh; });
    const bool has_low = std::ranges::any_of(group, [](const Packet& p) { return p.sequence <= kWrapLow; });
    const bool wrapped = has_high && has_low;
    auto extended = [wrapped](const Packet& p) -> std::uint32_t {
      return wrapped && p.sequence < 32768 ? p.sequence + 65536u : p.sequence;
    };
    std::ranges::stable_sort(group, {}, extended);

    OrderedStream stream;
    stream.ssrc = ssrc;
    for (auto& p : group) {
      if (!stream.packets.empty()) {
        const auto prev = extended(stream.packets.back());
        const auto cur = extended(p);
        if (cur == prev) {
          ++stream.duplicates;
          continue;
        }
        if (cur > prev + 1) stream.gaps.push_back({prev + 1, cur - prev - 1});
      }
      stream.packets.push_back(std::move(p));
    }
    streams.push_back(std::move(stream));
  }
  return streams;
}

std::int16_t ulaw_to_linear(std::uint8_t code) {
  const int u = static_cast<std::uint8_t>(~code);
  int t = ((u & 0x0F) << 3) + kUlawBias;
  t <<= (u & 0x70) >> 4;
  const int linear16 = (u & 0x80) ? (kUlawBias - t) : (t - kUlawBias);
  return static_cast<std::int16_t>(linear16 / 4);
}

std::uint8_t linear_to_ulaw(std::int16_t linear14) {
  int magnitude = linear14;
  int mask = 0xFF;
  if (magnitude < 0) {
    magnitude = -magnitude;
    mask = 0x7F;
  }
  magnitude = std::min(magnitude, kUlawClip) + (kUlawBias >> 2);
  const int seg = segment_of(magnitude, kUlawSegmentEnd);
  if (seg >= 8) return static_cast<std::uint8_t>(0x7F ^ mask);
  const int code = (seg << 4) | ((magnitude >> (seg + 1)) & 0x0F);
  return static_cast<std::uint8_t>(code ^ mask);
}

std::int16_t alaw_to_linear(std::uint8_t code) {
  const int a = code ^ 0x55;
  int t = (a & 0x0F) << 4;
  const int seg = (a & 0x70) >> 4;
  if (seg == 0) {
    t += 8;
  } else {
    t += 0x108;
    t <<= seg - 1;
  }
  const int linear16 = (a & 0x80) ? t : -t;
  return static_cast<std::int16_t>(linear16 / 8);
}

std::uint8_t linear_to_alaw(std::int16_t linear13) {
  int value = linear13;
  int mask = 0xD5;
  if (value < 0) {
    mask = 0x55;
    value = -value - 1;
  }
  const int seg = segment_of(value, kAlawSegmentEnd);
  if (seg >= 8) return static_cast<std::uint8_t>(0x7F ^ mask);
  int code = seg << 4;
  code |= seg < 2 ? (value >> 1) & 0x0F : (value >> seg) & 0x0F;
  return static_cast<std::uint8_t>(code ^ mask);
}

std::vector<double> decode_ulaw(std::span<const std::uint8_t> payload) {
  std::vector<double> out;
  out.reserve(payload.size());
  for (auto b : payload) out.push_back(ulaw_to_linear(b) / kUlawFullScale);
  return out;
}

std::vector<double> decode_alaw(std::span<const std::uint8_t> payload) {
  std::vector<double> out;
  out.reserve(payload.size());
  for (auto b : payload) out.push_back(alaw_to_linear(b) / kAlawFullScale);
  return out;
}

std::uint8_t encode_ulaw(double sample) {
  const double clamped = std::clamp(sample, -1.0, 1.0);
  return linear_to_ulaw(static_cast<std::int16_t>(std::lround(clamped * kUlawFullScale)));
}

MediaStream stream_from(const OrderedStream& ordered) {
  MediaStream stream;
  stream.ssrc = ordered.ssrc;
  stream.missing_packets = ordered.missing_packets();
  for (const auto& p : ordered.packets) {
    if (p.ssrc != ordered.ssrc) {
      throw InvalidArgument(fmt::format("stream_from: SSRC {:#x} mixed into stream {:#x}", p.ssrc,
                                        ordered.ssrc));
    }
    std::vector<double> decoded;
    switch (p.payload_type) {
      case kPayloadPcmu:
        decoded = decode_ulaw(p.payload);
        break;
      case kPayloadPcma:
        decoded = decode_alaw(p.payload);
        break;
      default:
        throw InvalidArgument(fmt::format("unsupported payload type {}", p.payload_type));
    }
    if (decoded.empty()) continue;
    stream.packet_boundaries.push_back(stream.samples.size());
    stream.samples.insert(stream.samples.end(), decoded.begin(), decoded.end());
  }
  return stream;
}

}  // namespace spitgate::rtp
