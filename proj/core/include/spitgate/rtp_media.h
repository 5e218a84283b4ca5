#pragma once

// RTP parsing, per-source reordering and G.711 decoding to normalized audio.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spitgate::rtp {

inline constexpr std::size_t kFixedHeaderSize = 12;
inline constexpr std::uint8_t kPayloadPcmu = 0;
inline constexpr std::uint8_t kPayloadPcma = 8;
inline constexpr int kSampleRate = 8000;

struct Packet {
  std::uint8_t version = 2;
  bool padding = false;
  bool extension = false;
  bool marker = false;
  std::uint8_t payload_type = 0;
  std::uint16_t sequence = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t ssrc = 0;
  std::vector<std::uint32_t> csrcs;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Packet&, const Packet&) = default;
};

// Throws FormatError on short packets, version != 2, or CSRC/extension/padding
// lengths that overrun the buffer.
Packet parse(std::span<const std::uint8_t> bytes);

// Header without extension or padding, followed by the payload.
std::vector<std::uint8_t> serialize(const Packet& packet);

struct SequenceGap {
  // Extended (wrap-adjusted) number of the first missing packet, and how
  // many follow it.
  std::uint32_t first_missing = 0;
  std::uint32_t count = 0;

  friend bool operator==(const SequenceGap&, const SequenceGap&) = default;
};

struct OrderedStream {
  std::uint32_t ssrc = 0;
  std::vector<Packet> packets;
  std::size_t duplicates = 0;
  std::vector<SequenceGap> gaps;

  std::size_t missing_packets() const;
};

// Groups by SSRC (ascending) and orders each group by sequence number.
// A group holding numbers >= 65400 and <= 135 together is taken to have
// wrapped: numbers below 32768 sort after the high ones. Assumes one group
// spans fewer than 32768 packets. Duplicates keep the first occurrence.
std::vector<OrderedStream> reassemble(std::vector<Packet> packets);

// 14-bit linear value in [-8031, 8031].
std::int16_t ulaw_to_linear(std::uint8_t code);
// Input is clipped to [-8159, 8159].
std::uint8_t linear_to_ulaw(std::int16_t linear14);
// 13-bit linear value in [-4032, 4032].
std::int16_t alaw_to_linear(std::uint8_t code);
std::uint8_t linear_to_alaw(std::int16_t linear13);

inline constexpr double kUlawFullScale = 8159.0;
inline constexpr double kAlawFullScale = 4032.0;

std::vector<double> decode_ulaw(std::span<const std::uint8_t> payload);
std::vector<double> decode_alaw(std::span<const std::uint8_t> payload);
std::uint8_t encode_ulaw(double sample);

struct MediaStream {
  std::uint32_t ssrc = 0;
  int sample_rate = kSampleRate;
  std::vector<double> samples;
  // Sample index where each non-empty packet began.
  std::vector<std::size_t> packet_boundaries;
  std::size_t missing_packets = 0;

  std::size_t packet_count() const { return packet_boundaries.size(); }
};

// Throws InvalidArgument when packets carry different SSRCs or a payload
// type other than PCMU/PCMA.
MediaStream stream_from(const OrderedStream& ordered);

}  // namespace spitgate::rtp
