#include "spitgate/rtp_media.h"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "spitgate/error.h"
#include "test_support.h"

namespace spitgate::rtp {
namespace {

using testing::Gen;

// Expansion straight from the segment/mantissa definition of G.711 µ-law:
// magnitude ((2m + 33) << e) - 33 on the 14-bit scale, bits inverted on the wire.
int ulaw_oracle(std::uint8_t code) {
  const int u = ~code & 0xFF;
  const int e = (u >> 4) & 0x07;
  const int m = u & 0x0F;
  const int magnitude = ((2 * m + 33) << e) - 33;
  return (u & 0x80) ? -magnitude : magnitude;
}

// A-law on the 13-bit scale: segment 0 is linear, even bits inverted on the wire.
int alaw_oracle(std::uint8_t code) {
  const int a = code ^ 0x55;
  const int e = (a >> 4) & 0x07;
  const int m = a & 0x0F;
  const int magnitude = e == 0 ? 2 * m + 1 : (2 * m + 33) << (e - 1);
  return (a & 0x80) ? magnitude : -magnitude;
}

Packet packet(std::uint16_t seq, std::uint32_t ssrc = 1, std::size_t payload = 4,
              std::uint8_t fill = 0xFF) {
  Packet p;
  p.sequence = seq;
  p.ssrc = ssrc;
  p.timestamp = seq * 160u;
  p.payload.assign(payload, fill);
  return p;
}

std::vector<std::uint16_t> sequences(const OrderedStream& s) {
  std::vector<std::uint16_t> out;
  for (const auto& p : s.packets) out.push_back(p.sequence);
  return out;
}

TEST(Parse, MinimalPacket) {
  std::vector<std::uint8_t> bytes = {0x80, 0x00, 0x00, 0x07, 0, 0, 0, 0, 0, 0, 0, 1};
  const auto p = parse(bytes);
  EXPECT_EQ(p.sequence, 7);
  EXPECT_EQ(p.payload_type, 0);
  EXPECT_EQ(p.ssrc, 1u);
  EXPECT_TRUE(p.payload.empty());
}

TEST(Parse, VersionAndLengthErrors) {
  std::vector<std::uint8_t> bytes(12, 0);
  EXPECT_THROW(parse(bytes), FormatError);
  EXPECT_THROW(parse(std::vector<std::uint8_t>(11, 0x80)), FormatError);
  std::vector<std::uint8_t> csrc_overrun = {0x8F, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0};
  EXPECT_THROW(parse(csrc_overrun), FormatError);
}

TEST(Parse, CsrcCountOne) {
  std::vector<std::uint8_t> bytes = {0x81, 0x00, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1,
                                     0xDE, 0xAD, 0xBE, 0xEF, 1, 2, 3, 4};
  const auto p = parse(bytes);
  ASSERT_EQ(p.csrcs.size(), 1u);
  EXPECT_EQ(p.csrcs[0], 0xDEADBEEFu);
  EXPECT_EQ(p.payload, (std::vector<std::uint8_t>{1, 2, 3, 4}));
}

TEST(Parse, ExtensionAndPadding) {
  // X bit, one extension word, P bit with two padding bytes.
  std::vector<std::uint8_t> bytes = {0xB0, 0x08, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1,
                                     0xBE, 0xDE, 0x00, 0x01, 9, 9, 9, 9,
                                     0xAA, 0xBB, 0x00, 0x02};
  const auto p = parse(bytes);
  EXPECT_TRUE(p.extension);
  EXPECT_TRUE(p.padding);
  EXPECT_EQ(p.payload_type, 8);
  EXPECT_EQ(p.payload, (std::vector<std::uint8_t>{0xAA, 0xBB}));
}

TEST(Serialize, RoundTripProperty) {
  Gen gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    Packet p;
    p.marker = gen.coin();
    p.payload_type = static_cast<std::uint8_t>(gen.integer(0, 127));
    p.sequence = static_cast<std::uint16_t>(gen.integer(0, 65535));
    p.timestamp = static_cast<std::uint32_t>(gen.bits());
    p.ssrc = static_cast<std::uint32_t>(gen.bits());
    for (int i = gen.integer(0, 15); i > 0; --i) p.csrcs.push_back(static_cast<std::uint32_t>(gen.bits()));
    p.payload = gen.bytes(static_cast<std::size_t>(gen.integer(0, 200)));
    EXPECT_EQ(parse(serialize(p)), p);
  }
}

TEST(Reassemble, SortsAndWraps) {
  auto streams = reassemble({packet(3), packet(1), packet(2)});
  ASSERT_EQ(streams.size(), 1u);
  EXPECT_EQ(sequences(streams[0]), (std::vector<std::uint16_t>{1, 2, 3}));

  streams = reassemble({packet(0), packet(65535), packet(1), packet(65534)});
  EXPECT_EQ(sequences(streams[0]), (std::vector<std::uint16_t>{65534, 65535, 0, 1}));
  EXPECT_TRUE(streams[0].gaps.empty());
}

TEST(Reassemble, DuplicatesKeepFirst) {
  auto first = packet(5, 1, 4, 0x11);
  auto second = packet(5, 1, 4, 0x22);
  const auto streams = reassemble({first, second});
  ASSERT_EQ(streams[0].packets.size(), 1u);
  EXPECT_EQ(streams[0].duplicates, 1u);
  EXPECT_EQ(streams[0].packets[0].payload[0], 0x11);
}

TEST(Reassemble, GapsAndSsrcGroups) {
  const auto streams = reassemble({packet(10, 7), packet(14, 7), packet(1, 2), packet(2, 2)});
  ASSERT_EQ(streams.size(), 2u);
  EXPECT_EQ(streams[0].ssrc, 2u);
  EXPECT_EQ(streams[1].ssrc, 7u);
  ASSERT_EQ(streams[1].gaps.size(), 1u);
  EXPECT_EQ(streams[1].gaps[0], (SequenceGap{11, 3}));
  EXPECT_EQ(streams[1].missing_packets(), 3u);
}

TEST(Reassemble, PermutationInvariance) {
  Gen gen(4242);
  for (int trial = 0; trial < 100; ++trial) {
    const auto start = static_cast<std::uint16_t>(gen.integer(0, 65535));
    std::vector<Packet> ps;
    for (int i = 0; i < gen.integer(1, 300); ++i) {
      ps.push_back(packet(static_cast<std::uint16_t>(start + i), static_cast<std::uint32_t>(gen.integer(1, 3))));
    }
    const auto expected = reassemble(ps);
    std::ranges::shuffle(ps, gen.engine());
    const auto shuffled = reassemble(ps);
    ASSERT_EQ(shuffled.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_EQ(shuffled[i].packets, expected[i].packets);
      EXPECT_EQ(shuffled[i].gaps, expected[i].gaps);
    }
  }
}

TEST(G711, UlawMatchesExpansionOracle) {
  for (int c = 0; c < 256; ++c) {
    const auto code = static_cast<std::uint8_t>(c);
    EXPECT_EQ(ulaw_to_linear(code), ulaw_oracle(code)) << "code " << c;
  }
  EXPECT_EQ(ulaw_to_linear(0xFF), 0);
  EXPECT_EQ(ulaw_to_linear(0x7F), 0);
  EXPECT_EQ(ulaw_to_linear(0x00), -8031);
  EXPECT_EQ(ulaw_to_linear(0x80), 8031);
}

TEST(G711, UlawReencodeRecoversEveryByte) {
  for (int c = 0; c < 256; ++c) {
    const auto code = static_cast<std::uint8_t>(c);
    const auto back = linear_to_ulaw(ulaw_to_linear(code));
    // Negative zero (0x7F) has no distinct linear value and folds onto 0xFF.
    EXPECT_EQ(back, code == 0x7F ? 0xFF : code) << "code " << c;
  }
}

TEST(G711, AlawMatchesExpansionOracle) {
  for (int c = 0; c < 256; ++c) {
    const auto code = static_cast<std::uint8_t>(c);
    EXPECT_EQ(alaw_to_linear(code), alaw_oracle(code)) << "code " << c;
    EXPECT_EQ(linear_to_alaw(alaw_to_linear(code)), code) << "code " << c;
  }
}

// The encoder quantizes the biased magnitude |x| + 33, so every input lands
// within half a step of its reconstruction level, the step being 2 << segment.
TEST(G711, EncoderErrorWithinHalfStep) {
  Gen gen(17);
  for (int trial = 0; trial < 5000; ++trial) {
    const int x = gen.integer(-8158, 8158);
    const auto code = linear_to_ulaw(static_cast<std::int16_t>(x));
    const int segment = (~code >> 4) & 0x07;
    EXPECT_LE(std::abs(ulaw_oracle(code) - x), 1 << segment) << x;
  }
}

TEST(Decode, NormalizedRange) {
  std::vector<std::uint8_t> all(256);
  for (int c = 0; c < 256; ++c) all[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(c);
  for (double s : decode_ulaw(all)) EXPECT_LE(std::abs(s), 1.0);
  for (double s : decode_alaw(all)) EXPECT_LE(std::abs(s), 1.0);
  EXPECT_DOUBLE_EQ(decode_ulaw(std::vector<std::uint8_t>{0x00})[0], -8031.0 / 8159.0);
  EXPECT_DOUBLE_EQ(decode_alaw(std::vector<std::uint8_t>{0xAA})[0], 1.0);
}

TEST(StreamFrom, ConcatenatesPayloads) {
  const auto streams = reassemble({packet(1, 1, 160), packet(2, 1, 160)});
  const auto stream = stream_from(streams[0]);
  EXPECT_EQ(stream.samples.size(), 320u);
  EXPECT_EQ(stream.packet_boundaries, (std::vector<std::size_t>{0, 160}));
  EXPECT_TRUE(std::ranges::all_of(stream.samples, [](double s) { return s == 0.0; }));
}

TEST(StreamFrom, Errors) {
  auto streams = reassemble({packet(1)});
  streams[0].packets[0].payload_type = 99;
  try {
    stream_from(streams[0]);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported payload type"), std::string::npos);
  }
  OrderedStream mixed;
  mixed.ssrc = 1;
  mixed.packets = {packet(1, 1), packet(2, 2)};
  EXPECT_THROW(stream_from(mixed), InvalidArgument);
}

}  // namespace
}  // namespace spitgate::rtp
