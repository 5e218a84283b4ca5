#include "spitgate/capture_io.h"

#include <algorithm>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "spitgate/error.h"
#include "spitgate/rtp_media.h"
#include "spitgate/traffic_synth.h"
#include "test_support.h"

namespace spitgate {
namespace {

using testing::Gen;
using testing::TempDir;

// Hand-assembled little-endian pcap pieces, written from the field layouts
// rather than through serialize_capture.
void le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> global_header(std::uint32_t link_type = 1) {
  std::vector<std::uint8_t> out;
  le32(out, 0xA1B2C3D4);
  out.insert(out.end(), {2, 0, 4, 0});
  le32(out, 0);
  le32(out, 0);
  le32(out, 65535);
  le32(out, link_type);
  return out;
}

// Ethernet + IPv4 frame carrying `l4` with the given protocol number.
std::vector<std::uint8_t> ipv4_frame(std::uint8_t protocol, const std::vector<std::uint8_t>& l4,
                                     std::uint16_t fragment_field = 0x4000) {
  std::vector<std::uint8_t> f(12, 0x02);
  be16(f, 0x0800);
  f.push_back(0x45);
  f.push_back(0);
  be16(f, static_cast<std::uint16_t>(20 + l4.size()));
  be16(f, 1);
  be16(f, fragment_field);
  f.push_back(64);
  f.push_back(protocol);
  be16(f, 0);
  f.insert(f.end(), {10, 0, 0, 1, 10, 0, 0, 2});
  f.insert(f.end(), l4.begin(), l4.end());
  return f;
}

std::vector<std::uint8_t> udp_segment(std::uint16_t sport, std::uint16_t dport,
                                      const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> s;
  be16(s, sport);
  be16(s, dport);
  be16(s, static_cast<std::uint16_t>(8 + payload.size()));
  be16(s, 0);
  s.insert(s.end(), payload.begin(), payload.end());
  return s;
}

void append_record(std::vector<std::uint8_t>& file, std::uint32_t sec,
                   const std::vector<std::uint8_t>& frame) {
  le32(file, sec);
  le32(file, 0);
  le32(file, static_cast<std::uint32_t>(frame.size()));
  le32(file, static_cast<std::uint32_t>(frame.size()));
  file.insert(file.end(), frame.begin(), frame.end());
}

TEST(ParseCapture, EmptyInputIsBadMagic) {
  try {
    parse_capture({});
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
  }
}

TEST(ParseCapture, HeaderOnlyFileHasNoDatagrams) {
  const auto file = global_header();
  const auto contents = parse_capture(file);
  EXPECT_TRUE(contents.datagrams.empty());
  EXPECT_EQ(contents.skipped_frames, 0u);
}

TEST(ParseCapture, SkipsTcpKeepsUdp) {
  auto file = global_header();
  append_record(file, 1, ipv4_frame(6, std::vector<std::uint8_t>(20, 0)));
  append_record(file, 2, ipv4_frame(17, udp_segment(5060, 5062, {'h', 'i'})));

  const auto contents = parse_capture(file);
  ASSERT_EQ(contents.datagrams.size(), 1u);
  EXPECT_EQ(contents.skipped_frames, 1u);
  const auto& d = contents.datagrams[0];
  EXPECT_EQ(d.timestamp.seconds, 2u);
  EXPECT_EQ(d.source, (Endpoint{0x0A000001, 5060}));
  EXPECT_EQ(d.destination, (Endpoint{0x0A000002, 5062}));
  EXPECT_EQ(d.payload, (std::vector<std::uint8_t>{'h', 'i'}));
}

TEST(ParseCapture, SkipsFragments) {
  auto file = global_header();
  append_record(file, 1, ipv4_frame(17, udp_segment(1, 2, {1}), 0x2000));  // more fragments
  append_record(file, 1, ipv4_frame(17, udp_segment(1, 2, {1}), 0x0010));  // nonzero offset
  const auto contents = parse_capture(file);
  EXPECT_TRUE(contents.datagrams.empty());
  EXPECT_EQ(contents.skipped_frames, 2u);
}

TEST(ParseCapture, ReadsBigEndianFiles) {
  std::vector<std::uint8_t> file = {0xA1, 0xB2, 0xC3, 0xD4, 0, 2, 0, 4};
  file.resize(24, 0);
  file[23] = 1;  // link type 1, big-endian
  const auto frame = ipv4_frame(17, udp_segment(7, 8, {9}));
  const std::uint32_t len = static_cast<std::uint32_t>(frame.size());
  for (std::uint32_t v : {5u, 6u, len, len}) {
    for (int i = 3; i >= 0; --i) file.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  file.insert(file.end(), frame.begin(), frame.end());
  const auto contents = parse_capture(file);
  ASSERT_EQ(contents.datagrams.size(), 1u);
  EXPECT_EQ(contents.datagrams[0].timestamp, (Timestamp{5, 6}));
}

TEST(ParseCapture, RejectsOtherLinkTypes) {
  EXPECT_THROW(parse_capture(global_header(101)), FormatError);
}

TEST(ParseCapture, TruncatedRecordNamesOffset) {
  auto file = global_header();
  append_record(file, 1, ipv4_frame(17, udp_segment(1, 2, {1, 2, 3})));
  file.resize(file.size() - 2);
  try {
    parse_capture(file);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 24"), std::string::npos) << e.what();
  }
}

TEST(ReadCapture, MissingFileIsIoError) {
  EXPECT_THROW(read_capture("/nonexistent/capture.pcap"), IoError);
}

TEST(SerializeCapture, EmptyListIsHeaderOnly) {
  EXPECT_EQ(serialize_capture({}).size(), kPcapGlobalHeaderSize);
}

TEST(SerializeCapture, OneBytePayloadFileLength) {
  Datagram d;
  d.payload = {'X'};
  const auto bytes = serialize_capture(std::span(&d, 1));
  EXPECT_EQ(bytes.size(), 24u + 16u + 14u + 20u + 8u + 1u);
}

TEST(SerializeCapture, Ipv4ChecksumVerifies) {
  Datagram d;
  d.source = {0xC0A80001, 1000};
  d.destination = {0xC0A80002, 2000};
  d.payload = {1, 2, 3};
  const auto bytes = serialize_capture(std::span(&d, 1));
  const std::size_t ip = 24 + 16 + 14;
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < 20; i += 2) sum += bytes[ip + i] << 8 | bytes[ip + i + 1];
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  EXPECT_EQ(sum, 0xFFFFu);
}

TEST(SerializeCapture, RejectsDecreasingTimestamps) {
  std::vector<Datagram> ds(2);
  ds[0].timestamp = {10, 0};
  ds[1].timestamp = {9, 999999};
  EXPECT_THROW(serialize_capture(ds), InvalidArgument);
}

TEST(SerializeCapture, RoundTripProperty) {
  Gen gen(0xCAFE);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Datagram> ds;
    Timestamp ts{static_cast<std::uint32_t>(gen.integer(0, 1 << 30)), 0};
    const int n = gen.integer(0, 40);
    for (int i = 0; i < n; ++i) {
      ts = ts.plus_micros(static_cast<std::uint64_t>(gen.integer(0, 3'000'000)));
      ds.push_back(gen.datagram(ts));
    }
    EXPECT_EQ(parse_capture(serialize_capture(ds)).datagrams, ds) << "trial " << trial;
  }
}

TEST(WriteCapture, SynthCallRoundTripsThroughDisk) {
  TempDir dir;
  synth::CallProfile profile;
  profile.duration_seconds = 2.0;
  profile.seed = 3;
  const auto call = synth::synth_call(profile);
  const auto datagrams = flatten(call);
  ASSERT_GE(datagrams.size(), 100u);
  write_capture(datagrams, dir / "call.pcap");
  EXPECT_EQ(read_capture(dir / "call.pcap").datagrams, datagrams);
}

TEST(Ipv4, FormatAndParse) {
  EXPECT_EQ(format_ipv4(0x0A00FF01), "10.0.255.1");
  EXPECT_EQ(parse_ipv4("10.0.255.1"), 0x0A00FF01u);
  for (const char* bad : {"", "1.2.3", "1.2.3.4.5", "256.1.1.1", "1..2.3", "+1.2.3.4", "1.2.3.4 ",
                          "a.b.c.d", "0001.2.3.4"}) {
    EXPECT_FALSE(parse_ipv4(bad)) << bad;
  }
}

TEST(GroupCalls, EmptyInput) {
  const auto grouped = group_calls({});
  EXPECT_TRUE(grouped.calls.empty());
  EXPECT_TRUE(grouped.orphans.empty());
}

TEST(GroupCalls, TwoInterleavedCalls) {
  synth::CallProfile a;
  a.seed = 11;
  a.duration_seconds = 3.0;
  synth::CallProfile b = a;
  b.seed = 12;
  b.start_offset_seconds = 0.5;
  const std::vector<CallCapture> calls = {synth::synth_call(a), synth::synth_call(b)};
  ASSERT_NE(calls[0].call_id, calls[1].call_id);

  const auto mixed = flatten(calls);
  const auto grouped = group_calls(mixed);
  ASSERT_EQ(grouped.calls.size(), 2u);
  EXPECT_TRUE(grouped.orphans.empty());
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(grouped.calls[i].call_id, calls[i].call_id);
    EXPECT_EQ(grouped.calls[i].sip_messages, calls[i].sip_messages);
    EXPECT_EQ(grouped.calls[i].rtp_packets, calls[i].rtp_packets);
  }
}

TEST(GroupCalls, RtpOnlyCaptureIsAllOrphans) {
  synth::CallProfile p;
  p.seed = 5;
  p.duration_seconds = 1.0;
  const auto call = synth::synth_call(p);
  const auto grouped = group_calls(call.rtp_packets);
  EXPECT_TRUE(grouped.calls.empty());
  EXPECT_EQ(grouped.orphans.size(), call.rtp_packets.size());
}

// Every input datagram lands in exactly one place, and flatten restores the
// capture when nothing is orphaned.
TEST(GroupCalls, PartitionProperty) {
  Gen gen(77);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<CallCapture> calls;
    const int n = gen.integer(1, 4);
    for (int i = 0; i < n; ++i) {
      synth::CallProfile p;
      p.seed = gen.bits();
      p.duration_seconds = gen.real(1.0, 3.0);
      p.start_offset_seconds = gen.real(0.0, 2.0);
      p.kind = static_cast<synth::ProfileKind>(gen.integer(0, 3));
      calls.push_back(synth::synth_call(p));
    }
    auto mixed = flatten(calls);
    // Stray datagram on an odd, unadvertised port between unrelated hosts.
    Datagram stray;
    stray.timestamp = mixed.back().timestamp;
    stray.source = {0x01020304, 9999};
    stray.destination = {0x05060708, 9997};
    mixed.push_back(stray);

    const auto grouped = group_calls(mixed);
    ASSERT_EQ(grouped.calls.size(), calls.size());
    std::size_t total = grouped.orphans.size();
    for (const auto& c : grouped.calls) total += c.sip_messages.size() + c.rtp_packets.size();
    EXPECT_EQ(total, mixed.size());
    ASSERT_EQ(grouped.orphans.size(), 1u);
    mixed.pop_back();
    EXPECT_EQ(flatten(grouped.calls), mixed);
  }
}

TEST(GroupCalls, CallWithoutSessionBodyClaimsEvenPortTraffic) {
  const std::string invite =
      "INVITE sip:b@h SIP/2.0\r\nCall-ID: x1\r\nFrom: <sip:a@h>\r\n\r\n";
  Datagram sip;
  sip.source = {0x0A000001, 5060};
  sip.destination = {0x0A000002, 5060};
  sip.payload.assign(invite.begin(), invite.end());
  Datagram even = sip;
  even.source.port = 3001;
  even.destination.port = 4000;
  even.payload = {0x80};
  Datagram odd = even;
  odd.destination.port = 4001;

  const std::vector<Datagram> ds = {sip, even, odd};
  const auto grouped = group_calls(ds);
  ASSERT_EQ(grouped.calls.size(), 1u);
  EXPECT_EQ(grouped.calls[0].rtp_packets.size(), 1u);
  EXPECT_EQ(grouped.orphans.size(), 1u);
}

TEST(GroupCalls, CustomSipPort) {
  synth::CallProfile p;
  p.seed = 9;
  p.duration_seconds = 1.0;
  const auto call = synth::synth_call(p);
  const auto datagrams = flatten(call);
  EXPECT_TRUE(group_calls(datagrams, 5080).calls.empty());
  EXPECT_EQ(group_calls(datagrams, 5060).calls.size(), 1u);
}

}  // namespace
}  // namespace spitgate
