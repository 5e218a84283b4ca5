#include "spitgate/traffic_synth.h"

#include <fstream>

#include <gtest/gtest.h>

#include "spitgate/error.h"
#include "spitgate/features.h"
#include "spitgate/rtp_media.h"
#include "spitgate/sip.h"
#include "test_support.h"

namespace spitgate::synth {
namespace {

using testing::TempDir;

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

features::SilenceStats decoded_silence(const CallCapture& call) {
  std::vector<rtp::Packet> packets;
  for (const auto& d : call.rtp_packets) packets.push_back(rtp::parse(d.payload));
  const auto streams = rtp::reassemble(std::move(packets));
  return features::silence_stats(rtp::stream_from(streams.at(0)).samples, features::FrameSpec{});
}

TEST(Lcg, FirstOutputsFollowRecurrence) {
  Lcg rng(42);
  std::uint64_t x = 42;
  for (int i = 0; i < 5; ++i) {
    x = x * kLcgMultiplier + kLcgIncrement;
    EXPECT_EQ(rng.next(), x);
  }
  Lcg a(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(SynthCall, GenuineSeed42HasFiveHundredPackets) {
  CallProfile p;
  p.seed = 42;
  const auto call = synth_call(p);
  EXPECT_EQ(packet_count(p), 500u);
  EXPECT_EQ(call.rtp_packets.size(), 500u);
  const auto [lo, hi] = expected_silence_band(p);
  const auto stats = decoded_silence(call);
  EXPECT_GE(stats.silence_fraction, lo);
  EXPECT_LE(stats.silence_fraction, hi);
}

TEST(SynthCall, MessageFlow) {
  const auto call = synth_call(CallProfile{});
  ASSERT_EQ(call.sip_messages.size(), 6u);
  std::vector<std::string> starts;
  for (const auto& d : call.sip_messages) {
    const auto m = sip::parse_message(d.payload);
    starts.push_back(m.is_request() ? m.method : std::to_string(m.status));
    EXPECT_EQ(m.header("Call-ID"), call.call_id);
  }
  EXPECT_EQ(starts, (std::vector<std::string>{"INVITE", "180", "200", "ACK", "BYE", "200"}));
  const auto invite = sip::parse_message(call.sip_messages[0].payload);
  const auto port = sip::advertised_audio_port(invite.body);
  ASSERT_TRUE(port);
  EXPECT_EQ(call.rtp_packets.front().source.port, *port);
  EXPECT_LT(call.sip_messages[3].timestamp, call.rtp_packets.front().timestamp);
  EXPECT_LT(call.rtp_packets.back().timestamp, call.sip_messages[4].timestamp);
}

TEST(SynthCall, ContinuousHasNoSilentRun) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CallProfile p;
    p.kind = ProfileKind::kSpamContinuous;
    p.seed = seed;
    EXPECT_EQ(decoded_silence(synth_call(p)).longest_silent_run, 0u);
  }
}

TEST(SynthCall, SilentProfileHasLongSilence) {
  CallProfile p;
  p.kind = ProfileKind::kSpamSilent;
  p.seed = 4;
  EXPECT_GE(decoded_silence(synth_call(p)).longest_silent_run, 200u);
}

TEST(SynthCall, SignalingProfileUsesAnonymousIdentity) {
  CallProfile p;
  p.kind = ProfileKind::kSpamSignaling;
  const auto call = synth_call(p);
  const auto m = sip::parse_message(call.sip_messages[0].payload);
  const auto record = sip::extract_invite(m, format_ipv4(call.sip_messages[0].source.address));
  EXPECT_EQ(record.from_uri.user, "anonymous");
  EXPECT_EQ(record.from_uri.host, "anonymous.net");
}

TEST(SynthCall, OverridesApplied) {
  CallProfile p;
  p.display_name = "Coming Soon";
  p.user = "promo";
  p.host = "deals.example";
  p.subject = "Win";
  p.caller_ip = 0xC0000201;
  p.media_port = 30000;
  const auto call = synth_call(p);
  const auto m = sip::parse_message(call.sip_messages[0].payload);
  const auto record = sip::extract_invite(m, "192.0.2.1");
  EXPECT_EQ(record.from_display, "Coming Soon");
  EXPECT_EQ(record.from_uri.user, "promo");
  EXPECT_EQ(record.subject, "Win");
  EXPECT_EQ(record.media_port, 30000);
  EXPECT_EQ(call.sip_messages[0].source.address, 0xC0000201u);
}

TEST(SynthCall, Deterministic) {
  CallProfile p;
  p.seed = 99;
  p.kind = ProfileKind::kSpamSilent;
  const auto a = synth_call(p);
  const auto b = synth_call(p);
  EXPECT_EQ(serialize_capture(flatten(a)), serialize_capture(flatten(b)));
  p.seed = 100;
  EXPECT_NE(serialize_capture(flatten(a)), serialize_capture(flatten(synth_call(p))));
}

TEST(Profile, Validation) {
  CallProfile p;
  p.duration_seconds = 0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = {};
  p.talk_seconds = -1;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(ParseSpec, LinesAndKeys) {
  const auto profiles = parse_spec(
      "# comment\n"
      "\n"
      "genuine|1|10\n"
      "spam_signaling|2|5|display=Summer Offer|port=20000|reorder=5\n");
  ASSERT_EQ(profiles.size(), 2u);
  EXPECT_EQ(profiles[0].kind, ProfileKind::kGenuine);
  EXPECT_EQ(profiles[1].seed, 2u);
  EXPECT_DOUBLE_EQ(profiles[1].duration_seconds, 5.0);
  EXPECT_EQ(profiles[1].display_name, "Summer Offer");
  EXPECT_EQ(profiles[1].media_port, 20000);
  EXPECT_EQ(profiles[1].reorder_every, 5u);
  EXPECT_THROW(parse_spec("robocall|1|10\n"), FormatError);
  EXPECT_THROW(parse_spec("genuine|x|10\n"), FormatError);
  EXPECT_THROW(parse_spec("genuine|1|10|colour=red\n"), FormatError);
}

TEST(SynthCorpus, FilesAndManifest) {
  TempDir dir;
  const auto profiles = default_mix(1);
  const auto paths = synth_corpus(profiles, dir.path());
  ASSERT_EQ(paths.size(), 8u);
  const auto manifest = load_manifest(dir / std::string(kManifestName));
  ASSERT_EQ(manifest.size(), 8u);
  std::size_t genuine = 0;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    EXPECT_EQ(manifest[i].kind, profiles[i].kind);
    EXPECT_EQ(manifest[i].seed, profiles[i].seed);
    EXPECT_TRUE(std::filesystem::exists(dir / manifest[i].path.string()));
    genuine += label_of(manifest[i].kind) == CallClass::kGenuine;
  }
  EXPECT_EQ(genuine, 4u);

  const auto first = file_bytes(paths[0]);
  synth_corpus(profiles, dir.path());
  EXPECT_EQ(file_bytes(paths[0]), first);
}

TEST(SynthCorpus, EmptySpecList) {
  TempDir dir;
  EXPECT_TRUE(synth_corpus({}, dir.path()).empty());
  EXPECT_TRUE(load_manifest(dir / std::string(kManifestName)).empty());
}

TEST(SynthCorpus, EveryCaptureGroupsIntoOneCall) {
  TempDir dir;
  const auto profiles = default_mix(50);
  const auto paths = synth_corpus(profiles, dir.path());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto grouped = group_calls(read_capture(paths[i]).datagrams);
    ASSERT_EQ(grouped.calls.size(), 1u);
    EXPECT_EQ(grouped.calls[0], synth_call(profiles[i]));
  }
}

}  // namespace
}  // namespace spitgate::synth
