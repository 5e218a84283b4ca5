#pragma once

// The two-layer firewall. Layer 1 checks the first INVITE against the
// pattern store; a spam verdict there rejects the call without touching its
// media. Otherwise layer 2 decodes the caller's RTP and classifies the audio.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spitgate/capture_io.h"
#include "spitgate/classify_media.h"
#include "spitgate/classify_signaling.h"
#include "spitgate/features.h"
#include "spitgate/sip.h"
#include "spitgate/spam_db.h"
#include "spitgate/verdict.h"

namespace spitgate {

struct AnalysisConfig {
  Combination combination = Combination::kAny;
  MediaRuleParams media;
  features::FrameSpec frames;
  std::uint16_t sip_port = kDefaultSipPort;
  unsigned jobs = 1;
};

struct Verdict {
  std::string call_id;
  LayerVerdict layer1;
  std::optional<LayerVerdict> layer2;
  CallClass final_class = CallClass::kGenuine;
  // RTP packets decoded for this call; stays 0 when layer 1 rejects.
  std::size_t decoded_rtp_packets = 0;

  bool is_spam() const { return final_class == CallClass::kSpam; }
  // layer1 spam => no layer2 and final spam; layer1 pass => final == layer2.
  bool consistent() const;
};

struct InviteInfo {
  sip::SignalingRecord record;
  Endpoint source;
};

// First parseable INVITE of the call, if any.
std::optional<InviteInfo> first_invite(const CallCapture& call);

struct CallerMedia {
  std::optional<rtp::MediaStream> stream;
  // Why `stream` is empty.
  std::string problem;
  std::size_t decoded_packets = 0;
};

// Decodes the RTP stream sent by the INVITE's originator: packets from the
// caller's address (and advertised port when known), largest SSRC group
// first. Falls back to the largest group overall when the caller sent none.
CallerMedia caller_media(const CallCapture& call, const InviteInfo& invite);

// Throws InvalidArgument when the call holds no INVITE.
Verdict analyze_call(const CallCapture& call, const db::PatternStore& store,
                     const PrototypeTable& table, const AnalysisConfig& config);

struct RunReport {
  // Sorted by call id.
  std::vector<Verdict> verdicts;
  // Calls without an INVITE plus media sessions tied to no call.
  std::size_t skipped = 0;
  std::size_t orphan_datagrams = 0;
  std::size_t skipped_frames = 0;

  std::size_t spam_count() const;
  std::size_t genuine_count() const;
  double mean_layer1_seconds() const;
  // Over calls that reached layer 2; empty when none did.
  std::optional<double> mean_layer2_seconds() const;
};

RunReport analyze_calls(const GroupedCalls& grouped, const db::PatternStore& store,
                        const PrototypeTable& table, const AnalysisConfig& config);
RunReport analyze_capture(const std::filesystem::path& capture,
                          const std::filesystem::path& store,
                          const std::filesystem::path& prototypes,
                          const AnalysisConfig& config);

void write_report(const RunReport& report, std::ostream& out);
// 0 when every call is genuine, 3 when any is spam.
int exit_code(const RunReport& report);

struct TimingStats {
  double mean_seconds = 0.0;
  double stddev_seconds = 0.0;
  std::size_t samples = 0;
};

struct BenchmarkResult {
  std::size_t calls = 0;
  std::size_t repetitions = 0;
  TimingStats layer1;
  std::optional<TimingStats> layer2;
};

// Captures are loaded once; only classification is timed. Throws
// InvalidArgument for fewer than 3 repetitions or a corpus with no calls.
BenchmarkResult benchmark(std::span<const std::filesystem::path> corpus,
                          const db::PatternStore& store, const PrototypeTable& table,
                          const AnalysisConfig& config, std::size_t repetitions);
void write_benchmark(const BenchmarkResult& result, std::ostream& out);

struct CallFeatures {
  std::string call_id;
  features::FeatureVector vector;
  features::SilenceStats silence;
};

// Features of the caller's stream for every call with an INVITE and at
// least one full frame of audio.
std::vector<CallFeatures> capture_features(const GroupedCalls& grouped,
                                           const AnalysisConfig& config, double scale);
// Tab-separated, one line per call, reals to 6 decimals.
void write_features(std::span<const CallFeatures> rows, std::ostream& out);

}  // namespace spitgate
