#pragma once

// Deterministic synthetic SIP + RTP calls with labelled behaviour profiles.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spitgate/capture_io.h"
#include "spitgate/verdict.h"

namespace spitgate::synth {

// 64-bit LCG, modulus 2^64 (Knuth's MMIX constants).
inline constexpr std::uint64_t kLcgMultiplier = 6364136223846793005ULL;
inline constexpr std::uint64_t kLcgIncrement = 1442695040888963407ULL;

class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Top 53 bits scaled into [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::linear_congruential_engine<std::uint64_t, kLcgMultiplier, kLcgIncrement, 0>
      engine_;
};

enum class ProfileKind { kGenuine, kSpamSignaling, kSpamContinuous, kSpamSilent };

std::string_view to_string(ProfileKind kind);
std::optional<ProfileKind> parse_profile_kind(std::string_view text);
CallClass label_of(ProfileKind kind);

struct CallProfile {
  ProfileKind kind = ProfileKind::kGenuine;
  std::uint64_t seed = 0;
  double duration_seconds = 10.0;
  // Nominal talk/silence alternation; each span is jittered by +-20%.
  double talk_seconds = 1.5;
  double silence_seconds = 0.5;

  // Identity overrides stamped into the INVITE; defaults derive from seed
  // and kind (spam_signaling defaults to the anonymous identity).
  std::optional<std::string> display_name;
  std::optional<std::string> user;
  std::optional<std::string> host;
  std::optional<std::string> subject;
  std::optional<std::uint32_t> caller_ip;
  std::optional<std::uint16_t> media_port;

  // Shifts every timestamp, for interleaving several calls in one capture.
  double start_offset_seconds = 0.0;
  // When > 0, every Nth packet trades its sequence number with the next one.
  std::size_t reorder_every = 0;

  // Throws InvalidArgument for non-positive duration or periods.
  void validate() const;
};

inline constexpr std::size_t kSamplesPerPacket = 160;  // 20 ms
inline constexpr double kPacketSeconds = 0.02;

std::size_t packet_count(const CallProfile& profile);

// The genuine profile's expected frame-level silence fraction:
// [0.5 f, 1.5 f] with f = silence / (talk + silence).
std::pair<double, double> expected_silence_band(const CallProfile& profile);

// Audio at 8 kHz in [-1, 1] for the profile, before G.711 encoding.
std::vector<double> synth_audio(const CallProfile& profile);

// INVITE, 180, 200 (with answer body), ACK, caller RTP, BYE, 200.
CallCapture synth_call(const CallProfile& profile);

// One profile per line: "kind|seed|duration|key=value|...". Keys: talk,
// silence, display, user, host, subject, ip, port, offset, reorder.
// '#' comments and blank lines are skipped.
std::vector<CallProfile> parse_spec(std::string_view text);
std::vector<CallProfile> load_spec(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path path;  // relative to the manifest's directory
  ProfileKind kind = ProfileKind::kGenuine;
  std::uint64_t seed = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr std::string_view kManifestName = "manifest.txt";

// Writes one pcap per profile plus manifest.txt; returns the pcap paths.
std::vector<std::filesystem::path> synth_corpus(std::span<const CallProfile> profiles,
                                                const std::filesystem::path& out_dir);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest);

// Four genuine calls and one of each spam kind plus a second spam_signaling
// call, seeds starting at `first_seed`.
std::vector<CallProfile> default_mix(std::uint64_t first_seed = 1);

}  // namespace spitgate::synth
