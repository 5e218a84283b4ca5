#include "spitgate/traffic_synth.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "spitgate/error.h"
#include "spitgate/rtp_media.h"
#include "spitgate/sip.h"

namespace spitgate::synth {
namespace {

constexpr std::uint32_t kBaseEpochSeconds = 1'700'000'000;
constexpr std::uint32_t kCalleeAddress = 0x0A000002;  // 10.0.0.2
constexpr std::string_view kCalleeUser = "reception";
constexpr std::string_view kCalleeHost = "pbx.example.org";
constexpr double kJitter = 0.2;

// Signaling schedule, microseconds after the INVITE.
constexpr std::uint64_t kRingingAt = 40'000;
constexpr std::uint64_t kAnswerAt = 800'000;
constexpr std::uint64_t kAckAt = 820'000;
constexpr std::uint64_t kMediaAt = 840'000;
constexpr std::uint64_t kPacketMicros = 20'000;

constexpr std::array<std::string_view, 8> kFirstNames{
    "Alice", "Bruno", "Chen", "Dalia", "Emeka", "Freya", "Goran", "Hana"};
constexpr std::array<std::string_view, 8> kLastNames{
    "Moreau", "Lindqvist", "Okafor", "Santos", "Novak", "Ishida", "Brennan", "Haddad"};
constexpr std::array<std::string_view, 3> kCallerHosts{
    "voip.example.org", "sip.example.com", "phone.example.net"};

constexpr std::array<std::pair<ProfileKind, std::string_view>, 4> kKindNames{{
    {ProfileKind::kGenuine, "genuine"},
    {ProfileKind::kSpamSignaling, "spam_signaling"},
    {ProfileKind::kSpamContinuous, "spam_continuous"},
    {ProfileKind::kSpamSilent, "spam_silent"},
}};

std::uint64_t stream_seed(const CallProfile& profile) {
  return profile.seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(profile.kind) + 1));
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string quote_display(std::string_view display) {
  std::string out = "\"";
  for (char c : display) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string session_body(std::string_view user, std::string_view ip, std::uint16_t port,
                         std::uint64_t session) {
  return fmt::format(
      "v=0\r\no={} {} {} IN IP4 {}\r\ns=call\r\nc=IN IP4 {}\r\nt=0 0\r\n"
      "m=audio {} RTP/AVP 0\r\na=rtpmap:0 PCMU/8000\r\n",
      user, session, session, ip, ip, port);
}

sip::Message make_message(std::string start_line, std::vector<sip::Header> headers,
                          std::string body = {}) {
  // Round through the parser so rendering uses the canonical layout.
  std::string text = std::move(start_line) + "\r\n";
  for (const auto& h : headers) text += h.name + ": " + h.value + "\r\n";
  text += "\r\n" + body;
  return sip::parse_message(text);
}

std::vector<std::uint8_t> to_bytes(const sip::Message& message) {
  const std::string text = sip::render(message);
  return {text.begin(), text.end()};
}

struct Identity {
  std::string display;
  std::string user;
  std::string host;
  std::uint32_t address = 0;
};

Identity identity_for(const CallProfile& profile, Lcg& rng) {
  Identity id;
  const auto pick = rng.next();
  const auto first = kFirstNames[(pick >> 8) % kFirstNames.size()];
  const auto last = kLastNames[(pick >> 16) % kLastNames.size()];
  const auto host = kCallerHosts[(pick >> 24) % kCallerHosts.size()];
  const auto octets = rng.next();
  id.address = 0x0A010000u | static_cast<std::uint32_t>(((octets >> 16) & 0xFF) << 8) |
               static_cast<std::uint32_t>(1 + (octets >> 32) % 254);
  if (profile.kind == ProfileKind::kSpamSignaling) {
    id.display = "Anonymous";
    id.user = "anonymous";
    id.host = "anonymous.net";
  } else {
    id.display = fmt::format("{} {}", first, last);
    id.user = fmt::format("{}{}", lowercase(first), profile.seed);
    id.host = std::string(host);
  }
  if (profile.display_name) id.display = *profile.display_name;
  if (profile.user) id.user = *profile.user;
  if (profile.host) id.host = *profile.host;
  if (profile.caller_ip) id.address = *profile.caller_ip;
  return id;
}

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return std::string(s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1));
}

template <typename T>
T parse_number(std::string_view text, std::size_t line_number, std::string_view what) {
  T value{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw FormatError(fmt::format("spec: line {}: bad {} '{}'", line_number, what, text));
  }
  return value;
}

}  // namespace

std::string_view to_string(ProfileKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<ProfileKind> parse_profile_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

CallClass label_of(ProfileKind kind) {
  return kind == ProfileKind::kGenuine ? CallClass::kGenuine : CallClass::kSpam;
}

void CallProfile::validate() const {
  if (!(duration_seconds > 0.0)) throw InvalidArgument("profile duration must be positive");
  if (!(talk_seconds > 0.0) || !(silence_seconds > 0.0)) {
    throw InvalidArgument("talk and silence periods must be positive");
  }
  if (start_offset_seconds < 0.0) throw InvalidArgument("start offset must be non-negative");
}

std::size_t packet_count(const CallProfile& profile) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(profile.duration_seconds / kPacketSeconds)));
}

std::pair<double, double> expected_silence_band(const CallProfile& profile) {
  const double f = profile.silence_seconds / (profile.silence_seconds + profile.talk_seconds);
  return {0.5 * f, std::min(1.0, 1.5 * f)};
}

std::vector<double> synth_audio(const CallProfile& profile) {
  profile.validate();
  Lcg rng(stream_seed(profile) ^ 0xA5A5A5A5A5A5A5A5ULL);
  const std::size_t n = packet_count(profile) * kSamplesPerPacket;
  const double rate = rtp::kSampleRate;

  const double gain = profile.kind == ProfileKind::kSpamContinuous ? 1.0 : rng.uniform(0.8, 1.2);
  const double f1 = rng.uniform(180.0, 260.0);
  const double f2 = rng.uniform(500.0, 900.0);
  const double p1 = rng.uniform(0.0, 2 * std::numbers::pi);
  const double p2 = rng.uniform(0.0, 2 * std::numbers::pi);
  const double penv = rng.uniform(0.0, 2 * std::numbers::pi);

  // Voiced/silent schedule as sample-index spans.
  std::vector<bool> voiced(n, true);
  switch (profile.kind) {
    case ProfileKind::kGenuine:
    case ProfileKind::kSpamSignaling: {
      std::size_t i = 0;
      bool talking = true;
      while (i < n) {
        const double nominal = talking ? profile.talk_seconds : profile.silence_seconds;
        const double span = nominal * rng.uniform(1.0 - kJitter, 1.0 + kJitter);
        const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(span * rate));
        const auto end = std::min(n, i + len);
        std::fill(voiced.begin() + static_cast<std::ptrdiff_t>(i),
                  voiced.begin() + static_cast<std::ptrdiff_t>(end), talking);
        i = end;
        talking = !talking;
      }
      break;
    }
    case ProfileKind::kSpamContinuous:
      break;
    case ProfileKind::kSpamSilent: {
      const double lead = std::min(1.5, 0.2 * profile.duration_seconds);
      const auto lead_samples = std::min(n, static_cast<std::size_t>(lead * rate));
      std::fill(voiced.begin() + static_cast<std::ptrdiff_t>(lead_samples), voiced.end(), false);
      break;
    }
  }

  std::vector<double> audio(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double noise = rng.uniform(-1.0, 1.0);
    if (voiced[i]) {
      const double env = 0.6 + 0.4 * std::sin(2 * std::numbers::pi * 3.0 * t + penv);
      const double tone = 0.25 * std::sin(2 * std::numbers::pi * f1 * t + p1) +
                          0.12 * std::sin(2 * std::numbers::pi * f2 * t + p2);
      audio[i] = std::clamp(gain * env * tone + 0.01 * noise, -1.0, 1.0);
    } else {
      audio[i] = 0.001 * noise;
    }
  }
  return audio;
}

CallCapture synth_call(const CallProfile& profile) {
  profile.validate();
  Lcg rng(stream_seed(profile));
  const Identity caller = identity_for(profile, rng);
  const std::string caller_ip = format_ipv4(caller.address);
  const std::string callee_ip = format_ipv4(kCalleeAddress);
  const auto caller_port = profile.media_port.value_or(
      static_cast<std::uint16_t>(16384 + 2 * (rng.next() % 8192)));
  const auto callee_port = static_cast<std::uint16_t>(40000 + 2 * (rng.next() % 8192));
  const std::string call_id = fmt::format("{:016x}@{}", rng.next(), caller_ip);
  const std::string from_tag = fmt::format("{:08x}", rng.next() >> 32);
  const std::string to_tag = fmt::format("{:08x}", rng.next() >> 32);
  const std::string branch = fmt::format("z9hG4bK{:012x}", rng.next() >> 16);
  const std::uint64_t session = rng.next() >> 40;

  const Timestamp t0 = Timestamp{kBaseEpochSeconds, 0}.plus_micros(
      static_cast<std::uint64_t>(std::llround(profile.start_offset_seconds * 1e6)));
  const Endpoint caller_sip{caller.address, kDefaultSipPort};
  const Endpoint callee_sip{kCalleeAddress, kDefaultSipPort};

  const std::string from_value =
      caller.display.empty()
          ? fmt::format("<sip:{}@{}>;tag={}", caller.user, caller.host, from_tag)
          : fmt::format("{} <sip:{}@{}>;tag={}", quote_display(caller.display), caller.user, caller.host,
                        from_tag);
  const std::string to_uri = fmt::format("sip:{}@{}", kCalleeUser, kCalleeHost);
  const std::string to_value = fmt::format("<{}>", to_uri);
  const std::string to_tagged = fmt::format("<{}>;tag={}", to_uri, to_tag);
  const std::string via = fmt::format("SIP/2.0/UDP {}:5060;branch={}", caller_ip, branch);

  auto dialog = [&](std::string_view cseq, bool answered) {
    return std::vector<sip::Header>{
        {"Via", via},
        {"From", from_value},
        {"To", answered ? to_tagged : to_value},
        {"Call-ID", call_id},
        {"CSeq", std::string(cseq)},
    };
  };

  CallCapture call;
  call.call_id = call_id;
  auto emit = [&](std::uint64_t at, Endpoint from, Endpoint to, const sip::Message& m) {
    call.sip_messages.push_back({t0.plus_micros(at), from, to, to_bytes(m)});
  };

  {
    auto headers = dialog("1 INVITE", false);
    headers.insert(headers.begin() + 1, sip::Header{"Max-Forwards", "70"});
    headers.push_back({"Contact", fmt::format("<sip:{}@{}:5060>", caller.user, caller_ip)});
    if (profile.subject) headers.push_back({"Subject", *profile.subject});
    const std::string body = session_body(caller.user, caller_ip, caller_port, session);
    headers.push_back({"Content-Type", "application/sdp"});
    headers.push_back({"Content-Length", std::to_string(body.size())});
    emit(0, caller_sip, callee_sip,
         make_message(fmt::format("INVITE {} SIP/2.0", to_uri), std::move(headers), body));
  }
  {
    auto headers = dialog("1 INVITE", true);
    headers.push_back({"Content-Length", "0"});
    emit(kRingingAt, callee_sip, caller_sip, make_message("SIP/2.0 180 Ringing", std::move(headers)));
  }
  {
    auto headers = dialog("1 INVITE", true);
    headers.push_back({"Contact", fmt::format("<sip:{}@{}:5060>", kCalleeUser, callee_ip)});
    const std::string body = session_body(kCalleeUser, callee_ip, callee_port, session + 1);
    headers.push_back({"Content-Type", "application/sdp"});
    headers.push_back({"Content-Length", std::to_string(body.size())});
    emit(kAnswerAt, callee_sip, caller_sip, make_message("SIP/2.0 200 OK", std::move(headers), body));
  }
  {
    auto headers = dialog("1 ACK", true);
    headers.push_back({"Content-Length", "0"});
    emit(kAckAt, caller_sip, callee_sip,
         make_message(fmt::format("ACK {} SIP/2.0", to_uri), std::move(headers)));
  }

  const auto audio = synth_audio(profile);
  const std::size_t packets = packet_count(profile);
  const auto first_sequence = static_cast<std::uint16_t>(rng.next() >> 48);
  const auto first_timestamp = static_cast<std::uint32_t>(rng.next() >> 32);
  const auto ssrc = static_cast<std::uint32_t>(rng.next() >> 32);

  std::vector<rtp::Packet> rtp_packets(packets);
  for (std::size_t k = 0; k < packets; ++k) {
    auto& p = rtp_packets[k];
    p.marker = k == 0;
    p.payload_type = rtp::kPayloadPcmu;
    p.sequence = static_cast<std::uint16_t>(first_sequence + k);
    p.timestamp = static_cast<std::uint32_t>(first_timestamp + k * kSamplesPerPacket);
    p.ssrc = ssrc;
    p.payload.reserve(kSamplesPerPacket);
    for (std::size_t i = 0; i < kSamplesPerPacket; ++i) {
      p.payload.push_back(rtp::encode_ulaw(audio[k * kSamplesPerPacket + i]));
    }
  }
  if (profile.reorder_every > 0) {
    for (std::size_t k = profile.reorder_every - 1; k + 1 < packets; k += profile.reorder_every) {
      std::swap(rtp_packets[k], rtp_packets[k + 1]);
    }
  }
  const Endpoint caller_media{caller.address, caller_port};
  const Endpoint callee_media{kCalleeAddress, callee_port};
  for (std::size_t k = 0; k < packets; ++k) {
    call.rtp_packets.push_back({t0.plus_micros(kMediaAt + k * kPacketMicros), caller_media,
                                callee_media, rtp::serialize(rtp_packets[k])});
  }

  const std::uint64_t bye_at = kMediaAt + packets * kPacketMicros;
  {
    auto headers = dialog("2 BYE", true);
    headers.push_back({"Content-Length", "0"});
    emit(bye_at, caller_sip, callee_sip,
         make_message(fmt::format("BYE {} SIP/2.0", to_uri), std::move(headers)));
  }
  {
    auto headers = dialog("2 BYE", true);
    headers.push_back({"Content-Length", "0"});
    emit(bye_at + 30'000, callee_sip, caller_sip, make_message("SIP/2.0 200 OK", std::move(headers)));
  }
  return call;
}

std::vector<CallProfile> parse_spec(std::string_view text) {
  std::vector<CallProfile> profiles;
  std::istringstream lines{std::string(text)};
  std::size_t line_number = 0;
  for (std::string raw; std::getline(lines, raw);) {
    ++line_number;
    const std::string line = trim_copy(raw);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t bar; (bar = line.find('|', start)) != std::string::npos; start = bar + 1) {
      fields.push_back(trim_copy(std::string_view(line).substr(start, bar - start)));
    }
    fields.push_back(trim_copy(std::string_view(line).substr(start)));
    if (fields.size() < 2) {
      throw FormatError(fmt::format("spec: line {}: expected kind|seed|duration|...", line_number));
    }

    CallProfile profile;
    const auto kind = parse_profile_kind(fields[0]);
    if (!kind) throw FormatError(fmt::format("spec: line {}: unknown kind '{}'", line_number, fields[0]));
    profile.kind = *kind;
    profile.seed = parse_number<std::uint64_t>(fields[1], line_number, "seed");
    if (fields.size() > 2 && !fields[2].empty()) {
      profile.duration_seconds = parse_number<double>(fields[2], line_number, "duration");
    }
    for (std::size_t i = 3; i < fields.size(); ++i) {
      if (fields[i].empty()) continue;
      const auto eq = fields[i].find('=');
      if (eq == std::string::npos) {
        throw FormatError(fmt::format("spec: line {}: expected key=value, got '{}'", line_number, fields[i]));
      }
      const std::string key = fields[i].substr(0, eq);
      const std::string value = fields[i].substr(eq + 1);
      if (key == "talk") {
        profile.talk_seconds = parse_number<double>(value, line_number, key);
      } else if (key == "silence") {
        profile.silence_seconds = parse_number<double>(value, line_number, key);
      } else if (key == "display") {
        profile.display_name = value;
      } else if (key == "user") {
        profile.user = value;
      } else if (key == "host") {
        profile.host = value;
      } else if (key == "subject") {
        profile.subject = value;
      } else if (key == "ip") {
        const auto address = parse_ipv4(value);
        if (!address) throw FormatError(fmt::format("spec: line {}: bad ip '{}'", line_number, value));
        profile.caller_ip = *address;
      } else if (key == "port") {
        profile.media_port = parse_number<std::uint16_t>(value, line_number, key);
      } else if (key == "offset") {
        profile.start_offset_seconds = parse_number<double>(value, line_number, key);
      } else if (key == "reorder") {
        profile.reorder_every = parse_number<std::size_t>(value, line_number, key);
      } else {
        throw FormatError(fmt::format("spec: line {}: unknown key '{}'", line_number, key));
      }
    }
    try {
      profile.validate();
    } catch (const InvalidArgument& e) {
      throw FormatError(fmt::format("spec: line {}: {}", line_number, e.what()));
    }
    profiles.push_back(std::move(profile));
  }
  return profiles;
}

std::vector<CallProfile> load_spec(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError(fmt::format("cannot open synth spec '{}'", path.string()));
  std::ostringstream contents;
  contents << file.rdbuf();
  return parse_spec(contents.str());
}

std::vector<std::filesystem::path> synth_corpus(std::span<const CallProfile> profiles,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

  std::string manifest = fmt::format(
      "# path|kind|seed\n"
      "# label: genuine for kind genuine, spam otherwise\n"
      "# prng: x' = a*x + c mod 2^64, a={}, c={}\n",
      kLcgMultiplier, kLcgIncrement);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& profile = profiles[i];
    const std::string name = fmt::format("call_{:03}_{}_{}.pcap", i, to_string(profile.kind), profile.seed);
    const auto path = out_dir / name;
    write_capture(flatten(synth_call(profile)), path);
    manifest += fmt::format("{}|{}|{}\n", name, to_string(profile.kind), profile.seed);
    paths.push_back(path);
  }
  std::ofstream file(out_dir / kManifestName, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError(fmt::format("cannot write manifest in '{}'", out_dir.string()));
  file << manifest;
  if (!file.flush()) throw IoError("manifest write failed");
  return paths;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest) {
  std::ifstream file(manifest, std::ios::binary);
  if (!file) throw IoError(fmt::format("cannot open manifest '{}'", manifest.string()));
  std::vector<ManifestEntry> entries;
  std::size_t line_number = 0;
  for (std::string raw; std::getline(file, raw);) {
    ++line_number;
    const std::string line = trim_copy(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto bar1 = line.find('|');
    const auto bar2 = bar1 == std::string::npos ? bar1 : line.find('|', bar1 + 1);
    if (bar2 == std::string::npos) {
      throw FormatError(fmt::format("manifest: line {}: expected path|kind|seed", line_number));
    }
    const auto kind = parse_profile_kind(line.substr(bar1 + 1, bar2 - bar1 - 1));
    if (!kind) throw FormatError(fmt::format("manifest: line {}: unknown kind", line_number));
    entries.push_back({line.substr(0, bar1), *kind,
                       parse_number<std::uint64_t>(std::string_view(line).substr(bar2 + 1),
                                                   line_number, "seed")});
  }
  return entries;
}

std::vector<CallProfile> default_mix(std::uint64_t first_seed) {
  std::vector<CallProfile> mix;
  auto add = [&mix](ProfileKind kind, std::uint64_t seed) {
    CallProfile p;
    p.kind = kind;
    p.seed = seed;
    mix.push_back(p);
  };
  for (std::uint64_t i = 0; i < 4; ++i) add(ProfileKind::kGenuine, first_seed + i);
  add(ProfileKind::kSpamSignaling, first_seed + 4);
  add(ProfileKind::kSpamContinuous, first_seed + 5);
  add(ProfileKind::kSpamSilent, first_seed + 6);
  add(ProfileKind::kSpamSignaling, first_seed + 7);
  return mix;
}

}  // namespace spitgate::synth
