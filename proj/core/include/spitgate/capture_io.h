#pragma once

// Classic pcap reading/writing and per-call demultiplexing of UDP traffic.
//
// Only the subset needed for offline SIP/RTP analysis is supported:
// microsecond pcap (either byte order), Ethernet link layer, unfragmented
// IPv4, UDP. Anything else inside a valid file is skipped and counted.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spitgate {

inline constexpr std::uint16_t kDefaultSipPort = 5060;

inline constexpr std::size_t kPcapGlobalHeaderSize = 24;
inline constexpr std::size_t kPcapRecordHeaderSize = 16;
inline constexpr std::size_t kEthernetHeaderSize = 14;
inline constexpr std::size_t kIpv4HeaderSize = 20;
inline constexpr std::size_t kUdpHeaderSize = 8;

struct Timestamp {
  std::uint32_t seconds = 0;
  std::uint32_t microseconds = 0;

  double as_seconds() const { return seconds + microseconds * 1e-6; }
  Timestamp plus_micros(std::uint64_t micros) const;

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

// IPv4 address in host byte order plus UDP port.
struct Endpoint {
  std::uint32_t address = 0;
  std::uint16_t port = 0;

  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

std::string format_ipv4(std::uint32_t address);
// Strict dotted quad: four decimal octets, no leading '+', no empty parts.
std::optional<std::uint32_t> parse_ipv4(std::string_view text);

struct Datagram {
  Timestamp timestamp;
  Endpoint source;
  Endpoint destination;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Datagram&, const Datagram&) = default;
};

struct CaptureContents {
  std::vector<Datagram> datagrams;
  // Frames that were well-formed records but not Ethernet/IPv4/UDP, or
  // were IPv4 fragments.
  std::size_t skipped_frames = 0;
};

CaptureContents parse_capture(std::span<const std::uint8_t> bytes);
CaptureContents read_capture(const std::filesystem::path& path);

// Serializes as a little-endian microsecond pcap with synthetic Ethernet and
// IPv4 headers. Throws InvalidArgument on decreasing timestamps or payloads
// too large for a single IPv4 datagram.
std::vector<std::uint8_t> serialize_capture(std::span<const Datagram> datagrams);
void write_capture(std::span<const Datagram> datagrams,
                   const std::filesystem::path& path);

// One call: its SIP datagrams and the RTP datagrams tied to it, each list in
// capture order.
struct CallCapture {
  std::string call_id;
  std::vector<Datagram> sip_messages;
  std::vector<Datagram> rtp_packets;

  friend bool operator==(const CallCapture&, const CallCapture&) = default;
};

struct GroupedCalls {
  // In order of each call's first SIP message.
  std::vector<CallCapture> calls;
  // Datagrams tied to no call, in capture order.
  std::vector<Datagram> orphans;
};

// Datagrams to or from `sip_port` are treated as SIP and keyed by Call-ID.
// Other datagrams are attached to the first call whose session bodies
// advertised their (address, port); calls without any advertised media
// claim even-port traffic between the two hosts of their dialog.
GroupedCalls group_calls(std::span<const Datagram> datagrams,
                         std::uint16_t sip_port = kDefaultSipPort);

// Merges the SIP and RTP lists back into one timestamp-ordered stream
// (stable: SIP before RTP at equal timestamps).
std::vector<Datagram> flatten(const CallCapture& call);
std::vector<Datagram> flatten(std::span<const CallCapture> calls);

}  // namespace spitgate
