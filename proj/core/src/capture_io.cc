#include "spitgate/capture_io.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include <fmt/format.h>

#include "spitgate/error.h"
#include "spitgate/sip.h"

namespace spitgate {
namespace {

constexpr std::uint32_t kPcapMagic = 0xA1B2C3D4;
constexpr std::uint32_t kPcapMagicSwapped = 0xD4C3B2A1;
constexpr std::uint32_t kLinkTypeEthernet = 1;
constexpr std::uint32_t kSnapLength = 65535;
constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint8_t kProtocolUdp = 17;
constexpr std::size_t kMaxUdpPayload = 65535 - kIpv4HeaderSize - kUdpHeaderSize;

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, bool big_endian)
      : bytes_(bytes), big_endian_(big_endian) {}

  std::uint32_t u32(std::size_t offset) const {
    const auto* p = bytes_.data() + offset;
    if (big_endian_) {
      return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 |
             std::uint32_t{p[2]} << 8 | p[3];
    }
    return std::uint32_t{p[3]} << 24 | std::uint32_t{p[2]} << 16 |
           std::uint32_t{p[1]} << 8 | p[0];
  }
  std::uint16_t u16(std::size_t offset) const {
    const auto* p = bytes_.data() + offset;
    return big_endian_ ? static_cast<std::uint16_t>(p[0] << 8 | p[1])
                       : static_cast<std::uint16_t>(p[1] << 8 | p[0]);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool big_endian_;
};

std::uint16_t be16(std::span<const std::uint8_t> b, std::size_t offset) {
  return static_cast<std::uint16_t>(b[offset] << 8 | b[offset + 1]);
}
std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t offset) {
  return std::uint32_t{b[offset]} << 24 | std::uint32_t{b[offset + 1]} << 16 |
         std::uint32_t{b[offset + 2]} << 8 | b[offset + 3];
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}
void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t ipv4_checksum(std::span<const std::uint8_t> header) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < header.size(); i += 2) sum += be16(header, i);
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

// Returns nullopt for frames that are not unfragmented Ethernet/IPv4/UDP.
std::optional<Datagram> decode_frame(std::span<const std::uint8_t> frame, Timestamp ts) {
  if (frame.size() < kEthernetHeaderSize) return std::nullopt;
  if (be16(frame, 12) != kEtherTypeIpv4) return std::nullopt;
  auto ip = frame.subspan(kEthernetHeaderSize);
  if (ip.size() < kIpv4HeaderSize || (ip[0] >> 4) != 4) return std::nullopt;
  const std::size_t header_len = std::size_t{ip[0] & 0x0Fu} * 4;
  const std::size_t total_len = be16(ip, 2);
  if (header_len < kIpv4HeaderSize || total_len < header_len || total_len > ip.size()) {
    return std::nullopt;
  }
  const std::uint16_t fragment = be16(ip, 6);
  const bool more_fragments = (fragment & 0x2000) != 0;
  if (more_fragments || (fragment & 0x1FFF) != 0) return std::nullopt;
  if (ip[9] != kProtocolUdp) return std::nullopt;

  auto udp = ip.subspan(header_len, total_len - header_len);
  if (udp.size() < kUdpHeaderSize) return std::nullopt;
  const std::size_t udp_len = be16(udp, 4);
  if (udp_len < kUdpHeaderSize || udp_len > udp.size()) return std::nullopt;

  Datagram d;
  d.timestamp = ts;
  d.source = {be32(ip, 12), be16(udp, 0)};
  d.destination = {be32(ip, 16), be16(udp, 2)};
  auto payload = udp.subspan(kUdpHeaderSize, udp_len - kUdpHeaderSize);
  d.payload.assign(payload.begin(), payload.end());
  return d;
}

}  // namespace

Timestamp Timestamp::plus_micros(std::uint64_t micros) const {
  const std::uint64_t total = std::uint64_t{microseconds} + micros;
  return {static_cast<std::uint32_t>(seconds + total / 1'000'000),
          static_cast<std::uint32_t>(total % 1'000'000)};
}

std::string format_ipv4(std::uint32_t address) {
  return fmt::format("{}.{}.{}.{}", address >> 24, (address >> 16) & 0xFF,
                     (address >> 8) & 0xFF, address & 0xFF);
}

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t address = 0;
  int parts = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (parts < 4) {
    if (p == end || *p < '0' || *p > '9') return std::nullopt;
    unsigned octet = 0;
    auto [next, ec] = std::from_chars(p, end, octet);
    if (ec != std::errc{} || octet > 255 || next - p > 3) return std::nullopt;
    address = address << 8 | octet;
    p = next;
    ++parts;
    if (parts < 4) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
  }
  if (p != end) return std::nullopt;
  return address;
}

CaptureContents parse_capture(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("pcap: bad magic number (file too short)");
  const ByteReader le(bytes, false);
  const std::uint32_t magic = le.u32(0);
  if (magic != kPcapMagic && magic != kPcapMagicSwapped) {
    throw FormatError(fmt::format("pcap: bad magic number 0x{:08X}", magic));
  }
  if (bytes.size() < kPcapGlobalHeaderSize) {
    throw FormatError(fmt::format("pcap: truncated global header at offset {}", bytes.size()));
  }
  const ByteReader in(bytes, magic == kPcapMagicSwapped);
  if (in.u16(4) != 2) {
    throw FormatError(fmt::format("pcap: unsupported version {}.{}", in.u16(4), in.u16(6)));
  }
  if (const auto link = in.u32(20); link != kLinkTypeEthernet) {
    throw FormatError(fmt::format("pcap: unsupported link type {}", link));
  }

  CaptureContents contents;
  std::size_t offset = kPcapGlobalHeaderSize;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < kPcapRecordHeaderSize) {
      throw FormatError(fmt::format("pcap: truncated record header at offset {}", offset));
    }
    const Timestamp ts{in.u32(offset), in.u32(offset + 4)};
    const std::size_t captured = in.u32(offset + 8);
    const std::size_t data_offset = offset + kPcapRecordHeaderSize;
    if (captured > bytes.size() - data_offset) {
      throw FormatError(fmt::format("pcap: truncated record at offset {} ({} bytes declared)",
                                    offset, captured));
    }
    if (auto d = decode_frame(bytes.subspan(data_offset, captured), ts)) {
      contents.datagrams.push_back(std::move(*d));
    } else {
      ++contents.skipped_frames;
    }
    offset = data_offset + captured;
  }
  return contents;
}

CaptureContents read_capture(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError(fmt::format("cannot open capture '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_capture(bytes);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::vector<std::uint8_t> serialize_capture(std::span<const Datagram> datagrams) {
  std::vector<std::uint8_t> out;
  put_le32(out, kPcapMagic);
  put_le16(out, 2);
  put_le16(out, 4);
  put_le32(out, 0);  // thiszone
  put_le32(out, 0);  // sigfigs
  put_le32(out, kSnapLength);
  put_le32(out, kLinkTypeEthernet);

  std::uint16_t ip_id = 0;
  for (std::size_t i = 0; i < datagrams.size(); ++i) {
    const Datagram& d = datagrams[i];
    if (i > 0 && d.timestamp < datagrams[i - 1].timestamp) {
      throw InvalidArgument(fmt::format("write_capture: timestamp of datagram {} decreases", i));
    }
    if (d.payload.size() > kMaxUdpPayload) {
      throw InvalidArgument(fmt::format("write_capture: datagram {} payload of {} bytes too large",
                                        i, d.payload.size()));
    }
    const auto udp_len = static_cast<std::uint16_t>(kUdpHeaderSize + d.payload.size());
    const auto ip_len = static_cast<std::uint16_t>(kIpv4HeaderSize + udp_len);
    const auto frame_len = static_cast<std::uint32_t>(kEthernetHeaderSize + ip_len);

    put_le32(out, d.timestamp.seconds);
    put_le32(out, d.timestamp.microseconds);
    put_le32(out, frame_len);
    put_le32(out, frame_len);

    for (std::uint8_t b : {0x02, 0x00, 0x00, 0x00, 0x00, 0x02}) out.push_back(b);
    for (std::uint8_t b : {0x02, 0x00, 0x00, 0x00, 0x00, 0x01}) out.push_back(b);
    put_be16(out, kEtherTypeIpv4);

    const std::size_t ip_start = out.size();
    out.push_back(0x45);
    out.push_back(0x00);
    put_be16(out, ip_len);
    put_be16(out, ip_id++);
    put_be16(out, 0x4000);  // don't fragment
    out.push_back(64);
    out.push_back(kProtocolUdp);
    put_be16(out, 0);
    put_be32(out, d.source.address);
    put_be32(out, d.destination.address);
    const std::uint16_t checksum =
        ipv4_checksum(std::span(out).subspan(ip_start, kIpv4HeaderSize));
    out[ip_start + 10] = static_cast<std::uint8_t>(checksum >> 8);
    out[ip_start + 11] = static_cast<std::uint8_t>(checksum);

    put_be16(out, d.source.port);
    put_be16(out, d.destination.port);
    put_be16(out, udp_len);
    put_be16(out, 0);  // checksum optional over IPv4
    out.insert(out.end(), d.payload.begin(), d.payload.end());
  }
  return out;
}

void write_capture(std::span<const Datagram> datagrams, const std::filesystem::path& path) {
  const auto bytes = serialize_capture(datagrams);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError(fmt::format("cannot write capture '{}'", path.string()));
  file.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!file) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

GroupedCalls group_calls(std::span<const Datagram> datagrams, std::uint16_t sip_port) {
  struct CallState {
    CallCapture capture;
    std::set<Endpoint> media;
    std::uint32_t host_a = 0;
    std::uint32_t host_b = 0;
  };
  std::vector<CallState> calls;
  std::map<std::string, std::size_t, std::less<>> by_id;
  std::vector<std::size_t> orphan_indices;

  auto is_sip = [sip_port](const Datagram& d) {
    return d.source.port == sip_port || d.destination.port == sip_port;
  };

  for (std::size_t i = 0; i < datagrams.size(); ++i) {
    const Datagram& d = datagrams[i];
    if (!is_sip(d)) continue;
    std::optional<sip::Message> message;
    try {
      message = sip::parse_message(d.payload);
    } catch (const FormatError&) {
    }
    const auto call_id = message ? message->header("Call-ID") : std::nullopt;
    if (!call_id || call_id->empty()) {
      orphan_indices.push_back(i);
      continue;
    }
    auto [it, inserted] = by_id.try_emplace(std::string(*call_id), calls.size());
    if (inserted) {
      CallState state;
      state.capture.call_id = std::string(*call_id);
      state.host_a = std::min(d.source.address, d.destination.address);
      state.host_b = std::max(d.source.address, d.destination.address);
      calls.push_back(std::move(state));
    }
    CallState& call = calls[it->second];
    call.capture.sip_messages.push_back(d);
    if (auto port = sip::advertised_audio_port(message->body)) {
      call.media.insert({d.source.address, *port});
    }
  }

  for (std::size_t i = 0; i < datagrams.size(); ++i) {
    const Datagram& d = datagrams[i];
    if (is_sip(d)) continue;
    CallState* owner = nullptr;
    for (auto& call : calls) {
      if (call.media.contains(d.source) || call.media.contains(d.destination)) {
        owner = &call;
        break;
      }
    }
    if (owner == nullptr) {
      const auto lo = std::min(d.source.address, d.destination.address);
      const auto hi = std::max(d.source.address, d.destination.address);
      for (auto& call : calls) {
        if (call.media.empty() && call.host_a == lo && call.host_b == hi &&
            d.destination.port % 2 == 0) {
          owner = &call;
          break;
        }
      }
    }
    if (owner != nullptr) {
      owner->capture.rtp_packets.push_back(d);
    } else {
      orphan_indices.push_back(i);
    }
  }

  GroupedCalls grouped;
  auto by_time = [](const Datagram& a, const Datagram& b) { return a.timestamp < b.timestamp; };
  for (auto& call : calls) {
    std::ranges::stable_sort(call.capture.sip_messages, by_time);
    std::ranges::stable_sort(call.capture.rtp_packets, by_time);
    grouped.calls.push_back(std::move(call.capture));
  }
  std::ranges::sort(orphan_indices);
  for (auto i : orphan_indices) grouped.orphans.push_back(datagrams[i]);
  return grouped;
}

std::vector<Datagram> flatten(const CallCapture& call) {
  return flatten(std::span<const CallCapture>(&call, 1));
}

std::vector<Datagram> flatten(std::span<const CallCapture> calls) {
  std::vector<Datagram> out;
  for (const auto& call : calls) {
    out.insert(out.end(), call.sip_messages.begin(), call.sip_messages.end());
    out.insert(out.end(), call.rtp_packets.begin(), call.rtp_packets.end());
  }
  std::ranges::stable_sort(
      out, [](const Datagram& a, const Datagram& b) { return a.timestamp < b.timestamp; });
  return out;
}

}  // namespace spitgate
