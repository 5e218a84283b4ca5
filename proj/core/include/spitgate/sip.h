#pragma once

// SIP message parsing and extraction of the caller-identity fields of an
// INVITE.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spitgate::sip {

struct Header {
  std::string name;
  std::string value;

  friend bool operator==(const Header&, const Header&) = default;
};

struct Message {
  enum class Kind { kRequest, kResponse };

  Kind kind = Kind::kRequest;
  // Requests.
  std::string method;
  std::string request_uri;
  // Responses.
  int status = 0;
  std::string reason;

  // In wire order, names as written.
  std::vector<Header> headers;
  std::string body;

  bool is_request() const { return kind == Kind::kRequest; }
  bool is_invite() const { return is_request() && method == "INVITE"; }

  // First value of `name`. Matching is case-insensitive and treats compact
  // forms (i, f, t, v, c, s, m, l) as their long names.
  std::optional<std::string_view> header(std::string_view name) const;
  std::vector<std::string_view> headers_named(std::string_view name) const;

  friend bool operator==(const Message&, const Message&) = default;
};

// Accepts CRLF or bare LF line endings and folded continuation lines.
// Throws FormatError when no start line is recognizable, when the start line
// holds non-text bytes, or when a header line lacks a colon.
Message parse_message(std::string_view text);
Message parse_message(std::span<const std::uint8_t> bytes);

// CRLF-terminated wire form.
std::string render(const Message& message);

// Canonical long name for a compact header form; other names unchanged.
std::string_view expand_compact_name(std::string_view name);

struct Uri {
  std::string scheme;
  std::string user;
  std::string host;

  friend bool operator==(const Uri&, const Uri&) = default;
};

// Strips angle brackets, ";params", "?headers", a ":password" on the user
// part and a ":port" on the host. Throws FormatError on missing scheme or
// empty host.
Uri parse_uri(std::string_view text);
std::string render(const Uri& uri);
// "user@host", or "host" when the user part is empty.
std::string address_of(const Uri& uri);

// A From/To/Contact value split into display name and URI.
struct NameAddr {
  std::string display_name;
  Uri uri;
};
NameAddr parse_name_addr(std::string_view text);

struct SignalingRecord {
  std::string call_id;
  std::string from_display;
  Uri from_uri;
  std::optional<Uri> contact_uri;
  std::vector<std::string> via;
  std::optional<std::string> subject;
  std::optional<std::string> content_type;
  std::string source_ip;
  std::optional<std::uint16_t> media_port;

  friend bool operator==(const SignalingRecord&, const SignalingRecord&) = default;
};

// Port from the first "m=audio <port> ..." line of a session body.
std::optional<std::uint16_t> advertised_audio_port(std::string_view body);

// Throws InvalidArgument when `message` is not an INVITE or `source_ip` is
// not a dotted quad, FormatError when From or Call-ID is missing or From is
// unparseable. An unparseable Contact is recorded as absent.
SignalingRecord extract_invite(const Message& message, std::string_view source_ip);

}  // namespace spitgate::sip
