#include "spitgate/sip.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <utility>

#include <fmt/format.h>

#include "spitgate/capture_io.h"
#include "spitgate/error.h"

namespace spitgate::sip {
namespace {

constexpr std::string_view kVersion = "SIP/2.0";

constexpr std::array<std::pair<char, std::string_view>, 10> kCompactForms{{
    {'i', "Call-ID"},
    {'f', "From"},
    {'t', "To"},
    {'v', "Via"},
    {'c', "Content-Type"},
    {'s', "Subject"},
    {'m', "Contact"},
    {'l', "Content-Length"},
    {'e', "Content-Encoding"},
    {'k', "Supported"},
}};

std::string_view trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n";
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kSpace);
  return s.substr(first, last - first + 1);
}

bool iequals(std::string_view a, std::string_view b) {
  return std::ranges::equal(a, b, [](unsigned char x, unsigned char y) {
    return std::tolower(x) == std::tolower(y);
  });
}

bool is_token_char(unsigned char c) {
  return std::isalnum(c) || std::string_view("-.!%*_+`'~").find(static_cast<char>(c)) !=
                                std::string_view::npos;
}

bool is_text(std::string_view line) {
  return std::ranges::all_of(line, [](unsigned char c) {
    return c == '\t' || (c >= 0x20 && c < 0x7F);
  });
}

// Splits off one line; accepts "\r\n" or "\n". Returns the line and advances
// `pos` past its terminator.
std::string_view next_line(std::string_view text, std::size_t& pos) {
  const auto nl = text.find('\n', pos);
  std::string_view line =
      nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
  pos = nl == std::string_view::npos ? text.size() : nl + 1;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

void parse_start_line(std::string_view line, Message& message) {
  if (!is_text(line)) throw FormatError("SIP: non-text start line");
  if (line.starts_with(kVersion) && line.size() > kVersion.size() &&
      line[kVersion.size()] == ' ') {
    std::string_view rest = line.substr(kVersion.size() + 1);
    int status = 0;
    auto [end, ec] = std::from_chars(rest.data(), rest.data() + std::min<std::size_t>(rest.size(), 3),
                                     status);
    if (ec != std::errc{} || end != rest.data() + 3) {
      throw FormatError("SIP: no start line (bad status code)");
    }
    if (status < 100 || status > 699) {
      throw FormatError(fmt::format("SIP: status code {} out of range", status));
    }
    rest.remove_prefix(3);
    if (!rest.empty() && rest.front() != ' ') throw FormatError("SIP: no start line");
    message.kind = Message::Kind::kResponse;
    message.status = status;
    message.reason = std::string(trim(rest));
    return;
  }

  const auto sp1 = line.find(' ');
  const auto sp2 = sp1 == std::string_view::npos ? sp1 : line.find(' ', sp1 + 1);
  if (sp1 == 0 || sp2 == std::string_view::npos) throw FormatError("SIP: no start line");
  const std::string_view method = line.substr(0, sp1);
  const std::string_view uri = line.substr(sp1 + 1, sp2 - sp1 - 1);
  const std::string_view version = line.substr(sp2 + 1);
  if (!std::ranges::all_of(method, is_token_char) || uri.empty() || version != kVersion) {
    throw FormatError("SIP: no start line");
  }
  message.kind = Message::Kind::kRequest;
  message.method = std::string(method);
  message.request_uri = std::string(uri);
}

// Splits a header value at commas outside double quotes and angle brackets.
std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> parts;
  bool quoted = false;
  int angle = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const char c = value[i];
    if (c == '"' && (i == 0 || value[i - 1] != '\\')) quoted = !quoted;
    if (quoted) continue;
    if (c == '<') ++angle;
    if (c == '>' && angle > 0) --angle;
    if (c == ',' && angle == 0) {
      if (auto part = trim(value.substr(start, i - start)); !part.empty()) {
        parts.emplace_back(part);
      }
      start = i + 1;
    }
  }
  if (auto part = trim(value.substr(start)); !part.empty()) parts.emplace_back(part);
  return parts;
}

}  // namespace

std::string_view expand_compact_name(std::string_view name) {
  if (name.size() == 1) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(name[0])));
    for (const auto& [compact, full] : kCompactForms) {
      if (compact == c) return full;
    }
  }
  return name;
}

std::optional<std::string_view> Message::header(std::string_view name) const {
  const auto wanted = expand_compact_name(name);
  for (const auto& h : headers) {
    if (iequals(expand_compact_name(h.name), wanted)) return h.value;
  }
  return std::nullopt;
}

std::vector<std::string_view> Message::headers_named(std::string_view name) const {
  const auto wanted = expand_compact_name(name);
  std::vector<std::string_view> values;
  for (const auto& h : headers) {
    if (iequals(expand_compact_name(h.name), wanted)) values.push_back(h.value);
  }
  return values;
}

Message parse_message(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size() && (text[pos] == '\r' || text[pos] == '\n')) ++pos;
  if (pos >= text.size()) throw FormatError("SIP: no start line");

  Message message;
  parse_start_line(next_line(text, pos), message);

  int line_number = 1;
  while (pos < text.size()) {
    const std::string_view line = next_line(text, pos);
    ++line_number;
    if (line.empty()) break;
    if (line.front() == ' ' || line.front() == '\t') {
      if (message.headers.empty()) {
        throw FormatError(fmt::format("SIP: malformed header line {}: continuation first",
                                      line_number));
      }
      auto& value = message.headers.back().value;
      value += ' ';
      value += trim(line);
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw FormatError(fmt::format("SIP: malformed header line {}: no colon", line_number));
    }
    const auto name = trim(line.substr(0, colon));
    if (name.empty()) {
      throw FormatError(fmt::format("SIP: malformed header line {}: empty name", line_number));
    }
    message.headers.push_back({std::string(name), std::string(trim(line.substr(colon + 1)))});
  }
  message.body = std::string(text.substr(pos));
  return message;
}

Message parse_message(std::span<const std::uint8_t> bytes) {
  return parse_message(
      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string render(const Message& message) {
  std::string out;
  if (message.is_request()) {
    out = fmt::format("{} {} {}\r\n", message.method, message.request_uri, kVersion);
  } else if (message.reason.empty()) {
    out = fmt::format("{} {}\r\n", kVersion, message.status);
  } else {
    out = fmt::format("{} {} {}\r\n", kVersion, message.status, message.reason);
  }
  for (const auto& h : message.headers) {
    out += h.name;
    out += ": ";
    out += h.value;
    out += "\r\n";
  }
  out += "\r\n";
  out += message.body;
  return out;
}

Uri parse_uri(std::string_view text) {
  text = trim(text);
  if (const auto open = text.find('<'); open != std::string_view::npos) {
    const auto close = text.find('>', open + 1);
    text = text.substr(open + 1, close == std::string_view::npos ? close : close - open - 1);
    text = trim(text);
  }
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0 ||
      !std::isalpha(static_cast<unsigned char>(text[0]))) {
    throw FormatError(fmt::format("URI '{}': missing scheme", text));
  }
  Uri uri;
  uri.scheme = std::string(text.substr(0, colon));
  std::string_view rest = text.substr(colon + 1);
  rest = rest.substr(0, rest.find_first_of(";?"));

  std::string_view host = rest;
  if (const auto at = rest.rfind('@'); at != std::string_view::npos) {
    std::string_view user = rest.substr(0, at);
    uri.user = std::string(user.substr(0, user.find(':')));
    host = rest.substr(at + 1);
  }
  if (const auto port_colon = host.rfind(':'); port_colon != std::string_view::npos) {
    const auto port = host.substr(port_colon + 1);
    if (std::ranges::all_of(port, [](unsigned char c) { return std::isdigit(c); })) {
      host = host.substr(0, port_colon);
    }
  }
  host = trim(host);
  if (host.empty()) throw FormatError(fmt::format("URI '{}': empty host", text));
  uri.host = std::string(host);
  return uri;
}

std::string render(const Uri& uri) {
  if (uri.user.empty()) return uri.scheme + ":" + uri.host;
  return uri.scheme + ":" + uri.user + "@" + uri.host;
}

std::string address_of(const Uri& uri) {
  return uri.user.empty() ? uri.host : uri.user + "@" + uri.host;
}

NameAddr parse_name_addr(std::string_view text) {
  text = trim(text);
  NameAddr result;
  std::size_t search_from = 0;
  if (text.starts_with('"')) {
    std::string display;
    std::size_t i = 1;
    for (; i < text.size() && text[i] != '"'; ++i) {
      if (text[i] == '\\' && i + 1 < text.size()) ++i;
      display += text[i];
    }
    result.display_name = std::move(display);
    search_from = std::min(i + 1, text.size());
  }
  const auto open = text.find('<', search_from);
  if (open == std::string_view::npos) {
    result.uri = parse_uri(text.substr(search_from));
    return result;
  }
  if (search_from == 0) {
    result.display_name = std::string(trim(text.substr(0, open)));
  }
  result.uri = parse_uri(text.substr(open));
  return result;
}

std::optional<std::uint16_t> advertised_audio_port(std::string_view body) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::string_view line = next_line(body, pos);
    if (!line.starts_with("m=audio ")) continue;
    std::string_view rest = trim(line.substr(8));
    unsigned port = 0;
    auto [end, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), port);
    if (ec != std::errc{} || port > 65535 || end == rest.data()) return std::nullopt;
    return static_cast<std::uint16_t>(port);
  }
  return std::nullopt;
}

SignalingRecord extract_invite(const Message& message, std::string_view source_ip) {
  if (!message.is_invite()) throw InvalidArgument("extract_invite: not an INVITE");
  if (!parse_ipv4(source_ip)) {
    throw InvalidArgument(fmt::format("extract_invite: '{}' is not a dotted quad", source_ip));
  }
  SignalingRecord record;
  const auto call_id = message.header("Call-ID");
  if (!call_id || trim(*call_id).empty()) throw FormatError("INVITE without Call-ID");
  record.call_id = std::string(trim(*call_id));

  const auto from = message.header("From");
  if (!from) throw FormatError("INVITE without From");
  NameAddr from_addr = parse_name_addr(*from);
  record.from_display = std::move(from_addr.display_name);
  record.from_uri = std::move(from_addr.uri);

  if (const auto contact = message.header("Contact"); contact && trim(*contact) != "*") {
    const auto contacts = split_list(*contact);
    try {
      if (!contacts.empty()) record.contact_uri = parse_name_addr(contacts.front()).uri;
    } catch (const FormatError&) {
      record.contact_uri.reset();
    }
  }
  for (const auto via : message.headers_named("Via")) {
    for (auto& hop : split_list(via)) record.via.push_back(std::move(hop));
  }
  if (const auto subject = message.header("Subject")) record.subject = std::string(*subject);
  if (const auto type = message.header("Content-Type")) record.content_type = std::string(*type);
  record.source_ip = std::string(source_ip);
  record.media_port = advertised_audio_port(message.body);
  return record;
}

}  // namespace spitgate::sip
