#include "spitgate/spam_db.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <span>
#include <sstream>
#include <system_error>
#include <utility>

#include <fmt/format.h>

#include "spitgate/error.h"

namespace spitgate::db {
namespace {

constexpr std::array<std::pair<Field, std::string_view>, 8> kFieldNames{{
    {Field::kFromUser, "from_user"},
    {Field::kFromHost, "from_host"},
    {Field::kFromDisplay, "from_display"},
    {Field::kContact, "contact"},
    {Field::kCallId, "call_id"},
    {Field::kSubject, "subject"},
    {Field::kContentType, "content_type"},
    {Field::kSourceIp, "source_ip"},
}};

constexpr std::size_t kMinSpacedRun = 3;

bool is_single_alnum(const std::string& token) {
  return token.size() == 1 && std::isalnum(static_cast<unsigned char>(token[0]));
}

// Joins a run of spaced single characters. A spelled-out "dot" inside the run
// becomes '.' when at least one character precedes it and at least two follow
// (a domain label), so "t e s t d o t c o m" reads as "test.com".
std::string fold_run(std::span<const std::string> run) {
  std::string letters;
  for (const auto& t : run) letters += t;
  std::string out;
  std::size_t i = 0;
  while (i < letters.size()) {
    if (i >= 1 && letters.compare(i, 3, "dot") == 0 && letters.size() - (i + 3) >= 2) {
      out += '.';
      i += 3;
    } else {
      out += letters[i++];
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

}  // namespace

std::string_view to_string(Field field) {
  for (const auto& [f, name] : kFieldNames) {
    if (f == field) return name;
  }
  return "unknown";
}

std::string_view to_string(MatchKind kind) {
  return kind == MatchKind::kExact ? "exact" : "substring";
}

std::optional<Field> parse_field(std::string_view text) {
  for (const auto& [f, name] : kFieldNames) {
    if (name == text) return f;
  }
  return std::nullopt;
}

std::optional<MatchKind> parse_match_kind(std::string_view text) {
  if (text == "exact") return MatchKind::kExact;
  if (text == "substring") return MatchKind::kSubstring;
  return std::nullopt;
}

std::string normalize(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      cleaned += ' ';
    } else if (std::isalnum(c)) {
      cleaned += static_cast<char>(std::tolower(c));
    } else if (c == '@' || c == '.' || c == '-') {
      cleaned += static_cast<char>(c);
    }
  }

  std::vector<std::string> tokens;
  std::istringstream words(cleaned);
  for (std::string word; words >> word;) tokens.push_back(std::move(word));

  std::vector<std::string> folded;
  for (std::size_t i = 0; i < tokens.size();) {
    if (!is_single_alnum(tokens[i])) {
      folded.push_back(std::move(tokens[i++]));
      continue;
    }
    std::size_t j = i;
    while (j < tokens.size() && is_single_alnum(tokens[j])) ++j;
    if (j - i >= kMinSpacedRun) {
      folded.push_back(fold_run(std::span(tokens).subspan(i, j - i)));
    } else {
      for (std::size_t k = i; k < j; ++k) folded.push_back(std::move(tokens[k]));
    }
    i = j;
  }

  std::vector<std::string> joined;
  for (std::size_t i = 0; i < folded.size(); ++i) {
    if (folded[i] == "dot" && !joined.empty() && i + 1 < folded.size()) {
      joined.back() += '.';
      joined.back() += folded[++i];
    } else {
      joined.push_back(std::move(folded[i]));
    }
  }

  std::string out;
  for (const auto& token : joined) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

bool SpamPattern::matches(std::string_view normalized_value) const {
  if (kind == MatchKind::kExact) return normalized_value == pattern;
  return normalized_value.find(pattern) != std::string_view::npos;
}

SpamPattern make_pattern(Field field, MatchKind kind, std::string_view pattern) {
  if (pattern.find('|') != std::string_view::npos) {
    throw InvalidArgument(fmt::format("pattern '{}' contains '|'", pattern));
  }
  std::string normalized = normalize(pattern);
  if (normalized.empty()) {
    throw InvalidArgument(fmt::format("pattern '{}' is empty after normalization", pattern));
  }
  return {field, kind, std::move(normalized)};
}

bool PatternStore::contains(const SpamPattern& pattern) const {
  return std::ranges::find(patterns, pattern) != patterns.end();
}

PatternStore parse(std::string_view text, std::filesystem::path origin) {
  PatternStore store;
  store.path = std::move(origin);
  const std::string where = store.path.empty() ? std::string("patterns") : store.path.string();
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_number;

    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto bar1 = line.find('|');
    const auto bar2 = bar1 == std::string_view::npos ? bar1 : line.find('|', bar1 + 1);
    if (bar2 == std::string_view::npos) {
      throw FormatError(fmt::format("{}: line {}: malformed, expected field|kind|pattern", where,
                                    line_number));
    }
    const auto field_text = trim(line.substr(0, bar1));
    const auto kind_text = trim(line.substr(bar1 + 1, bar2 - bar1 - 1));
    const auto pattern_text = line.substr(bar2 + 1);
    const auto field = parse_field(field_text);
    if (!field) {
      throw FormatError(fmt::format("{}: line {}: unknown field '{}'", where, line_number, field_text));
    }
    const auto kind = parse_match_kind(kind_text);
    if (!kind) {
      throw FormatError(fmt::format("{}: line {}: unknown kind '{}'", where, line_number, kind_text));
    }
    SpamPattern pattern;
    try {
      pattern = make_pattern(*field, *kind, pattern_text);
    } catch (const InvalidArgument& e) {
      throw FormatError(fmt::format("{}: line {}: malformed, {}", where, line_number, e.what()));
    }
    if (store.contains(pattern)) {
      ++store.duplicates_dropped;
      continue;
    }
    store.patterns.push_back(std::move(pattern));
  }
  return store;
}

PatternStore load(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError(fmt::format("cannot open pattern store '{}'", path.string()));
  std::ostringstream contents;
  contents << file.rdbuf();
  return parse(contents.str(), path);
}

std::string serialize(const PatternStore& store) {
  std::string out = "# field|kind|pattern\n";
  for (const auto& p : store.patterns) {
    out += fmt::format("{}|{}|{}\n", to_string(p.field), to_string(p.kind), p.pattern);
  }
  return out;
}

void save(const PatternStore& store, const std::filesystem::path& path) {
  if (path.empty()) throw InvalidArgument("pattern store has no path");
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError(fmt::format("cannot write pattern store '{}'", tmp.string()));
    file << serialize(store);
    if (!file.flush()) throw IoError(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(fmt::format("cannot replace '{}'", path.string()));
  }
}

std::optional<SpamPattern> lookup(const PatternStore& store, Field field, std::string_view value) {
  const std::string normalized = normalize(value);
  for (const auto& p : store.patterns) {
    if (p.field == field && p.matches(normalized)) return p;
  }
  return std::nullopt;
}

std::vector<SpamPattern> lookup_all(const PatternStore& store, Field field,
                                    std::string_view value) {
  const std::string normalized = normalize(value);
  std::vector<SpamPattern> hits;
  for (const auto& p : store.patterns) {
    if (p.field == field && p.matches(normalized)) hits.push_back(p);
  }
  return hits;
}

PatternStore add(const PatternStore& store, const SpamPattern& pattern) {
  if (store.contains(pattern)) {
    throw InvalidArgument(fmt::format("duplicate pattern {}|{}|{}", to_string(pattern.field),
                                      to_string(pattern.kind), pattern.pattern));
  }
  PatternStore updated = store;
  updated.duplicates_dropped = 0;
  updated.patterns.push_back(pattern);
  save(updated, updated.path);
  return updated;
}

PatternStore remove(const PatternStore& store, const SpamPattern& pattern) {
  PatternStore updated = store;
  updated.duplicates_dropped = 0;
  const auto it = std::ranges::find(updated.patterns, pattern);
  if (it == updated.patterns.end()) {
    throw InvalidArgument(fmt::format("pattern {}|{}|{} not in store", to_string(pattern.field),
                                      to_string(pattern.kind), pattern.pattern));
  }
  updated.patterns.erase(it);
  save(updated, updated.path);
  return updated;
}

}  // namespace spitgate::db
