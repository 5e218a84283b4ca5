#pragma once

// Line-oriented spam pattern store ("field|kind|pattern") and the text
// normalization applied to both patterns and looked-up values.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spitgate::db {

enum class Field {
  kFromUser,
  kFromHost,
  kFromDisplay,
  kContact,
  kCallId,
  kSubject,
  kContentType,
  kSourceIp,
};

inline constexpr Field kAllFields[] = {
    Field::kFromUser, Field::kFromHost,  Field::kFromDisplay,  Field::kContact,
    Field::kCallId,   Field::kSubject,   Field::kContentType,  Field::kSourceIp,
};

enum class MatchKind { kExact, kSubstring };

std::string_view to_string(Field field);
std::string_view to_string(MatchKind kind);
std::optional<Field> parse_field(std::string_view text);
std::optional<MatchKind> parse_match_kind(std::string_view text);

// Lowercases, drops characters other than letters, digits, '@', '.', '-'
// and whitespace, collapses whitespace, folds runs of three or more
// single-character tokens into one token, and rewrites a standalone "dot"
// between two tokens as '.'. Idempotent.
std::string normalize(std::string_view text);

struct SpamPattern {
  Field field = Field::kFromUser;
  MatchKind kind = MatchKind::kExact;
  std::string pattern;  // normalized

  bool matches(std::string_view normalized_value) const;

  friend bool operator==(const SpamPattern&, const SpamPattern&) = default;
};

// Normalizes `pattern` and checks it is non-empty and free of '|'.
// Throws InvalidArgument otherwise.
SpamPattern make_pattern(Field field, MatchKind kind, std::string_view pattern);

struct PatternStore {
  std::vector<SpamPattern> patterns;
  std::filesystem::path path;
  // Duplicate lines dropped by the last load.
  std::size_t duplicates_dropped = 0;

  bool contains(const SpamPattern& pattern) const;
};

// Throws IoError for a missing file and FormatError naming the line for an
// unknown field, unknown kind, or malformed line.
PatternStore load(const std::filesystem::path& path);
PatternStore parse(std::string_view text, std::filesystem::path origin = {});
std::string serialize(const PatternStore& store);
// Writes to a sibling temporary file and renames it over `path`.
void save(const PatternStore& store, const std::filesystem::path& path);

// First pattern for `field` matching normalize(value).
std::optional<SpamPattern> lookup(const PatternStore& store, Field field,
                                  std::string_view value);
std::vector<SpamPattern> lookup_all(const PatternStore& store, Field field,
                                    std::string_view value);

// Both return the updated store after persisting it to store.path.
// add throws InvalidArgument on duplicates, remove when the pattern is absent;
// the file is left untouched in both cases.
PatternStore add(const PatternStore& store, const SpamPattern& pattern);
PatternStore remove(const PatternStore& store, const SpamPattern& pattern);

}  // namespace spitgate::db
