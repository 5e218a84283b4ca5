#include "spitgate/classify_signaling.h"

#include <chrono>
#include <utility>

#include <fmt/format.h>

namespace spitgate {
namespace {

// Populated identity fields of the record, in lookup order.
std::vector<std::pair<db::Field, std::string>> populated_fields(const sip::SignalingRecord& r) {
  std::vector<std::pair<db::Field, std::string>> fields;
  auto put = [&fields](db::Field field, std::string value) {
    if (!value.empty()) fields.emplace_back(field, std::move(value));
  };
  put(db::Field::kFromUser, r.from_uri.user);
  put(db::Field::kFromHost, r.from_uri.host);
  put(db::Field::kFromDisplay, r.from_display);
  if (r.contact_uri) put(db::Field::kContact, sip::address_of(*r.contact_uri));
  put(db::Field::kCallId, r.call_id);
  if (r.subject) put(db::Field::kSubject, *r.subject);
  if (r.content_type) put(db::Field::kContentType, *r.content_type);
  put(db::Field::kSourceIp, r.source_ip);
  return fields;
}

}  // namespace

std::string_view to_string(Combination combination) {
  return combination == Combination::kAll ? "all" : "any";
}

std::optional<Combination> parse_combination(std::string_view text) {
  if (text == "any") return Combination::kAny;
  if (text == "all") return Combination::kAll;
  return std::nullopt;
}

LayerVerdict classify_signaling(const sip::SignalingRecord& record, const db::PatternStore& store,
                                Combination combination) {
  const auto start = std::chrono::steady_clock::now();
  LayerVerdict verdict;
  bool any_found = false;
  bool all_found = true;
  std::vector<std::string> unfound;
  for (const auto& [field, value] : populated_fields(record)) {
    const auto hits = db::lookup_all(store, field, value);
    if (hits.empty()) {
      all_found = false;
      unfound.push_back(fmt::format("and-rule: {} not found", db::to_string(field)));
      continue;
    }
    any_found = true;
    for (const auto& hit : hits) {
      verdict.reasons.push_back(fmt::format("{}: {}", db::to_string(field), hit.pattern));
    }
  }

  if (combination == Combination::kAny) {
    verdict.decision = any_found ? Decision::kSpam : Decision::kPass;
  } else {
    verdict.decision = all_found ? Decision::kPass : Decision::kSpam;
    if (verdict.is_spam()) {
      verdict.reasons.insert(verdict.reasons.end(), unfound.begin(), unfound.end());
    }
  }
  verdict.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return verdict;
}

}  // namespace spitgate
