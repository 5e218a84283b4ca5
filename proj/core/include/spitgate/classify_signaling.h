#pragma once

#include <string_view>
#include <optional>

#include "spitgate/sip.h"
#include "spitgate/spam_db.h"
#include "spitgate/verdict.h"

namespace spitgate {

// How per-field database hits combine into a decision.
//   kAny: spam when any populated field is found in the store.
//   kAll: the literal AND rule; the call passes only when every populated
//         field is found, so any unfound field marks it spam.
enum class Combination { kAny, kAll };

std::string_view to_string(Combination combination);
std::optional<Combination> parse_combination(std::string_view text);

LayerVerdict classify_signaling(const sip::SignalingRecord& record,
                                const db::PatternStore& store,
                                Combination combination = Combination::kAny);

}  // namespace spitgate
