#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spitgate {

enum class Decision { kPass, kSpam };
enum class CallClass { kGenuine, kSpam };

std::string_view to_string(Decision decision);
std::string_view to_string(CallClass call_class);

// Outcome of one classification layer.
struct LayerVerdict {
  Decision decision = Decision::kPass;
  std::vector<std::string> reasons;
  double elapsed_seconds = 0.0;

  bool is_spam() const { return decision == Decision::kSpam; }
};

}  // namespace spitgate
