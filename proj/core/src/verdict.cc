#include "spitgate/verdict.h"

namespace spitgate {

std::string_view to_string(Decision decision) {
  return decision == Decision::kSpam ? "spam" : "pass";
}

std::string_view to_string(CallClass call_class) {
  return call_class == CallClass::kSpam ? "spam" : "genuine";
}

}  // namespace spitgate
