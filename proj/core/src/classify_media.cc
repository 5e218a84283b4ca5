#include "spitgate/classify_media.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "spitgate/error.h"

namespace spitgate {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void PrototypeTable::validate() const {
  const bool has_genuine = std::ranges::any_of(
      entries, [](const Prototype& p) { return p.label == CallClass::kGenuine; });
  const bool has_spam =
      std::ranges::any_of(entries, [](const Prototype& p) { return p.label == CallClass::kSpam; });
  if (!has_genuine || !has_spam) {
    throw InvalidArgument("prototype table needs at least one genuine and one spam entry");
  }
  if (std::ranges::any_of(entries, [](const Prototype& p) { return !(p.absolute_mean >= 0.0); })) {
    throw InvalidArgument("prototype absolute means must be non-negative");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidArgument("prototype calibration scale must be positive");
  }
}

PrototypeTable default_prototypes() {
  PrototypeTable table;
  for (double mean : {4.078, 5.613, 6.446, 2.599}) {
    table.entries.push_back({CallClass::kGenuine, mean});
  }
  for (double mean : {0.195, 0.112, 0.181, 18.174}) {
    table.entries.push_back({CallClass::kSpam, mean});
  }
  return table;
}

PrototypeTable parse_prototypes(std::string_view text) {
  PrototypeTable table;
  bool seen_scale = false;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim(
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_number;
    if (line.empty() || line.front() == '#') continue;

    const auto bar = line.find('|');
    if (bar == std::string_view::npos) {
      throw FormatError(fmt::format("prototypes: line {}: expected class|absolute_mean", line_number));
    }
    const auto key = trim(line.substr(0, bar));
    const auto value = parse_real(line.substr(bar + 1));
    if (!value) {
      throw FormatError(fmt::format("prototypes: line {}: bad number '{}'", line_number,
                                    trim(line.substr(bar + 1))));
    }
    if (key == "scale") {
      if (seen_scale || !table.entries.empty()) {
        throw FormatError(fmt::format("prototypes: line {}: scale must come first, once", line_number));
      }
      seen_scale = true;
      table.scale = *value;
    } else if (key == "genuine") {
      table.entries.push_back({CallClass::kGenuine, *value});
    } else if (key == "spam") {
      table.entries.push_back({CallClass::kSpam, *value});
    } else {
      throw FormatError(fmt::format("prototypes: line {}: unknown class '{}'", line_number, key));
    }
  }
  try {
    table.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(fmt::format("prototypes: {}", e.what()));
  }
  return table;
}

PrototypeTable load_prototypes(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError(fmt::format("cannot open prototype table '{}'", path.string()));
  std::ostringstream contents;
  contents << file.rdbuf();
  try {
    return parse_prototypes(contents.str());
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string serialize_prototypes(const PrototypeTable& table) {
  std::string out = "# class|absolute_mean\n";
  out += fmt::format("scale|{}\n", table.scale);
  for (const auto& p : table.entries) {
    out += fmt::format("{}|{}\n", to_string(p.label), p.absolute_mean);
  }
  return out;
}

void save_prototypes(const PrototypeTable& table, const std::filesystem::path& path) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError(fmt::format("cannot write prototype table '{}'", path.string()));
  file << serialize_prototypes(table);
  if (!file.flush()) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

NearestPrototype nn_classify(double absolute_mean, const PrototypeTable& table) {
  if (table.entries.empty()) throw InvalidArgument("nn_classify: empty prototype table");
  table.validate();

  std::optional<NearestPrototype> best_genuine;
  std::optional<NearestPrototype> best_spam;
  for (const auto& p : table.entries) {
    const double d = std::abs(absolute_mean - p.absolute_mean);
    auto& best = p.label == CallClass::kGenuine ? best_genuine : best_spam;
    if (!best || d < best->distance) best = NearestPrototype{p.label, p.absolute_mean, d};
  }
  return best_spam->distance < best_genuine->distance ? *best_spam : *best_genuine;
}

double calibrate_scale(std::span<const double> measured_genuine_means,
                       const PrototypeTable& table) {
  if (measured_genuine_means.empty()) {
    throw InvalidArgument("calibration needs at least one genuine measurement");
  }
  double prototype_sum = 0.0;
  std::size_t prototype_count = 0;
  for (const auto& p : table.entries) {
    if (p.label != CallClass::kGenuine) continue;
    prototype_sum += p.absolute_mean;
    ++prototype_count;
  }
  if (prototype_count == 0) throw InvalidArgument("calibration needs genuine prototypes");
  const double measured_mean =
      std::accumulate(measured_genuine_means.begin(), measured_genuine_means.end(), 0.0) /
      static_cast<double>(measured_genuine_means.size());
  if (!(measured_mean > 0.0)) {
    throw InvalidArgument("measured genuine absolute means must be positive");
  }
  return (prototype_sum / static_cast<double>(prototype_count)) / measured_mean;
}

void MediaRuleParams::validate() const {
  if (min_packets < 1 || no_silence_frames < 1 || long_silence_frames < 1) {
    throw InvalidArgument("media rule thresholds must be at least 1");
  }
}

LayerVerdict insufficient_media(const MediaRuleParams& params, std::string detail) {
  LayerVerdict verdict;
  verdict.decision = params.fail_closed ? Decision::kSpam : Decision::kPass;
  verdict.reasons.emplace_back(kInsufficientMedia);
  if (!detail.empty()) verdict.reasons.push_back(std::move(detail));
  return verdict;
}

LayerVerdict classify_media(const rtp::MediaStream& stream, const PrototypeTable& table,
                            const MediaRuleParams& params, const features::FrameSpec& spec) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();
  spec.validate();
  table.validate();

  if (stream.samples.size() < spec.frame_length) {
    LayerVerdict verdict = insufficient_media(
        params, fmt::format("{} samples, shorter than one frame", stream.samples.size()));
    verdict.elapsed_seconds = seconds_since(start);
    return verdict;
  }

  const auto silence = features::silence_stats(stream.samples, spec);
  const double mean = features::absolute_mean(stream.samples, table.scale);
  const auto nearest = nn_classify(mean, table);

  LayerVerdict verdict;
  bool spam = false;
  if (stream.packet_count() >= params.min_packets) {
    if (silence.silent_frames == 0 && silence.longest_voiced_run >= params.no_silence_frames) {
      spam = true;
      verdict.reasons.push_back(fmt::format("no-silence: {} voiced frames without a silent frame",
                                            silence.longest_voiced_run));
    }
    if (silence.longest_silent_run >= params.long_silence_frames) {
      spam = true;
      verdict.reasons.push_back(
          fmt::format("long-silence: {} consecutive silent frames", silence.longest_silent_run));
    }
  } else {
    verdict.reasons.push_back(fmt::format("silence rules skipped: {} packets < {}",
                                          stream.packet_count(), params.min_packets));
  }
  verdict.reasons.push_back(fmt::format("nearest prototype: {} {:.3f} (absolute mean {:.3f}, distance {:.3f})",
                                        to_string(nearest.label), nearest.prototype_mean, mean,
                                        nearest.distance));
  if (nearest.label == CallClass::kSpam) spam = true;

  verdict.decision = spam ? Decision::kSpam : Decision::kPass;
  verdict.elapsed_seconds = seconds_since(start);
  return verdict;
}

}  // namespace spitgate
