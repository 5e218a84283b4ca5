#include "spitgate/features.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "spitgate/error.h"

namespace spitgate::features {

void FrameSpec::validate() const {
  if (frame_length < 2) throw InvalidArgument("frame length must be at least 2 samples");
  if (hop < 1 || hop > frame_length) {
    throw InvalidArgument(fmt::format("hop {} outside [1, {}]", hop, frame_length));
  }
  if (!(silence_threshold > 0.0)) throw InvalidArgument("silence threshold must be positive");
  if (histogram_bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
}

std::vector<std::span<const double>> frames(std::span<const double> samples,
                                            const FrameSpec& spec) {
  spec.validate();
  std::vector<std::span<const double>> out;
  for (std::size_t start = 0; start + spec.frame_length <= samples.size(); start += spec.hop) {
    out.push_back(samples.subspan(start, spec.frame_length));
  }
  return out;
}

double zero_crossing_rate(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidArgument("zero crossing rate needs at least 2 samples");
  const auto first_nonzero = std::ranges::find_if(samples, [](double x) { return x != 0.0; });
  if (first_nonzero == samples.end()) return 0.0;

  bool positive = *first_nonzero > 0.0;
  std::size_t crossings = 0;
  for (auto it = first_nonzero + 1; it != samples.end(); ++it) {
    if (*it == 0.0) continue;
    const bool now_positive = *it > 0.0;
    if (now_positive != positive) ++crossings;
    positive = now_positive;
  }
  return static_cast<double>(crossings) / static_cast<double>(samples.size() - 1);
}

double absolute_mean(std::span<const double> samples, double scale) {
  if (samples.empty()) throw InvalidArgument("absolute mean of an empty signal");
  double sum = 0.0;
  for (double x : samples) sum += std::abs(x);
  return scale * sum / static_cast<double>(samples.size());
}

double energy(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("energy of an empty signal");
  double sum = 0.0;
  for (double x : samples) sum += x * x;
  return sum / static_cast<double>(samples.size());
}

double entropy(std::span<const double> samples, std::size_t bins) {
  if (samples.empty()) throw InvalidArgument("entropy of an empty signal");
  if (bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
  std::vector<std::size_t> histogram(bins, 0);
  const double width = static_cast<double>(bins) / 2.0;
  for (double x : samples) {
    const double position = std::floor((std::clamp(x, -1.0, 1.0) + 1.0) * width);
    const auto bin = std::min(static_cast<std::size_t>(position), bins - 1);
    ++histogram[bin];
  }
  const double n = static_cast<double>(samples.size());
  double h = 0.0;
  for (std::size_t count : histogram) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / n;
    h -= p * std::log2(p);
  }
  return std::clamp(h, 0.0, std::log2(static_cast<double>(bins)));
}

FeatureVector extract(std::span<const double> samples, const FrameSpec& spec, double scale) {
  spec.validate();
  return {
      .zero_crossing_rate = zero_crossing_rate(samples),
      .absolute_mean = absolute_mean(samples, scale),
      .energy = energy(samples),
      .entropy = entropy(samples, spec.histogram_bins),
  };
}

SilenceStats silence_stats(std::span<const double> samples, const FrameSpec& spec) {
  const auto windows = frames(samples, spec);
  if (windows.empty()) {
    throw InvalidArgument(fmt::format("stream of {} samples is shorter than one {}-sample frame",
                                      samples.size(), spec.frame_length));
  }
  SilenceStats stats;
  stats.silent.reserve(windows.size());
  std::size_t silent_run = 0;
  std::size_t voiced_run = 0;
  for (const auto& window : windows) {
    const bool silent = energy(window) < spec.silence_threshold;
    stats.silent.push_back(silent);
    if (silent) {
      ++stats.silent_frames;
      ++silent_run;
      voiced_run = 0;
    } else {
      ++voiced_run;
      silent_run = 0;
    }
    stats.longest_silent_run = std::max(stats.longest_silent_run, silent_run);
    stats.longest_voiced_run = std::max(stats.longest_voiced_run, voiced_run);
  }
  stats.silence_fraction =
      static_cast<double>(stats.silent_frames) / static_cast<double>(windows.size());
  return stats;
}

}  // namespace spitgate::features
