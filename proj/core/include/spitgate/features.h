#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "spitgate/rtp_media.h"

namespace spitgate::features {

struct FrameSpec {
  std::size_t frame_length = 240;  // 30 ms at 8 kHz
  std::size_t hop = 240;
  double silence_threshold = 1e-4;  // mean square on [-1, 1] samples
  std::size_t histogram_bins = 16;

  // Throws InvalidArgument when an invariant is violated.
  void validate() const;
};

// Full windows only; a trailing partial window is dropped.
std::vector<std::span<const double>> frames(std::span<const double> samples,
                                            const FrameSpec& spec);

// Zeros carry the sign of the previous sample (a leading zero run takes the
// sign of the first nonzero one). Throws InvalidArgument below 2 samples.
double zero_crossing_rate(std::span<const double> samples);
double absolute_mean(std::span<const double> samples, double scale = 1.0);
double energy(std::span<const double> samples);
// Shannon entropy in bits of an equal-width histogram over [-1, 1].
double entropy(std::span<const double> samples, std::size_t bins);

struct FeatureVector {
  double zero_crossing_rate = 0.0;
  double absolute_mean = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
};

// Stream-level features over the whole sample sequence.
FeatureVector extract(std::span<const double> samples, const FrameSpec& spec,
                      double scale = 1.0);

struct SilenceStats {
  std::vector<bool> silent;
  double silence_fraction = 0.0;
  std::size_t longest_silent_run = 0;
  std::size_t longest_voiced_run = 0;
  std::size_t silent_frames = 0;

  std::size_t frame_count() const { return silent.size(); }
};

// Throws InvalidArgument when shorter than one frame.
SilenceStats silence_stats(std::span<const double> samples, const FrameSpec& spec);
inline SilenceStats silence_stats(const rtp::MediaStream& stream, const FrameSpec& spec) {
  return silence_stats(stream.samples, spec);
}

}  // namespace spitgate::features
