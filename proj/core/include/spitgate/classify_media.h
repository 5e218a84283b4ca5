#pragma once

// Second-layer classification from decoded call audio: silence-run rules plus
// a 1-nearest-neighbour match of the stream's absolute mean against labelled
// prototypes.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spitgate/features.h"
#include "spitgate/rtp_media.h"
#include "spitgate/verdict.h"

namespace spitgate {

struct Prototype {
  CallClass label = CallClass::kGenuine;
  double absolute_mean = 0.0;

  friend bool operator==(const Prototype&, const Prototype&) = default;
};

struct PrototypeTable {
  std::vector<Prototype> entries;
  // Multiplies measured absolute means into prototype units.
  double scale = 1.0;

  // Throws InvalidArgument unless both classes are present, every mean is
  // non-negative and the scale is positive.
  void validate() const;

  friend bool operator==(const PrototypeTable&, const PrototypeTable&) = default;
};

// The four genuine and four spam reference samples, scale 1.
PrototypeTable default_prototypes();

// "scale|<real>" (optional, first non-comment line) then "class|mean" lines.
PrototypeTable parse_prototypes(std::string_view text);
PrototypeTable load_prototypes(const std::filesystem::path& path);
std::string serialize_prototypes(const PrototypeTable& table);
void save_prototypes(const PrototypeTable& table, const std::filesystem::path& path);

struct NearestPrototype {
  CallClass label = CallClass::kGenuine;
  double prototype_mean = 0.0;
  double distance = 0.0;
};

// Equal distances across classes resolve to genuine.
NearestPrototype nn_classify(double absolute_mean, const PrototypeTable& table);

// mean(genuine prototype means) / mean(measured genuine absolute means), the
// measured values taken at scale 1.
double calibrate_scale(std::span<const double> measured_genuine_means,
                       const PrototypeTable& table);

struct MediaRuleParams {
  // Silence rules are only judged on streams with at least this many packets.
  std::size_t min_packets = 50;
  // No silent frame at all and a voiced run at least this long (100 = 3 s).
  std::size_t no_silence_frames = 100;
  // A silent run at least this long (200 = 6 s).
  std::size_t long_silence_frames = 200;
  // Verdict for streams too short to analyse.
  bool fail_closed = false;

  void validate() const;
};

inline constexpr std::string_view kInsufficientMedia = "insufficient media";

LayerVerdict classify_media(const rtp::MediaStream& stream, const PrototypeTable& table,
                            const MediaRuleParams& params,
                            const features::FrameSpec& spec);

// Verdict used when no analysable stream exists at all.
LayerVerdict insufficient_media(const MediaRuleParams& params, std::string detail = {});

}  // namespace spitgate
