#pragma once

#include <optional>
#include <string_view>

#include "tutor/vad.hpp"

namespace tutor {

/// Pause statistics for one clip. Durations in seconds.
struct PauseProfile {
  double silence_ratio = 0.0;     // all silence (leading/trailing included) over clip length
  double pause_rate = 0.0;        // inter-segment gaps per second
  double avg_pause_length = 0.0;  // mean inter-segment gap, 0 without gaps
  int pause_count = 0;
  double clip_duration = 0.0;
};

enum class PauseMetric { SilenceRatio, PauseRate, AvgPauseLength };
enum class ThresholdDirection { AtOrAboveIsPauses, BelowIsPauses };
enum class PauseClass { Pauses, Neutral };

std::string_view to_string(PauseMetric m);
std::optional<PauseMetric> parse_pause_metric(std::string_view name);

struct PauseThresholdConfig {
  PauseMetric metric = PauseMetric::AvgPauseLength;
  double threshold = 0.5;
  ThresholdDirection direction = ThresholdDirection::AtOrAboveIsPauses;

  void validate() const;  // Error(InvalidConfig) on a negative threshold
};

double metric_value(const PauseProfile& profile, PauseMetric metric);

/// Only gaps between speech segments count as pauses.
///
/// Throws Error(ZeroDuration) for a zero-length clip and Error(InvalidArgument)
/// when a segment lies outside [0, clip_duration].
PauseProfile compute_pause_profile(double clip_duration, const SegmentList& segments);

PauseClass classify_pauses(const PauseProfile& profile, const PauseThresholdConfig& config);
PauseClass classify_pause_value(double value, double threshold, ThresholdDirection direction);

}  // namespace tutor
