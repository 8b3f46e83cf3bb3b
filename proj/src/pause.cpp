#include "tutor/pause.hpp"

#include <algorithm>

#include "tutor/error.hpp"

namespace tutor {

std::string_view to_string(PauseMetric m) {
  switch (m) {
    case PauseMetric::SilenceRatio: return "silence_ratio";
    case PauseMetric::PauseRate: return "pause_rate";
    case PauseMetric::AvgPauseLength: return "avg_pause_length";
  }
  return "?";
}

std::optional<PauseMetric> parse_pause_metric(std::string_view name) {
  for (auto m : {PauseMetric::SilenceRatio, PauseMetric::PauseRate, PauseMetric::AvgPauseLength}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

void PauseThresholdConfig::validate() const {
  if (threshold < 0.0) throw Error(ErrorCode::InvalidConfig, "pause threshold must be >= 0");
}

double metric_value(const PauseProfile& profile, PauseMetric metric) {
  switch (metric) {
    case PauseMetric::SilenceRatio: return profile.silence_ratio;
    case PauseMetric::PauseRate: return profile.pause_rate;
    case PauseMetric::AvgPauseLength: return profile.avg_pause_length;
  }
  return 0.0;
}

PauseProfile compute_pause_profile(double clip_duration, const SegmentList& segments) {
  if (!(clip_duration > 0.0)) throw Error(ErrorCode::ZeroDuration, "clip has no duration");

  double speech = 0.0;
  double gaps = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.start < 0.0 || s.end > clip_duration || s.start >= s.end) {
      throw Error(ErrorCode::InvalidArgument, "segment outside the clip or empty");
    }
    speech += s.end - s.start;
    if (i > 0) {
      const double gap = s.start - segments[i - 1].end;
      if (gap <= 0.0) throw Error(ErrorCode::InvalidArgument, "segments overlap or are unsorted");
      gaps += gap;
      ++count;
    }
  }

  PauseProfile p;
  p.clip_duration = clip_duration;
  p.silence_ratio = std::clamp((clip_duration - speech) / clip_duration, 0.0, 1.0);
  p.pause_count = count;
  p.pause_rate = count / clip_duration;
  p.avg_pause_length = count > 0 ? gaps / count : 0.0;
  return p;
}

PauseClass classify_pause_value(double value, double threshold, ThresholdDirection direction) {
  const bool pauses = direction == ThresholdDirection::AtOrAboveIsPauses ? value >= threshold
                                                                         : value < threshold;
  return pauses ? PauseClass::Pauses : PauseClass::Neutral;
}

PauseClass classify_pauses(const PauseProfile& profile, const PauseThresholdConfig& config) {
  return classify_pause_value(metric_value(profile, config.metric), config.threshold,
                              config.direction);
}

}  // namespace tutor
