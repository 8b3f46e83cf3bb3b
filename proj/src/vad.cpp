#include "tutor/vad.hpp"

#include <cmath>

#include "tutor/error.hpp"

namespace tutor {

void VadConfig::validate() const {
  if (!(frame_len > 0.0)) throw Error(ErrorCode::InvalidConfig, "frame_len must be positive");
  if (!(hop_len > 0.0)) throw Error(ErrorCode::InvalidConfig, "hop_len must be positive");
  if (hop_len > frame_len) throw Error(ErrorCode::InvalidConfig, "hop_len exceeds frame_len");
  if (energy_threshold < 0.0) throw Error(ErrorCode::InvalidConfig, "negative energy_threshold");
  if (min_gap_len < 0.0 || min_speech_len < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "negative minimum duration");
  }
}

FrameLayout FrameLayout::for_clip(std::size_t num_samples, int sample_rate, const VadConfig& cfg) {
  FrameLayout layout;
  layout.frame = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.frame_len * sample_rate)));
  layout.hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.hop_len * sample_rate)));
  if (num_samples == 0) {
    layout.count = 0;
  } else if (num_samples <= layout.frame) {
    layout.frame = num_samples;
    layout.count = 1;
  } else {
    layout.count = 1 + (num_samples - layout.frame) / layout.hop;
  }
  return layout;
}

std::vector<double> frame_rms_serial(std::span<const float> samples, const FrameLayout& layout) {
  std::vector<double> rms(layout.count);
  for (std::size_t f = 0; f < layout.count; ++f) {
    const float* x = samples.data() + f * layout.hop;
    double acc = 0.0;
    for (std::size_t i = 0; i < layout.frame; ++i) acc += static_cast<double>(x[i]) * x[i];
    rms[f] = std::sqrt(acc / static_cast<double>(layout.frame));
  }
  return rms;
}

std::vector<double> frame_rms_parallel(std::span<const float> samples, const FrameLayout& layout) {
  std::vector<double> rms(layout.count);
  const auto count = static_cast<long long>(layout.count);
  const float* base = samples.data();
#pragma omp parallel for schedule(static)
  for (long long f = 0; f < count; ++f) {
    const float* x = base + static_cast<std::size_t>(f) * layout.hop;
    double acc = 0.0;
    for (std::size_t i = 0; i < layout.frame; ++i) acc += static_cast<double>(x[i]) * x[i];
    rms[static_cast<std::size_t>(f)] = std::sqrt(acc / static_cast<double>(layout.frame));
  }
  return rms;
}

SegmentList detect_speech(const AudioClip& clip, const VadConfig& cfg) {
  cfg.validate();
  if (clip.empty()) return {};

  const FrameLayout layout = FrameLayout::for_clip(clip.samples.size(), clip.sample_rate, cfg);
  const std::vector<double> rms = frame_rms_parallel(clip.samples, layout);

  const double sr = clip.sample_rate;
  const double duration = clip.duration();
  auto center = [&](std::size_t f) {
    return (static_cast<double>(f * layout.hop) + layout.frame / 2.0) / sr;
  };

  SegmentList runs;
  std::size_t f = 0;
  while (f < layout.count) {
    if (rms[f] < cfg.energy_threshold) {
      ++f;
      continue;
    }
    const std::size_t first = f;
    while (f < layout.count && rms[f] >= cfg.energy_threshold) ++f;
    const std::size_t last = f - 1;
    const double start = first == 0 ? 0.0 : center(first);
    const double end = last + 1 == layout.count ? duration : center(last);
    runs.push_back({start, std::min(end, duration)});
  }

  SegmentList merged;
  for (const auto& seg : runs) {
    if (!merged.empty() && seg.start - merged.back().end < cfg.min_gap_len) {
      merged.back().end = seg.end;
    } else {
      merged.push_back(seg);
    }
  }

  SegmentList out;
  for (const auto& seg : merged) {
    if (seg.length() > 0.0 && seg.length() >= cfg.min_speech_len) out.push_back(seg);
  }
  return out;
}

double total_speech(const SegmentList& segments) {
  double total = 0.0;
  for (const auto& s : segments) total += s.length();
  return total;
}

}  // namespace tutor
