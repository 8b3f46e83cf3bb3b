#pragma once

#include <span>
#include <vector>

#include "tutor/audio.hpp"

namespace tutor {

struct SpeechSegment {
  double start = 0.0;  // seconds
  double end = 0.0;    // seconds

  double length() const { return end - start; }
  bool operator==(const SpeechSegment&) const = default;
};

/// Sorted, pairwise disjoint speech segments with strictly positive gaps.
using SegmentList = std::vector<SpeechSegment>;

/// Frame-energy VAD parameters. All durations in seconds.
struct VadConfig {
  double frame_len = 0.030;
  double hop_len = 0.010;
  double energy_threshold = 0.01;  // RMS, on the [-1, 1] sample scale
  double min_gap_len = 0.2;
  double min_speech_len = 0.1;

  // Throws Error(InvalidConfig) when a field is out of range.
  void validate() const;
};

/// Frame geometry for a given clip length, in samples.
struct FrameLayout {
  std::size_t frame = 0;
  std::size_t hop = 0;
  std::size_t count = 0;

  static FrameLayout for_clip(std::size_t num_samples, int sample_rate, const VadConfig& cfg);
};

/// Per-frame RMS. The OpenMP kernel is what detect_speech runs; the serial
/// version is the reference it is tested and benchmarked against.
std::vector<double> frame_rms_serial(std::span<const float> samples, const FrameLayout& layout);
std::vector<double> frame_rms_parallel(std::span<const float> samples, const FrameLayout& layout);

/// Locates speech in the clip.
///
/// A frame is speech when its RMS reaches the energy threshold. Runs of speech
/// frames become segments whose boundaries sit at the centre of the first and
/// last frame of the run; a run touching the first (last) frame extends to the
/// start (end) of the clip. Gaps shorter than min_gap_len are merged, then
/// segments shorter than min_speech_len are dropped. Silence gives an empty list.
SegmentList detect_speech(const AudioClip& clip, const VadConfig& cfg = {});

/// Total speech time in seconds.
double total_speech(const SegmentList& segments);

}  // namespace tutor
