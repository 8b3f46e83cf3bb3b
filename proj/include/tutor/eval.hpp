#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tutor/affect.hpp"
#include "tutor/models.hpp"
#include "tutor/pause.hpp"
#include "tutor/vad.hpp"

namespace tutor {

enum class ClipLabel { Unusable, Negative, Pauses, Neutral };
std::string_view to_string(ClipLabel l);
std::optional<ClipLabel> parse_clip_label(std::string_view name);

struct LabeledClip {
  std::filesystem::path clip_path;
  std::string transcript;
  ClipLabel label = ClipLabel::Neutral;
};

struct IngestResult {
  std::vector<LabeledClip> clips;  // Unusable removed
  std::size_t rows = 0;
  std::size_t unusable_dropped = 0;
  std::size_t negative = 0;
  std::size_t pauses = 0;
  std::size_t neutral = 0;
};

/// Tab-separated manifest with a header row: clip_path, label, transcript.
/// Relative clip paths resolve against the manifest's directory.
/// Errors: MissingClipFile, UnknownLabel, EmptyDataset (no usable rows), MalformedFile.
IngestResult ingest_dataset(const std::filesystem::path& manifest_path);

inline constexpr std::size_t kSweepSteps = 9;
/// 0.1 ... 0.9, computed as k/10 so every value is the nearest double.
std::array<double, kSweepSteps> sweep_thresholds();

// ---- pause sweep -----------------------------------------------------------

struct MetricSample {
  double value = 0.0;
  ClipLabel label = ClipLabel::Neutral;  // Pauses or Neutral
};

struct PauseSweepRow {
  double threshold = 0.0;
  double neutral_pct = 0.0;  // recall of Neutral, percent
  double pauses_pct = 0.0;   // recall of Pauses, percent
};

struct PauseSweepReport {
  PauseMetric metric = PauseMetric::AvgPauseLength;
  ThresholdDirection direction = ThresholdDirection::AtOrAboveIsPauses;
  std::vector<PauseSweepRow> rows;
  std::size_t best_row = 0;  // highest mean of the two recalls, lowest threshold on ties
};

/// Errors: EmptySubset unless both classes are present. Samples with other labels are ignored.
PauseSweepReport sweep_pause_thresholds(std::span<const MetricSample> samples, PauseMetric metric,
                                        ThresholdDirection direction);
PauseSweepReport sweep_pause_thresholds_serial(std::span<const MetricSample> samples,
                                               PauseMetric metric, ThresholdDirection direction);

/// Decodes each clip and runs VAD + pause profiling. Parallel over clips.
std::vector<PauseProfile> profile_clips(std::span<const LabeledClip> clips, const VadConfig& vad = {});
std::vector<PauseProfile> profile_clips_serial(std::span<const LabeledClip> clips,
                                               const VadConfig& vad = {});

std::vector<MetricSample> metric_samples(std::span<const LabeledClip> clips,
                                         std::span<const PauseProfile> profiles, PauseMetric metric);

// ---- emotion sweep ---------------------------------------------------------

struct EmotionSample {
  EmotionDistribution distribution;
  ClipLabel label = ClipLabel::Neutral;  // Negative or Neutral
};

struct EmotionSetupRow {
  std::string setup;
  std::array<double, kSweepSteps> f1{};
  std::size_t best_index = 0;  // lowest threshold on ties
  double best_f1() const { return f1[best_index]; }
  double best_threshold() const;
};

struct EmotionSweepReport {
  std::vector<EmotionSetupRow> rows;  // aggregation_presets() order
  std::size_t best_setup = 0;
};

/// Weighted F1 over {Negative, Neutral} for every preset x threshold.
/// Errors: EmptySubset unless at least one Negative or Neutral sample.
EmotionSweepReport sweep_emotion_setups(std::span<const EmotionSample> samples);
EmotionSweepReport sweep_emotion_setups_serial(std::span<const EmotionSample> samples);

/// Per-clip scorer output cached on disk, keyed by the sha256 of the clip file.
class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path dir);
  std::optional<EmotionDistribution> get(const std::string& key) const;
  void put(const std::string& key, const EmotionDistribution& dist) const;  // atomic write
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// Scores the Negative and Neutral clips, consulting `cache` when given.
std::vector<EmotionSample> score_clips(std::span<const LabeledClip> clips, EmotionScorer& scorer,
                                       const ScoreCache* cache = nullptr);

// ---- metrics ---------------------------------------------------------------

/// Support-weighted mean of per-class F1 over the classes present in `truth`.
/// Errors: LengthMismatch, Empty.
double weighted_f1(std::span<const ClipLabel> truth, std::span<const ClipLabel> predicted);

struct GrammarEvalResult {
  double exact_match_rate = 0.0;
  double substring_match_rate = 0.0;
  std::size_t pairs = 0;
};

/// Errors: Empty.
GrammarEvalResult grammar_eval(std::span<const std::pair<std::string, std::string>> pred_gold);
/// Tab-separated prediction, gold; header row required.
std::vector<std::pair<std::string, std::string>> load_grammar_pairs(const std::filesystem::path& path);

// ---- report rendering ------------------------------------------------------

std::string render_ingest(const IngestResult& r);
nlohmann::json to_json(const IngestResult& r);
std::string render_table(const PauseSweepReport& r);
nlohmann::json to_json(const PauseSweepReport& r);
std::string render_table(const EmotionSweepReport& r);
nlohmann::json to_json(const EmotionSweepReport& r);
std::string render_table(const GrammarEvalResult& r);
nlohmann::json to_json(const GrammarEvalResult& r);

}  // namespace tutor
