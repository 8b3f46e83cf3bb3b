#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tutor/pause.hpp"

namespace tutor {

/// Labels emitted by the speech-emotion scorer, in wire order.
enum class Emotion { Angry, Calm, Disgust, Fearful, Happy, Neutral, Sad, Surprised };

inline constexpr std::size_t kEmotionCount = 8;
inline constexpr std::array<Emotion, kEmotionCount> kAllEmotions{
    Emotion::Angry, Emotion::Calm,    Emotion::Disgust, Emotion::Fearful,
    Emotion::Happy, Emotion::Neutral, Emotion::Sad,     Emotion::Surprised};

std::string_view to_string(Emotion e);
std::optional<Emotion> parse_emotion(std::string_view name);

/// Probability vector over the eight labels, always normalized.
class EmotionDistribution {
 public:
  EmotionDistribution();  // uniform

  /// Validates and, when the mass is off by more than 1e-6, renormalizes
  /// (logging a warning). Throws Error(InvalidDistribution) for values outside
  /// [0, 1], non-finite values, or zero total mass.
  static EmotionDistribution from_probabilities(const std::array<double, kEmotionCount>& p);

  /// Missing labels are Error(InvalidDistribution); unknown labels too.
  static EmotionDistribution from_map(const std::map<std::string, double>& labelled);

  /// All mass on `e`.
  static EmotionDistribution one_hot(Emotion e);

  /// `mass` on `e`, the remainder on `rest`.
  static EmotionDistribution split(Emotion e, double mass, Emotion rest = Emotion::Neutral);

  double operator[](Emotion e) const { return p_[static_cast<std::size_t>(e)]; }
  const std::array<double, kEmotionCount>& values() const { return p_; }
  bool was_renormalized() const { return renormalized_; }

 private:
  std::array<double, kEmotionCount> p_{};
  bool renormalized_ = false;
};

/// Bitmask over Emotion.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<Emotion> labels) {
    for (auto e : labels) bits_ |= bit(e);
  }

  constexpr bool contains(Emotion e) const { return (bits_ & bit(e)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool subset_of(LabelSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr unsigned bits() const { return bits_; }
  constexpr bool operator==(const LabelSet&) const = default;

 private:
  static constexpr unsigned bit(Emotion e) { return 1u << static_cast<unsigned>(e); }
  unsigned bits_ = 0;
};

struct AggregationSetup {
  std::string name;
  LabelSet labels{Emotion::Angry};
  double threshold = 0.4;

  void validate() const;  // Error(InvalidConfig)
};

/// The six named aggregation presets: ADFS, ADF, AD, AF, DF, A (threshold 0.4).
const std::vector<AggregationSetup>& aggregation_presets();
std::optional<AggregationSetup> find_preset(std::string_view name);
AggregationSetup default_aggregation();  // A @ 0.4

enum class NegativeClass { Negative, NotNegative };

struct DistressDecision {
  bool negative_affect = false;
  bool pauses = false;
  bool distressed = false;
  double negative_score = 0.0;
};

double aggregate_negative(const EmotionDistribution& dist, LabelSet labels);
inline double aggregate_negative(const EmotionDistribution& dist, const AggregationSetup& setup) {
  return aggregate_negative(dist, setup.labels);
}

NegativeClass classify_negative(double score, double threshold);

DistressDecision decide_distress(const EmotionDistribution& dist, const PauseProfile& profile,
                                 const AggregationSetup& setup,
                                 const PauseThresholdConfig& pause_config);

}  // namespace tutor
