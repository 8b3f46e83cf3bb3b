#include "tutor/affect.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "tutor/error.hpp"

namespace tutor {

std::string_view to_string(Emotion e) {
  switch (e) {
    case Emotion::Angry: return "angry";
    case Emotion::Calm: return "calm";
    case Emotion::Disgust: return "disgust";
    case Emotion::Fearful: return "fearful";
    case Emotion::Happy: return "happy";
    case Emotion::Neutral: return "neutral";
    case Emotion::Sad: return "sad";
    case Emotion::Surprised: return "surprised";
  }
  return "?";
}

std::optional<Emotion> parse_emotion(std::string_view name) {
  for (auto e : kAllEmotions) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

EmotionDistribution::EmotionDistribution() { p_.fill(1.0 / kEmotionCount); }

EmotionDistribution EmotionDistribution::from_probabilities(
    const std::array<double, kEmotionCount>& p) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw Error(ErrorCode::InvalidDistribution, "probability outside [0, 1]");
    }
    sum += v;
  }
  if (sum <= 0.0) throw Error(ErrorCode::InvalidDistribution, "zero total mass");

  EmotionDistribution d;
  d.p_ = p;
  if (std::abs(sum - 1.0) > 1e-6) {
    spdlog::warn("emotion distribution sums to {:.6f}; renormalizing", sum);
    for (double& v : d.p_) v /= sum;
    d.renormalized_ = true;
  }
  return d;
}

EmotionDistribution EmotionDistribution::from_map(const std::map<std::string, double>& labelled) {
  std::array<double, kEmotionCount> p{};
  std::array<bool, kEmotionCount> seen{};
  for (const auto& [name, value] : labelled) {
    const auto e = parse_emotion(name);
    if (!e) throw Error(ErrorCode::InvalidDistribution, "unknown emotion label '" + name + "'");
    p[static_cast<std::size_t>(*e)] = value;
    seen[static_cast<std::size_t>(*e)] = true;
  }
  for (auto e : kAllEmotions) {
    if (!seen[static_cast<std::size_t>(e)]) {
      throw Error(ErrorCode::InvalidDistribution, "missing label '" + std::string(to_string(e)) + "'");
    }
  }
  return from_probabilities(p);
}

EmotionDistribution EmotionDistribution::one_hot(Emotion e) { return split(e, 1.0, e); }

EmotionDistribution EmotionDistribution::split(Emotion e, double mass, Emotion rest) {
  std::array<double, kEmotionCount> p{};
  p[static_cast<std::size_t>(e)] += mass;
  p[static_cast<std::size_t>(rest)] += 1.0 - mass;
  return from_probabilities(p);
}

void AggregationSetup::validate() const {
  if (labels.empty()) throw Error(ErrorCode::InvalidConfig, "aggregation setup has no labels");
  if (threshold < 0.0 || threshold > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "aggregation threshold outside [0, 1]");
  }
}

const std::vector<AggregationSetup>& aggregation_presets() {
  using enum Emotion;
  static const std::vector<AggregationSetup> presets{
      {"ADFS", {Angry, Disgust, Fearful, Sad}, 0.4},
      {"ADF", {Angry, Disgust, Fearful}, 0.4},
      {"AD", {Angry, Disgust}, 0.4},
      {"AF", {Angry, Fearful}, 0.4},
      {"DF", {Disgust, Fearful}, 0.4},
      {"A", {Angry}, 0.4},
  };
  return presets;
}

std::optional<AggregationSetup> find_preset(std::string_view name) {
  for (const auto& p : aggregation_presets()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

AggregationSetup default_aggregation() { return *find_preset("A"); }

double aggregate_negative(const EmotionDistribution& dist, LabelSet labels) {
  double score = 0.0;
  for (auto e : kAllEmotions) {
    if (labels.contains(e)) score += dist[e];
  }
  return std::clamp(score, 0.0, 1.0);
}

NegativeClass classify_negative(double score, double threshold) {
  return score >= threshold ? NegativeClass::Negative : NegativeClass::NotNegative;
}

DistressDecision decide_distress(const EmotionDistribution& dist, const PauseProfile& profile,
                                 const AggregationSetup& setup,
                                 const PauseThresholdConfig& pause_config) {
  DistressDecision d;
  d.negative_score = aggregate_negative(dist, setup);
  d.negative_affect = classify_negative(d.negative_score, setup.threshold) == NegativeClass::Negative;
  d.pauses = classify_pauses(profile, pause_config) == PauseClass::Pauses;
  d.distressed = d.negative_affect || d.pauses;
  return d;
}

}  // namespace tutor
