#include "tutor/eval.hpp"

#include <algorithm>
#include <exception>
#include <mutex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tutor/assets.hpp"
#include "tutor/audio.hpp"
#include "tutor/digest.hpp"
#include "tutor/error.hpp"
#include "tutor/grammar.hpp"

namespace tutor {

namespace fs = std::filesystem;

std::string_view to_string(ClipLabel l) {
  switch (l) {
    case ClipLabel::Unusable: return "Unusable";
    case ClipLabel::Negative: return "Negative";
    case ClipLabel::Pauses: return "Pauses";
    case ClipLabel::Neutral: return "Neutral";
  }
  return "?";
}

std::optional<ClipLabel> parse_clip_label(std::string_view name) {
  const std::string lower = to_lower(trim(name));
  for (auto l : {ClipLabel::Unusable, ClipLabel::Negative, ClipLabel::Pauses, ClipLabel::Neutral}) {
    if (to_lower(to_string(l)) == lower) return l;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.emplace_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

/// Non-empty lines with any trailing '\r' removed; the first is the header.
std::vector<std::string> data_lines(const fs::path& path, std::string_view expected_first_column) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::MalformedFile, "cannot read " + path.string());
  }
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) lines.push_back(std::move(line));
    pos = nl + 1;
  }
  if (lines.empty() || trim(split_tabs(lines.front()).front()) != expected_first_column) {
    throw Error(ErrorCode::MalformedFile,
                path.string() + ": header row starting with '" + std::string(expected_first_column) +
                    "' required");
  }
  lines.erase(lines.begin());
  return lines;
}

template <typename Fn>
void parallel_for_each_index(std::size_t n, Fn&& fn) {
  std::exception_ptr failure;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::string_view direction_name(ThresholdDirection d) {
  return d == ThresholdDirection::AtOrAboveIsPauses ? "at_or_above" : "below";
}

}  // namespace

IngestResult ingest_dataset(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorCode::MalformedFile, "manifest not found: " + manifest_path.string());
  }
  const fs::path base = manifest_path.parent_path();
  IngestResult result;
  std::size_t line_no = 1;
  for (const auto& line : data_lines(manifest_path, "clip_path")) {
    ++line_no;
    const auto fields = split_tabs(line);
    if (fields.size() < 2) {
      throw Error(ErrorCode::MalformedFile, fmt::format("manifest line {}: expected clip_path<TAB>label", line_no));
    }
    const auto label = parse_clip_label(fields[1]);
    if (!label) {
      throw Error(ErrorCode::UnknownLabel, fmt::format("manifest line {}: label '{}'", line_no, fields[1]));
    }
    ++result.rows;
    if (*label == ClipLabel::Unusable) {
      ++result.unusable_dropped;
      continue;
    }
    fs::path clip = trim(fields[0]);
    if (clip.is_relative()) clip = base / clip;
    if (!fs::is_regular_file(clip)) {
      throw Error(ErrorCode::MissingClipFile, fmt::format("manifest line {}: {}", line_no, clip.string()));
    }
    result.clips.push_back({clip, fields.size() > 2 ? fields[2] : std::string{}, *label});
    switch (*label) {
      case ClipLabel::Negative: ++result.negative; break;
      case ClipLabel::Pauses: ++result.pauses; break;
      default: ++result.neutral; break;
    }
  }
  if (result.clips.empty()) throw Error(ErrorCode::EmptyDataset, "no usable clips in manifest");
  spdlog::info("ingested {} clips, dropped {} unusable", result.clips.size(), result.unusable_dropped);
  return result;
}

std::array<double, kSweepSteps> sweep_thresholds() {
  std::array<double, kSweepSteps> t{};
  for (std::size_t k = 0; k < kSweepSteps; ++k) t[k] = static_cast<double>(k + 1) / 10.0;
  return t;
}

// ---- pause sweep -----------------------------------------------------------

namespace {

struct PauseCounts {
  std::size_t neutral_total = 0, pauses_total = 0;
};

PauseCounts count_classes(std::span<const MetricSample> samples) {
  PauseCounts c;
  for (const auto& s : samples) {
    if (s.label == ClipLabel::Neutral) ++c.neutral_total;
    if (s.label == ClipLabel::Pauses) ++c.pauses_total;
  }
  if (c.neutral_total == 0 || c.pauses_total == 0) {
    throw Error(ErrorCode::EmptySubset, "pause sweep needs both Pauses and Neutral clips");
  }
  return c;
}

PauseSweepRow pause_row(std::span<const MetricSample> samples, const PauseCounts& totals,
                        double threshold, ThresholdDirection direction) {
  std::size_t neutral_ok = 0, pauses_ok = 0;
  for (const auto& s : samples) {
    const PauseClass c = classify_pause_value(s.value, threshold, direction);
    if (s.label == ClipLabel::Neutral && c == PauseClass::Neutral) ++neutral_ok;
    if (s.label == ClipLabel::Pauses && c == PauseClass::Pauses) ++pauses_ok;
  }
  return {threshold, 100.0 * static_cast<double>(neutral_ok) / static_cast<double>(totals.neutral_total),
          100.0 * static_cast<double>(pauses_ok) / static_cast<double>(totals.pauses_total)};
}

void mark_best(PauseSweepReport& r) {
  double best = -1.0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const double score = r.rows[i].neutral_pct + r.rows[i].pauses_pct;
    if (score > best) {
      best = score;
      r.best_row = i;
    }
  }
}

}  // namespace

PauseSweepReport sweep_pause_thresholds_serial(std::span<const MetricSample> samples,
                                               PauseMetric metric, ThresholdDirection direction) {
  const PauseCounts totals = count_classes(samples);
  PauseSweepReport r{metric, direction, {}, 0};
  for (double t : sweep_thresholds()) r.rows.push_back(pause_row(samples, totals, t, direction));
  mark_best(r);
  return r;
}

PauseSweepReport sweep_pause_thresholds(std::span<const MetricSample> samples, PauseMetric metric,
                                        ThresholdDirection direction) {
  const PauseCounts totals = count_classes(samples);
  const auto thresholds = sweep_thresholds();
  PauseSweepReport r{metric, direction, std::vector<PauseSweepRow>(kSweepSteps), 0};
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < kSweepSteps; ++k) {
    r.rows[k] = pause_row(samples, totals, thresholds[k], direction);
  }
  mark_best(r);
  return r;
}

namespace {

PauseProfile profile_one(const LabeledClip& clip, const VadConfig& vad) {
  const AudioClip audio = decode_wav(read_text_file(clip.clip_path));
  return compute_pause_profile(audio.duration(), detect_speech(audio, vad));
}

}  // namespace

std::vector<PauseProfile> profile_clips(std::span<const LabeledClip> clips, const VadConfig& vad) {
  std::vector<PauseProfile> out(clips.size());
  parallel_for_each_index(clips.size(), [&](std::size_t i) { out[i] = profile_one(clips[i], vad); });
  return out;
}

std::vector<PauseProfile> profile_clips_serial(std::span<const LabeledClip> clips, const VadConfig& vad) {
  std::vector<PauseProfile> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back(profile_one(c, vad));
  return out;
}

std::vector<MetricSample> metric_samples(std::span<const LabeledClip> clips,
                                         std::span<const PauseProfile> profiles, PauseMetric metric) {
  if (clips.size() != profiles.size()) throw Error(ErrorCode::LengthMismatch, "clips vs profiles");
  std::vector<MetricSample> out;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].label == ClipLabel::Pauses || clips[i].label == ClipLabel::Neutral) {
      out.push_back({metric_value(profiles[i], metric), clips[i].label});
    }
  }
  return out;
}

// ---- emotion sweep ---------------------------------------------------------

double EmotionSetupRow::best_threshold() const { return sweep_thresholds()[best_index]; }

namespace {

struct EmotionInputs {
  std::vector<ClipLabel> truth;
  std::vector<std::vector<double>> scores;  // [setup][sample]
};

EmotionInputs prepare(std::span<const EmotionSample> samples) {
  EmotionInputs in;
  const auto& presets = aggregation_presets();
  in.scores.resize(presets.size());
  for (const auto& s : samples) {
    if (s.label != ClipLabel::Negative && s.label != ClipLabel::Neutral) continue;
    in.truth.push_back(s.label);
    for (std::size_t p = 0; p < presets.size(); ++p) {
      in.scores[p].push_back(aggregate_negative(s.distribution, presets[p]));
    }
  }
  if (in.truth.empty()) throw Error(ErrorCode::EmptySubset, "emotion sweep needs Negative or Neutral clips");
  return in;
}

double emotion_cell(const EmotionInputs& in, std::size_t setup, double threshold) {
  std::vector<ClipLabel> pred(in.truth.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] = classify_negative(in.scores[setup][i], threshold) == NegativeClass::Negative
                  ? ClipLabel::Negative
                  : ClipLabel::Neutral;
  }
  return weighted_f1(in.truth, pred);
}

EmotionSweepReport assemble(std::vector<std::array<double, kSweepSteps>> cells) {
  const auto& presets = aggregation_presets();
  EmotionSweepReport r;
  double best = -1.0;
  for (std::size_t p = 0; p < presets.size(); ++p) {
    EmotionSetupRow row{presets[p].name, cells[p], 0};
    for (std::size_t k = 1; k < kSweepSteps; ++k) {
      if (row.f1[k] > row.f1[row.best_index]) row.best_index = k;
    }
    if (row.best_f1() > best) {
      best = row.best_f1();
      r.best_setup = p;
    }
    r.rows.push_back(std::move(row));
  }
  return r;
}

}  // namespace

EmotionSweepReport sweep_emotion_setups_serial(std::span<const EmotionSample> samples) {
  const EmotionInputs in = prepare(samples);
  const auto thresholds = sweep_thresholds();
  std::vector<std::array<double, kSweepSteps>> cells(in.scores.size());
  for (std::size_t p = 0; p < cells.size(); ++p) {
    for (std::size_t k = 0; k < kSweepSteps; ++k) cells[p][k] = emotion_cell(in, p, thresholds[k]);
  }
  return assemble(std::move(cells));
}

EmotionSweepReport sweep_emotion_setups(std::span<const EmotionSample> samples) {
  const EmotionInputs in = prepare(samples);
  const auto thresholds = sweep_thresholds();
  const std::size_t setups = in.scores.size();
  std::vector<std::array<double, kSweepSteps>> cells(setups);
  const auto total = static_cast<long>(setups * kSweepSteps);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < total; ++c) {
    const auto p = static_cast<std::size_t>(c) / kSweepSteps;
    const auto k = static_cast<std::size_t>(c) % kSweepSteps;
    cells[p][k] = emotion_cell(in, p, thresholds[k]);
  }
  return assemble(std::move(cells));
}

ScoreCache::ScoreCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

std::optional<EmotionDistribution> ScoreCache::get(const std::string& key) const {
  const fs::path file = dir_ / (key + ".json");
  if (!fs::exists(file)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_text_file(file));
    return EmotionDistribution::from_map(j.at("probabilities").get<std::map<std::string, double>>());
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", file.string(), e.what());
    return std::nullopt;
  }
}

void ScoreCache::put(const std::string& key, const EmotionDistribution& dist) const {
  nlohmann::json probs = nlohmann::json::object();
  for (auto e : kAllEmotions) probs[std::string(to_string(e))] = dist[e];
  write_file_atomic(dir_ / (key + ".json"), nlohmann::json{{"probabilities", probs}}.dump());
}

std::vector<EmotionSample> score_clips(std::span<const LabeledClip> clips, EmotionScorer& scorer,
                                       const ScoreCache* cache) {
  std::vector<EmotionSample> out;
  for (const auto& clip : clips) {
    if (clip.label != ClipLabel::Negative && clip.label != ClipLabel::Neutral) continue;
    const std::string bytes = read_text_file(clip.clip_path);
    const std::string key = sha256_hex(bytes);
    std::optional<EmotionDistribution> dist = cache ? cache->get(key) : std::nullopt;
    if (!dist) {
      dist = scorer.score(decode_wav(bytes));
      if (cache) cache->put(key, *dist);
    }
    out.push_back({*dist, clip.label});
  }
  return out;
}

// ---- metrics ---------------------------------------------------------------

double weighted_f1(std::span<const ClipLabel> truth, std::span<const ClipLabel> predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorCode::LengthMismatch, "truth vs predictions");
  if (truth.empty()) throw Error(ErrorCode::Empty, "no labels");
  constexpr std::size_t kClasses = 4;
  std::array<std::size_t, kClasses> tp{}, fp{}, fn{}, support{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    ++support[t];
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < kClasses; ++c) {
    if (support[c] == 0 || tp[c] == 0) continue;
    const double f1 = 2.0 * static_cast<double>(tp[c]) /
                      static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    sum += static_cast<double>(support[c]) * f1;
  }
  return sum / static_cast<double>(truth.size());
}

GrammarEvalResult grammar_eval(std::span<const std::pair<std::string, std::string>> pred_gold) {
  if (pred_gold.empty()) throw Error(ErrorCode::Empty, "no prediction/gold pairs");
  std::size_t em = 0, sm = 0;
  for (const auto& [pred, gold] : pred_gold) {
    em += exact_match(pred, gold) ? 1 : 0;
    sm += substring_match(pred, gold) ? 1 : 0;
  }
  const auto n = static_cast<double>(pred_gold.size());
  return {static_cast<double>(em) / n, static_cast<double>(sm) / n, pred_gold.size()};
}

std::vector<std::pair<std::string, std::string>> load_grammar_pairs(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 1;
  for (const auto& line : data_lines(path, "prediction")) {
    ++line_no;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw Error(ErrorCode::MalformedFile, fmt::format("{} line {}: expected prediction<TAB>gold",
                                                        path.string(), line_no));
    }
    out.emplace_back(fields[0], fields[1]);
  }
  return out;
}

// ---- rendering -------------------------------------------------------------

std::string render_ingest(const IngestResult& r) {
  std::string out = fmt::format("{:<10}{:>8}\n", "Label", "Count");
  out += fmt::format("{:<10}{:>8}\n", "Unusable", r.unusable_dropped);
  out += fmt::format("{:<10}{:>8}\n", "Negative", r.negative);
  out += fmt::format("{:<10}{:>8}\n", "Pauses", r.pauses);
  out += fmt::format("{:<10}{:>8}\n", "Neutral", r.neutral);
  out += fmt::format("retained {} of {} rows ({} unusable dropped)\n", r.clips.size(), r.rows,
                     r.unusable_dropped);
  return out;
}

nlohmann::json to_json(const IngestResult& r) {
  return {{"rows", r.rows},
          {"retained", r.clips.size()},
          {"counts",
           {{"Unusable", r.unusable_dropped},
            {"Negative", r.negative},
            {"Pauses", r.pauses},
            {"Neutral", r.neutral}}}};
}

std::string render_table(const PauseSweepReport& r) {
  std::string out = fmt::format("metric: {}  direction: {}\n", to_string(r.metric), direction_name(r.direction));
  out += fmt::format("{:>9}  {:>8}  {:>8}\n", "Threshold", "Neutral%", "Pauses%");
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    out += fmt::format("{:>9.1f}  {:>8.1f}  {:>8.1f}{}\n", row.threshold, row.neutral_pct,
                       row.pauses_pct, i == r.best_row ? "  *" : "");
  }
  return out;
}

nlohmann::json to_json(const PauseSweepReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"threshold", row.threshold},
                    {"neutral_pct", row.neutral_pct},
                    {"pauses_pct", row.pauses_pct}});
  }
  return {{"metric", to_string(r.metric)},
          {"direction", direction_name(r.direction)},
          {"rows", rows},
          {"best_row", r.best_row}};
}

std::string render_table(const EmotionSweepReport& r) {
  std::string out = fmt::format("{:<6}", "Setup");
  for (double t : sweep_thresholds()) out += fmt::format("{:>7.1f}", t);
  out += fmt::format("{:>9}{:>7}\n", "Best-F1", "at");
  for (std::size_t p = 0; p < r.rows.size(); ++p) {
    const auto& row = r.rows[p];
    out += fmt::format("{:<6}", row.setup);
    for (double f : row.f1) out += fmt::format("{:>7.3f}", f);
    out += fmt::format("{:>9.3f}{:>7.1f}{}\n", row.best_f1(), row.best_threshold(),
                       p == r.best_setup ? "  *" : "");
  }
  return out;
}

nlohmann::json to_json(const EmotionSweepReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"setup", row.setup},
                    {"weighted_f1", row.f1},
                    {"best_threshold", row.best_threshold()},
                    {"best_f1", row.best_f1()}});
  }
  return {{"thresholds", sweep_thresholds()}, {"rows", rows}, {"best_setup", r.rows.at(r.best_setup).setup}};
}

std::string render_table(const GrammarEvalResult& r) {
  return fmt::format("{:<6}{:>8}\n{:<6}{:>8.3f}\n{:<6}{:>8.3f}\npairs {}\n", "", "rate", "EM",
                     r.exact_match_rate, "SM", r.substring_match_rate, r.pairs);
}

nlohmann::json to_json(const GrammarEvalResult& r) {
  return {{"exact_match_rate", r.exact_match_rate},
          {"substring_match_rate", r.substring_match_rate},
          {"pairs", r.pairs}};
}

}  // namespace tutor
