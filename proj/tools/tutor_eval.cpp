// Evaluation harness: dataset ingest, pause/emotion threshold sweeps, grammar scoring.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "tutor/assets.hpp"
#include "tutor/audio.hpp"
#include "tutor/error.hpp"
#include "tutor/eval.hpp"
#include "tutor/gateway.hpp"

namespace fs = std::filesystem;
using namespace tutor;

namespace {

void emit(const std::optional<fs::path>& out_dir, const std::string& name, const std::string& table,
          const nlohmann::json& data) {
  std::cout << table;
  if (!out_dir) return;
  fs::create_directories(*out_dir);
  write_file_atomic(*out_dir / (name + ".txt"), table);
  write_file_atomic(*out_dir / (name + ".json"), data.dump(2) + "\n");
}

std::shared_ptr<EmotionScorer> make_scorer(const std::string& endpoint,
                                           const std::optional<fs::path>& stub_table,
                                           const std::vector<LabeledClip>& clips) {
  if (endpoint != "stub") {
    ServiceEndpoint ep;
    ep.kind = ServiceKind::Emotion;
    ep.base_url = endpoint;
    ep.validate();
    RetryPolicy policy;
    policy.max_retries = ep.max_retries;
    return std::make_shared<HttpEmotionScorer>(with_retries(http_json_caller(ep), policy));
  }
  auto stub = std::make_shared<StubEmotionScorer>();
  if (!stub_table) return stub;
  // {"<clip file name>": {"angry": 0.9, ...}, ...}
  const auto table = nlohmann::json::parse(read_text_file(*stub_table));
  for (const auto& clip : clips) {
    const auto key = clip.clip_path.filename().string();
    if (!table.contains(key)) continue;
    stub->script(decode_wav(read_text_file(clip.clip_path)),
                 EmotionDistribution::from_map(table.at(key).get<std::map<std::string, double>>()));
  }
  return stub;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Threshold sweeps and scoring for the tutoring pipeline"};
  app.require_subcommand(1);

  fs::path manifest;
  std::optional<fs::path> out_dir;
  auto add_common = [&](CLI::App* sub, bool needs_manifest) {
    auto* opt = sub->add_option("--manifest", manifest, "TSV manifest: clip_path, label, transcript");
    if (needs_manifest) opt->required();
    sub->add_option("--out", out_dir, "directory for <report>.txt and <report>.json");
  };

  auto* ingest = app.add_subcommand("ingest", "validate a manifest and report label counts");
  add_common(ingest, true);

  std::string metric_name = "avg_pause_length";
  std::string direction = "both";
  auto* pauses = app.add_subcommand("sweep-pauses", "per-class recall over thresholds 0.1..0.9");
  add_common(pauses, true);
  pauses->add_option("--metric", metric_name)
      ->check(CLI::IsMember({"silence_ratio", "pause_rate", "avg_pause_length"}));
  pauses->add_option("--direction", direction)->check(CLI::IsMember({"above", "below", "both"}));

  std::string endpoint = "stub";
  std::optional<fs::path> stub_table;
  std::optional<fs::path> cache_dir;
  auto* emotion = app.add_subcommand("sweep-emotion", "weighted F1 over setups x thresholds");
  add_common(emotion, true);
  emotion->add_option("--endpoint", endpoint, "emotion service URL or \"stub\"");
  emotion->add_option("--stub-table", stub_table, "JSON clip-name -> distribution for the stub");
  emotion->add_option("--cache", cache_dir, "scorer cache directory");

  fs::path pairs_path;
  auto* grammar = app.add_subcommand("grammar-eval", "exact and substring match rates");
  add_common(grammar, false);
  grammar->add_option("--pairs", pairs_path, "TSV: prediction, gold")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto r = ingest_dataset(manifest);
      emit(out_dir, "ingest", render_ingest(r), to_json(r));
    } else if (*pauses) {
      const auto r = ingest_dataset(manifest);
      const auto metric = *parse_pause_metric(metric_name);
      const auto profiles = profile_clips(r.clips);
      const auto samples = metric_samples(r.clips, profiles, metric);
      nlohmann::json data = nlohmann::json::array();
      std::string table;
      for (auto dir : {ThresholdDirection::AtOrAboveIsPauses, ThresholdDirection::BelowIsPauses}) {
        const bool above = dir == ThresholdDirection::AtOrAboveIsPauses;
        if ((direction == "above" && !above) || (direction == "below" && above)) continue;
        const auto report = sweep_pause_thresholds(samples, metric, dir);
        if (!table.empty()) table += '\n';
        table += render_table(report);
        data.push_back(to_json(report));
      }
      emit(out_dir, "sweep_pauses_" + metric_name, table, data);
    } else if (*emotion) {
      const auto r = ingest_dataset(manifest);
      const auto scorer = make_scorer(endpoint, stub_table, r.clips);
      std::optional<ScoreCache> cache;
      if (cache_dir) {
        cache.emplace(*cache_dir);
      } else if (endpoint != "stub") {
        cache.emplace(out_dir.value_or(fs::path(".")) / ".score_cache");
      }
      const auto samples = score_clips(r.clips, *scorer, cache ? &*cache : nullptr);
      const auto report = sweep_emotion_setups(samples);
      emit(out_dir, "sweep_emotion", render_table(report), to_json(report));
    } else if (*grammar) {
      const auto pairs = load_grammar_pairs(pairs_path);
      const auto r = grammar_eval(pairs);
      emit(out_dir, "grammar_eval", render_table(r), to_json(r));
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
