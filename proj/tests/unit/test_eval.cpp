#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "support/synth.hpp"
#include "tutor/error.hpp"
#include "tutor/eval.hpp"
#include "tutor/gateway.hpp"

using namespace tutor;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ContractViolation;
}

std::vector<MetricSample> random_samples(std::mt19937_64& rng, std::size_t n) {
  // Values on a 0.05 grid so that threshold ties are exercised.
  std::uniform_int_distribution<int> grid(0, 24);
  std::bernoulli_distribution pauses(0.4);
  std::vector<MetricSample> out(n);
  for (auto& s : out) {
    s.value = grid(rng) * 0.05;
    s.label = pauses(rng) ? ClipLabel::Pauses : ClipLabel::Neutral;
  }
  out[0].label = ClipLabel::Pauses;
  out[1].label = ClipLabel::Neutral;
  return out;
}

std::vector<EmotionSample> random_emotion_samples(std::mt19937_64& rng, std::size_t n) {
  std::bernoulli_distribution negative(0.35);
  std::vector<EmotionSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({synth::dyadic_distribution(rng), negative(rng) ? ClipLabel::Negative : ClipLabel::Neutral});
  }
  return out;
}

}  // namespace

TEST(Ingest, DropsUnusableAndResolvesPaths) {
  synth::TempDir dir;
  for (const char* f : {"a.wav", "b.wav", "c.wav"}) synth::write_file(dir / f, encode_wav(make_silence(0.1)));
  synth::write_file(dir / "m.tsv",
                    "clip_path\tlabel\ttranscript\n"
                    "a.wav\tNegative\tI am upset\n"
                    "gone.wav\tUnusable\t\n"
                    "b.wav\tpauses\tum... well\r\n"
                    "\n" +
                        (dir / "c.wav").string() + "\tNeutral\thello\n");
  const auto r = ingest_dataset(dir / "m.tsv");
  EXPECT_EQ(r.rows, 4u);
  EXPECT_EQ(r.unusable_dropped, 1u);
  ASSERT_EQ(r.clips.size(), 3u);
  EXPECT_EQ(r.negative, 1u);
  EXPECT_EQ(r.pauses, 1u);
  EXPECT_EQ(r.neutral, 1u);
  EXPECT_EQ(r.clips[0].clip_path, dir / "a.wav");
  EXPECT_EQ(r.clips[1].transcript, "um... well");
  EXPECT_EQ(r.clips[1].label, ClipLabel::Pauses);
  EXPECT_NE(render_ingest(r).find("retained 3 of 4 rows"), std::string::npos);
  EXPECT_EQ(to_json(r)["counts"]["Unusable"], 1);
}

TEST(Ingest, Errors) {
  synth::TempDir dir;
  synth::write_file(dir / "a.wav", encode_wav(make_silence(0.1)));
  synth::write_file(dir / "angry.tsv", "clip_path\tlabel\na.wav\tangry\n");
  EXPECT_EQ(code_of([&] { ingest_dataset(dir / "angry.tsv"); }), ErrorCode::UnknownLabel);
  synth::write_file(dir / "missing.tsv", "clip_path\tlabel\nnope.wav\tNeutral\n");
  EXPECT_EQ(code_of([&] { ingest_dataset(dir / "missing.tsv"); }), ErrorCode::MissingClipFile);
  synth::write_file(dir / "noheader.tsv", "a.wav\tNeutral\n");
  EXPECT_EQ(code_of([&] { ingest_dataset(dir / "noheader.tsv"); }), ErrorCode::MalformedFile);
  synth::write_file(dir / "empty.tsv", "clip_path\tlabel\na.wav\tUnusable\n");
  EXPECT_EQ(code_of([&] { ingest_dataset(dir / "empty.tsv"); }), ErrorCode::EmptyDataset);
  synth::write_file(dir / "short.tsv", "clip_path\tlabel\na.wav\n");
  EXPECT_EQ(code_of([&] { ingest_dataset(dir / "short.tsv"); }), ErrorCode::MalformedFile);
  EXPECT_EQ(code_of([&] { ingest_dataset(dir / "absent.tsv"); }), ErrorCode::MalformedFile);
}

TEST(Sweep, ThresholdsAreNearestDoubles) {
  const auto t = sweep_thresholds();
  for (std::size_t k = 0; k < kSweepSteps; ++k) EXPECT_EQ(t[k], oracle::kThresholds[k]);
}

TEST(PauseSweep, SeparableCorpus) {
  std::vector<MetricSample> s;
  for (int i = 0; i < 5; ++i) s.push_back({0.95 + 0.01 * i, ClipLabel::Pauses});
  for (int i = 0; i < 5; ++i) s.push_back({0.05 + 0.01 * i, ClipLabel::Neutral});
  const auto r = sweep_pause_thresholds(s, PauseMetric::AvgPauseLength, ThresholdDirection::AtOrAboveIsPauses);
  ASSERT_EQ(r.rows.size(), kSweepSteps);
  for (std::size_t k = 0; k < kSweepSteps; ++k) {
    EXPECT_DOUBLE_EQ(r.rows[k].neutral_pct, 100.0);
    EXPECT_DOUBLE_EQ(r.rows[k].pauses_pct, 100.0);
  }
  EXPECT_EQ(r.best_row, 0u);  // ties go to the lowest threshold
}

TEST(PauseSweep, InclusiveThresholdCell) {
  const std::vector<MetricSample> s{{0.68, ClipLabel::Pauses}, {0.49, ClipLabel::Neutral}};
  const auto r = sweep_pause_thresholds(s, PauseMetric::AvgPauseLength, ThresholdDirection::AtOrAboveIsPauses);
  EXPECT_DOUBLE_EQ(r.rows[4].neutral_pct, 100.0);
  EXPECT_DOUBLE_EQ(r.rows[4].pauses_pct, 100.0);
  EXPECT_DOUBLE_EQ(r.rows[6].pauses_pct, 0.0);  // 0.7 > 0.68

  // A value exactly on the threshold counts as Pauses.
  const std::vector<MetricSample> on{{0.5, ClipLabel::Pauses}, {0.1, ClipLabel::Neutral}};
  EXPECT_DOUBLE_EQ(sweep_pause_thresholds(on, PauseMetric::SilenceRatio, ThresholdDirection::AtOrAboveIsPauses)
                       .rows[4]
                       .pauses_pct,
                   100.0);
}

TEST(PauseSweep, MatchesOracleBothDirections) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const auto s = random_samples(rng, 30 + trial * 7);
    for (auto dir : {ThresholdDirection::AtOrAboveIsPauses, ThresholdDirection::BelowIsPauses}) {
      const auto r = sweep_pause_thresholds(s, PauseMetric::PauseRate, dir);
      double best = -1;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < kSweepSteps; ++k) {
        const auto cell =
            oracle::pause_cell(s, oracle::kThresholds[k], dir == ThresholdDirection::AtOrAboveIsPauses);
        EXPECT_EQ(r.rows[k].neutral_pct, cell.neutral_pct);
        EXPECT_EQ(r.rows[k].pauses_pct, cell.pauses_pct);
        if (cell.neutral_pct + cell.pauses_pct > best) {
          best = cell.neutral_pct + cell.pauses_pct;
          best_k = k;
        }
      }
      EXPECT_EQ(r.best_row, best_k);
      const auto serial = sweep_pause_thresholds_serial(s, PauseMetric::PauseRate, dir);
      for (std::size_t k = 0; k < kSweepSteps; ++k) {
        EXPECT_EQ(serial.rows[k].neutral_pct, r.rows[k].neutral_pct);
        EXPECT_EQ(serial.rows[k].pauses_pct, r.rows[k].pauses_pct);
      }
    }
  }
}

TEST(PauseSweep, NeedsBothClasses) {
  const std::vector<MetricSample> only{{0.3, ClipLabel::Neutral}, {0.2, ClipLabel::Negative}};
  EXPECT_EQ(code_of([&] {
              sweep_pause_thresholds(only, PauseMetric::SilenceRatio, ThresholdDirection::AtOrAboveIsPauses);
            }),
            ErrorCode::EmptySubset);
}

TEST(PauseSweep, Rendering) {
  const std::vector<MetricSample> s{{0.68, ClipLabel::Pauses}, {0.49, ClipLabel::Neutral}};
  const auto r = sweep_pause_thresholds(s, PauseMetric::AvgPauseLength, ThresholdDirection::AtOrAboveIsPauses);
  const auto table = render_table(r);
  EXPECT_NE(table.find("avg_pause_length"), std::string::npos);
  EXPECT_NE(table.find("at_or_above"), std::string::npos);
  EXPECT_NE(table.find("  *"), std::string::npos);
  const auto j = to_json(r);
  EXPECT_EQ(j["rows"].size(), kSweepSteps);
  EXPECT_EQ(j["best_row"], r.best_row);
}

TEST(EmotionSweep, SeparableAngryCorpus) {
  std::vector<EmotionSample> s;
  for (int i = 0; i < 6; ++i) s.push_back({EmotionDistribution::split(Emotion::Angry, 0.9), ClipLabel::Negative});
  for (int i = 0; i < 6; ++i) s.push_back({EmotionDistribution::one_hot(Emotion::Neutral), ClipLabel::Neutral});
  const auto r = sweep_emotion_setups(s);
  ASSERT_EQ(r.rows.size(), aggregation_presets().size());
  for (std::size_t p = 0; p < r.rows.size(); ++p) {
    const auto& row = r.rows[p];
    if (aggregation_presets()[p].labels.contains(Emotion::Angry)) {
      EXPECT_DOUBLE_EQ(row.best_f1(), 1.0) << row.setup;
      EXPECT_DOUBLE_EQ(row.best_threshold(), 0.1);
    } else {
      // Without Angry nothing is ever flagged: Neutral f1 = 2*6/(12+6), weighted by half.
      EXPECT_NEAR(row.best_f1(), 1.0 / 3.0, 1e-12) << row.setup;
    }
  }
  EXPECT_EQ(r.best_setup, 0u);
  EXPECT_NE(render_table(r).find("ADFS"), std::string::npos);
  EXPECT_EQ(to_json(r)["rows"].size(), r.rows.size());
}

TEST(EmotionSweep, MatchesOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_emotion_samples(rng, 40 + 5 * trial);
    const auto r = sweep_emotion_setups(s);
    const auto serial = sweep_emotion_setups_serial(s);
    const auto& presets = aggregation_presets();
    for (std::size_t p = 0; p < presets.size(); ++p) {
      EXPECT_EQ(r.rows[p].setup, presets[p].name);
      for (std::size_t k = 0; k < kSweepSteps; ++k) {
        // The oracle's precision/recall form differs from 2tp/(2tp+fp+fn) in the last bits.
        EXPECT_NEAR(r.rows[p].f1[k], oracle::emotion_cell(s, presets[p], oracle::kThresholds[k]), 1e-12);
        EXPECT_EQ(serial.rows[p].f1[k], r.rows[p].f1[k]);
      }
      const auto& f = r.rows[p].f1;
      const auto first_max = std::max_element(f.begin(), f.end()) - f.begin();
      EXPECT_EQ(r.rows[p].best_index, static_cast<std::size_t>(first_max));
    }
  }
}

TEST(EmotionSweep, NeedsSamples) {
  const std::vector<EmotionSample> none{{EmotionDistribution(), ClipLabel::Pauses}};
  EXPECT_EQ(code_of([&] { sweep_emotion_setups(none); }), ErrorCode::EmptySubset);
}

TEST(F1, Fixtures) {
  using L = ClipLabel;
  const std::vector<L> perfect{L::Negative, L::Neutral, L::Neutral};
  EXPECT_DOUBLE_EQ(weighted_f1(perfect, perfect), 1.0);

  // Negative: tp 1, fp 1, fn 1 -> 0.5 (support 2); Neutral: tp 2, fp 1, fn 1 -> 2/3 (support 3).
  const std::vector<L> truth{L::Negative, L::Negative, L::Neutral, L::Neutral, L::Neutral};
  const std::vector<L> pred{L::Negative, L::Neutral, L::Negative, L::Neutral, L::Neutral};
  EXPECT_NEAR(weighted_f1(truth, pred), (2 * 0.5 + 3 * (2.0 / 3.0)) / 5, 1e-12);
  EXPECT_NEAR(weighted_f1(truth, pred), 0.6, 1e-12);

  // Everything predicted Neutral: Neutral f1 = 2*1/(2+2) = 0.5, Negative f1 = 0.
  const std::vector<L> t2{L::Negative, L::Neutral, L::Negative};
  const std::vector<L> all_neutral(3, L::Neutral);
  EXPECT_NEAR(weighted_f1(t2, all_neutral), 1.0 / 6.0, 1e-12);

  const std::vector<L> t3{L::Negative, L::Negative, L::Negative, L::Neutral, L::Neutral, L::Neutral};
  const std::vector<L> p3{L::Negative, L::Negative, L::Neutral, L::Neutral, L::Neutral, L::Negative};
  EXPECT_NEAR(weighted_f1(t3, p3), 2.0 / 3.0, 1e-12);

  EXPECT_EQ(code_of([&] { weighted_f1(t2, std::vector<L>{L::Neutral}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([] { weighted_f1({}, {}); }), ErrorCode::Empty);
}

TEST(F1, HandFixtures) {
  using L = ClipLabel;
  // Neutral: P 1/1, R 1/2 -> 2/3. Pauses: P 2/3, R 1 -> 0.8. Weighted: (2/3 + 0.8) / 2.
  const std::vector<L> t{L::Neutral, L::Neutral, L::Pauses, L::Pauses};
  const std::vector<L> p{L::Neutral, L::Pauses, L::Pauses, L::Pauses};
  EXPECT_NEAR(weighted_f1(t, p), 0.7333, 1e-4);
  EXPECT_DOUBLE_EQ(weighted_f1(t, t), 1.0);
  EXPECT_NEAR(weighted_f1(t, std::vector<L>(4, L::Neutral)), 1.0 / 3.0, 1e-12);
}

TEST(F1, RandomAgainstOracle) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 37;
    std::vector<ClipLabel> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = coin(rng) ? ClipLabel::Negative : ClipLabel::Neutral;
      p[i] = coin(rng) ? ClipLabel::Negative : ClipLabel::Neutral;
    }
    EXPECT_NEAR(weighted_f1(t, p), oracle::weighted_f1(t, p), 1e-12);
  }
}

TEST(GrammarEval, Rates) {
  using P = std::pair<std::string, std::string>;
  const std::vector<P> same{{"I like books.", "I like books."}};
  const auto r1 = grammar_eval(same);
  EXPECT_DOUBLE_EQ(r1.exact_match_rate, 1.0);
  EXPECT_DOUBLE_EQ(r1.substring_match_rate, 1.0);

  const std::vector<P> period{{"I like books.", "I like books"}};
  const auto r2 = grammar_eval(period);
  EXPECT_DOUBLE_EQ(r2.exact_match_rate, 0.0);
  EXPECT_DOUBLE_EQ(r2.substring_match_rate, 1.0);

  // 10 pairs: 4 exact, 3 more that only contain the gold, 3 misses.
  const std::vector<P> mixed{
      {"He walked home.", "He walked home."},
      {"She reads books.", "She reads books."},
      {"The cat sleeps.", "The cat sleeps."},
      {"We went there.", "We went there."},
      {"He walked home. Then he slept.", "He walked home."},
      {"I like books!", "I like books"},
      {"Yes, the movie was great.", "the movie was great"},
      {"He walk home.", "He walked home."},
      {"She read book.", "She reads books."},
      {"Cat sleep.", "The cat sleeps."},
  };
  const auto r3 = grammar_eval(mixed);
  EXPECT_EQ(r3.pairs, 10u);
  EXPECT_DOUBLE_EQ(r3.exact_match_rate, 0.4);
  EXPECT_DOUBLE_EQ(r3.substring_match_rate, 0.7);
  EXPECT_NE(render_table(r3).find("0.4"), std::string::npos);
  EXPECT_EQ(to_json(r3)["pairs"], 10);
  EXPECT_EQ(code_of([] { grammar_eval({}); }), ErrorCode::Empty);
}

TEST(GrammarEval, LoadPairs) {
  synth::TempDir dir;
  synth::write_file(dir / "p.tsv", "prediction\tgold\nA.\tA\nB\tB\n");
  const auto pairs = load_grammar_pairs(dir / "p.tsv");
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].first, "A.");
  synth::write_file(dir / "bad.tsv", "prediction\tgold\nA.\n");
  EXPECT_EQ(code_of([&] { load_grammar_pairs(dir / "bad.tsv"); }), ErrorCode::MalformedFile);
}

TEST(Scoring, CacheAvoidsRescoring) {
  synth::TempDir dir;
  const AudioClip angry = make_tone(0.5, 400, 0.5);
  const AudioClip calm = make_tone(0.5, 600, 0.5);
  synth::write_file(dir / "a.wav", encode_wav(angry));
  synth::write_file(dir / "c.wav", encode_wav(calm));
  synth::write_file(dir / "p.wav", encode_wav(calm));
  const std::vector<LabeledClip> clips{{dir / "a.wav", "", ClipLabel::Negative},
                                       {dir / "c.wav", "", ClipLabel::Neutral},
                                       {dir / "p.wav", "", ClipLabel::Pauses}};
  StubEmotionScorer scorer;
  scorer.script(angry, EmotionDistribution::split(Emotion::Angry, 0.75));
  ScoreCache cache(dir / "cache");
  const auto first = score_clips(clips, scorer, &cache);
  ASSERT_EQ(first.size(), 2u);  // Pauses clips are not scored
  EXPECT_EQ(scorer.call_count(), 2u);
  EXPECT_DOUBLE_EQ(first[0].distribution[Emotion::Angry], 0.75);

  const auto second = score_clips(clips, scorer, &cache);
  EXPECT_EQ(scorer.call_count(), 2u);
  EXPECT_EQ(second[0].distribution.values(), first[0].distribution.values());
  EXPECT_EQ(second[1].label, ClipLabel::Neutral);

  score_clips(clips, scorer);
  EXPECT_EQ(scorer.call_count(), 4u);
}

TEST(Scoring, CorruptCacheEntryIsIgnored) {
  synth::TempDir dir;
  ScoreCache cache(dir / "cache");
  cache.put("k", EmotionDistribution::one_hot(Emotion::Sad));
  EXPECT_DOUBLE_EQ((*cache.get("k"))[Emotion::Sad], 1.0);
  synth::write_file(dir / "cache" / "k.json", "{");
  EXPECT_FALSE(cache.get("k").has_value());
  EXPECT_FALSE(cache.get("absent").has_value());
}

TEST(Profiling, ParallelMatchesSerialAndOracle) {
  synth::TempDir dir;
  std::mt19937_64 rng(12);
  std::vector<LabeledClip> clips;
  std::vector<AudioClip> audio;
  for (int i = 0; i < 12; ++i) {
    const double secs = 3.0 + i % 4;
    audio.push_back(synth::clip_with_tones(secs, synth::random_layout(rng, secs, 0.15, 0.25)));
    const auto path = dir / ("c" + std::to_string(i) + ".wav");
    synth::write_file(path, encode_wav(audio.back()));
    clips.push_back({path, "", i % 2 ? ClipLabel::Pauses : ClipLabel::Neutral});
  }
  const auto par = profile_clips(clips);
  const auto ser = profile_clips_serial(clips);
  ASSERT_EQ(par.size(), clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    EXPECT_EQ(par[i].silence_ratio, ser[i].silence_ratio);
    EXPECT_EQ(par[i].pause_count, ser[i].pause_count);
    const AudioClip decoded = decode_wav(encode_wav(audio[i]));
    const auto o = oracle::pauses(decoded.duration(), oracle::vad(decoded, VadConfig{}));
    EXPECT_NEAR(par[i].avg_pause_length, o.avg_pause_length, 1e-9);
    EXPECT_EQ(par[i].pause_count, o.pause_count);
  }
  const auto samples = metric_samples(clips, par, PauseMetric::PauseRate);
  ASSERT_EQ(samples.size(), clips.size());
  EXPECT_EQ(samples[3].value, par[3].pause_rate);
  EXPECT_EQ(samples[3].label, ClipLabel::Pauses);
}

TEST(Profiling, UnreadableClipPropagates) {
  synth::TempDir dir;
  synth::write_file(dir / "bad.wav", "RIFF....");
  const std::vector<LabeledClip> clips{{dir / "bad.wav", "", ClipLabel::Neutral}};
  EXPECT_EQ(code_of([&] { profile_clips(clips); }), ErrorCode::MalformedFile);
}
