// Serial reference vs OpenMP kernel for the data-parallel parts of the pipeline.

#include <benchmark/benchmark.h>

#include <random>

#include "tutor/affect.hpp"
#include "tutor/audio.hpp"
#include "tutor/eval.hpp"
#include "tutor/vad.hpp"

using namespace tutor;

namespace {

AudioClip noisy_clip(double seconds) {
  std::mt19937 rng(1);
  std::normal_distribution<float> n(0.0f, 0.05f);
  AudioClip c = make_silence(seconds);
  for (auto& s : c.samples) s = n(rng);
  return c;
}

std::vector<MetricSample> metric_corpus(std::size_t n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> v(0.0, 1.2);
  std::vector<MetricSample> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {v(rng), i % 2 ? ClipLabel::Pauses : ClipLabel::Neutral};
  return out;
}

std::vector<EmotionSample> emotion_corpus(std::size_t n) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> v(0.0, 1.0);
  std::vector<EmotionSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, kEmotionCount> p{};
    double total = 0;
    for (auto& x : p) total += (x = v(rng));
    for (auto& x : p) x /= total;
    out.push_back({EmotionDistribution::from_probabilities(p), i % 3 ? ClipLabel::Neutral : ClipLabel::Negative});
  }
  return out;
}

void BM_FrameRmsSerial(benchmark::State& st) {
  const auto clip = noisy_clip(static_cast<double>(st.range(0)));
  const auto layout = FrameLayout::for_clip(clip.samples.size(), clip.sample_rate, VadConfig{});
  for (auto _ : st) benchmark::DoNotOptimize(frame_rms_serial(clip.samples, layout));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(layout.count));
}

void BM_FrameRmsParallel(benchmark::State& st) {
  const auto clip = noisy_clip(static_cast<double>(st.range(0)));
  const auto layout = FrameLayout::for_clip(clip.samples.size(), clip.sample_rate, VadConfig{});
  for (auto _ : st) benchmark::DoNotOptimize(frame_rms_parallel(clip.samples, layout));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(layout.count));
}

void BM_PauseSweepSerial(benchmark::State& st) {
  const auto s = metric_corpus(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    benchmark::DoNotOptimize(
        sweep_pause_thresholds_serial(s, PauseMetric::AvgPauseLength, ThresholdDirection::AtOrAboveIsPauses));
  }
}

void BM_PauseSweepParallel(benchmark::State& st) {
  const auto s = metric_corpus(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) {
    benchmark::DoNotOptimize(
        sweep_pause_thresholds(s, PauseMetric::AvgPauseLength, ThresholdDirection::AtOrAboveIsPauses));
  }
}

void BM_EmotionSweepSerial(benchmark::State& st) {
  const auto s = emotion_corpus(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sweep_emotion_setups_serial(s));
}

void BM_EmotionSweepParallel(benchmark::State& st) {
  const auto s = emotion_corpus(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sweep_emotion_setups(s));
}

}  // namespace

BENCHMARK(BM_FrameRmsSerial)->Arg(10)->Arg(120);
BENCHMARK(BM_FrameRmsParallel)->Arg(10)->Arg(120);
BENCHMARK(BM_PauseSweepSerial)->Arg(300)->Arg(100000);
BENCHMARK(BM_PauseSweepParallel)->Arg(300)->Arg(100000);
BENCHMARK(BM_EmotionSweepSerial)->Arg(300)->Arg(100000);
BENCHMARK(BM_EmotionSweepParallel)->Arg(300)->Arg(100000);

BENCHMARK_MAIN();
