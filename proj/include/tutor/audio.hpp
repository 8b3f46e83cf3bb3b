#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tutor {

/// Mono PCM audio, samples normalized to [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  bool empty() const { return samples.empty(); }
};

/// Sample rates accepted on the wire.
bool is_supported_sample_rate(int hz);

/// Decodes a RIFF/WAVE linear-PCM 16-bit file. Stereo (or wider) input is
/// downmixed by averaging channels.
///
/// Throws Error(MalformedFile) for an unparseable container and
/// Error(UnsupportedEncoding) for anything other than 16-bit integer PCM at
/// one of the supported rates.
AudioClip decode_wav(std::string_view bytes);

/// Encodes a clip as 16-bit mono RIFF/WAVE. Samples outside [-1, 1] clip.
std::string encode_wav(const AudioClip& clip);

/// Stable identity for a clip: SHA-256 over the 16-bit quantized samples and
/// the rate, so a clip survives an encode/decode round trip unchanged.
std::string clip_fingerprint(const AudioClip& clip);

/// Synthetic signal helpers (used by stubs and tests).
AudioClip make_silence(double seconds, int sample_rate = 16000);
AudioClip make_tone(double seconds, double freq_hz, double amplitude, int sample_rate = 16000);

/// Overwrites [start, end) seconds of the clip with a sine tone.
void paint_tone(AudioClip& clip, double start, double end, double freq_hz, double amplitude);

}  // namespace tutor
