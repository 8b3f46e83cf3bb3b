#include "tutor/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numbers>
#include <optional>

#include "tutor/digest.hpp"
#include "tutor/error.hpp"

namespace tutor {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(read_u16(b, at)) |
         (static_cast<std::uint32_t>(read_u16(b, at + 2)) << 16);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  put_u16(out, static_cast<std::uint16_t>(v & 0xffff));
  put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

std::int16_t quantize(float s) {
  const float c = std::clamp(s, -1.0f, 1.0f);
  return static_cast<std::int16_t>(std::lround(std::min(c * 32768.0f, 32767.0f)));
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

bool is_supported_sample_rate(int hz) {
  static constexpr std::array<int, 5> kRates{8000, 16000, 22050, 44100, 48000};
  return std::find(kRates.begin(), kRates.end(), hz) != kRates.end();
}

AudioClip decode_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw Error(ErrorCode::MalformedFile, "missing RIFF/WAVE header");
  }

  std::optional<FormatChunk> fmt;
  std::string_view data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      // Some writers leave a bogus size on the final data chunk; accept the remainder.
      if (id != "data") throw Error(ErrorCode::MalformedFile, "chunk overruns file");
    }
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);

    if (id == "fmt ") {
      if (avail < 16) throw Error(ErrorCode::MalformedFile, "fmt chunk too short");
      FormatChunk f;
      f.format = read_u16(bytes, body);
      f.channels = read_u16(bytes, body + 2);
      f.sample_rate = read_u32(bytes, body + 4);
      f.bits = read_u16(bytes, body + 14);
      if (f.format == kFormatExtensible) {
        // The first two bytes of the subformat GUID carry the real format tag.
        if (avail < 26) throw Error(ErrorCode::MalformedFile, "extensible fmt chunk too short");
        f.format = read_u16(bytes, body + 24);
      }
      fmt = f;
    } else if (id == "data") {
      data = bytes.substr(body, avail);
      have_data = true;
    }
    pos = body + avail + (avail & 1);
  }

  if (!fmt) throw Error(ErrorCode::MalformedFile, "no fmt chunk");
  if (!have_data) throw Error(ErrorCode::MalformedFile, "no data chunk");
  if (fmt->channels == 0) throw Error(ErrorCode::MalformedFile, "zero channels");
  if (fmt->format != kFormatPcm) {
    throw Error(ErrorCode::UnsupportedEncoding,
                "format tag " + std::to_string(fmt->format) + " is not linear PCM");
  }
  if (fmt->bits != 16) {
    throw Error(ErrorCode::UnsupportedEncoding,
                std::to_string(fmt->bits) + "-bit samples; only 16-bit is supported");
  }
  if (!is_supported_sample_rate(static_cast<int>(fmt->sample_rate))) {
    throw Error(ErrorCode::UnsupportedEncoding,
                "sample rate " + std::to_string(fmt->sample_rate) + " Hz");
  }

  const std::size_t frame_bytes = 2u * fmt->channels;
  const std::size_t frames = data.size() / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c) {
      const auto raw = static_cast<std::int16_t>(read_u16(data, i * frame_bytes + 2 * c));
      acc += raw / 32768.0;
    }
    clip.samples[i] = static_cast<float>(acc / fmt->channels);
  }
  return clip;
}

std::string encode_wav(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float s : clip.samples) put_u16(out, static_cast<std::uint16_t>(quantize(s)));
  return out;
}

std::string clip_fingerprint(const AudioClip& clip) {
  std::string buf;
  buf.reserve(clip.samples.size() * 2 + 4);
  put_u32(buf, static_cast<std::uint32_t>(clip.sample_rate));
  for (float s : clip.samples) put_u16(buf, static_cast<std::uint16_t>(quantize(s)));
  return sha256_hex(buf);
}

AudioClip make_silence(double seconds, int sample_rate) {
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(static_cast<std::size_t>(std::llround(seconds * sample_rate)), 0.0f);
  return clip;
}

AudioClip make_tone(double seconds, double freq_hz, double amplitude, int sample_rate) {
  AudioClip clip = make_silence(seconds, sample_rate);
  paint_tone(clip, 0.0, seconds, freq_hz, amplitude);
  return clip;
}

void paint_tone(AudioClip& clip, double start, double end, double freq_hz, double amplitude) {
  const auto n = static_cast<long long>(clip.samples.size());
  const long long first = std::clamp(std::llround(start * clip.sample_rate), 0LL, n);
  const long long last = std::clamp(std::llround(end * clip.sample_rate), 0LL, n);
  const double w = 2.0 * std::numbers::pi * freq_hz / clip.sample_rate;
  for (long long i = first; i < last; ++i) {
    clip.samples[static_cast<std::size_t>(i)] =
        static_cast<float>(amplitude * std::sin(w * static_cast<double>(i)));
  }
}

}  // namespace tutor
