#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fauna {

/// PCM format descriptor for WAV files. Only uncompressed integer PCM is
/// supported: 8-bit unsigned or 16-bit signed, mono or stereo.
struct WavSpec {
  int sample_rate = 16000;
  int channels = 1;   // 1 or 2
  int bit_depth = 16; // 8 or 16

  void validate() const;
};

/// Decoded audio: one sample vector per channel, normalized to [-1, 1].
/// All channels have equal, nonzero length.
struct AudioClip {
  std::vector<std::vector<double>> samples; // [channel][frame]
  int sample_rate = 16000;

  AudioClip() = default;
  AudioClip(std::vector<std::vector<double>> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}

  int channels() const { return static_cast<int>(samples.size()); }
  std::size_t frames() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration_seconds() const {
    return static_cast<double>(frames()) / sample_rate;
  }

  /// Channel 0, which must be the only channel.
  const std::vector<double>& mono() const;

  /// Throws if channel lengths differ, length is zero, or a sample is
  /// non-finite or outside [-1, 1].
  void validate() const;

  /// Clamps every sample into [-1, 1]. Filtering stages call this to keep
  /// the normalized-amplitude invariant after ringing or overshoot.
  void clamp();
};

/// Parses a RIFF/WAVE byte buffer. Accepts PCM (format code 1) with 8/16-bit
/// depth and 1/2 channels; other chunks between fmt and data are skipped.
/// 16-bit samples map to s/32768, 8-bit unsigned to (s-128)/128.
/// Throws std::runtime_error naming the offending field on malformed input.
std::pair<AudioClip, WavSpec> read_wav(const std::vector<std::uint8_t>& bytes);

/// Emits a canonical 44-byte-header PCM WAV (fmt then data, little-endian).
/// Samples are quantized round-to-nearest and clamped at the integer range.
std::vector<std::uint8_t> write_wav(const AudioClip& clip, const WavSpec& spec);

// File-path conveniences over the byte-level codec.
std::pair<AudioClip, WavSpec> read_wav_file(const std::string& path);
void write_wav_file(const std::string& path, const AudioClip& clip,
                    const WavSpec& spec);

} // namespace fauna
