#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "fauna/audio.hpp"

namespace fauna {

/// The normalization target every dataset clip must satisfy before feature
/// extraction: rate, channel layout, duration, and stored bit depth.
struct FormatContract {
  int target_rate = 16000;
  int target_channels = 1; // 1 = mono, 2 = stereo
  double target_duration = 1.0;
  int target_bit_depth = 16;

  void validate() const;
};

/// Mean magnitude spectrum of background noise, used for spectral
/// subtraction. Length is fft_size/2 + 1.
struct NoiseProfile {
  std::vector<double> mean_magnitude;
  std::size_t fft_size = 512;
  int sample_rate = 16000;

  void validate() const;
};

/// Rate conversion by windowed-sinc interpolation (Kaiser beta=8, 32 sinc
/// lobes per side, kernel stretched by the rate ratio when downsampling so
/// the cutoff tracks the output Nyquist). Output frame count is
/// round(frames * target_rate / input_rate). Equal rates return the input
/// unchanged.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Stereo to mono by per-sample mean; mono passes through.
AudioClip downmix(const AudioClip& clip);

/// Mono to stereo by channel duplication; stereo passes through.
AudioClip upmix(const AudioClip& clip);

/// Center-crops longer clips and symmetrically zero-pads shorter ones to
/// exactly round(seconds * rate) frames (odd padding puts the extra sample
/// on the tail).
AudioClip fix_duration(const AudioClip& clip, double seconds);

/// Linear-phase FIR bandpass: windowed-sinc design, Hamming window,
/// 101 taps. Zero-padded convolution trimmed to the original length so the
/// output is delay-compensated.
AudioClip bandpass(const AudioClip& clip, double low_hz, double high_hz);

/// Mean magnitude spectrum over all Hann-windowed frames
/// (frame = fft_size, hop = fft_size/2, tail zero-padded) of all clips.
/// Clips must be mono at a common rate; fft_size a power of two >= 64.
NoiseProfile estimate_noise_profile(const std::vector<AudioClip>& clips,
                                    std::size_t fft_size = 512);

/// STFT-domain noise reduction: per-bin magnitude becomes
/// max(m - alpha*noise, beta*m) with alpha=1, beta=0.01, resynthesized with
/// the original phase by overlap-add. A zero profile reproduces the input.
AudioClip spectral_subtract(const AudioClip& clip, const NoiseProfile& profile);

/// Drops frames whose RMS falls below peak-frame-RMS * 10^(threshold_db/20)
/// and concatenates the survivors. If every frame is below threshold the
/// clip is returned unchanged.
AudioClip remove_silence(const AudioClip& clip, double threshold_db = -40.0,
                         double frame_ms = 10.0);

/// Band edges the cleanup pipeline keeps at a given rate:
/// 500 Hz up to min(0.45*rate, 18 kHz).
std::pair<double, double> contract_band(int sample_rate);

/// Full cleanup pipeline: downmix (if target mono) -> resample -> bandpass
/// (contract_band) -> spectral_subtract (if profile given) -> remove_silence
/// -> fix_duration -> upmix (if target stereo).
AudioClip apply_contract(const AudioClip& clip, const FormatContract& contract,
                         const std::optional<NoiseProfile>& profile = {});

} // namespace fauna
