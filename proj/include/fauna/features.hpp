#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fauna/audio.hpp"

namespace fauna {

/// Parameters for short-time cepstral analysis. mel_high == 0 means "auto":
/// 0.45 x sample rate, resolved when the rate is known.
struct FeatureConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  int num_mel_filters = 20;
  int num_cepstra = 13;
  double mel_low = 300.0;
  double mel_high = 0.0; // 0 = auto (0.45 * rate)
  int delta_window = 2;
  bool include_deltas = true;
  double preemphasis = 0.97;

  std::size_t frame_samples(int rate) const;
  std::size_t hop_samples(int rate) const;
  /// Smallest power of two >= frame_samples.
  std::size_t fft_size(int rate) const;
  double resolved_mel_high(int rate) const;
  /// Feature dimensionality: num_cepstra, tripled when deltas are appended.
  int dims() const { return num_cepstra * (include_deltas ? 3 : 1); }

  void validate(int rate) const;
};

/// T x D matrix of per-frame feature vectors.
struct FeatureMatrix {
  std::vector<std::vector<double>> rows; // [frame][coefficient]
  double frame_rate = 100.0;             // frames per second
  FeatureConfig config;

  std::size_t num_frames() const { return rows.size(); }
  std::size_t dims() const { return rows.empty() ? 0 : rows[0].size(); }
};

/// Log-magnitude STFT grid in dB, clamped below at db_floor.
struct SpectrogramImage {
  std::vector<std::vector<double>> grid; // [frame][bin], bin 0 = DC
  double db_floor = -80.0;

  std::size_t num_frames() const { return grid.size(); }
  std::size_t num_bins() const { return grid.empty() ? 0 : grid[0].size(); }
};

/// mel(f) = 2595 * log10(1 + f/700)
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Chops a mono clip into frames of frame_samples at hop intervals;
/// T = 1 + floor((N-1)/hop), the final partial frames zero-padded.
std::vector<std::vector<double>> frame_signal(const AudioClip& clip,
                                              const FeatureConfig& config);

/// Triangular mel filterbank: num_mel_filters rows of fft_size/2+1
/// nonnegative weights, centers equally spaced on the mel scale between
/// mel_low and mel_high.
std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& config,
                                                int rate);

/// Orthonormal DCT-II of x (full length).
std::vector<double> dct_ii(const std::vector<double>& x);

/// MFCC extraction: per frame, pre-emphasis -> Hann window -> |FFT|^2 ->
/// mel energies -> log(max(e, 1e-10)) -> orthonormal DCT-II, keeping the
/// first num_cepstra coefficients. With include_deltas, first- and
/// second-order regression coefficients are appended (D = 3 x num_cepstra).
FeatureMatrix mfcc(const AudioClip& clip, const FeatureConfig& config);

/// Regression deltas over a +-n frame window with edge replication:
/// d_t = sum_{i=1..n} i*(c_{t+i} - c_{t-i}) / (2 * sum_{i=1..n} i^2).
FeatureMatrix deltas(const FeatureMatrix& features, int n);

SpectrogramImage spectrogram(const AudioClip& clip, const FeatureConfig& config);

/// Binary PGM (P5, maxval 255): columns are frames, rows are frequency bins
/// with low frequencies at the bottom. Values normalized to [0, 255] from
/// [db_floor, max].
std::vector<std::uint8_t> export_pgm(const SpectrogramImage& image);

/// One frame per row, comma-separated coefficients.
std::string to_csv(const FeatureMatrix& features);

} // namespace fauna
