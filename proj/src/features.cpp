#include "fauna/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "fauna/dsp.hpp"

namespace fauna {

namespace {
constexpr double kLogFloor = 1e-10; // keeps digital silence finite
}

std::size_t FeatureConfig::frame_samples(int rate) const {
  return static_cast<std::size_t>(std::llround(frame_ms * rate / 1000.0));
}

std::size_t FeatureConfig::hop_samples(int rate) const {
  return static_cast<std::size_t>(std::llround(hop_ms * rate / 1000.0));
}

std::size_t FeatureConfig::fft_size(int rate) const {
  return dsp::next_power_of_two(frame_samples(rate));
}

double FeatureConfig::resolved_mel_high(int rate) const {
  return mel_high > 0.0 ? mel_high : 0.45 * rate;
}

void FeatureConfig::validate(int rate) const {
  if (!(0.0 < hop_ms && hop_ms <= frame_ms))
    throw std::invalid_argument("FeatureConfig: need 0 < hop_ms <= frame_ms");
  if (num_cepstra < 1 || num_cepstra > num_mel_filters)
    throw std::invalid_argument("FeatureConfig: need 1 <= num_cepstra <= num_mel_filters");
  const double high = resolved_mel_high(rate);
  if (!(0.0 <= mel_low && mel_low < high && high <= rate / 2.0))
    throw std::invalid_argument("FeatureConfig: need mel_low < mel_high <= rate/2");
  if (delta_window < 1)
    throw std::invalid_argument("FeatureConfig: delta_window must be >= 1");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<std::vector<double>> frame_signal(const AudioClip& clip,
                                              const FeatureConfig& config) {
  const auto& x = clip.mono();
  if (x.empty()) throw std::invalid_argument("frame_signal: empty clip");
  const std::size_t frame_len = config.frame_samples(clip.sample_rate);
  const std::size_t hop = config.hop_samples(clip.sample_rate);
  if (frame_len == 0 || hop == 0)
    throw std::invalid_argument("frame_signal: frame/hop too small for rate");

  const std::size_t n_frames = 1 + (x.size() - 1) / hop;
  std::vector<std::vector<double>> frames(n_frames,
                                          std::vector<double>(frame_len, 0.0));
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * hop;
    const std::size_t avail = std::min(frame_len, x.size() - start);
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(start), avail,
                frames[f].begin());
  }
  return frames;
}

std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& config,
                                                int rate) {
  config.validate(rate);
  const std::size_t fft_size = config.fft_size(rate);
  const std::size_t n_bins = fft_size / 2 + 1;
  const int n_filters = config.num_mel_filters;

  // Filter edges equally spaced in mel; filter m spans [edge m, edge m+2]
  // with its peak at edge m+1.
  const double mel_lo = hz_to_mel(config.mel_low);
  const double mel_hi = hz_to_mel(config.resolved_mel_high(rate));
  std::vector<double> edges_hz(static_cast<std::size_t>(n_filters) + 2);
  for (std::size_t i = 0; i < edges_hz.size(); ++i)
    edges_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                         (n_filters + 1));

  std::vector<std::vector<double>> bank(
      static_cast<std::size_t>(n_filters), std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < n_filters; ++m) {
    const double left = edges_hz[static_cast<std::size_t>(m)];
    const double center = edges_hz[static_cast<std::size_t>(m) + 1];
    const double right = edges_hz[static_cast<std::size_t>(m) + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f >= left && f <= center && center > left)
        w = (f - left) / (center - left);
      else if (f > center && f <= right && right > center)
        w = (right - f) / (right - center);
      bank[static_cast<std::size_t>(m)][k] = std::max(0.0, w);
    }
  }
  return bank;
}

std::vector<double> dct_ii(const std::vector<double>& x) {
  const std::size_t m = x.size();
  std::vector<double> out(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      acc += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) *
                             (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(m)));
    const double scale =
        k == 0 ? std::sqrt(1.0 / static_cast<double>(m))
               : std::sqrt(2.0 / static_cast<double>(m));
    out[k] = scale * acc;
  }
  return out;
}

FeatureMatrix mfcc(const AudioClip& clip, const FeatureConfig& config) {
  config.validate(clip.sample_rate);
  auto frames = frame_signal(clip, config);
  const std::size_t fft_size = config.fft_size(clip.sample_rate);
  const auto window = dsp::hann_window(frames[0].size());
  const auto bank = mel_filterbank(config, clip.sample_rate);

  FeatureMatrix feats;
  feats.config = config;
  feats.frame_rate = static_cast<double>(clip.sample_rate) /
                     static_cast<double>(config.hop_samples(clip.sample_rate));
  feats.rows.reserve(frames.size());

  std::vector<double> work;
  for (auto& frame : frames) {
    // Per-frame pre-emphasis with the first sample replicated.
    work.assign(frame.size(), 0.0);
    work[0] = frame[0] - config.preemphasis * frame[0];
    for (std::size_t i = 1; i < frame.size(); ++i)
      work[i] = frame[i] - config.preemphasis * frame[i - 1];
    for (std::size_t i = 0; i < work.size(); ++i) work[i] *= window[i];

    const auto spec = dsp::rfft(work, fft_size);
    std::vector<double> power(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) power[k] = std::norm(spec[k]);

    std::vector<double> log_energies(bank.size());
    for (std::size_t m = 0; m < bank.size(); ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += bank[m][k] * power[k];
      log_energies[m] = std::log(std::max(e, kLogFloor));
    }

    auto cepstra = dct_ii(log_energies);
    cepstra.resize(static_cast<std::size_t>(config.num_cepstra));
    feats.rows.push_back(std::move(cepstra));
  }

  if (config.include_deltas) {
    const FeatureMatrix d1 = deltas(feats, config.delta_window);
    const FeatureMatrix d2 = deltas(d1, config.delta_window);
    for (std::size_t t = 0; t < feats.rows.size(); ++t) {
      feats.rows[t].insert(feats.rows[t].end(), d1.rows[t].begin(),
                           d1.rows[t].end());
      feats.rows[t].insert(feats.rows[t].end(), d2.rows[t].begin(),
                           d2.rows[t].end());
    }
  }
  return feats;
}

FeatureMatrix deltas(const FeatureMatrix& features, int n) {
  if (n < 1) throw std::invalid_argument("deltas: window must be >= 1");
  const auto& rows = features.rows;
  if (rows.empty()) throw std::invalid_argument("deltas: empty feature matrix");
  const std::ptrdiff_t t_max = static_cast<std::ptrdiff_t>(rows.size()) - 1;
  const std::size_t dims = rows[0].size();

  double denom = 0.0;
  for (int i = 1; i <= n; ++i) denom += static_cast<double>(i) * i;
  denom *= 2.0;

  FeatureMatrix out;
  out.frame_rate = features.frame_rate;
  out.config = features.config;
  out.rows.assign(rows.size(), std::vector<double>(dims, 0.0));
  for (std::ptrdiff_t t = 0; t <= t_max; ++t) {
    for (int i = 1; i <= n; ++i) {
      const auto& ahead = rows[static_cast<std::size_t>(std::min(t + i, t_max))];
      const auto& behind =
          rows[static_cast<std::size_t>(std::max<std::ptrdiff_t>(t - i, 0))];
      for (std::size_t d = 0; d < dims; ++d)
        out.rows[static_cast<std::size_t>(t)][d] +=
            static_cast<double>(i) * (ahead[d] - behind[d]);
    }
    for (std::size_t d = 0; d < dims; ++d)
      out.rows[static_cast<std::size_t>(t)][d] /= denom;
  }
  return out;
}

SpectrogramImage spectrogram(const AudioClip& clip, const FeatureConfig& config) {
  auto frames = frame_signal(clip, config);
  const std::size_t fft_size = config.fft_size(clip.sample_rate);
  const auto window = dsp::hann_window(frames[0].size());

  SpectrogramImage image;
  image.grid.reserve(frames.size());
  std::vector<double> work;
  for (auto& frame : frames) {
    work.assign(frame.size(), 0.0);
    for (std::size_t i = 0; i < frame.size(); ++i) work[i] = frame[i] * window[i];
    const auto spec = dsp::rfft(work, fft_size);
    std::vector<double> row(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k)
      row[k] = std::max(20.0 * std::log10(std::max(std::abs(spec[k]), 1e-30)),
                        image.db_floor);
    image.grid.push_back(std::move(row));
  }
  return image;
}

std::vector<std::uint8_t> export_pgm(const SpectrogramImage& image) {
  const std::size_t width = image.num_frames();
  const std::size_t height = image.num_bins();
  double hi = image.db_floor;
  for (const auto& row : image.grid)
    for (double v : row) hi = std::max(hi, v);
  const double span = hi - image.db_floor;

  std::string header = "P5\n" + std::to_string(width) + " " +
                       std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + width * height);
  // Top row of the image is the highest frequency bin.
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t bin = height - 1 - r;
    for (std::size_t c = 0; c < width; ++c) {
      const double v = image.grid[c][bin];
      const double norm = span > 0.0 ? (v - image.db_floor) / span : 0.0;
      out.push_back(static_cast<std::uint8_t>(std::lround(norm * 255.0)));
    }
  }
  return out;
}

std::string to_csv(const FeatureMatrix& features) {
  std::string out;
  char buf[64];
  for (const auto& row : features.rows) {
    for (std::size_t d = 0; d < row.size(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[d]);
      if (d) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

} // namespace fauna
