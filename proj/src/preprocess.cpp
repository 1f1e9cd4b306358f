#include "fauna/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fauna/dsp.hpp"

namespace fauna {

void FormatContract::validate() const {
  if (target_rate <= 0)
    throw std::invalid_argument("FormatContract: target_rate must be positive");
  if (target_channels != 1 && target_channels != 2)
    throw std::invalid_argument("FormatContract: target_channels must be 1 or 2");
  if (target_duration <= 0.0)
    throw std::invalid_argument("FormatContract: target_duration must be positive");
  if (target_bit_depth != 8 && target_bit_depth != 16)
    throw std::invalid_argument("FormatContract: target_bit_depth must be 8 or 16");
}

void NoiseProfile::validate() const {
  if (!dsp::is_power_of_two(fft_size) || fft_size < 64)
    throw std::invalid_argument("NoiseProfile: fft_size must be a power of two >= 64");
  if (mean_magnitude.size() != fft_size / 2 + 1)
    throw std::invalid_argument("NoiseProfile: spectrum length != fft_size/2 + 1");
  for (double m : mean_magnitude)
    if (!std::isfinite(m) || m < 0.0)
      throw std::invalid_argument("NoiseProfile: magnitudes must be finite and >= 0");
  if (sample_rate <= 0)
    throw std::invalid_argument("NoiseProfile: sample_rate must be positive");
}

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

constexpr double kKaiserBeta = 8.0;
constexpr int kSincLobesPerSide = 32;

} // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0)
    throw std::invalid_argument("resample: target_rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const int in_rate = clip.sample_rate;
  const double ratio = static_cast<double>(target_rate) / in_rate;
  // Cutoff at the smaller Nyquist, as a fraction of input cycles/sample.
  const double cutoff = 0.5 * std::min(1.0, ratio);
  // Keep 32 sinc lobes per side; lobes widen by 1/(2*cutoff) input samples.
  const double support = kSincLobesPerSide / (2.0 * cutoff);
  const int half = static_cast<int>(std::ceil(support));
  const double i0_beta = dsp::bessel_i0(kKaiserBeta);

  const std::size_t n_in = clip.frames();
  const std::size_t n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_in) * target_rate / in_rate));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(clip.samples.size(), std::vector<double>(n_out, 0.0));

  for (std::size_t n = 0; n < n_out; ++n) {
    // Exact rational input position: n * in_rate / target_rate.
    const unsigned long long num =
        static_cast<unsigned long long>(n) * static_cast<unsigned long long>(in_rate);
    const long long i0 = static_cast<long long>(num / target_rate);
    const double frac =
        static_cast<double>(num % target_rate) / static_cast<double>(target_rate);

    double wsum = 0.0;
    std::vector<double> acc(clip.samples.size(), 0.0);
    for (long long k = i0 - half; k <= i0 + half + 1; ++k) {
      const double x = static_cast<double>(k - i0) - frac;
      if (std::abs(x) > support) continue;
      const double t = x / support;
      const double win = dsp::bessel_i0(kKaiserBeta * std::sqrt(1.0 - t * t)) / i0_beta;
      const double h = 2.0 * cutoff * sinc(2.0 * cutoff * x) * win;
      wsum += h;
      if (k < 0 || k >= static_cast<long long>(n_in)) continue;
      for (std::size_t c = 0; c < clip.samples.size(); ++c)
        acc[c] += h * clip.samples[c][static_cast<std::size_t>(k)];
    }
    // Per-phase normalization keeps DC gain exactly 1 and the identity case
    // bit-exact.
    if (wsum != 0.0)
      for (std::size_t c = 0; c < clip.samples.size(); ++c)
        out.samples[c][n] = acc[c] / wsum;
  }
  out.clamp();
  return out;
}

AudioClip downmix(const AudioClip& clip) {
  if (clip.channels() == 1) return clip;
  if (clip.channels() != 2)
    throw std::invalid_argument("downmix: channels must be 1 or 2");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  const std::size_t n = clip.frames();
  out.samples.assign(1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    out.samples[0][i] = 0.5 * (clip.samples[0][i] + clip.samples[1][i]);
  return out;
}

AudioClip upmix(const AudioClip& clip) {
  if (clip.channels() == 2) return clip;
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples = {clip.samples[0], clip.samples[0]};
  return out;
}

AudioClip fix_duration(const AudioClip& clip, double seconds) {
  if (seconds <= 0.0)
    throw std::invalid_argument("fix_duration: seconds must be positive");
  const std::size_t target =
      static_cast<std::size_t>(std::llround(seconds * clip.sample_rate));
  const std::size_t n = clip.frames();
  if (target == n) return clip;

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.size(), std::vector<double>(target, 0.0));
  if (n > target) {
    const std::size_t start = (n - target) / 2; // center crop
    for (std::size_t c = 0; c < clip.samples.size(); ++c)
      std::copy_n(clip.samples[c].begin() + static_cast<std::ptrdiff_t>(start),
                  target, out.samples[c].begin());
  } else {
    const std::size_t lead = (target - n) / 2; // extra zero goes to the tail
    for (std::size_t c = 0; c < clip.samples.size(); ++c)
      std::copy(clip.samples[c].begin(), clip.samples[c].end(),
                out.samples[c].begin() + static_cast<std::ptrdiff_t>(lead));
  }
  return out;
}

AudioClip bandpass(const AudioClip& clip, double low_hz, double high_hz) {
  const double nyquist = clip.sample_rate / 2.0;
  if (!(0.0 < low_hz && low_hz < high_hz))
    throw std::invalid_argument("bandpass: need 0 < low < high");
  if (high_hz >= nyquist)
    throw std::invalid_argument("bandpass: high edge must be below Nyquist");

  constexpr int kTaps = 101;
  constexpr int kHalf = kTaps / 2;
  const auto window = dsp::hamming_window(kTaps);

  // h_bp = h_lp(high) - h_lp(low), each an ideal sinc lowpass.
  const double fl = low_hz / clip.sample_rate;
  const double fh = high_hz / clip.sample_rate;
  std::vector<double> h(kTaps);
  for (int i = 0; i < kTaps; ++i) {
    const int m = i - kHalf;
    h[i] = (2.0 * fh * sinc(2.0 * fh * m) - 2.0 * fl * sinc(2.0 * fl * m)) *
           window[static_cast<std::size_t>(i)];
  }

  const std::size_t n = clip.frames();
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.size(), std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < clip.samples.size(); ++c) {
    const auto& x = clip.samples[c];
    auto& y = out.samples[c];
    // Convolution with zero padding; keeping indices [kHalf, kHalf+n) cancels
    // the linear-phase group delay.
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const long long center = static_cast<long long>(i);
      for (int t = 0; t < kTaps; ++t) {
        const long long j = center + kHalf - t;
        if (j < 0 || j >= static_cast<long long>(n)) continue;
        acc += h[static_cast<std::size_t>(t)] * x[static_cast<std::size_t>(j)];
      }
      y[i] = acc;
    }
  }
  out.clamp();
  return out;
}

namespace {

// Frame starts for STFT-style processing: 1 + floor((n-1)/hop) frames, the
// tail zero-padded. Matches the feature extractor's framing.
std::size_t stft_frame_count(std::size_t n, std::size_t hop) {
  return n == 0 ? 0 : 1 + (n - 1) / hop;
}

} // namespace

NoiseProfile estimate_noise_profile(const std::vector<AudioClip>& clips,
                                    std::size_t fft_size) {
  if (clips.empty())
    throw std::invalid_argument("estimate_noise_profile: empty clip list");
  if (!dsp::is_power_of_two(fft_size) || fft_size < 64)
    throw std::invalid_argument(
        "estimate_noise_profile: fft_size must be a power of two >= 64");
  const int rate = clips[0].sample_rate;
  for (const auto& c : clips)
    if (c.sample_rate != rate)
      throw std::invalid_argument("estimate_noise_profile: mixed sample rates");

  const std::size_t hop = fft_size / 2;
  const auto window = dsp::hann_window(fft_size);
  std::vector<double> sum(fft_size / 2 + 1, 0.0);
  std::size_t total_frames = 0;

  std::vector<double> frame(fft_size);
  for (const auto& clip : clips) {
    const auto& x = clip.mono();
    const std::size_t n_frames = stft_frame_count(x.size(), hop);
    for (std::size_t f = 0; f < n_frames; ++f) {
      const std::size_t start = f * hop;
      for (std::size_t i = 0; i < fft_size; ++i) {
        const std::size_t j = start + i;
        frame[i] = (j < x.size() ? x[j] : 0.0) * window[i];
      }
      const auto spec = dsp::rfft(frame, fft_size);
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += std::abs(spec[k]);
      ++total_frames;
    }
  }

  NoiseProfile profile;
  profile.fft_size = fft_size;
  profile.sample_rate = rate;
  profile.mean_magnitude.resize(sum.size());
  for (std::size_t k = 0; k < sum.size(); ++k)
    profile.mean_magnitude[k] = sum[k] / static_cast<double>(total_frames);
  return profile;
}

AudioClip spectral_subtract(const AudioClip& clip, const NoiseProfile& profile) {
  profile.validate();
  if (clip.sample_rate != profile.sample_rate)
    throw std::invalid_argument("spectral_subtract: clip rate " +
                             std::to_string(clip.sample_rate) +
                             " != profile rate " +
                             std::to_string(profile.sample_rate));
  const auto& x = clip.mono();
  const std::size_t fft_size = profile.fft_size;
  const std::size_t hop = fft_size / 2;
  const auto window = dsp::hann_window(fft_size);

  constexpr double kAlpha = 1.0;  // subtraction strength
  constexpr double kBeta = 0.01;  // magnitude floor fraction

  // Leading pad of one hop puts every original sample where the periodic
  // Hann windows sum to exactly 1 under overlap-add.
  const std::size_t n = x.size();
  const std::size_t padded = n + hop;
  std::vector<double> ola(padded + fft_size, 0.0);

  const std::size_t n_frames = stft_frame_count(padded, hop);
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < fft_size; ++i) {
      const std::size_t j = start + i;
      const double s = (j >= hop && j - hop < n) ? x[j - hop] : 0.0;
      buf[i] = {s * window[i], 0.0};
    }
    dsp::fft(buf);
    for (std::size_t k = 0; k < fft_size; ++k) {
      // Conjugate-symmetric bins share the profile of their mirror.
      const std::size_t bin = k <= fft_size / 2 ? k : fft_size - k;
      const double m = std::abs(buf[k]);
      const double target =
          std::max(m - kAlpha * profile.mean_magnitude[bin], kBeta * m);
      if (m > 0.0) buf[k] *= target / m;
    }
    dsp::fft(buf, /*inverse=*/true);
    for (std::size_t i = 0; i < fft_size; ++i) ola[start + i] += buf[i].real();
  }

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) out.samples[0][i] = ola[i + hop];
  out.clamp();
  return out;
}

AudioClip remove_silence(const AudioClip& clip, double threshold_db,
                         double frame_ms) {
  const auto& x = clip.mono();
  const std::size_t frame_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(frame_ms * clip.sample_rate / 1000.0)));
  const std::size_t n_frames = (x.size() + frame_len - 1) / frame_len;

  std::vector<double> rms(n_frames);
  double peak = 0.0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * frame_len;
    const std::size_t end = std::min(start + frame_len, x.size());
    double e = 0.0;
    for (std::size_t i = start; i < end; ++i) e += x[i] * x[i];
    rms[f] = std::sqrt(e / static_cast<double>(end - start));
    peak = std::max(peak, rms[f]);
  }
  const double threshold = peak * std::pow(10.0, threshold_db / 20.0);

  std::vector<double> kept;
  kept.reserve(x.size());
  for (std::size_t f = 0; f < n_frames; ++f) {
    if (rms[f] < threshold) continue;
    const std::size_t start = f * frame_len;
    const std::size_t end = std::min(start + frame_len, x.size());
    kept.insert(kept.end(), x.begin() + static_cast<std::ptrdiff_t>(start),
                x.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (kept.empty()) return clip;

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples = {std::move(kept)};
  return out;
}

std::pair<double, double> contract_band(int sample_rate) {
  return {500.0, std::min(sample_rate * 0.45, 18000.0)};
}

AudioClip apply_contract(const AudioClip& clip, const FormatContract& contract,
                         const std::optional<NoiseProfile>& profile) {
  contract.validate();
  // The cleanup stages operate on mono; a stereo target is restored by
  // duplication at the end.
  AudioClip work = downmix(clip);
  work = resample(work, contract.target_rate);
  const auto band = contract_band(contract.target_rate);
  work = bandpass(work, band.first, band.second);
  if (profile) work = spectral_subtract(work, *profile);
  work = remove_silence(work);
  work = fix_duration(work, contract.target_duration);
  if (contract.target_channels == 2) work = upmix(work);
  return work;
}

} // namespace fauna
