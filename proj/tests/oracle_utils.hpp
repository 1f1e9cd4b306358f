#pragma once

// Signal generators and reference computations for the test suite. The
// reference math here is written directly from the defining formulas and
// stays independent of the library's DSP helpers, so agreement between the
// two is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fauna/audio.hpp"
#include "fauna/features.hpp"
#include "fauna/hmm.hpp"

namespace oracle {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- signals

inline fauna::AudioClip make_silence(int rate, double seconds) {
  fauna::AudioClip clip;
  clip.sample_rate = rate;
  clip.samples = {std::vector<double>(
      static_cast<std::size_t>(std::llround(seconds * rate)), 0.0)};
  return clip;
}

inline fauna::AudioClip make_tone(double freq, int rate, double seconds,
                                  double amplitude = 0.5, double phase = 0.0) {
  fauna::AudioClip clip = make_silence(rate, seconds);
  auto& x = clip.samples[0];
  for (std::size_t n = 0; n < x.size(); ++n) {
    x[n] = amplitude * std::sin(2.0 * kPi * freq * n / rate + phase);
  }
  return clip;
}

// Linear chirp from f0 to f1 over the clip.
inline fauna::AudioClip make_sweep(double f0, double f1, int rate,
                                   double seconds, double amplitude = 0.5,
                                   double phase = 0.0) {
  fauna::AudioClip clip = make_silence(rate, seconds);
  auto& x = clip.samples[0];
  const double total = seconds;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double t = static_cast<double>(n) / rate;
    const double arg =
        2.0 * kPi * (f0 * t + (f1 - f0) * t * t / (2.0 * total)) + phase;
    x[n] = amplitude * std::sin(arg);
  }
  return clip;
}

inline void add_noise(fauna::AudioClip& clip, std::mt19937& rng,
                      double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  for (auto& channel : clip.samples) {
    for (double& s : channel) s += dist(rng);
  }
}

// Amplitude of the sinusoidal component at freq, measured by correlation
// over the longest whole number of cycles that fits the signal.
inline double tone_amplitude(const std::vector<double>& x, double freq,
                             int rate) {
  const double cycles = std::floor(x.size() * freq / rate);
  const std::size_t n =
      std::min(x.size(), static_cast<std::size_t>(cycles * rate / freq));
  double c = 0.0, s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 2.0 * kPi * freq * i / rate;
    c += x[i] * std::cos(w);
    s += x[i] * std::sin(w);
  }
  return 2.0 * std::hypot(c, s) / static_cast<double>(n);
}

inline double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / std::max<std::size_t>(x.size(), 1));
}

// Textbook O(n^2) DFT, the reference for FFT checks.
inline std::vector<std::complex<double>> naive_dft(
    const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double w = -2.0 * kPi * static_cast<double>(k * t) / n;
      acc += x[t] * std::complex<double>(std::cos(w), std::sin(w));
    }
    out[k] = acc;
  }
  return out;
}

// ---------------------------------------------------------------- HMM refs

// Gaussian + chain-rule path probability computed from the definition.
inline double ref_path_ll(const fauna::HmmModel& m,
                          const fauna::FeatureMatrix& f,
                          const std::vector<int>& path) {
  double ll = m.log_entry[path[0]];
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t > 0) ll += m.log_trans[path[t - 1]][path[t]];
    const auto& g = m.emissions[path[t]];
    for (std::size_t d = 0; d < f.rows[t].size(); ++d) {
      const double diff = f.rows[t][d] - g.mean[d];
      ll += -0.5 * (std::log(2.0 * kPi * g.variance[d]) +
                    diff * diff / g.variance[d]);
    }
  }
  return ll + m.log_exit[path.back()];
}

inline void enumerate_paths(int n_states, int T,
                            std::vector<std::vector<int>>& out) {
  std::vector<int> path(T);
  const auto recurse = [&](auto&& self, int t) -> void {
    if (t == T) {
      out.push_back(path);
      return;
    }
    if (t == 0) {
      for (int s = 0; s < n_states; ++s) {
        path[0] = s;
        self(self, 1);
      }
      return;
    }
    for (int step = 0; step <= 1; ++step) {
      const int s = path[t - 1] + step;
      if (s >= n_states) break;
      path[t] = s;
      self(self, t + 1);
    }
  };
  recurse(recurse, 0);
}

// Total and best path log-likelihood by brute force over all monotone paths.
inline std::pair<double, double> enumeration_ll(const fauna::HmmModel& m,
                                                const fauna::FeatureMatrix& f) {
  std::vector<std::vector<int>> paths;
  enumerate_paths(m.n_states, static_cast<int>(f.rows.size()), paths);
  double best = kNegInf;
  std::vector<double> lls;
  for (const auto& path : paths) {
    const double ll = ref_path_ll(m, f, path);
    lls.push_back(ll);
    best = std::max(best, ll);
  }
  if (best == kNegInf) return {kNegInf, kNegInf};
  double sum = 0.0;
  for (double ll : lls) {
    if (ll != kNegInf) sum += std::exp(ll - best);
  }
  return {best + std::log(sum), best};
}

// Random left-to-right model with exact unit row sums. Interior states may
// exit early so the enumeration covers variable-length traversals.
inline fauna::HmmModel random_ltr_model(std::mt19937& rng, int n_states,
                                        int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  fauna::HmmModel m;
  m.n_states = n_states;
  m.log_entry.assign(n_states, kNegInf);
  m.log_entry[0] = 0.0;
  m.log_trans.assign(n_states, std::vector<double>(n_states, kNegInf));
  m.log_exit.assign(n_states, kNegInf);
  m.emissions.resize(n_states);
  for (int j = 0; j < n_states; ++j) {
    const double p_self = 0.2 + 0.6 * u(rng);
    double p_next = 0.0, p_exit;
    if (j + 1 < n_states) {
      p_next = (1.0 - p_self) * (0.5 + 0.45 * u(rng));
      p_exit = 1.0 - p_self - p_next;
      m.log_trans[j][j + 1] = std::log(p_next);
    } else {
      p_exit = 1.0 - p_self;
    }
    m.log_trans[j][j] = std::log(p_self);
    m.log_exit[j] = std::log(p_exit);
    auto& g = m.emissions[j];
    g.mean.resize(dim);
    g.variance.resize(dim);
    for (int d = 0; d < dim; ++d) {
      g.mean[d] = -2.0 + 4.0 * u(rng);
      g.variance[d] = 0.1 + 1.9 * u(rng);
    }
  }
  return m;
}

inline fauna::FeatureMatrix random_features(std::mt19937& rng, int T,
                                            int dim) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  fauna::FeatureMatrix f;
  f.rows.assign(T, std::vector<double>(dim));
  for (auto& row : f.rows) {
    for (double& v : row) v = u(rng);
  }
  return f;
}

// Piecewise-stationary random sequences, enough structure for EM to chew on.
inline std::vector<fauna::FeatureMatrix> random_dataset(std::mt19937& rng,
                                                        int n_clips, int dim,
                                                        int min_T, int max_T) {
  std::uniform_int_distribution<int> len(min_T, max_T);
  std::uniform_real_distribution<double> center(-3.0, 3.0);
  std::normal_distribution<double> jitter(0.0, 0.5);
  const int n_segments = 3;
  std::vector<std::vector<double>> seg_means(n_segments,
                                             std::vector<double>(dim));
  for (auto& m : seg_means) {
    for (double& v : m) v = center(rng);
  }
  std::vector<fauna::FeatureMatrix> out;
  for (int c = 0; c < n_clips; ++c) {
    const int T = len(rng);
    fauna::FeatureMatrix f;
    f.rows.assign(T, std::vector<double>(dim));
    for (int t = 0; t < T; ++t) {
      const int seg = std::min(n_segments - 1, t * n_segments / T);
      for (int d = 0; d < dim; ++d) {
        f.rows[t][d] = seg_means[seg][d] + jitter(rng);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

// ------------------------------------------------------------ test corpus

inline const std::vector<std::string>& corpus_labels() {
  static const std::vector<std::string> labels = {"sweep_down", "sweep_up",
                                                  "tone_high", "tone_low"};
  return labels;
}

// Four clearly separable call patterns at a configurable SNR, written as
// 16-bit mono WAVs under <root>/<label>/.
inline void write_synthetic_corpus(const std::string& root,
                                   int clips_per_class, unsigned seed,
                                   int rate = 16000, double snr_db = 20.0) {
  namespace fs = std::filesystem;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const double amplitude = 0.5;
  const double signal_power = amplitude * amplitude / 2.0;
  const double sigma =
      std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
  fauna::WavSpec spec;
  spec.sample_rate = rate;
  spec.channels = 1;
  spec.bit_depth = 16;
  for (const std::string& label : corpus_labels()) {
    fs::create_directories(fs::path(root) / label);
    for (int i = 0; i < clips_per_class; ++i) {
      fauna::AudioClip clip;
      const double ph = phase(rng);
      if (label == "tone_low") {
        clip = make_tone(800.0, rate, 1.0, amplitude, ph);
      } else if (label == "tone_high") {
        clip = make_tone(2400.0, rate, 1.0, amplitude, ph);
      } else if (label == "sweep_up") {
        clip = make_sweep(500.0, 3000.0, rate, 1.0, amplitude, ph);
      } else {
        clip = make_sweep(3000.0, 500.0, rate, 1.0, amplitude, ph);
      }
      add_noise(clip, rng, sigma);
      clip.clamp();
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%02d.wav", label.c_str(), i);
      fauna::write_wav_file(((fs::path(root) / label) / name).string(), clip,
                            spec);
    }
  }
}

// Unique scratch directory for one test; removed by the destructor.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() /
           (tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path.string(); }
  std::string sub(const std::string& name) const {
    return (path / name).string();
  }
};

} // namespace oracle
