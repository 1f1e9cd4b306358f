#include "fauna/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace fauna {

void WavSpec::validate() const {
  if (sample_rate <= 0)
    throw std::invalid_argument("WavSpec: sample_rate must be positive, got " +
                             std::to_string(sample_rate));
  if (channels != 1 && channels != 2)
    throw std::invalid_argument("WavSpec: channels must be 1 or 2, got " +
                             std::to_string(channels));
  if (bit_depth != 8 && bit_depth != 16)
    throw std::invalid_argument("WavSpec: bit_depth must be 8 or 16, got " +
                             std::to_string(bit_depth));
}

const std::vector<double>& AudioClip::mono() const {
  if (channels() != 1)
    throw std::invalid_argument("AudioClip: expected mono, got " +
                             std::to_string(channels()) + " channels");
  return samples[0];
}

void AudioClip::validate() const {
  if (samples.empty() || samples.size() > 2)
    throw std::invalid_argument("AudioClip: channel count must be 1 or 2");
  const std::size_t n = samples[0].size();
  if (n == 0) throw std::invalid_argument("AudioClip: zero-length channel");
  for (const auto& ch : samples) {
    if (ch.size() != n)
      throw std::invalid_argument("AudioClip: channel lengths differ");
    for (double s : ch)
      if (!std::isfinite(s) || s < -1.0 || s > 1.0)
        throw std::invalid_argument("AudioClip: sample out of [-1, 1]");
  }
  if (sample_rate <= 0) throw std::invalid_argument("AudioClip: bad sample_rate");
}

void AudioClip::clamp() {
  for (auto& ch : samples)
    for (double& s : ch) s = std::clamp(s, -1.0, 1.0);
}

namespace {

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return b[off] | (b[off + 1] << 8) | (b[off + 2] << 16) |
         (std::uint32_t(b[off + 3]) << 24);
}

std::uint16_t read_u16(const std::vector<std::uint8_t>& b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

bool tag_is(const std::vector<std::uint8_t>& b, std::size_t off,
            const char* tag) {
  return std::memcmp(b.data() + off, tag, 4) == 0;
}

void push_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}

void push_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

void push_tag(std::vector<std::uint8_t>& b, const char* tag) {
  b.insert(b.end(), tag, tag + 4);
}

} // namespace

std::pair<AudioClip, WavSpec> read_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF"))
    throw std::runtime_error("RIFF header: missing or malformed RIFF tag");
  if (!tag_is(bytes, 8, "WAVE"))
    throw std::runtime_error("RIFF header: missing WAVE tag");

  WavSpec spec;
  bool have_fmt = false;
  std::size_t data_off = 0, data_len = 0;

  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::size_t chunk_len = read_u32(bytes, off + 4);
    const std::size_t body = off + 8;
    if (tag_is(bytes, off, "fmt ")) {
      if (chunk_len < 16 || body + 16 > bytes.size())
        throw std::runtime_error("fmt chunk: truncated");
      const std::uint16_t format_code = read_u16(bytes, body);
      if (format_code != 1)
        throw std::runtime_error("fmt chunk: format code " +
                                 std::to_string(format_code) +
                                 " is not PCM (1)");
      spec.channels = read_u16(bytes, body + 2);
      spec.sample_rate = static_cast<int>(read_u32(bytes, body + 4));
      spec.bit_depth = read_u16(bytes, body + 14);
      if (spec.channels != 1 && spec.channels != 2)
        throw std::runtime_error("fmt chunk: unsupported channel count " +
                                 std::to_string(spec.channels));
      if (spec.bit_depth != 8 && spec.bit_depth != 16)
        throw std::runtime_error("fmt chunk: unsupported bit depth " +
                                 std::to_string(spec.bit_depth));
      if (spec.sample_rate <= 0)
        throw std::runtime_error("fmt chunk: invalid sample rate");
      have_fmt = true;
    } else if (tag_is(bytes, off, "data")) {
      if (!have_fmt)
        throw std::runtime_error("data chunk: appears before fmt chunk");
      if (body + chunk_len > bytes.size())
        throw std::runtime_error("data chunk: declared size " +
                                 std::to_string(chunk_len) +
                                 " exceeds available bytes");
      data_off = body;
      data_len = chunk_len;
      break;
    }
    // Unknown chunk: skip (chunk bodies are padded to even length).
    off = body + chunk_len + (chunk_len & 1);
  }
  if (!have_fmt) throw std::runtime_error("fmt chunk: not found");
  if (data_off == 0) throw std::runtime_error("data chunk: not found");

  const std::size_t bytes_per_sample = spec.bit_depth / 8;
  const std::size_t frame_bytes = bytes_per_sample * spec.channels;
  if (data_len == 0 || data_len % frame_bytes != 0)
    throw std::runtime_error("data chunk: size " + std::to_string(data_len) +
                             " is not a whole number of frames");
  const std::size_t n_frames = data_len / frame_bytes;

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.assign(spec.channels, std::vector<double>(n_frames));
  std::size_t p = data_off;
  for (std::size_t i = 0; i < n_frames; ++i) {
    for (int c = 0; c < spec.channels; ++c) {
      double v;
      if (spec.bit_depth == 16) {
        const std::int16_t s =
            static_cast<std::int16_t>(bytes[p] | (bytes[p + 1] << 8));
        v = s / 32768.0;
      } else {
        v = (static_cast<int>(bytes[p]) - 128) / 128.0;
      }
      clip.samples[c][i] = v;
      p += bytes_per_sample;
    }
  }
  return {std::move(clip), spec};
}

std::vector<std::uint8_t> write_wav(const AudioClip& clip,
                                    const WavSpec& spec) {
  spec.validate();
  if (clip.channels() != spec.channels)
    throw std::invalid_argument("write_wav: clip has " +
                             std::to_string(clip.channels()) +
                             " channels but spec says " +
                             std::to_string(spec.channels));
  if (clip.sample_rate != spec.sample_rate)
    throw std::invalid_argument("write_wav: clip rate " +
                             std::to_string(clip.sample_rate) +
                             " differs from spec rate " +
                             std::to_string(spec.sample_rate));

  const std::size_t n_frames = clip.frames();
  const int bytes_per_sample = spec.bit_depth / 8;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(n_frames * spec.channels * bytes_per_sample);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  push_tag(out, "RIFF");
  push_u32(out, 36 + data_len);
  push_tag(out, "WAVE");
  push_tag(out, "fmt ");
  push_u32(out, 16);
  push_u16(out, 1); // PCM
  push_u16(out, static_cast<std::uint16_t>(spec.channels));
  push_u32(out, static_cast<std::uint32_t>(spec.sample_rate));
  push_u32(out, static_cast<std::uint32_t>(spec.sample_rate * spec.channels *
                                           bytes_per_sample));
  push_u16(out, static_cast<std::uint16_t>(spec.channels * bytes_per_sample));
  push_u16(out, static_cast<std::uint16_t>(spec.bit_depth));
  push_tag(out, "data");
  push_u32(out, data_len);

  for (std::size_t i = 0; i < n_frames; ++i) {
    for (int c = 0; c < spec.channels; ++c) {
      const double s = clip.samples[c][i];
      if (spec.bit_depth == 16) {
        long q = std::lround(s * 32768.0);
        q = std::clamp(q, -32768L, 32767L);
        push_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
      } else {
        long q = std::lround(s * 128.0) + 128;
        q = std::clamp(q, 0L, 255L);
        out.push_back(static_cast<std::uint8_t>(q));
      }
    }
  }
  return out;
}

std::pair<AudioClip, WavSpec> read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return read_wav(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_wav_file(const std::string& path, const AudioClip& clip,
                    const WavSpec& spec) {
  const auto bytes = write_wav(clip, spec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

} // namespace fauna
