// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Multichannel waves, STFT / iSTFT, RIFF WAV io, scenario mixing and
// synthetic desk-scale scenes.

#ifndef MASKBF_SIGNAL_HPP
#define MASKBF_SIGNAL_HPP

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskbf/linalg.hpp"

namespace maskbf {

struct MultichannelWave {
  double sample_rate = 16000.0;
  RMatrix samples;  // channels x samples

  Eigen::Index channels() const { return samples.rows(); }
  Eigen::Index length() const { return samples.cols(); }
};

enum class WindowKind { sqrt_hann, hann, rectangular };

inline std::string to_string(WindowKind w) {
  switch (w) {
    case WindowKind::sqrt_hann: return "sqrt-hann";
    case WindowKind::hann: return "hann";
    case WindowKind::rectangular: return "rectangular";
  }
  return "?";
}

inline WindowKind window_from_string(const std::string& s) {
  if (s == "sqrt-hann" || s == "sqrthann") return WindowKind::sqrt_hann;
  if (s == "hann") return WindowKind::hann;
  if (s == "rectangular" || s == "rect") return WindowKind::rectangular;
  throw std::invalid_argument("unknown window kind: " + s);
}

struct StftConfig {
  int window_length = 1024;
  int hop = 256;
  WindowKind window = WindowKind::sqrt_hann;

  int freqs() const { return window_length / 2 + 1; }
};

/// Periodic window of the configured kind.
inline RVector make_window(int length, WindowKind kind) {
  RVector w(length);
  for (int i = 0; i < length; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / length);
    switch (kind) {
      case WindowKind::sqrt_hann: w(i) = std::sqrt(hann); break;
      case WindowKind::hann: w(i) = hann; break;
      case WindowKind::rectangular: w(i) = 1.0; break;
    }
  }
  return w;
}

/// Complex STFT of every channel, stored t-major: index (t * freqs + f) * mics + n.
class MultichannelSpectrogram {
 public:
  MultichannelSpectrogram() = default;
  MultichannelSpectrogram(Eigen::Index frames, Eigen::Index freqs, Eigen::Index mics, StftConfig cfg,
                          Eigen::Index num_samples, double sample_rate)
      : frames_(frames), freqs_(freqs), mics_(mics), cfg_(cfg), num_samples_(num_samples),
        sample_rate_(sample_rate), values_(static_cast<std::size_t>(frames * freqs * mics)) {}

  Eigen::Index frames() const { return frames_; }
  Eigen::Index freqs() const { return freqs_; }
  Eigen::Index mics() const { return mics_; }
  const StftConfig& config() const { return cfg_; }
  Eigen::Index num_samples() const { return num_samples_; }
  double sample_rate() const { return sample_rate_; }

  Complex& operator()(Eigen::Index t, Eigen::Index f, Eigen::Index n) {
    return values_[static_cast<std::size_t>((t * freqs_ + f) * mics_ + n)];
  }
  Complex operator()(Eigen::Index t, Eigen::Index f, Eigen::Index n) const {
    return values_[static_cast<std::size_t>((t * freqs_ + f) * mics_ + n)];
  }
  const std::vector<Complex>& data() const { return values_; }
  std::vector<Complex>& data() { return values_; }

  /// Observation block of one frequency bin, mics x frames.
  CMatrix bin(Eigen::Index f) const {
    CMatrix x(mics_, frames_);
    for (Eigen::Index t = 0; t < frames_; ++t)
      for (Eigen::Index n = 0; n < mics_; ++n) x(n, t) = (*this)(t, f, n);
    return x;
  }

  /// One microphone as a frames x freqs matrix.
  CMatrix channel(Eigen::Index n) const {
    CMatrix c(frames_, freqs_);
    for (Eigen::Index t = 0; t < frames_; ++t)
      for (Eigen::Index f = 0; f < freqs_; ++f) c(t, f) = (*this)(t, f, n);
    return c;
  }

  /// Single-channel spectrogram from a frames x freqs matrix.
  static MultichannelSpectrogram from_channel(const CMatrix& c, const StftConfig& cfg,
                                              Eigen::Index num_samples, double sample_rate) {
    MultichannelSpectrogram s(c.rows(), c.cols(), 1, cfg, num_samples, sample_rate);
    for (Eigen::Index t = 0; t < c.rows(); ++t)
      for (Eigen::Index f = 0; f < c.cols(); ++f) s(t, f, 0) = c(t, f);
    return s;
  }

 private:
  Eigen::Index frames_ = 0, freqs_ = 0, mics_ = 0;
  StftConfig cfg_;
  Eigen::Index num_samples_ = 0;
  double sample_rate_ = 16000.0;
  std::vector<Complex> values_;
};

namespace detail {

inline void check_stft_config(const StftConfig& cfg) {
  const int l = cfg.window_length;
  if (l < 2 || (l & (l - 1)) != 0)
    throw std::invalid_argument("window length must be a power of two, got " + std::to_string(l));
  if (cfg.hop <= 0 || l % cfg.hop != 0)
    throw std::invalid_argument("hop " + std::to_string(cfg.hop) + " must divide window length " +
                                std::to_string(l));
}

}  // namespace detail

/// True when analysis x synthesis windows overlap-add to a constant.
inline bool satisfies_cola(const StftConfig& cfg) {
  const RVector w = make_window(cfg.window_length, cfg.window);
  RVector acc = RVector::Zero(cfg.hop);
  for (int i = 0; i < cfg.window_length; ++i) acc(i % cfg.hop) += w(i) * w(i);
  const double mx = acc.maxCoeff();
  return mx > 0.0 && (mx - acc.minCoeff()) <= 1e-9 * mx;
}

/// Frames are centered at t * hop for t = 0 .. ceil(T / hop) - 1, with zero
/// padding outside the signal.
inline MultichannelSpectrogram stft(const MultichannelWave& wave, const StftConfig& cfg) {
  detail::check_stft_config(cfg);
  if (wave.length() == 0 || wave.channels() == 0) throw EmptyInput("wave has no samples");
  const int l = cfg.window_length;
  const Eigen::Index total = wave.length();
  const Eigen::Index frames = (total + cfg.hop - 1) / cfg.hop;
  const RVector win = make_window(l, cfg.window);
  MultichannelSpectrogram spec(frames, cfg.freqs(), wave.channels(), cfg, total, wave.sample_rate);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(l));
  std::vector<Complex> out;
  for (Eigen::Index n = 0; n < wave.channels(); ++n) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::Index start = t * cfg.hop - l / 2;
      for (int i = 0; i < l; ++i) {
        const Eigen::Index idx = start + i;
        buf[static_cast<std::size_t>(i)] =
            (idx >= 0 && idx < total) ? wave.samples(n, idx) * win(i) : 0.0;
      }
      fft.fwd(out, buf);
      for (int f = 0; f < cfg.freqs(); ++f) spec(t, f, n) = out[static_cast<std::size_t>(f)];
    }
  }
  return spec;
}

/// Weighted overlap-add inverse normalized by the summed squared window, which
/// reconstructs exactly wherever the window envelope is nonzero.
inline MultichannelWave istft(const MultichannelSpectrogram& spec) {
  const auto& cfg = spec.config();
  detail::check_stft_config(cfg);
  if (!satisfies_cola(cfg))
    throw NonColaWindow(to_string(cfg.window) + " window with length " +
                        std::to_string(cfg.window_length) + " and hop " + std::to_string(cfg.hop));
  const int l = cfg.window_length;
  const Eigen::Index total = spec.num_samples();
  const RVector win = make_window(l, cfg.window);
  MultichannelWave wave;
  wave.sample_rate = spec.sample_rate();
  wave.samples = RMatrix::Zero(spec.mics(), total);
  RVector env = RVector::Zero(total);
  for (Eigen::Index t = 0; t < spec.frames(); ++t) {
    const Eigen::Index start = t * cfg.hop - l / 2;
    for (int i = 0; i < l; ++i) {
      const Eigen::Index idx = start + i;
      if (idx >= 0 && idx < total) env(idx) += win(i) * win(i);
    }
  }
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> half(static_cast<std::size_t>(cfg.freqs()));
  std::vector<double> frame;
  for (Eigen::Index n = 0; n < spec.mics(); ++n) {
    for (Eigen::Index t = 0; t < spec.frames(); ++t) {
      for (int f = 0; f < cfg.freqs(); ++f) half[static_cast<std::size_t>(f)] = spec(t, f, n);
      fft.inv(frame, half, l);
      const Eigen::Index start = t * cfg.hop - l / 2;
      for (int i = 0; i < l; ++i) {
        const Eigen::Index idx = start + i;
        if (idx >= 0 && idx < total) wave.samples(n, idx) += frame[static_cast<std::size_t>(i)] * win(i);
      }
    }
  }
  const double tiny = 1e-12 * env.maxCoeff();
  for (Eigen::Index i = 0; i < total; ++i)
    if (env(i) > tiny) wave.samples.col(i) /= env(i);
  return wave;
}

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
  MultichannelSpectrogram target;        // s
  MultichannelSpectrogram interference;  // n, before the multiplier
  MultichannelSpectrogram observation;   // x = s + g n
  MultichannelWave target_wave;          // time-domain s, the SDR reference
  double g = 1.0;
  int reference_mic = 1;  // 1-based

  Eigen::Index ref_index() const { return reference_mic - 1; }
};

namespace detail {

// Loops a short noise to `length` samples, blending each seam over `fade`
// samples with a linear crossfade.
inline RMatrix loop_to_length(const RMatrix& noise, Eigen::Index length, Eigen::Index fade) {
  const Eigen::Index src = noise.cols();
  if (src >= length) return noise.leftCols(length);
  fade = std::min(fade, src / 2);
  RMatrix out = RMatrix::Zero(noise.rows(), length);
  out.leftCols(src) = noise;
  Eigen::Index pos = src;
  while (pos < length) {
    const Eigen::Index seam = pos - fade;
    for (Eigen::Index i = 0; i < src && seam + i < length; ++i) {
      const Eigen::Index dst = seam + i;
      if (i < fade) {
        const double a = (i + 0.5) / static_cast<double>(fade);
        out.col(dst) = out.col(dst) * (1.0 - a) + noise.col(i) * a;
      } else {
        out.col(dst) = noise.col(i);
      }
    }
    pos = seam + src;
  }
  return out;
}

}  // namespace detail

/// Observation x = s + g n. Noise shorter than the target is looped with a
/// 10 ms crossfade; longer noise is truncated.
inline Scenario mix_scenario(const MultichannelWave& target, const MultichannelWave& noise, double g,
                             int reference_mic, const StftConfig& cfg) {
  if (target.channels() != noise.channels())
    throw ChannelMismatch("target has " + std::to_string(target.channels()) + " channels, noise " +
                          std::to_string(noise.channels()));
  if (reference_mic < 1 || reference_mic > target.channels())
    throw ChannelMismatch("reference mic " + std::to_string(reference_mic) + " outside 1.." +
                          std::to_string(target.channels()));
  if (!(g >= 0.0)) throw std::invalid_argument("bg multiplier must be non-negative");
  if (noise.length() == 0) throw EmptyInput("noise has no samples");
  const auto fade = static_cast<Eigen::Index>(std::lround(0.010 * target.sample_rate));
  MultichannelWave n = noise;
  n.samples = detail::loop_to_length(noise.samples, target.length(), fade);
  n.sample_rate = target.sample_rate;
  MultichannelWave x = target;
  x.samples = target.samples + g * n.samples;
  Scenario sc;
  sc.target = stft(target, cfg);
  sc.interference = stft(n, cfg);
  sc.observation = stft(x, cfg);
  sc.target_wave = target;
  sc.g = g;
  sc.reference_mic = reference_mic;
  return sc;
}

/// Desk-scale stand-in for recorded multichannel speech in noise.
///
/// The target is a harmonic source with a gliding pitch and syllable-rate
/// amplitude modulation. `noise_sources` interferers are independent
/// one-pole-filtered Gaussian noises. Every source reaches each microphone
/// through a direct path plus two weak early reflections, and a low-level
/// independent sensor noise is added per microphone. The interference is
/// scaled to a 5 dB SNR at microphone 1.
inline std::pair<MultichannelWave, MultichannelWave> synth_scene(std::uint64_t seed, int mics,
                                                                 int noise_sources, double duration,
                                                                 double sample_rate) {
  if (mics < 2) throw std::invalid_argument("synthetic scenes need at least two microphones");
  if (noise_sources < 1) throw std::invalid_argument("need at least one noise source");
  const auto len = static_cast<Eigen::Index>(std::llround(duration * sample_rate));
  if (len <= 0) throw EmptyInput("duration yields no samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;

  RVector src(len);
  {
    const double f0 = 110.0 + 110.0 * uni(rng);
    const double glide = (uni(rng) - 0.5) * 0.4;
    const double am_rate = 3.0 + 3.0 * uni(rng);
    const double am_phase = two_pi * uni(rng);
    const int harmonics = std::max(1, static_cast<int>(std::min(4000.0, 0.45 * sample_rate) / (f0 * 1.2)));
    std::vector<double> phases(static_cast<std::size_t>(harmonics));
    for (auto& p : phases) p = two_pi * uni(rng);
    double phase = 0.0;
    for (Eigen::Index i = 0; i < len; ++i) {
      const double t = i / sample_rate;
      const double f = f0 * (1.0 + glide * t / std::max(duration, 1e-9));
      phase += two_pi * f / sample_rate;
      double v = 0.0;
      for (int h = 1; h <= harmonics; ++h)
        v += std::sin(h * phase + phases[static_cast<std::size_t>(h - 1)]) / h;
      const double am = std::pow(0.5 * (1.0 + std::sin(two_pi * am_rate * t + am_phase)), 2.0);
      src(i) = v * (0.1 + 0.9 * am);
    }
  }

  auto spatialize = [&](const RVector& s) {
    RMatrix out = RMatrix::Zero(mics, len);
    for (int m = 0; m < mics; ++m) {
      struct Tap { Eigen::Index delay; double gain; };
      std::vector<Tap> taps;
      taps.push_back({static_cast<Eigen::Index>(uni(rng) * 8.0), 0.7 + 0.3 * uni(rng)});
      for (int r = 0; r < 2; ++r)
        taps.push_back({20 + static_cast<Eigen::Index>(uni(rng) * 60.0),
                        (uni(rng) < 0.5 ? -1.0 : 1.0) * (0.1 + 0.2 * uni(rng))});
      for (const auto& tap : taps)
        for (Eigen::Index i = tap.delay; i < len; ++i) out(m, i) += tap.gain * s(i - tap.delay);
    }
    return out;
  };

  RMatrix target = spatialize(src);
  RMatrix noise = RMatrix::Zero(mics, len);
  for (int k = 0; k < noise_sources; ++k) {
    const double pole = 0.3 + 0.65 * uni(rng);
    RVector ns(len);
    double state = 0.0;
    for (Eigen::Index i = 0; i < len; ++i) {
      state = pole * state + (1.0 - pole) * gauss(rng);
      ns(i) = state;
    }
    ns /= std::sqrt(ns.squaredNorm() / static_cast<double>(len));
    noise += spatialize(ns);
  }
  const double noise_rms = std::sqrt(noise.squaredNorm() / static_cast<double>(noise.size()));
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] += 0.05 * noise_rms * gauss(rng);

  const double peak = target.cwiseAbs().maxCoeff();
  target *= 0.25 / peak;
  const double ps = target.row(0).squaredNorm();
  const double pn = noise.row(0).squaredNorm();
  noise *= std::sqrt(ps / (pn * std::pow(10.0, 0.5)));

  MultichannelWave tw{sample_rate, target};
  MultichannelWave nw{sample_rate, noise};
  return {tw, nw};
}

// ---------------------------------------------------------------------------
// RIFF WAV io

enum class WavEncoding { pcm16, pcm24, pcm32, float32 };

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline MultichannelWave read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavFormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw WavFormatError(path.string() + " is not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw WavFormatError("truncated fmt chunk");
      format = detail::le16(bytes.data() + body);
      channels = detail::le16(bytes.data() + body + 2);
      rate = detail::le32(bytes.data() + body + 4);
      bits = detail::le16(bytes.data() + body + 14);
      if (format == 0xFFFE && size >= 26) format = detail::le16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<std::size_t>(size, bytes.size() - body);
    }
    pos = body + size + (size & 1u);
  }
  if (!data || channels == 0 || rate == 0) throw WavFormatError(path.string() + ": missing fmt or data");
  const std::size_t width = bits / 8;
  const bool pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
  const bool flt = format == 3 && bits == 32;
  if (!pcm && !flt)
    throw WavFormatError("unsupported encoding: format " + std::to_string(format) + ", " +
                         std::to_string(bits) + " bits");
  const std::size_t frames = data_len / (width * channels);
  MultichannelWave w;
  w.sample_rate = rate;
  w.samples.resize(channels, static_cast<Eigen::Index>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      double v = 0.0;
      if (flt) {
        float f;
        std::memcpy(&f, p, 4);
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(detail::le16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(detail::le32(p)) / 2147483648.0;
      }
      w.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return w;
}

/// Reads one mono (or multichannel) file per entry and stacks the channels.
inline MultichannelWave read_wav_channels(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw EmptyInput("no channel files given");
  std::vector<MultichannelWave> parts;
  Eigen::Index rows = 0;
  for (const auto& p : paths) {
    parts.push_back(read_wav(p));
    rows += parts.back().channels();
  }
  const auto len = parts.front().length();
  MultichannelWave out;
  out.sample_rate = parts.front().sample_rate;
  out.samples.resize(rows, len);
  Eigen::Index r = 0;
  for (const auto& part : parts) {
    if (part.length() != len || part.sample_rate != out.sample_rate)
      throw ChannelMismatch("channel files differ in length or sample rate");
    out.samples.middleRows(r, part.channels()) = part.samples;
    r += part.channels();
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const MultichannelWave& wave,
                      WavEncoding enc = WavEncoding::float32) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw WavFormatError("cannot write " + path.string());
  const std::uint16_t channels = static_cast<std::uint16_t>(wave.channels());
  const std::uint16_t bits = enc == WavEncoding::pcm16 ? 16 : enc == WavEncoding::pcm24 ? 24 : 32;
  const std::uint16_t format = enc == WavEncoding::float32 ? 3 : 1;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(wave.sample_rate));
  const std::uint32_t block = channels * (bits / 8u);
  const std::uint32_t data_len = static_cast<std::uint32_t>(wave.length()) * block;
  os.write("RIFF", 4);
  detail::put_le<std::uint32_t>(os, 36 + data_len);
  os.write("WAVEfmt ", 8);
  detail::put_le<std::uint32_t>(os, 16);
  detail::put_le<std::uint16_t>(os, format);
  detail::put_le<std::uint16_t>(os, channels);
  detail::put_le<std::uint32_t>(os, rate);
  detail::put_le<std::uint32_t>(os, rate * block);
  detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(block));
  detail::put_le<std::uint16_t>(os, bits);
  os.write("data", 4);
  detail::put_le<std::uint32_t>(os, data_len);
  for (Eigen::Index i = 0; i < wave.length(); ++i) {
    for (Eigen::Index c = 0; c < wave.channels(); ++c) {
      const double v = std::clamp(wave.samples(c, i), -1.0, 1.0);
      switch (enc) {
        case WavEncoding::float32: detail::put_le<float>(os, static_cast<float>(v)); break;
        case WavEncoding::pcm16:
          detail::put_le<std::int16_t>(os, static_cast<std::int16_t>(std::lround(std::clamp(v * 32768.0, -32768.0, 32767.0))));
          break;
        case WavEncoding::pcm24: {
          const auto s = static_cast<std::int32_t>(std::lround(std::clamp(v * 8388608.0, -8388608.0, 8388607.0)));
          const unsigned char b[3] = {static_cast<unsigned char>(s & 0xFF),
                                      static_cast<unsigned char>((s >> 8) & 0xFF),
                                      static_cast<unsigned char>((s >> 16) & 0xFF)};
          os.write(reinterpret_cast<const char*>(b), 3);
          break;
        }
        case WavEncoding::pcm32:
          detail::put_le<std::int32_t>(os, static_cast<std::int32_t>(std::llround(std::clamp(v * 2147483648.0, -2147483648.0, 2147483647.0))));
          break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Binary dumps with JSON sidecars

/// Writes `<stem>.bin` (little-endian float64 re/im pairs, t-major) and
/// `<stem>.json` {frames, freqs, mics, layout: "t-major"}.
inline void write_spectrogram(const std::filesystem::path& stem, const MultichannelSpectrogram& s) {
  std::ofstream os(stem.string() + ".bin", std::ios::binary);
  for (const auto& v : s.data()) {
    detail::put_le<double>(os, v.real());
    detail::put_le<double>(os, v.imag());
  }
  nlohmann::json j = {{"frames", s.frames()}, {"freqs", s.freqs()},           {"mics", s.mics()},
                      {"layout", "t-major"},  {"dtype", "complex128-le"},     {"window_length", s.config().window_length},
                      {"hop", s.config().hop}, {"window", to_string(s.config().window)}};
  std::ofstream(stem.string() + ".json") << j.dump(2) << "\n";
}

inline MultichannelSpectrogram read_spectrogram(const std::filesystem::path& stem) {
  nlohmann::json j;
  std::ifstream(stem.string() + ".json") >> j;
  StftConfig cfg{j.value("window_length", 1024), j.value("hop", 256),
                 window_from_string(j.value("window", std::string("sqrt-hann")))};
  const Eigen::Index frames = j.at("frames"), freqs = j.at("freqs"), mics = j.at("mics");
  MultichannelSpectrogram s(frames, freqs, mics, cfg, frames * cfg.hop, 16000.0);
  std::ifstream in(stem.string() + ".bin", std::ios::binary);
  for (auto& v : s.data()) {
    double re = 0.0, im = 0.0;
    in.read(reinterpret_cast<char*>(&re), 8);
    in.read(reinterpret_cast<char*>(&im), 8);
    v = Complex(re, im);
  }
  if (!in) throw EmptyInput("spectrogram binary shorter than its header states");
  return s;
}

}  // namespace maskbf

#endif  // MASKBF_SIGNAL_HPP
