// Copyright 2026 The maskbf Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "maskbf/signal.hpp"

namespace maskbf {
namespace {

namespace fs = std::filesystem;

MultichannelWave noise_wave(int channels, Eigen::Index len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 0.1);
  MultichannelWave w;
  w.samples.resize(channels, len);
  for (Eigen::Index i = 0; i < w.samples.size(); ++i) w.samples(i) = d(rng);
  return w;
}

double max_abs_diff(const MultichannelSpectrogram& a, const MultichannelSpectrogram& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double max_abs(const MultichannelSpectrogram& a) {
  double m = 0.0;
  for (const auto& v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "maskbf_signal_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Stft, BinCenterSinusoidRectangular) {
  const StftConfig cfg{64, 16, WindowKind::rectangular};
  const int k = 5;
  MultichannelWave w;
  w.samples.resize(1, 1024);
  for (Eigen::Index i = 0; i < 1024; ++i) w.samples(0, i) = std::cos(2.0 * std::numbers::pi * k * i / 64.0);
  const auto s = stft(w, cfg);
  // frames entirely inside the signal
  for (Eigen::Index t = 2; t < s.frames() - 2; ++t) {
    double total = 0.0;
    for (Eigen::Index f = 0; f < s.freqs(); ++f) total += std::norm(s(t, f, 0));
    EXPECT_GE(std::norm(s(t, k, 0)) / total, 0.99) << "frame " << t;
  }
}

TEST(Stft, ZeroSignal) {
  MultichannelWave w;
  w.samples = RMatrix::Zero(2, 500);
  const auto s = stft(w, StftConfig{256, 64});
  EXPECT_EQ(max_abs(s), 0.0);
  EXPECT_EQ(s.frames(), 8);  // ceil(500 / 64)
  EXPECT_EQ(s.freqs(), 129);
  const auto back = istft(s);
  EXPECT_EQ(back.samples.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stft, WhiteNoiseRoundTrip) {
  for (const StftConfig cfg : {StftConfig{256, 64}, StftConfig{1024, 256}, StftConfig{64, 32}}) {
    const auto w = noise_wave(3, 4001, 9);
    const auto back = istft(stft(w, cfg));
    ASSERT_EQ(back.samples.cols(), w.samples.cols());
    const double rms = std::sqrt((back.samples - w.samples).squaredNorm() / double(w.samples.size()));
    EXPECT_LE(rms, 1e-6) << cfg.window_length << "/" << cfg.hop;
  }
}

TEST(Stft, Linearity) {
  const StftConfig cfg{256, 64};
  const auto w1 = noise_wave(2, 2000, 1);
  const auto w2 = noise_wave(2, 2000, 2);
  MultichannelWave mix = w1;
  mix.samples = -1.7 * w1.samples + w2.samples;
  const auto s1 = stft(w1, cfg), s2 = stft(w2, cfg), sm = stft(mix, cfg);
  double err = 0.0;
  for (std::size_t i = 0; i < sm.data().size(); ++i)
    err = std::max(err, std::abs(sm.data()[i] - (-1.7 * s1.data()[i] + s2.data()[i])));
  EXPECT_LE(err, 1e-9);
}

TEST(Stft, Errors) {
  MultichannelWave empty;
  EXPECT_THROW(stft(empty, StftConfig{}), EmptyInput);
  const auto w = noise_wave(1, 100, 3);
  EXPECT_THROW(stft(w, StftConfig{100, 25}), std::invalid_argument);
  EXPECT_THROW(stft(w, StftConfig{64, 24}), std::invalid_argument);
  // squared Hann at half overlap does not add to a constant
  EXPECT_THROW(istft(stft(w, StftConfig{64, 32, WindowKind::hann})), NonColaWindow);
  EXPECT_NO_THROW(istft(stft(w, StftConfig{64, 16, WindowKind::hann})));
}

TEST(Istft, SingleFrameImpulse) {
  const StftConfig cfg{16, 4};
  const int l = cfg.window_length;
  MultichannelSpectrogram spec(10, cfg.freqs(), 1, cfg, 40, 16000.0);
  const Eigen::Index t0 = 5;
  const int i0 = 3;  // impulse position inside the frame buffer
  for (int f = 0; f < cfg.freqs(); ++f)
    spec(t0, f, 0) = std::polar(1.0, -2.0 * std::numbers::pi * f * i0 / l);
  const auto w = istft(spec);

  // closed form: sqrt-Hann at i0 divided by the squared-window envelope there
  auto win = [&](int i) { return std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / l)); };
  const Eigen::Index n0 = t0 * cfg.hop - l / 2 + i0;
  double env = 0.0;
  for (Eigen::Index t = 0; t < 10; ++t) {
    const Eigen::Index i = n0 - (t * cfg.hop - l / 2);
    if (i >= 0 && i < l) env += win(int(i)) * win(int(i));
  }
  for (Eigen::Index n = 0; n < 40; ++n) {
    const double expected = n == n0 ? win(i0) / env : 0.0;
    EXPECT_NEAR(w.samples(0, n), expected, 1e-12) << n;
  }
}

TEST(Scenario, Mixing) {
  const auto [target, noise] = synth_scene(5, 3, 2, 0.5, 16000.0);
  const StftConfig cfg{256, 64};

  const auto g0 = mix_scenario(target, noise, 0.0, 1, cfg);
  EXPECT_EQ(max_abs_diff(g0.observation, g0.target), 0.0);

  MultichannelWave silent = target;
  silent.samples.setZero();
  const auto t0 = mix_scenario(silent, noise, 1.0, 1, cfg);
  EXPECT_LE(max_abs_diff(t0.observation, t0.interference), 1e-12);

  const auto sc = mix_scenario(target, noise, 2.5, 2, cfg);
  double err = 0.0;
  for (std::size_t i = 0; i < sc.observation.data().size(); ++i)
    err = std::max(err, std::abs(sc.observation.data()[i] - sc.target.data()[i] - 2.5 * sc.interference.data()[i]));
  EXPECT_LE(err, 1e-6 * max_abs(sc.observation));
  EXPECT_EQ(sc.g, 2.5);
  EXPECT_EQ(sc.reference_mic, 2);
  EXPECT_EQ(sc.ref_index(), 1);
}

TEST(Scenario, DoublingGLowersInputSnrBySixDb) {
  const auto [target, noise] = synth_scene(11, 6, 2, 1.0, 16000.0);
  auto input_snr = [&](double g) {
    const auto sc = mix_scenario(target, noise, g, 5, StftConfig{256, 64});
    const auto x = istft(sc.observation);
    const RVector s = target.samples.row(4);
    const RVector r = x.samples.row(4).transpose() - s;
    return 10.0 * std::log10(s.squaredNorm() / r.squaredNorm());
  };
  EXPECT_NEAR(input_snr(1.0) - input_snr(2.0), 20.0 * std::log10(2.0), 1e-3);
  EXPECT_NEAR(input_snr(2.0) - input_snr(4.0), 20.0 * std::log10(2.0), 1e-3);
}

TEST(Scenario, Errors) {
  const auto [target, noise] = synth_scene(5, 3, 1, 0.1, 16000.0);
  MultichannelWave two = noise;
  two.samples = noise.samples.topRows(2);
  EXPECT_THROW(mix_scenario(target, two, 1.0, 1, StftConfig{256, 64}), ChannelMismatch);
  EXPECT_THROW(mix_scenario(target, noise, 1.0, 4, StftConfig{256, 64}), ChannelMismatch);
}

TEST(Scenario, ShortNoiseIsLooped) {
  const auto [target, noise] = synth_scene(5, 2, 1, 0.5, 16000.0);
  MultichannelWave shortn = noise;
  shortn.samples = noise.samples.leftCols(1000);
  const auto sc = mix_scenario(target, shortn, 1.0, 1, StftConfig{256, 64});
  EXPECT_EQ(sc.interference.num_samples(), target.length());
  const auto n = istft(sc.interference);
  // past the crossfade the loop repeats the source
  EXPECT_LE((n.samples.block(0, 500, 2, 300) - shortn.samples.block(0, 500, 2, 300)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GT(n.samples.rightCols(1000).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SynthScene, DeterministicAndShaped) {
  const auto a = synth_scene(7, 2, 2, 1.0, 16000.0);
  const auto b = synth_scene(7, 2, 2, 1.0, 16000.0);
  EXPECT_EQ(a.first.samples.rows(), 2);
  EXPECT_EQ(a.first.samples.cols(), 16000);
  EXPECT_EQ(a.second.samples.cols(), 16000);
  EXPECT_TRUE(a.first.samples == b.first.samples);
  EXPECT_TRUE(a.second.samples == b.second.samples);
  const auto c = synth_scene(8, 2, 2, 1.0, 16000.0);
  EXPECT_FALSE(a.first.samples == c.first.samples);
  EXPECT_THROW(synth_scene(1, 1, 1, 1.0, 16000.0), std::invalid_argument);
}

TEST(SynthScene, TargetAndNoiseUncorrelated) {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const auto [t, n] = synth_scene(seed, 3, 2, 2.0, 16000.0);
    for (Eigen::Index ch = 0; ch < 3; ++ch) {
      RVector a = t.samples.row(ch), b = n.samples.row(ch);
      a.array() -= a.mean();
      b.array() -= b.mean();
      EXPECT_LE(std::abs(a.dot(b)) / (a.norm() * b.norm()), 0.05) << "seed " << seed << " ch " << ch;
    }
  }
}

TEST(Wav, RoundTripEncodings) {
  auto w = noise_wave(3, 777, 4);
  w.samples = w.samples.cwiseMax(-0.99).cwiseMin(0.99);
  w.sample_rate = 8000.0;
  const std::pair<WavEncoding, double> cases[] = {{WavEncoding::pcm16, 1.0 / 32767},
                                                  {WavEncoding::pcm24, 1.0 / 8388607},
                                                  {WavEncoding::pcm32, 1e-9},
                                                  {WavEncoding::float32, 1e-7}};
  for (const auto& [enc, tol] : cases) {
    const auto p = scratch("rt.wav");
    write_wav(p, w, enc);
    const auto r = read_wav(p);
    EXPECT_EQ(r.sample_rate, 8000.0);
    ASSERT_EQ(r.channels(), 3);
    ASSERT_EQ(r.length(), 777);
    EXPECT_LE((r.samples - w.samples).cwiseAbs().maxCoeff(), tol);
  }
}

TEST(Wav, OneFilePerChannel) {
  const auto w = noise_wave(2, 300, 5);
  MultichannelWave a, b;
  a.samples = w.samples.topRows(1);
  b.samples = w.samples.bottomRows(1);
  write_wav(scratch("c1.wav"), a);
  write_wav(scratch("c2.wav"), b);
  const auto r = read_wav_channels({scratch("c1.wav"), scratch("c2.wav")});
  ASSERT_EQ(r.channels(), 2);
  EXPECT_LE((r.samples - w.samples).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Wav, Malformed) {
  std::ofstream(scratch("bad.wav"), std::ios::binary) << "RIFF\x10\0\0\0WAVEjunk";
  EXPECT_THROW(read_wav(scratch("bad.wav")), WavFormatError);
  EXPECT_THROW(read_wav(scratch("missing.wav")), WavFormatError);
}

TEST(SpectrogramDump, RoundTrip) {
  const auto s = stft(noise_wave(2, 1000, 6), StftConfig{64, 16});
  write_spectrogram(scratch("spec"), s);
  const auto r = read_spectrogram(scratch("spec"));
  EXPECT_EQ(r.frames(), s.frames());
  EXPECT_EQ(r.freqs(), s.freqs());
  EXPECT_EQ(r.mics(), 2);
  EXPECT_EQ(max_abs_diff(r, s), 0.0);
}

}  // namespace
}  // namespace maskbf
