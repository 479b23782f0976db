#include <gtest/gtest.h>

#include "laft/frontend.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace laft;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "laft_frontend_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Wav, ZerosRoundTrip) {
  const fs::path p = temp_path("zeros.wav");
  write_wav(p, std::vector<double>(44100, 0.0), 44100);
  const WavData w = read_wav(p);
  EXPECT_EQ(w.sample_rate, 44100);
  ASSERT_EQ(w.samples.size(), 44100u);
  for (double s : w.samples) EXPECT_EQ(s, 0.0);
}

TEST(Wav, FullScaleSquareUsesPcmScaling) {
  const fs::path p = temp_path("square.wav");
  std::vector<double> square(200);
  for (std::size_t i = 0; i < square.size(); ++i) square[i] = (i / 10) % 2 ? -1.0 : 1.0;
  write_wav(p, square, 8000);
  const WavData w = read_wav(p);
  for (std::size_t i = 0; i < square.size(); ++i)
    EXPECT_EQ(w.samples[i], square[i] > 0 ? 32767.0 / 32768.0 : -1.0);
}

TEST(Wav, MalformedInputs) {
  const fs::path good = temp_path("good.wav");
  write_wav(good, std::vector<double>(100, 0.25), 8000);
  const std::string bytes = read_bytes(good);

  const fs::path truncated = temp_path("truncated.wav");
  write_bytes(truncated, bytes.substr(0, bytes.size() - 50));
  try {
    read_wav(truncated);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("malformed RIFF"), std::string::npos);
  }

  const fs::path header = temp_path("header.wav");
  write_bytes(header, "RIFX" + bytes.substr(4));
  EXPECT_THROW(read_wav(header), FormatError);

  std::string alaw = bytes;
  alaw[20] = 6;  // audio format tag
  const fs::path codec = temp_path("alaw.wav");
  write_bytes(codec, alaw);
  try {
    read_wav(codec);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported codec"), std::string::npos);
  }
}

TEST(Fft, DeltaIsFlat) {
  const std::vector<std::complex<double>> x{1, 0, 0, 0};
  const auto y = fft<double>(x);
  ASSERT_EQ(y.size(), 4u);
  for (const auto& v : y) {
    EXPECT_NEAR(v.real(), 1.0, 1e-15);
    EXPECT_NEAR(v.imag(), 0.0, 1e-15);
  }
}

TEST(Fft, Parseval) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist;
  for (std::size_t n : {8u, 256u, 2048u}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {dist(rng), dist(rng)};
    const auto y = fft<double>(x);
    double time = 0.0, freq = 0.0;
    for (const auto& v : x) time += std::norm(v);
    for (const auto& v : y) freq += std::norm(v);
    EXPECT_NEAR(freq / static_cast<double>(n), time, 1e-10 * time);
  }
}

TEST(Fft, SinglePrecisionInstantiation) {
  const std::vector<std::complex<float>> x{1, 0, 0, 0};
  EXPECT_NEAR(fft<float>(x)[2].real(), 1.0f, 1e-6f);
}

TEST(LogMel, SilenceHitsTheFloor) {
  const std::vector<double> zeros(8192, 0.0);
  const LogMelSpectrogram s = logmel(zeros, 44100);
  EXPECT_EQ(s.frames.rows(), 1 + (8192 - 2048) / 1024);
  EXPECT_EQ(s.frames.cols(), 64);
  EXPECT_EQ(s.hop, 1024);
  for (Index i = 0; i < s.frames.size(); ++i) EXPECT_EQ(s.frames.data()[i], std::log(1e-10));
}

TEST(LogMel, FrameCountLaw) {
  for (Index len : {2048, 2049, 3071, 3072, 10000}) {
    const std::vector<double> x(static_cast<std::size_t>(len), 0.1);
    EXPECT_EQ(logmel(x, 16000, {64, 2048, 0, 1e-10}).frames.rows(), 1 + (len - 2048) / 1024);
  }
}

TEST(LogMel, Errors) {
  EXPECT_THROW(logmel(std::vector<double>(1000, 0.0), 44100), std::invalid_argument);
  EXPECT_THROW(logmel(std::vector<double>(5000, 0.0), 44100, {64, 1000, 0, 1e-10}), std::invalid_argument);
}

TEST(LogMel, ToneAtBandCenterPeaksInThatBand) {
  const int sr = 44100;
  const auto centers = mel_band_centers<double>(64, sr);
  for (Index m = 0; m < 64; ++m) {
    const double f = centers[static_cast<std::size_t>(m)];
    std::vector<double> x(8192);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / sr);
    const LogMelSpectrogram s = logmel(x, sr);
    for (Index t = 0; t < s.frames.rows(); ++t) {
      Index best = 0;
      s.frames.row(t).maxCoeff(&best);
      EXPECT_EQ(best, m) << "tone " << f << " Hz, frame " << t;
    }
  }
}

TEST(SpecAugment, NoMasksIsIdentity) {
  std::mt19937_64 rng(1);
  LogMelSpectrogram x{RowMatrix::Random(20, 8), 44100, 1024};
  const LogMelSpectrogram y = spec_augment(x, 0, 0, 5, rng);
  EXPECT_TRUE(y.frames == x.frames);
}

TEST(SpecAugment, FullWidthMaskGivesTheMean) {
  const RowMatrix x = RowMatrix::Random(6, 4);
  const MaskStripe all{MaskStripe::Axis::time, 0, 6};
  const RowMatrix y = apply_stripes(x, std::span<const MaskStripe>(&all, 1));
  for (Index i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y.data()[i], x.mean());
}

TEST(SpecAugment, SeededAndPure) {
  LogMelSpectrogram x{RowMatrix::Random(40, 16), 44100, 1024};
  const RowMatrix original = x.frames;
  std::mt19937_64 a(7), b(7);
  const auto sa = sample_stripes(40, 16, 2, 2, 6, a);
  const auto sb = sample_stripes(40, 16, 2, 2, 6, b);
  ASSERT_EQ(sa.size(), sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].start, sb[i].start);
    EXPECT_EQ(sa[i].width, sb[i].width);
  }
  std::mt19937_64 c(9), d(9);
  const LogMelSpectrogram ya = spec_augment(x, 2, 2, 6, c);
  EXPECT_TRUE(ya.frames == spec_augment(x, 2, 2, 6, d).frames);
  EXPECT_TRUE(x.frames == original);
  EXPECT_EQ(ya.frames.rows(), 40);
  EXPECT_EQ(ya.frames.cols(), 16);
  // at most 2*6 rows and 2*6 columns masked
  Index unchanged = 0;
  for (Index i = 0; i < x.frames.size(); ++i) unchanged += ya.frames.data()[i] == x.frames.data()[i];
  EXPECT_GE(unchanged, (40 - 12) * (16 - 12));
}

TEST(Afm1, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> dist;
  FeatureMatrix m(7, 128);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  const fs::path p = temp_path("h.afm");
  write_features(p, m);
  const FeatureMatrix r = read_features(p);
  ASSERT_EQ(r.rows(), 7);
  ASSERT_EQ(r.cols(), 128);
  EXPECT_EQ(std::memcmp(r.data(), m.data(), sizeof(float) * 7 * 128), 0);
}

TEST(Afm1, Errors) {
  const fs::path p = temp_path("bad.afm");
  FeatureMatrix m = FeatureMatrix::Ones(2, 3);
  write_features(p, m);
  std::string bytes = read_bytes(p);
  bytes[0] = 'X';
  write_bytes(p, bytes);
  EXPECT_THROW(read_features(p), FormatError);

  write_features(p, m);
  bytes = read_bytes(p);
  write_bytes(p, bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_features(p), FormatError);

  try {
    write_features(p, FeatureMatrix(0, 128));
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("empty feature matrix"), std::string::npos);
  }
  std::string zero_rows = "AFM1";
  zero_rows += std::string("\0\0\0\0\x80\0\0\0", 8);
  write_bytes(p, zero_rows);
  EXPECT_THROW(read_features(p), FormatError);

  std::string huge = "AFM1";
  huge += std::string("\xff\xff\xff\xff\xff\xff\xff\xff", 8);
  write_bytes(p, huge);
  EXPECT_THROW(read_features(p), FormatError);
}
