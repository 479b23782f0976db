#pragma once

#include "laft/tensor.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace laft {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- WAV

struct WavData {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
};

/// Reads RIFF/WAVE with 16-bit PCM or 32-bit float samples. Stereo is
/// averaged to mono. 16-bit samples are scaled by 1/32768, so full scale maps
/// to [-1, 32767/32768].
WavData read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1).
void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate);

// ---------------------------------------------------------------- spectra

template <typename Scalar>
using SpectralMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
std::vector<std::complex<Scalar>> fft(std::span<const std::complex<Scalar>> x) {
  Eigen::FFT<Scalar> engine;
  std::vector<std::complex<Scalar>> in(x.begin(), x.end()), out;
  engine.fwd(out, in);
  return out;
}

template <typename Scalar>
Scalar hz_to_mel(Scalar hz) {
  return Scalar(2595) * std::log10(Scalar(1) + hz / Scalar(700));
}

template <typename Scalar>
Scalar mel_to_hz(Scalar mel) {
  return Scalar(700) * (std::pow(Scalar(10), mel / Scalar(2595)) - Scalar(1));
}

/// Center frequencies (Hz) of `n_mels` HTK-scale triangular bands spanning
/// 0 Hz to Nyquist.
template <typename Scalar>
std::vector<Scalar> mel_band_centers(Index n_mels, Scalar sample_rate) {
  const Scalar top = hz_to_mel(sample_rate / Scalar(2));
  std::vector<Scalar> c(static_cast<std::size_t>(n_mels));
  for (Index m = 0; m < n_mels; ++m) c[static_cast<std::size_t>(m)] = mel_to_hz(top * Scalar(m + 1) / Scalar(n_mels + 1));
  return c;
}

/// Triangular filterbank, [n_mels, n_fft/2 + 1], unnormalized peaks of 1.
template <typename Scalar>
SpectralMatrix<Scalar> mel_filterbank(Index n_mels, Index n_fft, Scalar sample_rate) {
  const Index bins = n_fft / 2 + 1;
  const Scalar top = hz_to_mel(sample_rate / Scalar(2));
  std::vector<Scalar> edges(static_cast<std::size_t>(n_mels + 2));
  for (Index m = 0; m < n_mels + 2; ++m) edges[static_cast<std::size_t>(m)] = mel_to_hz(top * Scalar(m) / Scalar(n_mels + 1));
  SpectralMatrix<Scalar> fb = SpectralMatrix<Scalar>::Zero(n_mels, bins);
  for (Index m = 0; m < n_mels; ++m) {
    const Scalar lo = edges[static_cast<std::size_t>(m)], mid = edges[static_cast<std::size_t>(m + 1)],
                 hi = edges[static_cast<std::size_t>(m + 2)];
    for (Index k = 0; k < bins; ++k) {
      const Scalar f = sample_rate * Scalar(k) / Scalar(n_fft);
      const Scalar up = (f - lo) / (mid - lo), down = (hi - f) / (hi - mid);
      fb(m, k) = std::max(Scalar(0), std::min(up, down));
    }
  }
  return fb;
}

struct LogMelConfig {
  Index n_mels = 64;
  Index win = 2048;
  Index hop = 0;  // 0 means win / 2
  double floor = 1e-10;
};

struct LogMelSpectrogram {
  RowMatrix frames;  // T x F
  int sample_rate = 0;
  Index hop = 0;
};

/// log(mel_filterbank · |STFT|² + floor) with a periodic Hamming window and
/// no edge padding: T = 1 + floor((len - win) / hop).
LogMelSpectrogram logmel(std::span<const double> samples, int sample_rate, const LogMelConfig& config = {});

// ---------------------------------------------------------------- SpecAugment

struct MaskStripe {
  enum class Axis { time, freq };
  Axis axis = Axis::time;
  Index start = 0;
  Index width = 0;
};

/// Stripe widths are uniform in [1, min(max_width, dim)]; max_width <= 0
/// yields no stripes.
std::vector<MaskStripe> sample_stripes(Index frames, Index bands, int n_time_masks, int n_freq_masks,
                                       Index max_width, std::mt19937_64& rng);

/// Copy of `x` with every stripe replaced by the mean of the original `x`.
RowMatrix apply_stripes(const RowMatrix& x, std::span<const MaskStripe> stripes);

LogMelSpectrogram spec_augment(const LogMelSpectrogram& x, int n_time_masks, int n_freq_masks, Index max_width,
                               std::mt19937_64& rng);

// ---------------------------------------------------------------- AFM1 files

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// "AFM1", u32 rows, u32 cols (little-endian), rows*cols little-endian f32.
void write_features(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_features(const std::filesystem::path& path);

}  // namespace laft
