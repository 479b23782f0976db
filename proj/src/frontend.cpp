#include "laft/frontend.hpp"

#include "laft/binary_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numbers>

namespace laft {
namespace {

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | p[1] << 8); }

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  const std::vector<unsigned char> buf = slurp(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw FormatError("malformed RIFF header in " + path.string());
  std::size_t pos = 12;
  int format = -1, channels = 0, bits = 0;
  WavData wav;
  const unsigned char* data = nullptr;
  std::size_t data_bytes = 0;
  while (pos + 8 <= buf.size()) {
    const unsigned char* chunk = buf.data() + pos;
    const std::size_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > buf.size()) throw FormatError("malformed RIFF fmt chunk in " + path.string());
      format = le16(buf.data() + body);
      channels = le16(buf.data() + body + 2);
      wav.sample_rate = static_cast<int>(le32(buf.data() + body + 4));
      bits = le16(buf.data() + body + 14);
      if (format == 0xFFFE && size >= 26) format = le16(buf.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > buf.size()) throw FormatError("malformed RIFF: truncated data chunk in " + path.string());
      data = buf.data() + body;
      data_bytes = size;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (format < 0 || data == nullptr) throw FormatError("malformed RIFF: missing fmt or data chunk in " + path.string());
  if (channels < 1 || channels > 2) throw FormatError("unsupported channel count " + std::to_string(channels));
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    throw FormatError("unsupported codec (format " + std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  const std::size_t width = pcm16 ? 2 : 4;
  const std::size_t frames = data_bytes / (width * static_cast<std::size_t>(channels));
  wav.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)) * width;
      if (pcm16) {
        acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        const std::uint32_t u = le32(p);
        float f;
        std::memcpy(&f, &u, 4);
        acc += f;
      }
    }
    wav.samples[i] = acc / channels;
  }
  return wav;
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  const std::uint32_t data_bytes = io::checked_u32(samples.size() * 2, "wav payload");
  os.write("RIFF", 4);
  io::put<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  io::put<std::uint32_t>(os, 16);
  io::put<std::uint16_t>(os, 1);
  io::put<std::uint16_t>(os, 1);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(sample_rate) * 2);
  io::put<std::uint16_t>(os, 2);
  io::put<std::uint16_t>(os, 16);
  os.write("data", 4);
  io::put<std::uint32_t>(os, data_bytes);
  for (double s : samples) {
    const double scaled = std::clamp(s * 32768.0, -32768.0, 32767.0);
    io::put<std::int16_t>(os, static_cast<std::int16_t>(std::lround(scaled)));
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

LogMelSpectrogram logmel(std::span<const double> samples, int sample_rate, const LogMelConfig& config) {
  const Index win = config.win;
  const Index hop = config.hop > 0 ? config.hop : win / 2;
  if (win < 2 || (win & (win - 1)) != 0) throw std::invalid_argument("logmel: window length must be a power of two");
  if (static_cast<Index>(samples.size()) < win) throw std::invalid_argument("logmel: signal shorter than one window");
  const Index frames = 1 + (static_cast<Index>(samples.size()) - win) / hop;
  const Index bins = win / 2 + 1;
  const RowMatrix fb = mel_filterbank<double>(config.n_mels, win, sample_rate);
  Eigen::VectorXd window(win);
  for (Index n = 0; n < win; ++n)
    window[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win));

  RowMatrix power(frames, bins);
  Eigen::FFT<double> engine;
  std::vector<double> frame(static_cast<std::size_t>(win));
  std::vector<std::complex<double>> spectrum;
  for (Index t = 0; t < frames; ++t) {
    for (Index n = 0; n < win; ++n) frame[static_cast<std::size_t>(n)] = samples[static_cast<std::size_t>(t * hop + n)] * window[n];
    engine.fwd(spectrum, frame);
    for (Index k = 0; k < bins; ++k) power(t, k) = std::norm(spectrum[static_cast<std::size_t>(k)]);
  }
  LogMelSpectrogram out;
  out.frames = ((power * fb.transpose()).array() + config.floor).log().matrix();
  out.sample_rate = sample_rate;
  out.hop = hop;
  return out;
}

std::vector<MaskStripe> sample_stripes(Index frames, Index bands, int n_time_masks, int n_freq_masks,
                                       Index max_width, std::mt19937_64& rng) {
  std::vector<MaskStripe> stripes;
  if (max_width <= 0) return stripes;
  auto draw = [&](MaskStripe::Axis axis, Index dim) {
    const Index wmax = std::min(max_width, dim);
    const Index w = std::uniform_int_distribution<Index>(1, wmax)(rng);
    const Index s = std::uniform_int_distribution<Index>(0, dim - w)(rng);
    stripes.push_back({axis, s, w});
  };
  for (int i = 0; i < n_time_masks; ++i) draw(MaskStripe::Axis::time, frames);
  for (int i = 0; i < n_freq_masks; ++i) draw(MaskStripe::Axis::freq, bands);
  return stripes;
}

RowMatrix apply_stripes(const RowMatrix& x, std::span<const MaskStripe> stripes) {
  RowMatrix y = x;
  if (stripes.empty()) return y;
  const double fill = x.mean();
  for (const MaskStripe& s : stripes) {
    if (s.axis == MaskStripe::Axis::time)
      y.middleRows(s.start, s.width).setConstant(fill);
    else
      y.middleCols(s.start, s.width).setConstant(fill);
  }
  return y;
}

LogMelSpectrogram spec_augment(const LogMelSpectrogram& x, int n_time_masks, int n_freq_masks, Index max_width,
                               std::mt19937_64& rng) {
  const auto stripes = sample_stripes(x.frames.rows(), x.frames.cols(), n_time_masks, n_freq_masks, max_width, rng);
  return {apply_stripes(x.frames, stripes), x.sample_rate, x.hop};
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw FormatError("empty feature matrix");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  os.write("AFM1", 4);
  io::put(os, io::checked_u32(static_cast<std::size_t>(m.rows()), "feature rows"));
  io::put(os, io::checked_u32(static_cast<std::size_t>(m.cols()), "feature cols"));
  for (Index i = 0; i < m.size(); ++i) io::put(os, m.data()[i]);
  if (!os) throw FormatError("write failed for " + path.string());
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "AFM1", 4) != 0) throw FormatError("bad magic in " + path.string());
  std::uint32_t rows = 0, cols = 0;
  if (!io::get(in, rows) || !io::get(in, cols)) throw FormatError("truncated header in " + path.string());
  if (rows == 0 || cols == 0) throw FormatError("empty feature matrix in " + path.string());
  const auto file_size = std::filesystem::file_size(path);
  const std::uint64_t need = std::uint64_t{rows} * cols;
  if (need > (std::uint64_t{1} << 34) || 12 + 4 * need > file_size)
    throw FormatError(need > (std::uint64_t{1} << 34) ? "feature dims overflow in " + path.string()
                                                      : "truncated payload in " + path.string());
  FeatureMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i)
    if (!io::get(in, m.data()[i])) throw FormatError("truncated payload in " + path.string());
  return m;
}

}  // namespace laft
