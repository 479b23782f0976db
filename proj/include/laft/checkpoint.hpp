#pragma once

#include "laft/config.hpp"
#include "laft/model.hpp"
#include "laft/training.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace laft {

/// Layout: "LAFT", u32 version, u32 section count, then per section
/// u32 name length, UTF-8 name, u32 rank, rank x u32 dims, f64 payload, all
/// little-endian. Text metadata (config JSON, vocabulary) is stored as
/// sections holding one byte value per f64.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Section {
  std::string name;
  Shape dims;
  std::vector<double> data;
};

void write_sections(const std::filesystem::path& path, std::span<const Section> sections);
/// Throws FormatError on bad magic, unknown version or truncation.
std::vector<Section> read_sections(const std::filesystem::path& path);

struct OptimizerState {
  long step = 0;
  std::vector<Moments> moments;  // aligned with the trainable parameters of the saved model
};

/// Parameters ("param.<name>"), batch-norm running statistics
/// ("stats.<name>.mean/var"), optional Adam moments ("adam.*"), the config
/// snapshot, the vocabulary and its hash.
void save_checkpoint(const std::filesystem::path& path, CaptionModel& model, const RunConfig& config,
                     const Adam* optimizer = nullptr);

struct LoadedCheckpoint {
  RunConfig config;
  CaptionModel model;
  std::optional<OptimizerState> optimizer;
};

/// Rebuilds the model from the stored config and vocabulary, then loads
/// every tensor. Throws FormatError if a parameter is missing or misshapen or
/// the vocabulary hash does not match.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace laft
