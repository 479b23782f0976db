#pragma once

#include "laft/config.hpp"
#include "laft/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace laft {

enum class Split { train, val, eval };
std::string to_string(Split s);
Split split_from_string(std::string_view s);

struct EventOccurrence {
  std::string event;
  Index onset = 0;     // frame
  Index duration = 0;  // frames
};

struct Clip {
  std::string id;
  RowMatrix features;  // T x F log-mel, or L x D audio features
  std::vector<std::string> captions;
  std::vector<EventOccurrence> timeline;
  Split split = Split::train;
};

struct Corpus {
  std::string name;
  FeatureKind kind = FeatureKind::logmel;
  std::vector<Clip> clips;

  std::vector<const Clip*> select(Split s) const;
  /// Every caption of the given split, in clip order.
  std::vector<std::string> captions(Split s) const;
};

/// Directory layout: features/<clip_id>.afm (AFM1), captions.jsonl with one
/// {clip_id, captions, split, events} record per clip, and corpus.json with
/// the corpus name and feature kind. Features are stored as float32, so a
/// saved corpus reloads bit-exactly only if its features were already
/// float32-representable (generated corpora are).
void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace laft
