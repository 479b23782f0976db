#pragma once

#include "laft/corpus.hpp"

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

namespace laft {

/// One sound event: how it is described and how long it lasts.
struct EventType {
  std::string name;
  std::string noun;    // "a dog"
  std::string verb;    // "barks"
  std::string gerund;  // "barking"
  Index duration = 48;  // frames
};

/// Built-in event definitions, addressed by name.
const std::vector<EventType>& event_library();
const EventType& library_event(std::string_view name);

struct CorpusSpec {
  std::string name = "corpus";
  std::vector<EventType> events;
  Index clips = 200;
  Index frames = 256;  // T
  Index bands = 64;    // F
  Index min_events = 2;
  Index max_events = 3;
  Index min_gap = 4;  // frames before, between and after events
  double noise_std = 0.5;
  double background = -4.0;  // log-mel level of silence
  /// Templates depend only on (event name, template_seed), so corpora that
  /// share this seed share the templates of their common events.
  std::uint64_t template_seed = 2024;
  std::uint64_t seed = 0;  // clip sampling
  Index captions_per_clip = 5;

  void validate() const;
};

nlohmann::json to_json(const CorpusSpec& spec);
CorpusSpec corpus_spec_from_json(const nlohmann::json& j);

/// Fixed random F x duration pattern of an event, [duration, bands].
RowMatrix event_template(const EventType& event, Index bands, std::uint64_t template_seed);

/// Renders captions for an event sequence. Style s (0-based, < caption_style_count())
/// fixes the wording; every style starts with a different word.
std::string render_caption(std::span<const EventType* const> events, Index style);
Index caption_style_count();

/// Deterministic corpus: sequential events with gaps, templates stamped onto
/// a noisy background, one caption per style (up to captions_per_clip), and
/// an 80/10/10 train/val/eval split.
Corpus generate_corpus(const CorpusSpec& spec);

/// The standard transfer pair: A with 1000 clips over six events, B with 200
/// clips over four of those events plus two new ones.
std::pair<CorpusSpec, CorpusSpec> standard_pairs(std::uint64_t seed = 0);

/// Tone rendering of a clip for the WAV path: each event becomes a sine at a
/// fixed event-specific frequency; hop-spaced frames line up with the
/// timeline. Length gives exactly `spec.frames` log-mel frames.
std::vector<double> render_tones(const Clip& clip, const CorpusSpec& spec, int sample_rate, Index win, Index hop);

/// FNV-1a over ids, captions, splits and feature bytes.
std::uint64_t corpus_checksum(const Corpus& corpus);

}  // namespace laft
