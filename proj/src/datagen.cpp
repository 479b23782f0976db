#include "laft/datagen.hpp"

#include "laft/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

namespace laft {
namespace {

using nlohmann::json;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string join_events(std::span<const EventType* const> events, std::string_view sep, bool gerund) {
  std::string s;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (i > 0) s += sep;
    s += events[i]->noun + " " + (gerund ? events[i]->gerund : events[i]->verb);
  }
  return s;
}

}  // namespace

const std::vector<EventType>& event_library() {
  static const std::vector<EventType> lib{
      {"dog", "a dog", "barks", "barking", 56},        {"car_horn", "a car horn", "honks", "honking", 40},
      {"bird", "a bird", "chirps", "chirping", 48},    {"engine", "an engine", "runs", "running", 64},
      {"door", "a door", "slams", "slamming", 32},     {"siren", "a siren", "wails", "wailing", 60},
      {"bell", "a bell", "rings", "ringing", 44},      {"baby", "a baby", "cries", "crying", 52},
      {"cat", "a cat", "meows", "meowing", 40},        {"phone", "a phone", "buzzes", "buzzing", 36},
  };
  return lib;
}

const EventType& library_event(std::string_view name) {
  for (const auto& e : event_library())
    if (e.name == name) return e;
  throw std::invalid_argument("unknown event type '" + std::string(name) + "'");
}

void CorpusSpec::validate() const {
  if (events.size() < 2) throw std::invalid_argument("a corpus needs at least two event types");
  if (clips < 10) throw std::invalid_argument("a corpus needs at least 10 clips");
  if (frames < 16 || bands < 1) throw std::invalid_argument("corpus frames must be >= 16 and bands >= 1");
  if (min_events < 1 || max_events < min_events) throw std::invalid_argument("events_per_clip range is empty");
  if (max_events > static_cast<Index>(events.size()))
    throw std::invalid_argument("max_events exceeds the number of distinct event types");
  if (captions_per_clip < 1 || captions_per_clip > caption_style_count())
    throw std::invalid_argument("captions_per_clip must be in 1.." + std::to_string(caption_style_count()));
  if (noise_std < 0) throw std::invalid_argument("noise_std must be non-negative");
  std::set<std::string> names;
  std::vector<Index> durations;
  for (const auto& e : events) {
    if (!names.insert(e.name).second) throw std::invalid_argument("duplicate event type '" + e.name + "'");
    if (e.duration < 1) throw std::invalid_argument("event '" + e.name + "' has no duration");
    durations.push_back(e.duration);
  }
  std::sort(durations.rbegin(), durations.rend());
  Index worst = (max_events + 1) * min_gap;
  for (Index i = 0; i < max_events; ++i) worst += durations[static_cast<std::size_t>(i)];
  if (worst > frames)
    throw std::invalid_argument("infeasible duration: " + std::to_string(max_events) + " events need up to " +
                                std::to_string(worst) + " frames, T is " + std::to_string(frames));
}

json to_json(const CorpusSpec& s) {
  json events = json::array();
  for (const auto& e : s.events)
    events.push_back({{"name", e.name}, {"noun", e.noun}, {"verb", e.verb}, {"gerund", e.gerund}, {"duration", e.duration}});
  return {{"name", s.name},         {"events", events},           {"clips", s.clips},
          {"frames", s.frames},     {"bands", s.bands},           {"events_per_clip", {s.min_events, s.max_events}},
          {"min_gap", s.min_gap},   {"noise_std", s.noise_std},   {"background", s.background},
          {"template_seed", s.template_seed}, {"seed", s.seed},   {"captions_per_clip", s.captions_per_clip}};
}

CorpusSpec corpus_spec_from_json(const json& j) {
  static const std::set<std::string> allowed{"name",    "events",     "clips",         "frames", "bands",
                                             "events_per_clip", "min_gap", "noise_std", "background",
                                             "template_seed", "seed", "captions_per_clip"};
  if (!j.is_object()) throw ConfigError("corpus spec must be a JSON object");
  for (const auto& [k, _] : j.items())
    if (!allowed.contains(k)) throw ConfigError("unknown corpus spec key '" + k + "'");
  CorpusSpec s;
  try {
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    if (j.contains("events")) {
      s.events.clear();
      for (const auto& e : j["events"]) {
        if (e.is_string()) {
          s.events.push_back(library_event(e.get<std::string>()));
          continue;
        }
        EventType t = e.contains("name") && !e.contains("noun") ? library_event(e["name"].get<std::string>()) : EventType{};
        if (e.contains("name")) t.name = e["name"].get<std::string>();
        if (e.contains("noun")) t.noun = e["noun"].get<std::string>();
        if (e.contains("verb")) t.verb = e["verb"].get<std::string>();
        if (e.contains("gerund")) t.gerund = e["gerund"].get<std::string>();
        if (e.contains("duration")) t.duration = e["duration"].get<Index>();
        s.events.push_back(t);
      }
    }
    if (j.contains("clips")) s.clips = j["clips"].get<Index>();
    if (j.contains("frames")) s.frames = j["frames"].get<Index>();
    if (j.contains("bands")) s.bands = j["bands"].get<Index>();
    if (j.contains("events_per_clip")) {
      const auto r = j["events_per_clip"].get<std::vector<Index>>();
      if (r.size() != 2) throw ConfigError("events_per_clip must be [min, max]");
      s.min_events = r[0];
      s.max_events = r[1];
    }
    if (j.contains("min_gap")) s.min_gap = j["min_gap"].get<Index>();
    if (j.contains("noise_std")) s.noise_std = j["noise_std"].get<double>();
    if (j.contains("background")) s.background = j["background"].get<double>();
    if (j.contains("template_seed")) s.template_seed = j["template_seed"].get<std::uint64_t>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("captions_per_clip")) s.captions_per_clip = j["captions_per_clip"].get<Index>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("corpus spec: ") + e.what());
  }
  s.validate();
  return s;
}

RowMatrix event_template(const EventType& event, Index bands, std::uint64_t template_seed) {
  std::mt19937_64 rng(mix(fnv1a(event.name), template_seed));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::RowVectorXd base(bands);
  for (Index f = 0; f < bands; ++f) base[f] = 0.5 * std::abs(normal(rng));
  // a handful of strong bands gives every event a distinct signature
  for (int k = 0; k < 6; ++k) base[static_cast<Index>(uni(rng) * static_cast<double>(bands)) % bands] += 4.0 + 2.0 * uni(rng);
  const double period = 6.0 + 10.0 * uni(rng);
  RowMatrix t(event.duration, bands);
  for (Index i = 0; i < event.duration; ++i)
    t.row(i) = base * (0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / period));
  return t;
}

Index caption_style_count() { return 5; }

std::string render_caption(std::span<const EventType* const> events, Index style) {
  if (events.empty()) throw std::invalid_argument("render_caption: no events");
  switch (style) {
    case 0: return join_events(events, " then ", false);
    case 1: return "there is " + join_events(events, " followed by ", true);
    case 2: return "you can hear " + join_events(events, " and then ", true);
    case 3: return "the sound of " + join_events(events, " while ", true);
    case 4: return "first " + join_events(events, " and later ", false);
    default: throw std::invalid_argument("caption style out of range");
  }
}

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<RowMatrix> templates;
  for (const auto& e : spec.events) templates.push_back(event_template(e, spec.bands, spec.template_seed));

  Corpus corpus;
  corpus.name = spec.name;
  corpus.kind = FeatureKind::logmel;
  corpus.clips.resize(static_cast<std::size_t>(spec.clips));
  for (Index c = 0; c < spec.clips; ++c) {
    std::mt19937_64 rng(mix(spec.seed, static_cast<std::uint64_t>(c)));
    Clip& clip = corpus.clips[static_cast<std::size_t>(c)];
    char id[32];
    std::snprintf(id, sizeof id, "%04lld", static_cast<long long>(c));
    clip.id = spec.name + "_" + id;

    const Index k = std::uniform_int_distribution<Index>(spec.min_events, spec.max_events)(rng);
    std::vector<std::size_t> order(spec.events.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(k));

    Index busy = (k + 1) * spec.min_gap;
    for (std::size_t e : order) busy += spec.events[e].duration;
    const Index slack = spec.frames - busy;
    std::vector<double> w(static_cast<std::size_t>(k + 1));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (double& x : w) x = uni(rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    Index cursor = 0;
    for (Index i = 0; i < k; ++i) {
      cursor += spec.min_gap + static_cast<Index>(std::floor(static_cast<double>(slack) * w[static_cast<std::size_t>(i)] / total));
      const EventType& ev = spec.events[order[static_cast<std::size_t>(i)]];
      clip.timeline.push_back({ev.name, cursor, ev.duration});
      cursor += ev.duration;
    }

    clip.features = RowMatrix::Constant(spec.frames, spec.bands, spec.background);
    for (std::size_t i = 0; i < order.size(); ++i)
      clip.features.middleRows(clip.timeline[i].onset, clip.timeline[i].duration) += templates[order[i]];
    if (spec.noise_std > 0) {
      std::normal_distribution<double> noise(0.0, spec.noise_std);
      for (Index i = 0; i < clip.features.size(); ++i) clip.features.data()[i] += noise(rng);
    }
    // float32-representable, so the AFM1 copy on disk is exact
    clip.features = clip.features.cast<float>().cast<double>();

    std::vector<const EventType*> seq;
    for (std::size_t e : order) seq.push_back(&spec.events[e]);
    for (Index s = 0; s < spec.captions_per_clip; ++s) clip.captions.push_back(render_caption(seq, s));
  }

  std::vector<std::size_t> perm(corpus.clips.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 split_rng(mix(spec.seed, 0xfeedull));
  std::shuffle(perm.begin(), perm.end(), split_rng);
  const auto n = perm.size();
  const std::size_t n_train = n * 8 / 10, n_val = n / 10;
  for (std::size_t i = 0; i < n; ++i)
    corpus.clips[perm[i]].split = i < n_train ? Split::train : i < n_train + n_val ? Split::val : Split::eval;
  return corpus;
}

std::pair<CorpusSpec, CorpusSpec> standard_pairs(std::uint64_t seed) {
  CorpusSpec a, b;
  a.name = "A";
  for (const char* e : {"dog", "car_horn", "bird", "engine", "door", "siren"}) a.events.push_back(library_event(e));
  a.clips = 1000;
  a.seed = mix(seed, 0xa);
  b.name = "B";
  for (const char* e : {"dog", "bird", "engine", "door", "bell", "baby"}) b.events.push_back(library_event(e));
  b.clips = 200;
  b.seed = mix(seed, 0xb);
  return {a, b};
}

std::vector<double> render_tones(const Clip& clip, const CorpusSpec& spec, int sample_rate, Index win, Index hop) {
  const std::size_t n = static_cast<std::size_t>((spec.frames - 1) * hop + win);
  std::vector<double> x(n, 0.0);
  const auto centers = mel_band_centers<double>(spec.bands, static_cast<double>(sample_rate));
  std::mt19937_64 rng(fnv1a(clip.id, spec.seed));
  std::normal_distribution<double> noise(0.0, 1e-3);
  for (double& v : x) v = noise(rng);
  for (const auto& ev : clip.timeline) {
    const auto band = static_cast<std::size_t>(8 + fnv1a(ev.event) % static_cast<std::uint64_t>(std::max<Index>(1, spec.bands - 16)));
    const double f = centers[std::min(band, centers.size() - 1)];
    const auto start = static_cast<std::size_t>(ev.onset * hop);
    const auto stop = std::min(n, static_cast<std::size_t>((ev.onset + ev.duration) * hop));
    for (std::size_t i = start; i < stop; ++i)
      x[i] += 0.3 * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / sample_rate);
  }
  return x;
}

std::uint64_t corpus_checksum(const Corpus& corpus) {
  std::uint64_t h = fnv1a(corpus.name);
  for (const Clip& c : corpus.clips) {
    h = fnv1a(c.id, h);
    h = fnv1a(to_string(c.split), h);
    for (const auto& s : c.captions) h = fnv1a(s, h);
    const FeatureMatrix f = c.features.cast<float>();
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(f.data()), static_cast<std::size_t>(f.size()) * sizeof(float)), h);
  }
  return h;
}

}  // namespace laft
