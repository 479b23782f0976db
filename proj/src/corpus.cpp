#include "laft/corpus.hpp"

#include "laft/frontend.hpp"

#include <fstream>
#include <json.hpp>

namespace laft {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::eval: return "eval";
  }
  return "train";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "eval") return Split::eval;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

std::vector<const Clip*> Corpus::select(Split s) const {
  std::vector<const Clip*> out;
  for (const Clip& c : clips)
    if (c.split == s) out.push_back(&c);
  return out;
}

std::vector<std::string> Corpus::captions(Split s) const {
  std::vector<std::string> out;
  for (const Clip* c : select(s)) out.insert(out.end(), c->captions.begin(), c->captions.end());
  return out;
}

void save_corpus(const fs::path& dir, const Corpus& corpus) {
  fs::create_directories(dir / "features");
  std::ofstream lines(dir / "captions.jsonl");
  if (!lines) throw std::runtime_error("cannot write " + (dir / "captions.jsonl").string());
  for (const Clip& c : corpus.clips) {
    write_features(dir / "features" / (c.id + ".afm"), c.features.cast<float>());
    json events = json::array();
    for (const auto& e : c.timeline) events.push_back({{"event", e.event}, {"onset", e.onset}, {"duration", e.duration}});
    lines << json{{"clip_id", c.id}, {"captions", c.captions}, {"split", to_string(c.split)}, {"events", events}}.dump()
          << '\n';
  }
  std::ofstream meta(dir / "corpus.json");
  meta << json{{"name", corpus.name}, {"kind", to_string(corpus.kind)}, {"clips", corpus.clips.size()}}.dump(2) << '\n';
}

Corpus load_corpus(const fs::path& dir) {
  Corpus corpus;
  std::ifstream meta(dir / "corpus.json");
  if (!meta) throw FormatError("not a corpus directory (missing corpus.json): " + dir.string());
  try {
    const json m = json::parse(meta);
    corpus.name = m.at("name").get<std::string>();
    corpus.kind = feature_kind_from_string(m.at("kind").get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError("corpus.json: " + std::string(e.what()));
  }
  std::ifstream lines(dir / "captions.jsonl");
  if (!lines) throw FormatError("missing captions.jsonl in " + dir.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Clip c;
    try {
      const json r = json::parse(line);
      c.id = r.at("clip_id").get<std::string>();
      c.captions = r.at("captions").get<std::vector<std::string>>();
      c.split = r.contains("split") ? split_from_string(r["split"].get<std::string>()) : Split::train;
      if (r.contains("events"))
        for (const auto& e : r["events"])
          c.timeline.push_back({e.at("event").get<std::string>(), e.at("onset").get<Index>(), e.at("duration").get<Index>()});
    } catch (const json::exception& e) {
      throw FormatError("captions.jsonl line " + std::to_string(number) + ": " + e.what());
    }
    if (c.captions.empty()) throw FormatError("clip " + c.id + " has no captions");
    c.features = read_features(dir / "features" / (c.id + ".afm")).cast<double>();
    corpus.clips.push_back(std::move(c));
  }
  if (corpus.clips.empty()) throw FormatError("corpus has no clips: " + dir.string());
  return corpus;
}

}  // namespace laft
