#include "laft/checkpoint.hpp"

#include "laft/binary_io.hpp"
#include "laft/frontend.hpp"

#include <fstream>
#include <map>

namespace laft {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Section text_section(std::string name, const std::string& text) {
  Section s{std::move(name), {}, {}};
  for (unsigned char c : text) s.data.push_back(c);
  if (s.data.empty()) s.data.push_back(0.0);  // dims must be positive; 0 bytes are skipped on read
  s.dims = {static_cast<Index>(s.data.size())};
  return s;
}

std::string section_text(const Section& s) {
  std::string out;
  out.reserve(s.data.size());
  for (double v : s.data) {
    if (v < 0 || v > 255 || v != static_cast<double>(static_cast<int>(v)))
      throw FormatError("section " + s.name + " is not a text section");
    if (v != 0) out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return out;
}

Section tensor_section(std::string name, Shape dims, const double* data, Index n) {
  return {std::move(name), std::move(dims), std::vector<double>(data, data + n)};
}

std::string join_lines(const std::vector<std::string>& tokens) {
  std::string s;
  for (const auto& t : tokens) s += t + '\n';
  return s;
}

Vocab vocab_from_text(const std::string& text) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    tokens.push_back(text.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  Vocab v;
  if (tokens.size() < static_cast<std::size_t>(v.size())) throw FormatError("checkpoint vocabulary is truncated");
  for (TokenId i = 0; i < v.size(); ++i)
    if (tokens[static_cast<std::size_t>(i)] != v.token(i)) throw FormatError("checkpoint vocabulary lacks reserved tokens");
  for (std::size_t i = static_cast<std::size_t>(v.size()); i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

}  // namespace

void write_sections(const fs::path& path, std::span<const Section> sections) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write("LAFT", 4);
  io::put<std::uint32_t>(os, kCheckpointVersion);
  io::put<std::uint32_t>(os, io::checked_u32(sections.size(), "section count"));
  for (const Section& s : sections) {
    if (numel(s.dims) != static_cast<Index>(s.data.size()))
      throw std::invalid_argument("section " + s.name + ": dims do not match payload");
    io::put<std::uint32_t>(os, io::checked_u32(s.name.size(), "section name"));
    os.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
    io::put<std::uint32_t>(os, io::checked_u32(s.dims.size(), "section rank"));
    for (Index d : s.dims) io::put<std::uint32_t>(os, io::checked_u32(static_cast<std::size_t>(d), "section dim"));
    for (double v : s.data) io::put<double>(os, v);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

std::vector<Section> read_sections(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "LAFT") throw FormatError("checkpoint: bad magic");
  std::uint32_t version = 0, count = 0;
  if (!io::get(is, version) || !io::get(is, count)) throw FormatError("checkpoint: truncated header");
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(is.tellg());
  is.seekg(12);
  std::vector<Section> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Section s;
    std::uint32_t name_len = 0, rank = 0;
    if (!io::get(is, name_len) || name_len > file_size) throw FormatError("checkpoint: truncated section header");
    s.name.resize(name_len);
    if (!is.read(s.name.data(), name_len) || !io::get(is, rank) || rank > 8)
      throw FormatError("checkpoint: truncated section header");
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      std::uint32_t d = 0;
      if (!io::get(is, d)) throw FormatError("checkpoint: truncated section header");
      s.dims.push_back(d);
      n *= d;
      if (n * 8 > file_size) throw FormatError("checkpoint: section " + s.name + " larger than the file");
    }
    s.data.resize(n);
    for (double& v : s.data)
      if (!io::get(is, v)) throw FormatError("checkpoint: truncated payload in section " + s.name);
    out.push_back(std::move(s));
  }
  return out;
}

void save_checkpoint(const fs::path& path, CaptionModel& model, const RunConfig& config, const Adam* optimizer) {
  RunConfig snapshot = config;
  snapshot.model = model.config();
  std::vector<Section> sections;
  sections.push_back(text_section("meta.config", to_json(snapshot).dump()));
  sections.push_back(text_section("meta.vocab", join_lines(model.vocab().tokens())));
  const std::uint64_t h = model.vocab().hash();
  sections.push_back({"meta.vocab_hash", {2}, {static_cast<double>(h >> 32), static_cast<double>(h & 0xffffffffu)}});
  for (const auto& p : model.parameters())
    sections.push_back(tensor_section("param." + p.name, p.tensor.shape(), p.tensor.data(), p.tensor.size()));
  for (const auto& r : model.running_stats()) {
    if (!r.stats->initialized) continue;
    const Index c = r.stats->mean.size();
    sections.push_back(tensor_section("stats." + r.name + ".mean", {c}, r.stats->mean.data(), c));
    sections.push_back(tensor_section("stats." + r.name + ".var", {c}, r.stats->var.data(), c));
  }
  if (optimizer) {
    sections.push_back({"adam.step", {1}, {static_cast<double>(optimizer->steps())}});
    const auto& params = optimizer->params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Moments& m = optimizer->moments()[i];
      if (m.m.size() == 0) continue;
      sections.push_back(tensor_section("adam.m." + params[i].name, {m.m.size()}, m.m.data(), m.m.size()));
      sections.push_back(tensor_section("adam.v." + params[i].name, {m.v.size()}, m.v.data(), m.v.size()));
    }
  }
  write_sections(path, sections);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::map<std::string, Section> by_name;
  for (Section& s : read_sections(path)) by_name.emplace(s.name, std::move(s));
  auto need = [&](const std::string& name) -> const Section& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing section " + name);
    return it->second;
  };
  RunConfig config;
  try {
    config = config_from_json(json::parse(section_text(need("meta.config"))));
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: unreadable config: " + std::string(e.what()));
  }
  Vocab vocab = vocab_from_text(section_text(need("meta.vocab")));
  const Section& hs = need("meta.vocab_hash");
  if (hs.data.size() != 2 ||
      ((static_cast<std::uint64_t>(hs.data[0]) << 32) | static_cast<std::uint64_t>(hs.data[1])) != vocab.hash())
    throw FormatError("checkpoint: vocabulary hash mismatch");

  CaptionModel model(config.model, std::move(vocab), config.seed);
  for (auto& p : model.parameters()) {
    const Section& s = need("param." + p.name);
    if (s.dims != p.tensor.shape())
      throw FormatError("checkpoint: " + p.name + " has shape " + to_string(s.dims) + ", model expects " +
                        to_string(p.tensor.shape()));
    std::copy(s.data.begin(), s.data.end(), p.tensor.data());
  }
  for (auto& r : model.running_stats()) {
    const auto m = by_name.find("stats." + r.name + ".mean");
    const auto v = by_name.find("stats." + r.name + ".var");
    if (m == by_name.end() || v == by_name.end()) continue;
    r.stats->mean = Eigen::Map<const Eigen::VectorXd>(m->second.data.data(), static_cast<Index>(m->second.data.size()));
    r.stats->var = Eigen::Map<const Eigen::VectorXd>(v->second.data.data(), static_cast<Index>(v->second.data.size()));
    r.stats->initialized = true;
  }
  std::optional<OptimizerState> opt;
  if (const auto it = by_name.find("adam.step"); it != by_name.end()) {
    OptimizerState st;
    st.step = static_cast<long>(it->second.data.at(0));
    for (const auto& p : model.parameters()) {
      if (!p.tensor.requires_grad()) continue;
      Moments mo;
      const auto m = by_name.find("adam.m." + p.name);
      const auto v = by_name.find("adam.v." + p.name);
      if (m != by_name.end() && v != by_name.end()) {
        mo.m = Eigen::Map<const Eigen::VectorXd>(m->second.data.data(), static_cast<Index>(m->second.data.size()));
        mo.v = Eigen::Map<const Eigen::VectorXd>(v->second.data.data(), static_cast<Index>(v->second.data.size()));
      }
      st.moments.push_back(std::move(mo));
    }
    opt = std::move(st);
  }
  return {std::move(config), std::move(model), std::move(opt)};
}

}  // namespace laft
