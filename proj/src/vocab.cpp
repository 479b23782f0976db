#include "laft/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace laft {

std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : caption) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  if (words.empty()) throw std::invalid_argument("empty caption");
  return words;
}

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<sos>", "<eos>", "<unk>"}) add(t);
}

Vocab Vocab::build(std::span<const std::string> captions) {
  Vocab v;
  for (const std::string& c : captions)
    for (const std::string& w : tokenize(c)) v.add(w);
  return v;
}

bool Vocab::contains(std::string_view token) const { return index_.contains(std::string(token)); }

TokenId Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::add(const std::string& token) {
  const auto [it, inserted] = index_.try_emplace(token, size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::vector<TokenId> Vocab::encode(std::string_view caption) const {
  std::vector<TokenId> ids{kSos};
  for (const std::string& w : tokenize(caption)) ids.push_back(id(w));
  ids.push_back(kEos);
  return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId t : ids) {
    if (t < kFirstWord && t != kUnk) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(t);
  }
  return out;
}

std::vector<TokenId> Vocab::strip_special(std::span<const TokenId> ids) {
  std::vector<TokenId> out;
  for (TokenId t : ids)
    if (t != kPad && t != kSos && t != kEos) out.push_back(t);
  return out;
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const std::string& t : tokens_) {
    for (unsigned char c : t) h = (h ^ c) * 1099511628211ull;
    h = (h ^ 0x0a) * 1099511628211ull;
  }
  return h;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const std::string& t : tokens_) os << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  const Vocab reserved;
  if (lines.size() < reserved.tokens_.size() ||
      !std::equal(reserved.tokens_.begin(), reserved.tokens_.end(), lines.begin()))
    throw std::runtime_error("vocabulary file " + path.string() + " does not start with the reserved tokens");
  Vocab v;
  for (std::size_t i = reserved.tokens_.size(); i < lines.size(); ++i) {
    if (v.contains(lines[i])) throw std::runtime_error("duplicate token '" + lines[i] + "' in " + path.string());
    v.add(lines[i]);
  }
  return v;
}

TokenBatch pad_batch(std::span<const std::vector<TokenId>> sequences) {
  if (sequences.empty()) throw std::invalid_argument("pad_batch: empty batch");
  TokenBatch b;
  b.batch = static_cast<Index>(sequences.size());
  for (const auto& s : sequences) b.length = std::max(b.length, static_cast<Index>(s.size()));
  if (b.length == 0) throw std::invalid_argument("pad_batch: all sequences empty");
  b.ids.assign(static_cast<std::size_t>(b.batch * b.length), kPad);
  b.valid.assign(b.ids.size(), 0);
  for (Index i = 0; i < b.batch; ++i) {
    const auto& s = sequences[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < s.size(); ++j) {
      b.ids[static_cast<std::size_t>(i * b.length) + j] = s[j];
      b.valid[static_cast<std::size_t>(i * b.length) + j] = 1;
    }
  }
  return b;
}

}  // namespace laft
