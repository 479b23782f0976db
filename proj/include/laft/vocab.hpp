#pragma once

#include "laft/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace laft {

using TokenId = std::int64_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kSos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kFirstWord = 4;

/// Lowercases, deletes ASCII punctuation and splits on whitespace. Throws
/// std::invalid_argument if nothing remains.
std::vector<std::string> tokenize(std::string_view caption);

/// Token <-> id bijection with <pad>=0, <sos>=1, <eos>=2, <unk>=3.
class Vocab {
 public:
  Vocab();

  /// Adds every word of every caption, in first-seen order.
  static Vocab build(std::span<const std::string> captions);

  Index size() const { return static_cast<Index>(tokens_.size()); }
  bool contains(std::string_view token) const;
  /// <unk> for unknown tokens.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  TokenId add(const std::string& token);

  /// <sos> w1 ... wn <eos>
  std::vector<TokenId> encode(std::string_view caption) const;
  /// Words joined by single spaces; reserved tokens are dropped.
  std::string decode(std::span<const TokenId> ids) const;
  /// Ids with reserved tokens removed, for scoring.
  static std::vector<TokenId> strip_special(std::span<const TokenId> ids);

  /// FNV-1a over the token list; identifies a vocabulary in checkpoints.
  std::uint64_t hash() const;

  /// UTF-8, one token per line, line number = id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenBatch {
  std::vector<TokenId> ids;         // B*N row-major
  std::vector<std::uint8_t> valid;  // B*N, 1 at real tokens
  Index batch = 0;
  Index length = 0;

  std::span<const TokenId> row(Index b) const {
    return {ids.data() + b * length, static_cast<std::size_t>(length)};
  }
};

/// Pads to the longest sequence with <pad>. Throws on an empty batch.
TokenBatch pad_batch(std::span<const std::vector<TokenId>> sequences);

}  // namespace laft
