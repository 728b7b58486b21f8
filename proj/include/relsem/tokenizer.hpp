#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relsem/kg_synth.hpp"
#include "relsem/templates.hpp"

namespace relsem {

using TokenId = std::int32_t;

/// Word-level closed vocabulary. Special tokens occupy the first ids; the rest
/// are assigned in sorted token order.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kMask = 4;
  static constexpr TokenId kUnk = 5;
  static constexpr int kNumSpecial = 6;
  static constexpr std::string_view kSpecialNames[kNumSpecial] = {"<pad>", "<bos>", "<eos>",
                                                                  "<sep>", "<mask>", "<unk>"};

  Vocab() = default;
  /// Specials first, then `tokens` deduplicated and sorted.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return id_to_token_.size(); }
  const std::string& token(TokenId id) const;
  /// Id of `token`, or kUnk.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const { return id(token) != kUnk || token == "<unk>"; }

  /// Splits on whitespace; '.', ',', '?', ':', '!' and a possessive "'s" become separate tokens.
  static std::vector<std::string> segment(std::string_view text);

  /// Throws UnknownToken for a word outside the vocabulary.
  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  void save(std::ostream& out) const;
  static Vocab load(std::istream& in);

  bool operator==(const Vocab& other) const { return id_to_token_ == other.id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Every word producible from the template bank, the entity pools and the QA
/// wrapper ("Q", "A", ":"), plus punctuation.
Vocab build_vocab(const TemplateBank& bank, const EntityPools& pools,
                  const RelationVocab& relations = RelationVocab::standard(),
                  std::span<const std::string> extras = {});

}  // namespace relsem
