#include "relsem/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <set>

#include "relsem/error.hpp"

namespace relsem {

namespace {

constexpr std::string_view kVocabHeader = "relsem-vocab v1";

bool is_split_punct(char c) { return c == '.' || c == ',' || c == '?' || c == ':' || c == '!'; }

bool attaches_left(std::string_view tok) {
  return tok == "." || tok == "," || tok == "?" || tok == ":" || tok == "!" || tok == "'s";
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) {
  std::set<std::string> sorted(tokens.begin(), tokens.end());
  for (auto name : kSpecialNames) sorted.erase(std::string(name));
  for (auto name : kSpecialNames) id_to_token_.emplace_back(name);
  for (const auto& t : sorted) id_to_token_.push_back(t);
  for (std::size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw UnknownToken("token id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocab::segment(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view word = text.substr(i, j - i);
    i = j;

    std::vector<std::string> trailing;
    while (!word.empty() && is_split_punct(word.back())) {
      trailing.emplace_back(1, word.back());
      word.remove_suffix(1);
    }
    if (word.size() >= 2 && word.ends_with("'s")) {
      if (word.size() > 2) out.emplace_back(word.substr(0, word.size() - 2));
      out.emplace_back("'s");
    } else if (!word.empty()) {
      out.emplace_back(word);
    }
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.push_back(std::move(*it));
  }
  return out;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : segment(text)) {
    const TokenId id = this->id(w);
    if (id == kUnk) throw UnknownToken("'" + w + "' is not in the vocabulary");
    ids.push_back(id);
  }
  return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (const TokenId id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    const auto& tok = token(id);
    if (!out.empty() && !attaches_left(tok)) out += ' ';
    out += tok;
  }
  return out;
}

void Vocab::save(std::ostream& out) const {
  out << kVocabHeader << '\n';
  for (const auto& t : id_to_token_) out << t << '\n';
}

Vocab Vocab::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kVocabHeader) throw FormatError("vocab: bad header");
  std::vector<std::string> tokens;
  while (std::getline(in, line))
    if (!line.empty()) tokens.push_back(line);
  if (tokens.size() < kNumSpecial) throw FormatError("vocab: missing special tokens");
  for (int i = 0; i < kNumSpecial; ++i)
    if (tokens[static_cast<std::size_t>(i)] != kSpecialNames[i]) throw FormatError("vocab: specials out of order");
  Vocab v(std::vector<std::string>(tokens.begin() + kNumSpecial, tokens.end()));
  if (v.id_to_token_ != tokens) throw FormatError("vocab: tokens not in canonical order");
  return v;
}

Vocab build_vocab(const TemplateBank& bank, const EntityPools& pools, const RelationVocab& relations,
                  std::span<const std::string> extras) {
  std::vector<std::string> tokens = {".", ",", "?", ":", "'s", "Q", "A", "a", "an"};
  auto add_text = [&](std::string_view text) {
    for (auto& w : Vocab::segment(text)) tokens.push_back(std::move(w));
  };
  for (const auto family :
       {TemplateFamily::PeopleSentence, TemplateFamily::JobSentence, TemplateFamily::PeopleQuestionReverse,
        TemplateFamily::PeopleQuestionForward, TemplateFamily::JobQuestionReverse,
        TemplateFamily::JobQuestionForward, TemplateFamily::IclCompletionReverse,
        TemplateFamily::IclCompletionForward}) {
    for (const auto& t : bank.family(family)) {
      std::string stripped;
      for (std::size_t i = 0; i < t.text.size(); ++i) {
        if (t.text[i] == '{') {
          i = t.text.find('}', i);
          stripped += ' ';
        } else {
          stripped += t.text[i];
        }
      }
      add_text(stripped);
    }
  }
  for (const auto* pool : {&pools.first_names, &pools.middle_names, &pools.last_names})
    tokens.insert(tokens.end(), pool->begin(), pool->end());
  for (const auto& job : pools.jobs) add_text(job);
  for (const auto& [r, inv] : relations.inversion_pairs) {
    tokens.push_back(r);
    tokens.push_back(inv);
  }
  for (const auto& s : relations.symmetric_relations) tokens.push_back(s);
  tokens.insert(tokens.end(), extras.begin(), extras.end());
  return Vocab(std::move(tokens));
}

}  // namespace relsem
