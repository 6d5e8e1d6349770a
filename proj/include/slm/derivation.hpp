// Parser actions, word-parse prefixes and the tree <-> derivation mapping.
//
// A sentence is generated left to right: the WORD-PREDICTOR emits a word,
// the TAGGER its POS tag, then the PARSER emits unary/adjoin actions until a
// null action hands control back to the predictor. Every (sentence, parse)
// pair has exactly one such action sequence.

#ifndef SLM_DERIVATION_HPP
#define SLM_DERIVATION_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slm/corpus.hpp"
#include "slm/symbol.hpp"

namespace slm {

class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

enum class Component : std::uint8_t { Word = 0, Tagger = 1, Parser = 2, Trigram = 3 };
const char* component_name(Component c);
Component component_from_name(const std::string& name);

enum class ActionKind : std::uint8_t { Null, Unary, AdjoinLeft, AdjoinRight };

struct ParserAction {
  ActionKind kind = ActionKind::Null;
  Symbol label = 0;  // unused for Null

  static ParserAction null() { return {}; }
  static ParserAction unary(Symbol l) { return {ActionKind::Unary, l}; }
  static ParserAction left(Symbol l) { return {ActionKind::AdjoinLeft, l}; }
  static ParserAction right(Symbol l) { return {ActionKind::AdjoinRight, l}; }

  // "null", "unary/NP", "adjoin-left/NP", "adjoin-right/NP".
  std::string to_string() const;
  Symbol symbol() const;
  static ParserAction from_symbol(Symbol s);

  bool operator==(const ParserAction& o) const {
    return kind == o.kind && (kind == ActionKind::Null || label == o.label);
  }
};

// Up to four conditioning symbols, most important first; back-off drops
// symbols from the right.
struct Context {
  std::array<Symbol, 4> s{};
  std::uint8_t size = 0;

  Context truncated(std::size_t n) const {
    Context c;
    c.size = static_cast<std::uint8_t>(n);
    for (std::size_t i = 0; i < n; ++i) c.s[i] = s[i];
    return c;
  }
  bool operator==(const Context& o) const {
    if (size != o.size) return false;
    for (std::size_t i = 0; i < size; ++i)
      if (s[i] != o.s[i]) return false;
    return true;
  }
};

struct ContextHash {
  std::size_t operator()(const Context& c) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ c.size;
    for (std::size_t i = 0; i < c.size; ++i) {
      h ^= c.s[i] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 33));
  }
};

struct ElementaryEvent {
  Component component = Component::Word;
  Symbol outcome = 0;  // word, POS tag or ParserAction::symbol()
  Context context;

  bool operator==(const ElementaryEvent&) const = default;
};

struct Derivation {
  std::vector<ElementaryEvent> events;

  // One line per event: `component TAB outcome TAB context symbols...`.
  std::string serialize() const;
  static Derivation parse(const std::string& text);
  bool operator==(const Derivation&) const = default;
};

// An exposed head: (headword, POS tag) for a leaf, (headword, label) above.
struct Head {
  Symbol word = 0;
  Symbol tag = 0;
  bool leaf = true;
};

class WordParsePrefix {
public:
  enum class Phase : std::uint8_t { Word, Tag, Parser, Complete };

  // (<s>, SB) pushed, ready to predict the first word.
  static WordParsePrefix initial();

  Phase phase() const { return phase_; }
  int words() const { return words_; }            // k
  int parser_ops() const { return parser_ops_; }  // p, nulls included
  bool unary_taken() const { return unary_taken_; }
  std::size_t head_count() const { return head_count_; }
  Symbol pending_word() const { return pending_word_; }

  // Most recent exposed head is h(0); missing heads read as (<s>, SB).
  Head h(std::size_t back) const;
  std::vector<Head> heads() const;  // bottom (h_{-m}) first

  // (h0.tag, h0.word, h-1.tag, h-1.word)
  Context head_context() const;
  // (word, h0.tag, h-1.tag)
  Context tag_context(Symbol word) const;

  WordParsePrefix predict(Symbol word) const;
  WordParsePrefix tag(Symbol pos) const;
  WordParsePrefix apply(const ParserAction& action) const;
  WordParsePrefix apply(const ElementaryEvent& event) const;

private:
  struct Cell {
    Head head;
    std::shared_ptr<const Cell> below;
  };

  std::shared_ptr<const Cell> top_;
  std::size_t head_count_ = 0;
  int words_ = 0;
  int parser_ops_ = 0;
  Symbol pending_word_ = 0;
  Phase phase_ = Phase::Word;
  bool unary_taken_ = false;
};

// The legal PARSER actions at a prefix. A forced action has probability one
// regardless of the learned model.
struct LegalActions {
  std::optional<ParserAction> forced;
  bool null = false;
  bool unary = false;
  bool adjoin = false;

  bool contains(const ParserAction& action) const;
  // Expands the set over the given free labels (forced: just that action).
  std::vector<ParserAction> enumerate(const std::vector<Symbol>& labels) const;
};

LegalActions legal_actions(const WordParsePrefix& prefix);

// TOP(<s>, TOP'(F1, TOP'(F2, ... TOP'(Fm, </s>)))) over a body forest.
HeadedTree make_complete_parse(std::vector<HeadedTree> body);
HeadedTree make_complete_parse(const HeadedTree& body);
// Inverse of make_complete_parse.
std::vector<HeadedTree> parse_body(const HeadedTree& complete);

Derivation tree_to_derivation(const HeadedTree& complete);
HeadedTree derivation_to_tree(const Derivation& derivation);

}  // namespace slm

#endif
