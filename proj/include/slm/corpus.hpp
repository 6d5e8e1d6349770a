// Treebank ingestion: bracketed reader, headword percolation, binarization
// and vocabulary construction.

#ifndef SLM_CORPUS_HPP
#define SLM_CORPUS_HPP

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "slm/symbol.hpp"

namespace slm {

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

private:
  int line_;
  int column_;
};

class StructureError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct RawTree {
  std::string label;
  std::string word;  // leaves only
  std::vector<RawTree> children;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const RawTree&) const = default;
};

struct ReadOptions {
  // Strip function tags ("NP-SBJ-1" -> "NP") and drop -NONE- elements.
  bool normalize = true;
};

std::vector<RawTree> read_treebank(std::string_view text, const ReadOptions& options = {});
std::string to_string(const RawTree& tree);
std::vector<std::string> leaf_words(const RawTree& tree);

// A constituent annotated with the (word, POS tag) of its head leaf.
// Leaves: label is the POS tag and head_child is -1.
struct HeadedTree {
  Symbol label = 0;
  Symbol word = 0;
  Symbol tag = 0;
  int head_child = -1;
  int start = 0;
  int end = 0;
  std::vector<HeadedTree> children;

  bool is_leaf() const { return children.empty(); }
  bool operator==(const HeadedTree&) const = default;
};

// Headed bracketing: internal labels carry "@<head child index>",
// e.g. "(S@1 (NP@1 (DT the) (NN dog)) (VBD barked))". Readable by
// read_treebank with normalize=false.
std::string to_string(const HeadedTree& tree);
HeadedTree headed_from_raw(const RawTree& tree);
std::vector<HeadedTree> read_headed_treebank(std::string_view text);
std::vector<Symbol> leaf_words(const HeadedTree& tree);
std::vector<Symbol> leaf_tags(const HeadedTree& tree);
// Recomputes spans and checks the head invariant; throws StructureError.
void validate(HeadedTree& tree);

enum class Direction { LeftToRight, RightToLeft };

struct PercolationRule {
  Direction direction = Direction::RightToLeft;
  std::vector<std::string> priority;
};

// Line format: `PARENT direction child1 child2 ...`, `*` names the default
// rule. A node matching no priority entry takes its head from the rightmost
// child.
class PercolationRuleSet {
public:
  static PercolationRuleSet parse(std::string_view text, const std::string& source = "<rules>");
  static PercolationRuleSet defaults();

  std::size_t head_index(const std::string& parent, std::span<const std::string> children) const;
  const PercolationRule& rule_for(const std::string& parent) const;

private:
  std::unordered_map<std::string, PercolationRule> rules_;
  PercolationRule fallback_;
};

// Scheme A attaches the left siblings of the head first (nearest first) and
// then the right siblings, so Z -> Y1 Y2 Y3 with head Y2 becomes
// ((Y1 Y2)Z' Y3)Z. Scheme B is the mirror image: (Y1 (Y2 Y3)Z')Z.
enum class Scheme { A, B };

class BinarizationRuleSet {
public:
  static BinarizationRuleSet parse(std::string_view text, const std::string& source = "<rules>");
  static BinarizationRuleSet defaults();

  Scheme scheme_for(const std::string& parent) const;

private:
  std::unordered_map<std::string, Scheme> rules_;
  Scheme fallback_ = Scheme::A;
};

HeadedTree percolate(const RawTree& tree, const PercolationRuleSet& rules);
HeadedTree binarize(const HeadedTree& tree, const BinarizationRuleSet& rules);
// Unary chains collapse to their topmost label; a unary node survives only
// directly above a leaf, which is the only place the parser can build one.
HeadedTree collapse_unaries(const HeadedTree& tree);
// percolate, binarize, collapse_unaries.
HeadedTree prepare_tree(const RawTree& tree, const PercolationRuleSet& heads,
                        const BinarizationRuleSet& schemes);

std::string primed(std::string_view label);

class Vocabularies {
public:
  static Vocabularies build(std::span<const HeadedTree> trees, std::size_t word_cap);

  Symbol map_word(Symbol word) const;
  bool has_word(Symbol word) const { return word_set_.contains(word); }
  bool has_tag(Symbol tag) const { return tag_set_.contains(tag); }
  bool has_label(Symbol label) const { return label_set_.contains(label); }
  void require_tag(Symbol tag) const;
  void require_label(Symbol label) const;

  // Sorted by string, distinguished symbols included.
  const std::vector<Symbol>& words() const { return words_; }
  const std::vector<Symbol>& tags() const { return tags_; }
  const std::vector<Symbol>& labels() const { return labels_; }
  // Non-terminals available to unforced parser actions (labels minus TOP, TOP').
  const std::vector<Symbol>& free_labels() const { return free_labels_; }

  void save(std::ostream& out) const;
  static Vocabularies load(std::istream& in);
  std::string hash() const;

  static Vocabularies from_lists(std::vector<Symbol> words, std::vector<Symbol> tags,
                                 std::vector<Symbol> labels);

private:
  void finish();

  std::vector<Symbol> words_, tags_, labels_, free_labels_;
  std::unordered_set<Symbol> word_set_, tag_set_, label_set_;
};

HeadedTree map_words(const HeadedTree& tree, const Vocabularies& vocab);

// The sentence's leaves with every POS tag mapped to `merged_tag` and all
// constituent structure dropped. Wrapped by make_complete_parse this is the
// right-branching parse under a single tag/label type.
std::vector<HeadedTree> flat_leaves(const HeadedTree& tree, Symbol merged_tag);

}  // namespace slm

#endif
