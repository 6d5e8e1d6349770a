#include "slm/corpus.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace slm {

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

namespace {

struct Token {
  enum Kind { Open, Close, Atom, End } kind;
  std::string_view text;
  int line;
  int column;
};

class Lexer {
public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    if (pos_ >= text_.size()) return {Token::End, {}, line_, column_};
    const int line = line_, column = column_;
    const char c = text_[pos_];
    if (c == '(' || c == ')') {
      advance();
      return {c == '(' ? Token::Open : Token::Close, text_.substr(pos_ - 1, 1), line, column};
    }
    const std::size_t begin = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_]) && text_[pos_] != '(' && text_[pos_] != ')')
      advance();
    return {Token::Atom, text_.substr(begin, pos_ - begin), line, column};
  }

private:
  static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) advance();
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

class TreeReader {
public:
  explicit TreeReader(std::string_view text) : lexer_(text) { look_ = lexer_.next(); }

  bool done() const { return look_.kind == Token::End; }

  // Called with the opening parenthesis as the current token.
  RawTree read_node() {
    const Token open = take();
    RawTree node;
    if (look_.kind == Token::Atom) node.label = std::string(take().text);
    while (true) {
      switch (look_.kind) {
        case Token::End:
          throw ParseError("unbalanced parentheses", open.line, open.column);
        case Token::Close:
          take();
          if (node.children.empty() && node.word.empty()) {
            if (node.label.empty()) throw ParseError("empty bracket", open.line, open.column);
            throw ParseError("leaf without a word", open.line, open.column);
          }
          return node;
        case Token::Atom:
          if (!node.children.empty() || !node.word.empty())
            throw ParseError("unexpected atom '" + std::string(look_.text) + "'", look_.line,
                             look_.column);
          node.word = std::string(take().text);
          break;
        case Token::Open:
          if (!node.word.empty())
            throw ParseError("leaf with children", look_.line, look_.column);
          node.children.push_back(read_node());
          break;
      }
    }
  }

  const Token& look() const { return look_; }
  Token take() {
    Token t = look_;
    look_ = lexer_.next();
    return t;
  }

private:
  Lexer lexer_;
  Token look_;
};

std::string strip_function_tags(const std::string& label) {
  if (label.empty() || label[0] == '-') return label;
  std::size_t cut = label.size();
  for (std::size_t i = 1; i < label.size(); ++i) {
    if (label[i] == '-' || label[i] == '=') {
      cut = i;
      break;
    }
  }
  return label.substr(0, cut);
}

// Returns false when the subtree vanishes entirely (traces only).
bool normalize(RawTree& node) {
  if (node.is_leaf()) {
    if (node.label == "-NONE-") return false;
    node.label = strip_function_tags(node.label);
    return true;
  }
  std::vector<RawTree> kept;
  kept.reserve(node.children.size());
  for (auto& child : node.children)
    if (normalize(child)) kept.push_back(std::move(child));
  node.children = std::move(kept);
  node.label = strip_function_tags(node.label);
  return !node.children.empty();
}

void write_raw(const RawTree& node, std::string& out) {
  out += '(';
  out += node.label;
  if (node.is_leaf()) {
    out += ' ';
    out += node.word;
  } else {
    for (const auto& child : node.children) {
      out += ' ';
      write_raw(child, out);
    }
  }
  out += ')';
}

}  // namespace

std::vector<RawTree> read_treebank(std::string_view text, const ReadOptions& options) {
  std::vector<RawTree> trees;
  TreeReader reader(text);
  while (!reader.done()) {
    const Token& t = reader.look();
    if (t.kind == Token::Close) throw ParseError("unbalanced parentheses", t.line, t.column);
    if (t.kind == Token::Atom)
      throw ParseError("atom outside brackets '" + std::string(t.text) + "'", t.line, t.column);
    const int line = t.line, column = t.column;
    RawTree tree = reader.read_node();
    // Penn files wrap each sentence in an unlabeled pair of parentheses.
    while (tree.label.empty() && tree.children.size() == 1) tree = RawTree(tree.children.front());
    if (tree.label.empty()) throw ParseError("unlabeled node", line, column);
    if (options.normalize && !normalize(tree)) continue;
    trees.push_back(std::move(tree));
  }
  return trees;
}

std::string to_string(const RawTree& tree) {
  std::string out;
  write_raw(tree, out);
  return out;
}

std::vector<std::string> leaf_words(const RawTree& tree) {
  std::vector<std::string> words;
  auto walk = [&](auto&& self, const RawTree& node) -> void {
    if (node.is_leaf()) {
      words.push_back(node.word);
      return;
    }
    for (const auto& child : node.children) self(self, child);
  };
  walk(walk, tree);
  return words;
}

namespace {

void write_headed(const HeadedTree& node, std::string& out) {
  out += '(';
  out += str(node.label);
  if (node.is_leaf()) {
    out += ' ';
    out += str(node.word);
  } else {
    out += '@';
    out += std::to_string(node.head_child);
    for (const auto& child : node.children) {
      out += ' ';
      write_headed(child, out);
    }
  }
  out += ')';
}

int assign_spans(HeadedTree& node, int start) {
  node.start = start;
  if (node.is_leaf()) {
    node.end = start + 1;
    return node.end;
  }
  int pos = start;
  for (auto& child : node.children) pos = assign_spans(child, pos);
  node.end = pos;
  return pos;
}

void check_heads(const HeadedTree& node) {
  if (node.is_leaf()) {
    if (node.head_child != -1) throw StructureError("leaf with a head child index");
    return;
  }
  if (node.head_child < 0 || node.head_child >= static_cast<int>(node.children.size()))
    throw StructureError("head child index out of range at " + str(node.label));
  const auto& head = node.children[node.head_child];
  if (head.word != node.word || head.tag != node.tag)
    throw StructureError("head of " + str(node.label) + " differs from its head child");
  for (const auto& child : node.children) check_heads(child);
}

}  // namespace

std::string to_string(const HeadedTree& tree) {
  std::string out;
  write_headed(tree, out);
  return out;
}

HeadedTree headed_from_raw(const RawTree& raw) {
  HeadedTree node;
  if (raw.is_leaf()) {
    if (raw.word.empty()) throw StructureError("node with no children and no word");
    node.label = intern(raw.label);
    node.word = intern(raw.word);
    node.tag = node.label;
    return node;
  }
  const auto at = raw.label.rfind('@');
  if (at == std::string::npos) throw StructureError("missing head index on '" + raw.label + "'");
  node.label = intern(std::string_view(raw.label).substr(0, at));
  try {
    node.head_child = std::stoi(raw.label.substr(at + 1));
  } catch (const std::exception&) {
    throw StructureError("bad head index on '" + raw.label + "'");
  }
  for (const auto& child : raw.children) node.children.push_back(headed_from_raw(child));
  if (node.head_child < 0 || node.head_child >= static_cast<int>(node.children.size()))
    throw StructureError("head index out of range on '" + raw.label + "'");
  node.word = node.children[node.head_child].word;
  node.tag = node.children[node.head_child].tag;
  return node;
}

std::vector<HeadedTree> read_headed_treebank(std::string_view text) {
  std::vector<HeadedTree> trees;
  for (const auto& raw : read_treebank(text, {.normalize = false})) {
    trees.push_back(headed_from_raw(raw));
    validate(trees.back());
  }
  return trees;
}

std::vector<Symbol> leaf_words(const HeadedTree& tree) {
  std::vector<Symbol> words;
  auto walk = [&](auto&& self, const HeadedTree& node) -> void {
    if (node.is_leaf()) {
      words.push_back(node.word);
      return;
    }
    for (const auto& child : node.children) self(self, child);
  };
  walk(walk, tree);
  return words;
}

std::vector<Symbol> leaf_tags(const HeadedTree& tree) {
  std::vector<Symbol> tags;
  auto walk = [&](auto&& self, const HeadedTree& node) -> void {
    if (node.is_leaf()) {
      tags.push_back(node.tag);
      return;
    }
    for (const auto& child : node.children) self(self, child);
  };
  walk(walk, tree);
  return tags;
}

void validate(HeadedTree& tree) {
  assign_spans(tree, 0);
  check_heads(tree);
}

// ---------------------------------------------------------------------------
// Rule files

namespace {

std::vector<std::pair<int, std::vector<std::string>>> rule_lines(std::string_view text) {
  std::vector<std::pair<int, std::vector<std::string>>> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (!tokens.empty()) lines.emplace_back(number, std::move(tokens));
  }
  return lines;
}

Direction parse_direction(const std::string& text, const std::string& where) {
  if (text == "left-to-right" || text == "l2r" || text == "left") return Direction::LeftToRight;
  if (text == "right-to-left" || text == "r2l" || text == "right") return Direction::RightToLeft;
  throw ConfigError(where + ": unknown direction '" + text + "'");
}

}  // namespace

PercolationRuleSet PercolationRuleSet::parse(std::string_view text, const std::string& source) {
  PercolationRuleSet set;
  for (auto& [number, tokens] : rule_lines(text)) {
    const std::string where = source + ":" + std::to_string(number);
    if (tokens.size() < 2) throw ConfigError(where + ": expected PARENT direction [children...]");
    PercolationRule rule;
    rule.direction = parse_direction(tokens[1], where);
    rule.priority.assign(tokens.begin() + 2, tokens.end());
    if (tokens[0] == "*")
      set.fallback_ = std::move(rule);
    else
      set.rules_[tokens[0]] = std::move(rule);
  }
  return set;
}

PercolationRuleSet PercolationRuleSet::defaults() {
  // A compact head table for Penn-style labels.
  return parse(R"(
S     left-to-right  VP S SBAR ADJP UCP NP
SBAR  left-to-right  WHNP IN DT S SBAR
SQ    left-to-right  VBZ VBD VBP VB MD VP SQ
SINV  left-to-right  VBZ VBD VBP VB MD VP S SINV
VP    left-to-right  VBD VBN MD VBZ VB VBG VBP VP ADJP NN NNS NP
NP    right-to-left  NN NNP NNPS NNS NX POS JJR NP PRP CD
PP    left-to-right  IN TO VBG VBN RP FW PP
ADJP  left-to-right  JJ JJR JJS ADJP VBN VBG NNS QP NN
ADVP  right-to-left  RB RBR RBS FW ADVP TO CD JJR JJ IN NP JJS NN
WHNP  left-to-right  WDT WP WP$ WHADJP WHPP WHNP NN
QP    left-to-right  CD NCD QP JJ JJR JJS RB DT $
PRT   right-to-left  RP
*     right-to-left
)",
               "<default-head-rules>");
}

const PercolationRule& PercolationRuleSet::rule_for(const std::string& parent) const {
  auto it = rules_.find(parent);
  return it == rules_.end() ? fallback_ : it->second;
}

std::size_t PercolationRuleSet::head_index(const std::string& parent,
                                           std::span<const std::string> children) const {
  const PercolationRule& rule = rule_for(parent);
  const std::size_t n = children.size();
  for (const auto& wanted : rule.priority) {
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = rule.direction == Direction::LeftToRight ? step : n - 1 - step;
      if (children[i] == wanted) return i;
    }
  }
  return n - 1;
}

BinarizationRuleSet BinarizationRuleSet::parse(std::string_view text, const std::string& source) {
  BinarizationRuleSet set;
  for (auto& [number, tokens] : rule_lines(text)) {
    const std::string where = source + ":" + std::to_string(number);
    if (tokens.size() != 2) throw ConfigError(where + ": expected PARENT A|B");
    Scheme scheme;
    if (tokens[1] == "A")
      scheme = Scheme::A;
    else if (tokens[1] == "B")
      scheme = Scheme::B;
    else
      throw ConfigError(where + ": unknown scheme '" + tokens[1] + "'");
    if (tokens[0] == "*")
      set.fallback_ = scheme;
    else
      set.rules_[tokens[0]] = scheme;
  }
  return set;
}

BinarizationRuleSet BinarizationRuleSet::defaults() {
  return parse(R"(
NP    A
VP    B
PP    B
SBAR  B
S     A
*     A
)",
               "<default-binarization-rules>");
}

Scheme BinarizationRuleSet::scheme_for(const std::string& parent) const {
  auto it = rules_.find(parent);
  return it == rules_.end() ? fallback_ : it->second;
}

// ---------------------------------------------------------------------------
// Percolation and binarization

HeadedTree percolate(const RawTree& tree, const PercolationRuleSet& rules) {
  HeadedTree node;
  node.label = intern(tree.label);
  if (tree.is_leaf()) {
    if (tree.word.empty()) throw StructureError("node with no children and no word");
    node.word = intern(tree.word);
    node.tag = node.label;
    return node;
  }
  std::vector<std::string> labels;
  labels.reserve(tree.children.size());
  for (const auto& child : tree.children) {
    node.children.push_back(percolate(child, rules));
    labels.push_back(child.label);
  }
  node.head_child = static_cast<int>(rules.head_index(tree.label, labels));
  node.word = node.children[node.head_child].word;
  node.tag = node.children[node.head_child].tag;
  return node;
}

std::string primed(std::string_view label) { return std::string(label) + "'"; }

namespace {

HeadedTree join(Symbol label, HeadedTree left, HeadedTree right, int head_child) {
  HeadedTree node;
  node.label = label;
  node.head_child = head_child;
  const HeadedTree& head = head_child == 0 ? left : right;
  node.word = head.word;
  node.tag = head.tag;
  node.children.push_back(std::move(left));
  node.children.push_back(std::move(right));
  return node;
}

HeadedTree binarize_node(const HeadedTree& tree, const BinarizationRuleSet& rules) {
  if (tree.is_leaf()) return tree;
  std::vector<HeadedTree> children;
  children.reserve(tree.children.size());
  for (const auto& child : tree.children) children.push_back(binarize_node(child, rules));
  const int n = static_cast<int>(children.size());
  if (n <= 2) {
    HeadedTree node = tree;
    node.children = std::move(children);
    return node;
  }
  const int k = tree.head_child;
  const Symbol intermediate = intern(primed(str(tree.label)));
  const Scheme scheme = rules.scheme_for(str(tree.label));

  // n - 1 joins; the last one carries the original label.
  int remaining = n - 1;
  auto next_label = [&] { return --remaining == 0 ? tree.label : intermediate; };
  HeadedTree cur = std::move(children[k]);
  auto attach_left = [&] {
    for (int i = k - 1; i >= 0; --i) cur = join(next_label(), std::move(children[i]), std::move(cur), 1);
  };
  auto attach_right = [&] {
    for (int i = k + 1; i < n; ++i) cur = join(next_label(), std::move(cur), std::move(children[i]), 0);
  };
  if (scheme == Scheme::A) {
    attach_left();
    attach_right();
  } else {
    attach_right();
    attach_left();
  }
  return cur;
}

}  // namespace

HeadedTree binarize(const HeadedTree& tree, const BinarizationRuleSet& rules) {
  HeadedTree out = binarize_node(tree, rules);
  validate(out);
  return out;
}

HeadedTree collapse_unaries(const HeadedTree& tree) {
  if (tree.is_leaf()) return tree;
  if (tree.children.size() == 1) {
    HeadedTree child = collapse_unaries(tree.children.front());
    if (child.is_leaf()) {
      HeadedTree node = tree;
      node.children = {std::move(child)};
      return node;
    }
    // The child is either a unary over a leaf or a binary node; it takes over
    // this node's label.
    child.label = tree.label;
    return child;
  }
  HeadedTree node = tree;
  for (auto& child : node.children) child = collapse_unaries(child);
  return node;
}

HeadedTree prepare_tree(const RawTree& tree, const PercolationRuleSet& heads,
                        const BinarizationRuleSet& schemes) {
  HeadedTree out = collapse_unaries(binarize(percolate(tree, heads), schemes));
  validate(out);
  return out;
}

// ---------------------------------------------------------------------------
// Vocabularies

namespace {

void sort_by_string(std::vector<Symbol>& symbols) {
  std::sort(symbols.begin(), symbols.end(), [](Symbol a, Symbol b) { return str(a) < str(b); });
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
}

}  // namespace

Vocabularies Vocabularies::build(std::span<const HeadedTree> trees, std::size_t word_cap) {
  if (word_cap < 1) throw ConfigError("word vocabulary cap must be at least 1");
  std::map<std::string, double> word_counts;
  std::vector<Symbol> tags, labels;
  auto walk = [&](auto&& self, const HeadedTree& node) -> void {
    if (node.is_leaf()) {
      word_counts[str(node.word)] += 1;
      tags.push_back(node.tag);
      return;
    }
    labels.push_back(node.label);
    for (const auto& child : node.children) self(self, child);
  };
  for (const auto& tree : trees) walk(walk, tree);

  std::vector<std::pair<std::string, double>> ranked(word_counts.begin(), word_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > word_cap) ranked.resize(word_cap);
  std::vector<Symbol> words;
  for (const auto& [w, c] : ranked) words.push_back(intern(w));
  return from_lists(std::move(words), std::move(tags), std::move(labels));
}

Vocabularies Vocabularies::from_lists(std::vector<Symbol> words, std::vector<Symbol> tags,
                                      std::vector<Symbol> labels) {
  Vocabularies v;
  v.words_ = std::move(words);
  v.tags_ = std::move(tags);
  v.labels_ = std::move(labels);
  v.finish();
  return v;
}

void Vocabularies::finish() {
  words_.insert(words_.end(), {sym::unknown(), sym::sentence_begin(), sym::sentence_end()});
  tags_.insert(tags_.end(), {sym::tag_begin(), sym::tag_end()});
  labels_.insert(labels_.end(), {sym::top(), sym::top_prime()});
  sort_by_string(words_);
  sort_by_string(tags_);
  sort_by_string(labels_);
  free_labels_.clear();
  for (Symbol l : labels_)
    if (l != sym::top() && l != sym::top_prime()) free_labels_.push_back(l);
  word_set_ = {words_.begin(), words_.end()};
  tag_set_ = {tags_.begin(), tags_.end()};
  label_set_ = {labels_.begin(), labels_.end()};
}

Symbol Vocabularies::map_word(Symbol word) const {
  return word_set_.contains(word) ? word : sym::unknown();
}

void Vocabularies::require_tag(Symbol tag) const {
  if (!has_tag(tag)) throw std::out_of_range("POS tag '" + str(tag) + "' not in closed vocabulary");
}

void Vocabularies::require_label(Symbol label) const {
  if (!has_label(label))
    throw std::out_of_range("non-terminal '" + str(label) + "' not in closed vocabulary");
}

void Vocabularies::save(std::ostream& out) const {
  out << "slm-vocab 1\n";
  auto section = [&](const char* name, const std::vector<Symbol>& list) {
    out << name << ' ' << list.size() << '\n';
    for (Symbol s : list) out << str(s) << '\n';
  };
  section("words", words_);
  section("tags", tags_);
  section("labels", labels_);
}

Vocabularies Vocabularies::load(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "slm-vocab" || version != 1)
    throw ConfigError("not a vocabulary file (expected 'slm-vocab 1')");
  auto section = [&](const char* name) {
    std::string header;
    std::size_t n = 0;
    if (!(in >> header >> n) || header != name)
      throw ConfigError(std::string("vocabulary file: expected section '") + name + "'");
    std::vector<Symbol> list;
    list.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::string s;
      if (!(in >> s)) throw ConfigError("vocabulary file truncated");
      list.push_back(intern(s));
    }
    return list;
  };
  Vocabularies v;
  v.words_ = section("words");
  v.tags_ = section("tags");
  v.labels_ = section("labels");
  v.finish();
  return v;
}

std::string Vocabularies::hash() const {
  std::ostringstream out;
  save(out);
  return hex64(fnv1a(out.str()));
}

HeadedTree map_words(const HeadedTree& tree, const Vocabularies& vocab) {
  HeadedTree node = tree;
  node.word = vocab.map_word(tree.word);
  for (auto& child : node.children) child = map_words(child, vocab);
  return node;
}

std::vector<HeadedTree> flat_leaves(const HeadedTree& tree, Symbol merged_tag) {
  std::vector<HeadedTree> leaves;
  for (Symbol w : leaf_words(tree)) {
    HeadedTree leaf;
    leaf.label = merged_tag;
    leaf.tag = merged_tag;
    leaf.word = w;
    leaves.push_back(leaf);
  }
  return leaves;
}

}  // namespace slm
