#include "slm/derivation.hpp"

#include <sstream>

namespace slm {

const char* component_name(Component c) {
  switch (c) {
    case Component::Word: return "WORD";
    case Component::Tagger: return "TAGGER";
    case Component::Parser: return "PARSER";
    case Component::Trigram: return "TRIGRAM";
  }
  return "?";
}

Component component_from_name(const std::string& name) {
  if (name == "WORD") return Component::Word;
  if (name == "TAGGER") return Component::Tagger;
  if (name == "PARSER") return Component::Parser;
  if (name == "TRIGRAM") return Component::Trigram;
  throw std::invalid_argument("unknown component '" + name + "'");
}

std::string ParserAction::to_string() const {
  switch (kind) {
    case ActionKind::Null: return "null";
    case ActionKind::Unary: return "unary/" + str(label);
    case ActionKind::AdjoinLeft: return "adjoin-left/" + str(label);
    case ActionKind::AdjoinRight: return "adjoin-right/" + str(label);
  }
  return "?";
}

Symbol ParserAction::symbol() const { return intern(to_string()); }

ParserAction ParserAction::from_symbol(Symbol s) {
  const std::string& text = str(s);
  if (text == "null") return null();
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    const std::string kind = text.substr(0, slash);
    const Symbol label = intern(std::string_view(text).substr(slash + 1));
    if (kind == "unary") return unary(label);
    if (kind == "adjoin-left") return left(label);
    if (kind == "adjoin-right") return right(label);
  }
  throw std::invalid_argument("not a parser action: '" + text + "'");
}

std::string Derivation::serialize() const {
  std::string out;
  for (const auto& e : events) {
    out += component_name(e.component);
    out += '\t';
    out += str(e.outcome);
    for (std::size_t i = 0; i < e.context.size; ++i) {
      out += '\t';
      out += str(e.context.s[i]);
    }
    out += '\n';
  }
  return out;
}

Derivation Derivation::parse(const std::string& text) {
  Derivation d;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t begin = 0;
    while (true) {
      const auto tab = line.find('\t', begin);
      fields.push_back(line.substr(begin, tab - begin));
      if (tab == std::string::npos) break;
      begin = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 6)
      throw std::invalid_argument("malformed derivation line: " + line);
    ElementaryEvent e;
    e.component = component_from_name(fields[0]);
    e.outcome = intern(fields[1]);
    e.context.size = static_cast<std::uint8_t>(fields.size() - 2);
    for (std::size_t i = 2; i < fields.size(); ++i) e.context.s[i - 2] = intern(fields[i]);
    d.events.push_back(e);
  }
  return d;
}

// ---------------------------------------------------------------------------

WordParsePrefix WordParsePrefix::initial() {
  WordParsePrefix p;
  p.top_ = std::make_shared<const Cell>(Cell{{sym::sentence_begin(), sym::tag_begin(), true}, nullptr});
  p.head_count_ = 1;
  p.phase_ = Phase::Word;
  return p;
}

Head WordParsePrefix::h(std::size_t back) const {
  const Cell* cell = top_.get();
  for (std::size_t i = 0; cell && i < back; ++i) cell = cell->below.get();
  if (!cell) return {sym::sentence_begin(), sym::tag_begin(), true};
  return cell->head;
}

std::vector<Head> WordParsePrefix::heads() const {
  std::vector<Head> out;
  for (const Cell* cell = top_.get(); cell; cell = cell->below.get()) out.push_back(cell->head);
  return {out.rbegin(), out.rend()};
}

Context WordParsePrefix::head_context() const {
  const Head h0 = h(0), h1 = h(1);
  Context c;
  c.size = 4;
  c.s = {h0.tag, h0.word, h1.tag, h1.word};
  return c;
}

Context WordParsePrefix::tag_context(Symbol word) const {
  Context c;
  c.size = 3;
  c.s = {word, h(0).tag, h(1).tag, 0};
  return c;
}

WordParsePrefix WordParsePrefix::predict(Symbol word) const {
  if (phase_ != Phase::Word) throw ContractViolation("word prediction outside the predictor phase");
  if (word == sym::sentence_begin()) throw ContractViolation("<s> cannot be predicted");
  WordParsePrefix next = *this;
  next.pending_word_ = word;
  next.phase_ = Phase::Tag;
  return next;
}

WordParsePrefix WordParsePrefix::tag(Symbol pos) const {
  if (phase_ != Phase::Tag) throw ContractViolation("tagging outside the tagger phase");
  if ((pending_word_ == sym::sentence_end()) != (pos == sym::tag_end()))
    throw ContractViolation("</s> is tagged SE and only </s> is");
  if (pos == sym::tag_begin()) throw ContractViolation("SB is reserved for <s>");
  WordParsePrefix next = *this;
  next.top_ = std::make_shared<const Cell>(Cell{{pending_word_, pos, true}, top_});
  next.head_count_ = head_count_ + 1;
  next.words_ = words_ + 1;
  next.pending_word_ = 0;
  next.unary_taken_ = false;
  next.phase_ = Phase::Parser;
  return next;
}

WordParsePrefix WordParsePrefix::apply(const ParserAction& action) const {
  const LegalActions legal = legal_actions(*this);
  if (!legal.contains(action)) {
    std::string why;
    const Head h0 = h(0), h1 = h(1);
    if (legal.forced)
      why = "forced action is " + legal.forced->to_string();
    else if (action.kind == ActionKind::Unary && unary_taken_)
      why = "unary taken at most once per position";
    else if (action.kind == ActionKind::Unary && !h0.leaf)
      why = "unary requires h0 to be a leaf";
    else if (action.kind != ActionKind::Null && action.kind != ActionKind::Unary &&
             h1.word == sym::sentence_begin())
      why = "adjoining <s> is reserved for the final step";
    else
      why = "reserved label";
    throw ContractViolation("illegal parser action " + action.to_string() + ": " + why);
  }
  WordParsePrefix next = *this;
  next.parser_ops_ = parser_ops_ + 1;
  switch (action.kind) {
    case ActionKind::Null:
      next.unary_taken_ = false;
      next.phase_ = Phase::Word;
      break;
    case ActionKind::Unary: {
      Head head = top_->head;
      head.tag = action.label;
      head.leaf = false;
      next.top_ = std::make_shared<const Cell>(Cell{head, top_->below});
      next.unary_taken_ = true;
      break;
    }
    case ActionKind::AdjoinLeft:
    case ActionKind::AdjoinRight: {
      const Cell* right = top_.get();
      const Cell* left = right->below.get();
      const Head& from = action.kind == ActionKind::AdjoinLeft ? left->head : right->head;
      next.top_ = std::make_shared<const Cell>(Cell{{from.word, action.label, false}, left->below});
      next.head_count_ = head_count_ - 1;
      if (action.label == sym::top() && next.head_count_ == 1) next.phase_ = Phase::Complete;
      break;
    }
  }
  return next;
}

WordParsePrefix WordParsePrefix::apply(const ElementaryEvent& event) const {
  switch (event.component) {
    case Component::Word: return predict(event.outcome);
    case Component::Tagger: return tag(event.outcome);
    case Component::Parser: return apply(ParserAction::from_symbol(event.outcome));
    case Component::Trigram: break;
  }
  throw ContractViolation("trigram events cannot be replayed on a parse prefix");
}

// ---------------------------------------------------------------------------

bool LegalActions::contains(const ParserAction& action) const {
  if (forced) return action == *forced;
  const bool reserved = action.label == sym::top() || action.label == sym::top_prime();
  switch (action.kind) {
    case ActionKind::Null: return null;
    case ActionKind::Unary: return unary && !reserved;
    case ActionKind::AdjoinLeft:
    case ActionKind::AdjoinRight: return adjoin && !reserved;
  }
  return false;
}

std::vector<ParserAction> LegalActions::enumerate(const std::vector<Symbol>& labels) const {
  if (forced) return {*forced};
  std::vector<ParserAction> out;
  if (null) out.push_back(ParserAction::null());
  for (Symbol l : labels) {
    if (l == sym::top() || l == sym::top_prime()) continue;
    if (unary) out.push_back(ParserAction::unary(l));
    if (adjoin) {
      out.push_back(ParserAction::left(l));
      out.push_back(ParserAction::right(l));
    }
  }
  return out;
}

LegalActions legal_actions(const WordParsePrefix& prefix) {
  if (prefix.phase() != WordParsePrefix::Phase::Parser)
    throw ContractViolation("parser actions requested outside the parser phase");
  if (prefix.head_count() < 2) throw ContractViolation("parser phase with a single exposed head");
  const Head h0 = prefix.h(0), h1 = prefix.h(1);
  const bool after_start = h1.word == sym::sentence_begin() && prefix.head_count() == 2;
  LegalActions legal;
  if (h0.word == sym::sentence_end()) {
    if (h0.tag == sym::top_prime()) {
      legal.forced = after_start ? ParserAction::right(sym::top()) : ParserAction::right(sym::top_prime());
    } else {
      if (after_start) throw ContractViolation("empty sentence: </s> directly after <s>");
      legal.forced = ParserAction::right(sym::top_prime());
    }
    return legal;
  }
  legal.null = true;
  legal.unary = h0.leaf && !prefix.unary_taken();
  legal.adjoin = !after_start;
  return legal;
}

// ---------------------------------------------------------------------------

namespace {

HeadedTree leaf(Symbol word, Symbol tag) {
  HeadedTree t;
  t.label = tag;
  t.word = word;
  t.tag = tag;
  return t;
}

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

// Replays events on a prefix while building the corresponding tree.
class TreeBuilder {
public:
  TreeBuilder() : prefix_(WordParsePrefix::initial()) {
    stack_.push_back(leaf(sym::sentence_begin(), sym::tag_begin()));
  }

  const WordParsePrefix& prefix() const { return prefix_; }

  void step(Component component, Symbol outcome) {
    switch (component) {
      case Component::Word:
        prefix_ = prefix_.predict(outcome);
        break;
      case Component::Tagger:
        stack_.push_back(leaf(prefix_.pending_word(), outcome));
        prefix_ = prefix_.tag(outcome);
        break;
      case Component::Parser: {
        const ParserAction action = ParserAction::from_symbol(outcome);
        prefix_ = prefix_.apply(action);
        if (action.kind == ActionKind::Unary) {
          HeadedTree child = std::move(stack_.back());
          stack_.back() = HeadedTree{};
          HeadedTree& node = stack_.back();
          node.label = action.label;
          node.word = child.word;
          node.tag = child.tag;
          node.head_child = 0;
          node.children.push_back(std::move(child));
        } else if (action.kind != ActionKind::Null) {
          HeadedTree right = std::move(stack_.back());
          stack_.pop_back();
          HeadedTree left = std::move(stack_.back());
          stack_.back() = join(action.label, std::move(left), std::move(right),
                               action.kind == ActionKind::AdjoinLeft ? 0 : 1);
        }
        break;
      }
      case Component::Trigram:
        throw ContractViolation("trigram events cannot be replayed on a parse prefix");
    }
  }

  HeadedTree finish() {
    if (prefix_.phase() != WordParsePrefix::Phase::Complete || stack_.size() != 1)
      throw ContractViolation("incomplete derivation");
    HeadedTree tree = std::move(stack_.front());
    validate(tree);
    return tree;
  }

private:
  WordParsePrefix prefix_;
  std::vector<HeadedTree> stack_;
};

struct Step {
  Component component;
  Symbol outcome;
};

void emit(const HeadedTree& node, bool& first_word, std::vector<Step>& steps) {
  if (node.is_leaf()) {
    if (!first_word) steps.push_back({Component::Parser, ParserAction::null().symbol()});
    first_word = false;
    steps.push_back({Component::Word, node.word});
    steps.push_back({Component::Tagger, node.tag});
    return;
  }
  if (node.children.size() == 1) {
    emit(node.children.front(), first_word, steps);
    steps.push_back({Component::Parser, ParserAction::unary(node.label).symbol()});
    return;
  }
  if (node.children.size() != 2)
    throw StructureError("non-binary node " + str(node.label) + " in a complete parse");
  emit(node.children[0], first_word, steps);
  emit(node.children[1], first_word, steps);
  const ParserAction a = node.head_child == 0 ? ParserAction::left(node.label)
                                              : ParserAction::right(node.label);
  steps.push_back({Component::Parser, a.symbol()});
}

}  // namespace

HeadedTree make_complete_parse(std::vector<HeadedTree> body) {
  if (body.empty()) throw StructureError("empty sentence body");
  HeadedTree cur = leaf(sym::sentence_end(), sym::tag_end());
  for (auto it = body.rbegin(); it != body.rend(); ++it)
    cur = join(sym::top_prime(), std::move(*it), std::move(cur), 1);
  HeadedTree root = join(sym::top(), leaf(sym::sentence_begin(), sym::tag_begin()), std::move(cur), 1);
  validate(root);
  return root;
}

HeadedTree make_complete_parse(const HeadedTree& body) {
  return make_complete_parse(std::vector<HeadedTree>{body});
}

std::vector<HeadedTree> parse_body(const HeadedTree& complete) {
  if (complete.label != sym::top() || complete.children.size() != 2)
    throw StructureError("complete parse must be rooted at TOP with two children");
  std::vector<HeadedTree> body;
  const HeadedTree* cur = &complete.children[1];
  while (!cur->is_leaf()) {
    if (cur->label != sym::top_prime() || cur->children.size() != 2)
      throw StructureError("malformed TOP' spine");
    body.push_back(cur->children[0]);
    cur = &cur->children[1];
  }
  if (cur->word != sym::sentence_end()) throw StructureError("TOP' spine must end in </s>");
  return body;
}

Derivation tree_to_derivation(const HeadedTree& complete) {
  if (complete.label != sym::top() || complete.children.size() != 2 || complete.head_child != 1)
    throw StructureError("complete parse must be TOP(<s>, body) headed on the right");
  const HeadedTree& start = complete.children[0];
  if (!start.is_leaf() || start.word != sym::sentence_begin() || start.tag != sym::tag_begin())
    throw StructureError("complete parse must start with (<s>, SB)");
  const HeadedTree& body = complete.children[1];
  if (body.word != sym::sentence_end() || body.label != sym::top_prime())
    throw StructureError("(</s>, TOP') must head the sentence body");

  std::vector<Step> steps;
  bool first_word = true;
  emit(body, first_word, steps);
  steps.push_back({Component::Parser, ParserAction::right(sym::top()).symbol()});

  Derivation d;
  d.events.reserve(steps.size());
  TreeBuilder builder;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& prefix = builder.prefix();
    ElementaryEvent e;
    e.component = steps[i].component;
    e.outcome = steps[i].outcome;
    e.context = e.component == Component::Tagger ? prefix.tag_context(prefix.pending_word())
                                                  : prefix.head_context();
    try {
      builder.step(e.component, e.outcome);
    } catch (const ContractViolation& err) {
      throw StructureError("tree has no derivation (step " + std::to_string(i) + "): " + err.what());
    }
    d.events.push_back(e);
  }
  HeadedTree rebuilt = builder.finish();
  HeadedTree expected = complete;
  validate(expected);
  if (!(rebuilt == expected))
    throw StructureError("tree violates the head-inheritance invariants of a complete parse");
  return d;
}

HeadedTree derivation_to_tree(const Derivation& derivation) {
  if (derivation.events.empty()) throw ContractViolation("incomplete derivation: no events");
  TreeBuilder builder;
  for (std::size_t i = 0; i < derivation.events.size(); ++i) {
    const auto& e = derivation.events[i];
    try {
      builder.step(e.component, e.outcome);
    } catch (const ContractViolation& err) {
      throw ContractViolation("replay error at event " + std::to_string(i) + ": " + err.what());
    }
  }
  return builder.finish();
}

}  // namespace slm
