// Shared fixtures and independent oracles for the test suites.

#ifndef SLM_TEST_SUPPORT_HPP
#define SLM_TEST_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "slm/decoder.hpp"
#include "slm/evalppl.hpp"
#include "slm/reestimate.hpp"

namespace slmtest {

using namespace slm;
namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(SLM_DATA_DIR); }

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<HeadedTree> prepared_toy(const std::string& name) {
  const auto heads = PercolationRuleSet::parse(read_file(data_dir() / "rules/heads.rules"));
  const auto schemes = BinarizationRuleSet::parse(read_file(data_dir() / "rules/binarize.rules"));
  std::vector<HeadedTree> out;
  for (const auto& raw : read_treebank(read_file(data_dir() / "toy" / (name + ".mrg"))))
    out.push_back(prepare_tree(raw, heads, schemes));
  return out;
}

inline std::vector<HeadedTree> completed(const std::vector<HeadedTree>& bodies, const Vocabularies& vocab) {
  std::vector<HeadedTree> out;
  for (const auto& b : bodies) out.push_back(complete_parse(b, vocab));
  return out;
}

inline std::vector<Sentence> sentences(const std::vector<HeadedTree>& bodies) {
  std::vector<Sentence> out;
  for (const auto& b : bodies) out.push_back(leaf_words(b));
  return out;
}

struct Toy {
  std::vector<HeadedTree> train, check, test;
  Vocabularies vocab;
  TrainingState e0;
};

// The bundled toy corpus trained to E0 (built once per process).
inline const Toy& toy() {
  static const Toy t = [] {
    Toy t;
    t.train = prepared_toy("train");
    t.check = prepared_toy("check");
    t.test = prepared_toy("test");
    t.vocab = Vocabularies::build(t.train, 10000);
    t.e0 = initial_training(completed(t.train, t.vocab), completed(t.check, t.vocab), t.vocab);
    return t;
  }();
  return t;
}

inline std::vector<HeadedTree> headed(const std::string& text) { return read_headed_treebank(text); }

// Small hand-written treebank: words a b c, tags P Q, labels A B.
inline const char* kTinyTwoLabel = R"(
(A@0 (P a) (B@1 (Q b) (P c)))
(B@1 (P a) (Q b))
(A@1 (A@0 (P c) (Q a)) (Q b))
(P a)
(B@0 (Q c) (A@1 (P a) (P b)))
(A@0 (Q b) (Q b))
(B@1 (B@1 (P a) (P c)) (Q a))
)";

inline TrainingState train_tiny(const char* text, const TrainingOptions& options = {}) {
  const auto bodies = headed(text);
  const Vocabularies vocab = Vocabularies::build(bodies, 100);
  const auto trees = completed(bodies, vocab);
  return initial_training(trees, trees, vocab, options);
}

// ---------------------------------------------------------------------------
// Brute-force oracle: depth-first search over every legal action sequence,
// scoring with the masked component models. No stacks, no pruning, no cap.

struct Enumerated {
  std::string derivation;
  double logp;
};

inline void enumerate_derivations(const StructuredModel& model, const std::vector<Symbol>& words,
                                  const std::vector<Symbol>& tags, std::vector<Enumerated>& out) {
  std::vector<Symbol> seq = words;
  seq.push_back(sym::sentence_end());
  Derivation d;
  std::function<void(const WordParsePrefix&, double, std::size_t)> visit = [&](const WordParsePrefix& p, double lp,
                                                                               std::size_t k) {
    switch (p.phase()) {
      case WordParsePrefix::Phase::Complete: out.push_back({d.serialize(), lp}); return;
      case WordParsePrefix::Phase::Word: {
        const Symbol w = seq[k];
        d.events.push_back({Component::Word, w, p.head_context()});
        visit(p.predict(w), lp + std::log(model.word_probability(p, w)), k + 1);
        d.events.pop_back();
        return;
      }
      case WordParsePrefix::Phase::Tag: {
        const Symbol w = p.pending_word();
        const std::vector<Symbol> options = w == sym::sentence_end() ? std::vector<Symbol>{sym::tag_end()} : tags;
        for (Symbol t : options) {
          const double pt = model.tag_probability(p, w, t);
          if (pt <= 0.0) continue;
          d.events.push_back({Component::Tagger, t, p.tag_context(w)});
          visit(p.tag(t), lp + std::log(pt), k);
          d.events.pop_back();
        }
        return;
      }
      case WordParsePrefix::Phase::Parser:
        for (const auto& [a, pa] : model.parser_distribution(p)) {
          if (pa <= 0.0) continue;
          d.events.push_back({Component::Parser, a.symbol(), p.head_context()});
          visit(p.apply(a), lp + std::log(pa), k);
          d.events.pop_back();
        }
        return;
    }
  };
  visit(WordParsePrefix::initial(), 0.0, 0);
}

// ---------------------------------------------------------------------------
// Tree oracle: every complete parse written down directly as a tree, with no
// reference to parser actions. A body is a sequence of binary subtrees over
// consecutive words; a leaf may carry one unary node; internal nodes take any
// free label and either head direction. The body is wrapped in the TOP'
// spine ending in </s> and topped by TOP over <s>.

inline HeadedTree oracle_leaf(Symbol word, Symbol tag) {
  HeadedTree t;
  t.label = tag;
  t.word = word;
  t.tag = tag;
  return t;
}

inline HeadedTree oracle_node(Symbol label, std::vector<HeadedTree> children, int head) {
  HeadedTree t;
  t.label = label;
  t.word = children[static_cast<std::size_t>(head)].word;
  t.tag = children[static_cast<std::size_t>(head)].tag;
  t.head_child = head;
  t.children = std::move(children);
  return t;
}

inline std::vector<std::string> oracle_parses(const std::vector<Symbol>& words, const std::vector<Symbol>& tags,
                                              const std::vector<Symbol>& labels) {
  const std::size_t n = words.size();
  // subtrees[i][j]: trees over words i..j
  std::vector<std::vector<std::vector<HeadedTree>>> sub(n, std::vector<std::vector<HeadedTree>>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (Symbol t : tags) {
      HeadedTree leaf = oracle_leaf(words[i], t);
      sub[i][i].push_back(leaf);
      for (Symbol l : labels) sub[i][i].push_back(oracle_node(l, {leaf}, 0));
    }
  for (std::size_t len = 2; len <= n; ++len)
    for (std::size_t i = 0; i + len <= n; ++i) {
      const std::size_t j = i + len - 1;
      for (std::size_t k = i; k < j; ++k)
        for (const auto& left : sub[i][k])
          for (const auto& right : sub[k + 1][j])
            for (Symbol l : labels)
              for (int head : {0, 1}) sub[i][j].push_back(oracle_node(l, {left, right}, head));
    }
  const HeadedTree end = oracle_leaf(sym::sentence_end(), sym::tag_end());
  std::vector<std::string> out;
  // spine(i): TOP' chains over words i..n-1 followed by </s>
  std::function<void(std::size_t, std::vector<HeadedTree>&)> forests = [&](std::size_t i,
                                                                          std::vector<HeadedTree>& acc) {
    if (i == n) {
      HeadedTree spine = end;
      for (std::size_t f = acc.size(); f-- > 0;) spine = oracle_node(sym::top_prime(), {acc[f], spine}, 1);
      out.push_back(to_string(oracle_node(sym::top(), {oracle_leaf(sym::sentence_begin(), sym::tag_begin()), spine}, 1)));
      return;
    }
    for (std::size_t j = i; j < n; ++j)
      for (const auto& t : sub[i][j]) {
        acc.push_back(t);
        forests(j + 1, acc);
        acc.pop_back();
      }
  };
  std::vector<HeadedTree> acc;
  forests(0, acc);
  return out;
}

// All sentences of length 1..max_len over the alphabet.
inline std::vector<std::vector<Symbol>> all_sentences(const std::vector<Symbol>& alphabet, std::size_t max_len) {
  std::vector<std::vector<Symbol>> out, frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<Symbol>> next;
    for (const auto& s : frontier)
      for (Symbol a : alphabet) {
        auto t = s;
        t.push_back(a);
        next.push_back(t);
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

inline double log_sum(const std::vector<double>& v) {
  double best = -INFINITY;
  for (double x : v) best = std::max(best, x);
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - best);
  return best + std::log(acc);
}

// Replays a derivation through the masked models.
inline double replay_logprob(const StructuredModel& model, const Derivation& d) {
  WordParsePrefix p = WordParsePrefix::initial();
  double lp = 0.0;
  for (const auto& e : d.events) {
    lp += std::log(model.masked_probability(p, e));
    p = p.apply(e);
  }
  return lp;
}

}  // namespace slmtest

#endif
