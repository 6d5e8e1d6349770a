// Synchronous multi-stack beam search over word-parse prefixes.
//
// Stacks are keyed by (k, p): words predicted and parser operations taken
// since the start of the sentence. Each extension cycle predicts w_(k+1),
// tags it, then expands parser actions stack by stack in increasing p until
// every surviving hypothesis has handed control back with null.

#ifndef SLM_DECODER_HPP
#define SLM_DECODER_HPP

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "slm/derivation.hpp"
#include "slm/probmodel.hpp"

namespace slm {

struct SearchParams {
  std::size_t depth = 10;
  double threshold = 6.91;  // nats below the stack best
  int max_ops = 0;          // parser operations per word position; 0: 2k+2
  std::size_t nbest = 10;
  // Expand only tags seen with the word in training.
  bool restrict_tags = true;
  // Keep every pruned (k, p) stack in the result (tests, lattice dumps).
  bool record_stacks = false;

  static SearchParams exhaustive() {
    SearchParams p;
    p.depth = std::numeric_limits<std::size_t>::max();
    p.threshold = std::numeric_limits<double>::infinity();
    p.nbest = std::numeric_limits<std::size_t>::max();
    return p;
  }
  void validate() const;  // throws ConfigError
};

struct Hypothesis;
using HypPtr = std::shared_ptr<const Hypothesis>;

struct Hypothesis {
  WordParsePrefix prefix;
  double logp = 0.0;
  int position_ops = 0;  // parser events since the last tag
  HypPtr parent;
  ElementaryEvent last;  // meaningless at the root

  Derivation derivation() const;
};

struct StackRecord {
  int k = 0;
  int p = 0;
  std::vector<HypPtr> hyps;  // best first
};

struct DecodeResult {
  // S_0 .. S_(n+1): null-terminated survivors after each cycle; the last
  // stage holds the complete parses.
  std::vector<std::vector<HypPtr>> stages;
  std::vector<HypPtr> nbest;  // best first
  // ln P(w_(k+1) | W_k) mixed over S_k, one per predicted token (</s> last).
  std::vector<double> l2r_logprob;
  std::vector<StackRecord> stacks;
};

// `words` excludes </s>, which is appended internally; vocabulary mapping is
// the caller's job.
DecodeResult decode(const StructuredModel& model, std::span<const Symbol> words, const SearchParams& params);

// Best first: higher logp, then the lexicographically smaller derivation.
bool hypothesis_before(const Hypothesis& a, const Hypothesis& b);

struct WeightedParse {
  HypPtr hyp;
  double phi = 0.0;
};

std::vector<double> normalized_weights(std::span<const double> logps);
std::vector<WeightedParse> nbest_with_phi(const DecodeResult& result);

// One line per hypothesis: k, parser ops p, score, derivation. Uses the
// recorded stacks when present, the stages otherwise.
void dump_lattice(std::ostream& out, const DecodeResult& result);
std::string compact_derivation(const Hypothesis& h);

}  // namespace slm

#endif
