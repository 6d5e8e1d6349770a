// Word-level perplexity of the structured model: causal left-to-right
// mixing over S_k, the N-best sum, the single-best-parse diagnostic, the
// trigram baseline and the linear mix of the trigram with L2R.

#ifndef SLM_EVALPPL_HPP
#define SLM_EVALPPL_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "slm/decoder.hpp"
#include "slm/probmodel.hpp"

namespace slm {

using Sentence = std::vector<Symbol>;

enum class PplMode { L2R, Sum, Viterbi, Trigram, Interpolated };
const char* mode_name(PplMode mode);
PplMode mode_from_name(const std::string& name);  // throws ConfigError

// Per-token natural-log scores of one sentence (</s> last).
struct SentenceTrace {
  std::size_t tokens = 0;
  std::size_t oov = 0;
  std::vector<double> l2r;
  std::vector<double> viterbi;
  std::vector<double> trigram;
  double sum = 0.0;  // ln sum of P(W,T) over the N-best
};

struct SentenceScore {
  std::size_t tokens = 0;
  double logprob = 0.0;
};

struct PplReport {
  std::string metric;
  bool causal = true;
  double lambda = 0.0;  // interpolation only
  std::size_t sentences = 0;
  std::size_t tokens = 0;  // </s> included, <s> excluded
  std::size_t oov = 0;     // scored as <unk>
  double logprob = 0.0;    // nats
  std::vector<SentenceScore> per_sentence;

  double perplexity() const;
  void print_table(std::ostream& out) const;
  // `metric TAB value` lines.
  void print_machine(std::ostream& out) const;
  static PplReport parse_machine(std::istream& in);
};

// sum over S_k of rho * P(w | prefix), rho normalized from the scores.
double l2r_word_prob(const StructuredModel& model, std::span<const HypPtr> stage, Symbol word);

// Maps words through the vocabulary and decodes each sentence. Either model
// may be null to skip its scores. Decoder errors are rethrown with the
// sentence index.
std::vector<SentenceTrace> trace_corpus(const StructuredModel* model, const ComponentModel* trigram,
                                        const Vocabularies& vocab, std::span<const Sentence> corpus, const SearchParams& params,
                                        int jobs = 1);
SentenceTrace trace_sentence(const StructuredModel* model, const ComponentModel* trigram, const Vocabularies& vocab,
                             const Sentence& words, const SearchParams& params);

PplReport make_report(std::span<const SentenceTrace> traces, PplMode mode, double lambda = 0.0);

PplReport l2r_ppl(const StructuredModel& model, std::span<const Sentence> corpus, const SearchParams& params,
                  int jobs = 1);
PplReport sum_ppl(const StructuredModel& model, std::span<const Sentence> corpus, const SearchParams& params,
                  int jobs = 1);
PplReport viterbi_ppl_diagnostic(const StructuredModel& model, std::span<const Sentence> corpus,
                                 const SearchParams& params, int jobs = 1);
PplReport trigram_ppl(const ComponentModel& trigram, const Vocabularies& vocab, std::span<const Sentence> corpus);
PplReport interpolated_ppl(const StructuredModel& model, const ComponentModel& trigram,
                           std::span<const Sentence> corpus, double lambda, const SearchParams& params,
                           int jobs = 1);

// Maximum-likelihood trigram weight of the mix on held-out traces.
double estimate_mix_lambda(std::span<const SentenceTrace> traces);

}  // namespace slm

#endif
