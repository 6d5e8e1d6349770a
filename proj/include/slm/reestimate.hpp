// Initial training from treebank derivations and the N-best re-estimation
// loop. Counts are the only parameters that change between iterations; the
// interpolation weights and their count-range buckets stay frozen at E0.

#ifndef SLM_REESTIMATE_HPP
#define SLM_REESTIMATE_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slm/decoder.hpp"
#include "slm/evalppl.hpp"
#include "slm/probmodel.hpp"

namespace slm {

struct TrainingOptions {
  ContextSchema word_schema = ContextSchema::word_full();
  ContextSchema tagger_schema = ContextSchema::tagger();
  ContextSchema parser_schema = ContextSchema::parser();
  ConstraintLayer constraints;
  LambdaFitOptions lambda_fit;
  int doublings = 12;
};

struct TrainingState {
  int iteration = 0;
  Vocabularies vocab;
  ComponentModel word, tagger, parser;
  ComponentModel trigram;  // baseline, trained once on the dev words
  ConstraintLayer constraints;

  StructuredModel structured() const;
};

struct InitialReport {
  std::size_t dev_sentences = 0;
  std::size_t check_sentences = 0;
  std::size_t check_skipped = 0;  // tags or labels outside the vocabulary
  LambdaFit word, tagger, parser, trigram;
};

// Maps words through the vocabulary and wraps the body in TOP/TOP'.
HeadedTree complete_parse(const HeadedTree& body, const Vocabularies& vocab);

struct ComponentTables {
  CountTable word, tagger, parser, trigram;
  explicit ComponentTables(const TrainingOptions& options);
  void add(const Derivation& d, double weight);
  void add_words(std::span<const Symbol> words, double weight);
};

// Trees are complete parses over vocabulary-mapped words.
TrainingState initial_training(std::span<const HeadedTree> dev, std::span<const HeadedTree> check,
                               const Vocabularies& vocab, const TrainingOptions& options = {},
                               InitialReport* report = nullptr);

struct IterationReport {
  int from = 0;
  std::size_t sentences = 0;
  std::vector<std::pair<std::size_t, std::string>> skipped;  // sentence index, reason
  std::vector<double> word_mass;                             // per sentence
  std::vector<double> phi_total;                             // per sentence
  PplReport dev_l2r, dev_sum;                                // of the input state
};

// `dev` holds word sequences only; trees are not consulted.
TrainingState reestimation_iteration(const TrainingState& state, std::span<const Sentence> dev,
                                     const SearchParams& params, int jobs = 1, IterationReport* report = nullptr);

struct NewEvent {
  Component component;
  Context context;  // highest order
  Symbol outcome;
};
std::vector<NewEvent> zero_to_nonzero_report(const TrainingState& before, const TrainingState& after);

// word.model, tagger.model, parser.model, trigram.model, vocab.txt
void save_state(const std::filesystem::path& dir, const TrainingState& state);
TrainingState load_state(const std::filesystem::path& dir, int iteration);

}  // namespace slm

#endif
