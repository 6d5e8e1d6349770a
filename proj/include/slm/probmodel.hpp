// Count-based conditional models smoothed by recursive deleted
// interpolation:
//
//   P(y | x1..xn) = lambda(x1..xn) * P(y | x1..x(n-1))
//                 + (1 - lambda(x1..xn)) * f_n(y | x1..xn)
//
// grounded at the uniform distribution over the outcome vocabulary. The
// lambdas are tied by the range of the context count C(x1..xn); an unseen
// context always has lambda = 1.

#ifndef SLM_PROBMODEL_HPP
#define SLM_PROBMODEL_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slm/corpus.hpp"
#include "slm/derivation.hpp"

namespace slm {

// Which slots of an event's full context feed a model, in back-off order.
struct ContextSchema {
  std::vector<std::uint8_t> slots;

  Context project(const Context& full) const;
  std::size_t max_order() const { return slots.size(); }
  bool operator==(const ContextSchema&) const = default;

  static ContextSchema word_full() { return {{0, 1, 2, 3}}; }     // h0.tag h0.word h-1.tag h-1.word
  static ContextSchema headwords_only() { return {{1, 3}}; }      // h0.word h-1.word
  static ContextSchema tagger() { return {{0, 1, 2}}; }           // word h0.tag h-1.tag
  static ContextSchema parser() { return {{0, 1, 2, 3}}; }
  static ContextSchema trigram() { return {{0, 1}}; }             // w-1 w-2
};

class CountTable {
public:
  struct Entry {
    double total = 0.0;
    std::unordered_map<Symbol, double> outcomes;
  };
  using OrderMap = std::unordered_map<Context, Entry, ContextHash>;

  CountTable() = default;
  CountTable(Component component, ContextSchema schema);

  Component component() const { return component_; }
  const ContextSchema& schema() const { return schema_; }
  std::size_t max_order() const { return schema_.max_order(); }

  // Adds `weight` at every order 0..N of the event's projected context.
  void accumulate(const ElementaryEvent& event, double weight);
  void accumulate(const Context& projected, Symbol outcome, double weight);
  void merge(const CountTable& other);
  // Adds to one order only; used when reloading a table stored per order.
  void add_at_order(const Context& truncated, Symbol outcome, double weight);

  double count(const Context& projected, Symbol outcome) const;
  double marginal(const Context& projected) const;
  const OrderMap& order(std::size_t n) const { return orders_.at(n); }
  double total() const;
  bool empty() const;
  bool operator==(const CountTable& other) const;

private:
  Component component_ = Component::Word;
  ContextSchema schema_;
  std::vector<OrderMap> orders_;
};

CountTable merge_counts(const CountTable& a, const CountTable& b);

// Count-range buckets: {0}, (0, b1), [b1, b2), ..., [b_last, inf).
class InterpolationWeights {
public:
  InterpolationWeights() = default;
  InterpolationWeights(std::size_t max_order, std::vector<double> upper_bounds, double initial = 0.5);
  // {0}, (0,2), [2,4), ..., [2^12, inf)
  static InterpolationWeights geometric(std::size_t max_order, int doublings = 12, double initial = 0.5);

  std::size_t bucket(double context_count) const;
  std::size_t bucket_count() const { return upper_bounds_.size() + 2; }
  std::size_t max_order() const { return lambdas_.empty() ? 0 : lambdas_.size() - 1; }
  double lambda(std::size_t order, double context_count) const;
  double& at(std::size_t order, std::size_t bucket) { return lambdas_.at(order).at(bucket); }
  double at(std::size_t order, std::size_t bucket) const { return lambdas_.at(order).at(bucket); }
  const std::vector<double>& upper_bounds() const { return upper_bounds_; }
  bool operator==(const InterpolationWeights&) const = default;

private:
  std::vector<double> upper_bounds_;
  std::vector<std::vector<double>> lambdas_;  // [order][bucket]
};

class ComponentModel {
public:
  ComponentModel() = default;
  ComponentModel(Component component, std::vector<Symbol> outcomes, CountTable counts,
                 InterpolationWeights weights);

  Component component() const { return component_; }
  const ContextSchema& schema() const { return counts_.schema(); }
  std::size_t max_order() const { return counts_.max_order(); }
  const std::vector<Symbol>& outcomes() const { return outcomes_; }
  const CountTable& counts() const { return counts_; }
  const InterpolationWeights& weights() const { return weights_; }

  std::size_t outcome_index(Symbol y) const;  // throws std::out_of_range
  bool has_outcome(Symbol y) const { return index_of_.contains(y); }

  // `full` is the event's full context; the schema projects it.
  double probability(Symbol y, const Context& full) const;
  double probability_projected(Symbol y, const Context& projected) const;
  // Dense distribution in outcome-index order.
  void distribution(const Context& full, std::vector<double>& out) const;
  // Outcomes with nonzero count under a projected context of any order.
  std::vector<Symbol> seen_outcomes(const Context& projected) const;
  // f_n and C(x_n) for each order of a projected context (diagnostics, EM).
  double relative_frequency(Symbol y, const Context& projected) const;

private:
  struct Compiled {
    double total = 0.0;
    double lambda = 1.0;
    std::vector<std::pair<std::uint32_t, double>> outcomes;  // sorted by index
  };

  void compile();
  const Compiled* lookup(const Context& projected) const;

  Component component_ = Component::Word;
  std::vector<Symbol> outcomes_;
  std::unordered_map<Symbol, std::uint32_t> index_of_;
  CountTable counts_;
  InterpolationWeights weights_;
  std::vector<std::unordered_map<Context, Compiled, ContextHash>> compiled_;
};

struct LambdaFitOptions {
  int max_iterations = 100;
  // Convergence: change of mean per-event log-likelihood below this.
  double tolerance = 1e-8;
  // Lower bound on every lambda, keeping the uniform grounding alive.
  double min_lambda = 1e-4;
};

struct LambdaFit {
  InterpolationWeights weights;
  std::vector<double> log_likelihood;  // before each update, then the final value
  int iterations = 0;
  bool converged = false;
};

// Maximizes the held-out log-likelihood of the interpolation recursion on
// counts gathered with the same schema: each iteration is an EM update over
// the mixture responsibilities followed by exact per-bucket line searches.
// Buckets that receive no held-out mass keep their starting value.
LambdaFit estimate_lambdas(const ComponentModel& model, const CountTable& check_counts,
                           const LambdaFitOptions& options = {});
double check_log_likelihood(const ComponentModel& model, const CountTable& check_counts);

// The zero/one overrides on top of the smoothed component models.
struct ConstraintLayer {
  // Floor on P(</s> | context) so generation halts with probability one.
  double epsilon = 1e-6;
  // Degenerate parser: take null whenever it is legal.
  bool null_only = false;
};

// The three component models with the legality masks applied.
class StructuredModel {
public:
  StructuredModel() = default;
  StructuredModel(Vocabularies vocab, ComponentModel word, ComponentModel tagger,
                  ComponentModel parser, ConstraintLayer constraints = {});

  const Vocabularies& vocab() const { return vocab_; }
  const ComponentModel& word_model() const { return word_; }
  const ComponentModel& tagger_model() const { return tagger_; }
  const ComponentModel& parser_model() const { return parser_; }
  const ConstraintLayer& constraints() const { return constraints_; }

  double word_probability(const WordParsePrefix& prefix, Symbol word) const;
  // Over the legal tags for `word`, summing to one.
  std::vector<std::pair<Symbol, double>> tag_distribution(const WordParsePrefix& prefix, Symbol word) const;
  double tag_probability(const WordParsePrefix& prefix, Symbol word, Symbol tag) const;
  // Tags worth expanding: those seen with the word in training, or every
  // legal tag for a word never seen.
  std::vector<Symbol> tag_candidates(Symbol word) const;
  // Over the legal actions at `prefix`, summing to one.
  std::vector<std::pair<ParserAction, double>> parser_distribution(const WordParsePrefix& prefix) const;
  double parser_probability(const WordParsePrefix& prefix, const ParserAction& action) const;

  // Dispatches on the event's component; the prefix must be the state the
  // event is taken in.
  double masked_probability(const WordParsePrefix& prefix, const ElementaryEvent& event) const;

private:
  struct LabelOps {
    Symbol label;
    std::uint32_t unary, left, right;
  };

  Vocabularies vocab_;
  ComponentModel word_, tagger_, parser_;
  ConstraintLayer constraints_;
  std::uint32_t null_index_ = 0;
  std::vector<LabelOps> label_ops_;
};

// Outcome vocabularies of the components.
std::vector<Symbol> word_outcomes(const Vocabularies& vocab);
std::vector<Symbol> tag_outcomes(const Vocabularies& vocab);
std::vector<Symbol> parser_outcomes(const Vocabularies& vocab);

// Trigram baseline events for one sentence (</s> appended, <s> padding):
// outcome w_k with context (w_(k-1), w_(k-2)).
std::vector<ElementaryEvent> trigram_events(std::span<const Symbol> words);
double trigram_probability(const ComponentModel& model, Symbol w, Symbol w1, Symbol w2);

// Versioned text format; counts and lambdas printed with 17 significant
// digits so a save/load/save cycle is byte-identical.
void save_model(std::ostream& out, const ComponentModel& model, double epsilon);
ComponentModel load_model(std::istream& in, double* epsilon = nullptr);

std::string format_double(double value);

}  // namespace slm

#endif
